#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "ingestion.hpp"
#include "log.hpp"
#include "parallel.hpp"
#include "scores.hpp"

namespace anomet {

struct SpatialParams {
    int k = 50;         // rank of the weighted neighbour
    double c1 = 4.0;    // area-ratio exponent
    double c2 = 2.0;    // distance exponent
};

/// (Area(i) / Area(o))^c1 * rect_distance(i, o). Asymmetric: a big impurity
/// sees its small neighbours as far away.
inline double weighted_dist(const Impurity& i, const Impurity& o, double c1) {
    if (o.area <= 0) throw InvalidInput("weighted_dist: impurity " + std::to_string(o.id) + " has zero area");
    return std::pow(double(i.area) / double(o.area), c1) * rect_distance(i.rect, o.rect);
}

/// Raw Weighted-Kth-NN scores, Area(i) * l[k]^c2 where l[k] is the k-th
/// smallest weighted distance from i (1-indexed). k is clamped to n-1.
inline std::vector<double> spatial_raw_scores(const Scan& scan, const SpatialParams& params, unsigned workers = 1) {
    const std::size_t n = scan.size();
    if (n < 2)
        throw InvalidInput("spatial scores need at least 2 impurities; scan '" + scan.scan_id + "' has " +
                           std::to_string(n));
    if (params.k < 1) throw InvalidInput("spatial k must be >= 1");
    if (!std::isfinite(params.c1) || !std::isfinite(params.c2)) throw InvalidInput("spatial exponents must be finite");

    std::size_t k = static_cast<std::size_t>(params.k);
    if (k > n - 1) {
        warn("scan '" + scan.scan_id + "': k=" + std::to_string(k) + " exceeds n-1, using " + std::to_string(n - 1));
        k = n - 1;
    }

    std::vector<double> raw(n);
    parallel_for_chunks(n, workers, [&](std::size_t begin, std::size_t end) {
        std::vector<double> l;
        l.reserve(n - 1);
        for (std::size_t a = begin; a < end; ++a) {
            const Impurity& i = scan.impurities[a];
            l.clear();
            for (std::size_t b = 0; b < n; ++b)
                if (b != a) l.push_back(weighted_dist(i, scan.impurities[b], params.c1));
            std::nth_element(l.begin(), l.begin() + static_cast<std::ptrdiff_t>(k - 1), l.end());
            raw[a] = double(i.area) * std::pow(l[k - 1], params.c2);
        }
    });
    return raw;
}

/// Spatial channel of a ScoreSet: raw scores min-max normalized over the scan.
inline std::vector<double> spatial_scores(const Scan& scan, const SpatialParams& params, unsigned workers = 1) {
    auto raw = spatial_raw_scores(scan, params, workers);
    return min_max_normalize(raw);
}

} // namespace anomet
