#pragma once

#include <algorithm>
#include <span>
#include <vector>

namespace anomet {

/// Per-impurity anomaly scores of one scan, indexed by impurity id. Each
/// populated channel is min-max normalized to [0,1].
struct ScoreSet {
    std::vector<double> spatial;
    std::vector<double> shape;
    std::vector<double> combined;
};

/// (x - min) / (max - min); when every value is equal the result is all zeros.
inline std::vector<double> min_max_normalize(std::span<const double> values) {
    std::vector<double> out(values.size(), 0.0);
    if (values.empty()) return out;
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double min = *lo, max = *hi;
    if (!(max > min)) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - min) / (max - min);
    return out;
}

} // namespace anomet
