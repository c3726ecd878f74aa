#pragma once

// Area anomaly: auction-style Market-Clustering of scored impurities, the
// parametric price function that drives it, the cluster measure
//
//   am(c) = sum_{i in c} score(i) * area(i)^2  *  diameter(c)  *  |c|
//
// and cross-scan ranking into deciles.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "ingestion.hpp"
#include "log.hpp"
#include "parallel.hpp"

namespace anomet {

enum class DistanceNormalizer { image_diagonal, none };

struct PriceParams {
    double c1 = 1.7;
    std::array<double, 4> c2{0.95, 0.95, 0.95, 0.95};
    std::array<double, 2> c3{0.5, 0.5};
    double c4 = 1.6;
    std::array<double, 2> c5{0.05, 0.05};
    double c6 = 2.5;
    double c7 = 8.0;
    DistanceNormalizer distance_normalizer = DistanceNormalizer::image_diagonal;
    double wallet_scale = 1.0;  // F(x) = wallet_scale * x

    void validate() const {
        auto finite = [](double v) { return std::isfinite(v); };
        bool ok = finite(c1) && finite(c4) && finite(c6) && finite(c7) && finite(wallet_scale) && wallet_scale >= 0.0;
        for (double v : c2) ok = ok && v > 0.0 && v <= 1.0;
        for (double v : c3) ok = ok && finite(v);
        for (double v : c5) ok = ok && finite(v);
        if (!ok) throw InvalidInput("price parameters must be finite, with c2 values in (0,1] and wallet scale >= 0");
    }
};

/// Price of adding `o` to a cluster through member `i`.
///
/// `normalized_distance` is the rectangle distance after the configured
/// normalizer; `o_is_core` selects the discounted core price.
inline double price_from(double s_i, double s_o, double normalized_distance, bool o_is_core, const PriceParams& p) {
    const double d = std::pow(std::exp(std::sqrt(normalized_distance)), p.c1);
    const double s = std::pow(1.0 - std::pow(s_i * p.c2[0], p.c3[0]) * std::pow(s_o * p.c2[1], p.c3[1]), p.c4);
    double price = d * s;
    if (o_is_core) {
        const double dis = std::pow(1.0 - std::pow(s_i * p.c2[2], p.c5[0]) * std::pow(s_o * p.c2[3], p.c5[1]), p.c6);
        const double pen = std::pow(2.0 - std::abs(s_i - s_o), p.c7);
        price = price * dis * pen;
    }
    return price;
}

inline double distance_scale(const Scan& scan, DistanceNormalizer n) {
    if (n == DistanceNormalizer::none) return 1.0;
    const double diag = std::sqrt(double(scan.width) * scan.width + double(scan.height) * scan.height);
    return diag > 0.0 ? diag : 1.0;
}

/// An anomalous area: founding core impurities, all member impurities, and
/// the remaining purchasing budget.
struct Cluster {
    std::vector<int> cores;
    std::vector<int> members;
    double wallet = 0.0;
    double am = 0.0;

    int lead() const { return *std::min_element(cores.begin(), cores.end()); }
    bool contains(int id) const { return std::find(members.begin(), members.end(), id) != members.end(); }
    bool has_core(int id) const { return std::find(cores.begin(), cores.end(), id) != cores.end(); }
};

/// Highest bid placed on each impurity (the bidder's wallet at bid time).
using BidLedger = std::map<int, double>;

inline double price(int i, int o, const Scan& scan, std::span<const double> scores, const std::vector<Cluster>& clusters,
                    const PriceParams& params) {
    if (i == o) throw InvalidInput("price: i and o must differ");
    const auto n = static_cast<int>(scores.size());
    if (i < 0 || o < 0 || i >= n || o >= n || std::size_t(n) != scan.size())
        throw InvalidInput("price: unscored impurity referenced");
    const double dn = rect_distance(scan.impurities[i].rect, scan.impurities[o].rect) /
                      distance_scale(scan, params.distance_normalizer);
    const bool core = std::any_of(clusters.begin(), clusters.end(), [&](const Cluster& c) { return c.has_core(o); });
    return price_from(scores[i], scores[o], dn, core, params);
}

/// k singleton clusters seeded with the k highest scores (ties: lower id
/// first), each with wallet F(score).
inline std::vector<Cluster> init_clusters(int k, std::span<const double> scores, const PriceParams& params = {}) {
    if (k <= 0) throw InvalidInput("init_clusters: k must be positive");
    if (scores.empty()) throw InvalidInput("init_clusters: no scores");
    std::size_t kk = std::size_t(k);
    if (kk > scores.size()) {
        warn("cluster count k=" + std::to_string(k) + " exceeds impurity count, using " + std::to_string(scores.size()));
        kk = scores.size();
    }
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });

    std::vector<Cluster> clusters;
    for (std::size_t n = 0; n < kk; ++n) {
        const int core = order[n];
        clusters.push_back({{core}, {core}, params.wallet_scale * scores[core], 0.0});
    }
    return clusters;
}

enum class Convergence {
    literal,          // stop after a full pass without a merge
    no_state_change,  // stop after a full pass without a merge or purchase
};

struct ClusteringOptions {
    int k = 10;
    std::size_t pass_budget = 100000;
    Convergence convergence = Convergence::literal;
    unsigned workers = 1;  // couple pricing only; results do not depend on it
};

struct TraceEvent {
    enum class Kind { outbid, merge, purchase, insufficient, no_candidate };
    Kind kind;
    std::size_t pass;
    int cluster;  // lead core of the acting cluster
    int i = -1;
    int o = -1;
    double price = 0.0;
    double wallet_before = 0.0;
    double wallet_after = 0.0;
    double bid = 0.0;   // standing bid (outbid) or bid placed (merge, purchase)
    int absorbed = -1;  // lead core of the cluster absorbed by a merge
};

struct ClusteringResult {
    std::vector<Cluster> clusters;
    BidLedger ledger;
    std::vector<TraceEvent> trace;
    std::size_t passes = 0;
};

namespace detail {

struct Couple {
    double price;
    int i;
    int o;
};

inline bool cheaper(const Couple& a, const Couple& b) {
    if (a.price != b.price) return a.price < b.price;
    if (a.i != b.i) return a.i < b.i;
    return a.o < b.o;
}

} // namespace detail

/// Market-Clustering. Clusters take turns in descending wallet order; each
/// picks the cheapest couple (i inside, o outside) whose target it is not
/// outbid on, then merges with o's cluster when o is a core or buys o when the
/// wallet covers the price. A merge restarts the pass. Sequential and
/// deterministic.
inline ClusteringResult market_clustering(const Scan& scan, std::span<const double> scores, const PriceParams& params,
                                          const ClusteringOptions& opt) {
    params.validate();
    const std::size_t n = scan.size();
    if (scores.size() != n)
        throw InvalidInput("market_clustering: " + std::to_string(scores.size()) + " scores for " +
                           std::to_string(n) + " impurities in scan '" + scan.scan_id + "'");
    for (double s : scores)
        if (!std::isfinite(s)) throw InvalidInput("market_clustering: unscored impurity referenced");

    ClusteringResult res;
    res.clusters = init_clusters(opt.k, scores, params);
    const double scale = distance_scale(scan, params.distance_normalizer);

    std::vector<char> is_core(n, 0);
    for (const auto& c : res.clusters) is_core[std::size_t(c.cores.front())] = 1;

    std::vector<detail::Couple> best(n);
    std::vector<char> inside(n, 0);

    while (true) {
        if (++res.passes > opt.pass_budget)
            throw InvalidInput("market_clustering: no convergence within " + std::to_string(opt.pass_budget) +
                               " passes on scan '" + scan.scan_id + "'");
        std::stable_sort(res.clusters.begin(), res.clusters.end(), [](const Cluster& a, const Cluster& b) {
            if (a.wallet != b.wallet) return a.wallet > b.wallet;
            return a.lead() < b.lead();
        });

        bool merged = false;
        bool purchased = false;
        for (std::size_t ci = 0; ci < res.clusters.size() && !merged; ++ci) {
            Cluster& c = res.clusters[ci];
            std::fill(inside.begin(), inside.end(), 0);
            for (int m : c.members) inside[std::size_t(m)] = 1;

            parallel_for_chunks(n, opt.workers, [&](std::size_t begin, std::size_t end) {
                for (std::size_t o = begin; o < end; ++o) {
                    best[o] = {INFINITY, -1, int(o)};
                    if (inside[o]) continue;
                    for (int i : c.members) {
                        const double dn = rect_distance(scan.impurities[std::size_t(i)].rect, scan.impurities[o].rect) / scale;
                        detail::Couple cand{price_from(scores[std::size_t(i)], scores[o], dn, is_core[o] != 0, params), i,
                                            int(o)};
                        if (best[o].i < 0 || detail::cheaper(cand, best[o])) best[o] = cand;
                    }
                }
            });
            std::vector<detail::Couple> couples;
            for (std::size_t o = 0; o < n; ++o)
                if (!inside[o]) couples.push_back(best[o]);
            std::sort(couples.begin(), couples.end(), detail::cheaper);

            const int lead = c.lead();
            bool attempted = false;
            for (const auto& cp : couples) {
                auto bid = res.ledger.find(cp.o);
                if (bid != res.ledger.end() && c.wallet <= bid->second) {
                    res.trace.push_back({TraceEvent::Kind::outbid, res.passes, lead, cp.i, cp.o, cp.price, c.wallet,
                                         c.wallet, bid->second});
                    continue;
                }
                attempted = true;
                if (is_core[std::size_t(cp.o)]) {
                    auto other = std::find_if(res.clusters.begin(), res.clusters.end(),
                                              [&](const Cluster& x) { return x.has_core(cp.o); });
                    const double before = c.wallet;
                    res.ledger[cp.o] = before;
                    Cluster absorbed = std::move(*other);
                    Cluster& self = res.clusters[ci];
                    self.wallet += absorbed.wallet;
                    self.cores.insert(self.cores.end(), absorbed.cores.begin(), absorbed.cores.end());
                    self.members.insert(self.members.end(), absorbed.members.begin(), absorbed.members.end());
                    res.trace.push_back({TraceEvent::Kind::merge, res.passes, lead, cp.i, cp.o, cp.price, before,
                                         self.wallet, before, absorbed.lead()});
                    res.clusters.erase(other);
                    merged = true;
                } else if (c.wallet >= cp.price) {
                    const double before = c.wallet;
                    res.ledger[cp.o] = before;
                    c.wallet -= cp.price;
                    c.members.push_back(cp.o);
                    for (std::size_t other = 0; other < res.clusters.size(); ++other) {
                        if (other == ci) continue;
                        auto& m = res.clusters[other].members;
                        m.erase(std::remove(m.begin(), m.end(), cp.o), m.end());
                    }
                    res.trace.push_back({TraceEvent::Kind::purchase, res.passes, lead, cp.i, cp.o, cp.price, before,
                                         c.wallet, before});
                    purchased = true;
                } else {
                    res.trace.push_back({TraceEvent::Kind::insufficient, res.passes, lead, cp.i, cp.o, cp.price,
                                         c.wallet, c.wallet, 0.0});
                }
                break;
            }
            if (!attempted)
                res.trace.push_back({TraceEvent::Kind::no_candidate, res.passes, lead, -1, -1, 0.0, c.wallet, c.wallet,
                                     0.0});
        }
        if (merged) continue;
        if (opt.convergence == Convergence::literal || !purchased) break;
    }
    return res;
}

/// Spread of a cluster: the largest distance between member rectangle
/// centers, and never less than any member's own rectangle diagonal (so a
/// singleton measures its own extent).
inline double cluster_diameter(const Cluster& c, const Scan& scan) {
    if (c.members.empty()) throw InvalidInput("cluster_diameter: empty cluster");
    double d = 0.0;
    for (std::size_t a = 0; a < c.members.size(); ++a) {
        const auto& ra = scan.impurities.at(std::size_t(c.members[a])).rect;
        d = std::max(d, rect_diagonal(ra));
        for (std::size_t b = a + 1; b < c.members.size(); ++b)
            d = std::max(d, distance(rect_center(ra), rect_center(scan.impurities.at(std::size_t(c.members[b])).rect)));
    }
    return d;
}

/// am(c) = sum(score * area^2) * diameter * |members|. `area_scale`
/// multiplies every area (per-scan normalization for mixed resolutions).
inline double area_measure(const Cluster& c, std::span<const double> scores, const Scan& scan,
                           double area_scale = 1.0) {
    double sum = 0.0;
    for (int m : c.members) {
        const double a = double(scan.impurities.at(std::size_t(m)).area) * area_scale;
        sum += scores[std::size_t(m)] * a * a;
    }
    return sum * cluster_diameter(c, scan) * double(c.members.size());
}

struct ScanClusters {
    std::string scan_id;
    std::vector<Cluster> clusters;  // with `am` filled in
};

struct RankedCluster {
    std::string scan_id;
    std::size_t cluster_index = 0;
    Cluster cluster;
    double am = 0.0;
    std::size_t rank = 0;  // 1 = least anomalous, N = most anomalous
    int decile = 0;        // 1 = top tenth
};

/// Decile of rank r among n clusters: ceil(10 * (n - r + 1) / n). With fewer
/// than ten clusters each rank is its own bucket, counted from the top.
inline int decile_of(std::size_t rank, std::size_t n) {
    if (n == 0 || rank < 1 || rank > n) throw InvalidInput("decile_of: rank out of range");
    const std::size_t from_top = n - rank + 1;
    const std::size_t denom = std::max<std::size_t>(n, 10);
    return static_cast<int>((10 * from_top + denom - 1) / denom);
}

/// Global ascending ranking by am; ties by scan id then lead core.
inline std::vector<RankedCluster> rank_clusters(std::span<const ScanClusters> scans) {
    std::vector<RankedCluster> out;
    for (const auto& s : scans)
        for (std::size_t i = 0; i < s.clusters.size(); ++i)
            out.push_back({s.scan_id, i, s.clusters[i], s.clusters[i].am, 0, 0});
    if (out.empty()) throw InvalidInput("rank_clusters: no clusters");
    std::sort(out.begin(), out.end(), [](const RankedCluster& a, const RankedCluster& b) {
        if (a.am != b.am) return a.am < b.am;
        if (a.scan_id != b.scan_id) return a.scan_id < b.scan_id;
        return a.cluster.lead() < b.cluster.lead();
    });
    for (std::size_t r = 0; r < out.size(); ++r) {
        out[r].rank = r + 1;
        out[r].decile = decile_of(r + 1, out.size());
    }
    return out;
}

} // namespace anomet
