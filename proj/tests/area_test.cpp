#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <anomet/area.hpp>
#include <anomet/report.hpp>

#include "test_util.hpp"

using namespace anomet;

namespace {

Impurity box(std::int64_t area, BoundingRect r) {
    Impurity imp;
    imp.area = area;
    imp.rect = r;
    return imp;
}

Scan scan_of(int w, int h, std::vector<Impurity> imps) {
    Scan s{"t", w, h, std::move(imps)};
    for (std::size_t i = 0; i < s.size(); ++i) s.impurities[i].id = int(i);
    return s;
}

ClusteringOptions with_k(int k) {
    ClusteringOptions o;
    o.k = k;
    return o;
}

Scan fixture_scan() {
    return scan_of(200, 40,
                   {box(30, {4, 10, 8, 15}), box(35, {20, 10, 24, 16}), box(30, {178, 10, 183, 14}),
                    box(16, {188, 10, 191, 13})});
}

std::string read_fixture(const std::string& name) {
    std::ifstream is(std::string(ANOMET_FIXTURE_DIR) + "/" + name);
    EXPECT_TRUE(is.good()) << name;
    std::string line, out;
    while (std::getline(is, line))
        if (!line.empty() && line[0] != '#') out += line + "\n";
    return out;
}

std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

Scan random_scan(std::mt19937& rng, int n) {
    std::uniform_int_distribution<int> pos(0, 480), side(1, 14);
    std::vector<Impurity> imps;
    for (int i = 0; i < n; ++i) {
        const int x = pos(rng), y = pos(rng), w = side(rng), h = side(rng);
        imps.push_back(box(std::int64_t(w) * h, {x, y, x + w, y + h}));
    }
    return scan_of(500, 500, imps);
}

std::vector<double> random_scores(std::mt19937& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> s(n);
    for (auto& v : s) v = u(rng);
    return s;
}

} // namespace

// Expected values from an independent scalar calculator.
TEST(Price, Examples) {
    const PriceParams p;
    EXPECT_NEAR(price_from(0.0, 0.0, 0.25, false, p), 2.339646851925991, 1e-12);
    EXPECT_NEAR(price_from(1.0, 1.0, 0.0, false, p), 0.008286135043349966, 1e-15);
    const double core = price_from(1.0, 1.0, 0.0, true, p);
    EXPECT_NEAR(core / price_from(1.0, 1.0, 0.0, false, p), 0.0004793007285441438, 1e-15);
    EXPECT_NEAR(core, 0.008286135043349966 * 1.8722684708755617e-06 * 256.0, 1e-18);
}

TEST(Price, ThroughScanUsesNormalizedDistanceAndCoreStatus) {
    const Scan s = fixture_scan();
    const std::vector<double> scores{0.25, 0.25, 0.25, 0.5};
    const auto clusters = init_clusters(3, scores);
    EXPECT_NEAR(price(3, 2, s, scores, clusters, {}), 0.6779466665803247, 1e-12);
    EXPECT_NEAR(price(0, 3, s, scores, clusters, {}), 0.7751207095702163, 1e-12);
    EXPECT_NEAR(price(1, 3, s, scores, clusters, {}), 0.7208191660502621, 1e-12);
    EXPECT_THROW(price(1, 1, s, scores, clusters, {}), InvalidInput);
    EXPECT_THROW(price(1, 9, s, scores, clusters, {}), InvalidInput);

    PriceParams raw;
    raw.distance_normalizer = DistanceNormalizer::none;
    EXPECT_NEAR(price(3, 2, s, scores, clusters, raw), price_from(0.5, 0.25, 5.0, false, raw), 1e-12);
}

TEST(Price, ParamsValidate) {
    PriceParams p;
    p.c2[1] = 1.5;
    EXPECT_THROW(p.validate(), InvalidInput);
    p = {};
    p.c4 = NAN;
    EXPECT_THROW(p.validate(), InvalidInput);
}

TEST(InitClusters, Examples) {
    auto c = init_clusters(2, std::vector<double>{0.9, 0.5, 0.1});
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0].cores, std::vector<int>{0});
    EXPECT_EQ(c[0].members, std::vector<int>{0});
    EXPECT_EQ(c[0].wallet, 0.9);
    EXPECT_EQ(c[1].cores, std::vector<int>{1});
    EXPECT_EQ(c[1].wallet, 0.5);

    EXPECT_EQ(init_clusters(3, std::vector<double>{0.2, 0.7, 0.1}).size(), 3u);

    c = init_clusters(2, std::vector<double>{0.9, 0.5, 0.5});
    EXPECT_EQ(c[1].cores, std::vector<int>{1});

    PriceParams p;
    p.wallet_scale = 2.0;
    EXPECT_EQ(init_clusters(1, std::vector<double>{0.3}, p)[0].wallet, 0.6);

    EXPECT_THROW(init_clusters(0, std::vector<double>{1.0}), InvalidInput);
    warnings_enabled() = false;
    EXPECT_EQ(init_clusters(7, std::vector<double>{0.2, 0.1}).size(), 2u);
    warnings_enabled() = true;
}

TEST(MarketClustering, FarCoresWithTinyWalletsStaySingletons) {
    // Each core has a plain neighbour it cannot afford; that couple is the
    // cheapest, so neither cluster ever reaches the other core.
    const Scan s = scan_of(400, 40,
                           {box(16, {10, 10, 13, 13}), box(16, {18, 10, 21, 13}), box(16, {370, 10, 373, 13}),
                            box(16, {378, 10, 381, 13})});
    const std::vector<double> scores{0.01, 0.0, 0.009, 0.0};
    const auto r = market_clustering(s, scores, {}, with_k(2));
    ASSERT_EQ(r.clusters.size(), 2u);
    EXPECT_EQ(r.clusters[0].members, std::vector<int>{0});
    EXPECT_EQ(r.clusters[0].wallet, 0.01);
    EXPECT_EQ(r.clusters[1].members, std::vector<int>{2});
    EXPECT_EQ(r.clusters[1].wallet, 0.009);
    EXPECT_TRUE(r.ledger.empty());
    for (const auto& e : r.trace) EXPECT_EQ(e.kind, TraceEvent::Kind::insufficient);
}

TEST(MarketClustering, AdjacentHighScoreCoresMerge) {
    const Scan s = scan_of(100, 100, {box(16, {10, 10, 13, 13}), box(16, {14, 10, 17, 13})});
    const std::vector<double> scores{1.0, 0.98};
    const auto r = market_clustering(s, scores, {}, with_k(2));
    ASSERT_EQ(r.clusters.size(), 1u);
    EXPECT_EQ(r.clusters[0].cores, (std::vector<int>{0, 1}));
    EXPECT_EQ(r.clusters[0].members, (std::vector<int>{0, 1}));
    EXPECT_DOUBLE_EQ(r.clusters[0].wallet, 1.98);
    EXPECT_LT(r.trace.front().price, 1e-3);
}

TEST(MarketClustering, PurchaseOfAdjacentImpurity) {
    // s_o chosen so that the couple costs 0.3 at distance 0.
    const double s_o = std::pow((1.0 - std::pow(0.3, 1.0 / 1.6)) / 0.95, 2.0);
    const Scan s = scan_of(100, 100, {box(16, {10, 10, 13, 13}), box(16, {13, 10, 16, 13})});
    const std::vector<double> scores{1.0, s_o};
    EXPECT_NEAR(price_from(1.0, s_o, 0.0, false, {}), 0.3, 1e-12);
    const auto r = market_clustering(s, scores, {}, with_k(1));
    ASSERT_EQ(r.clusters.size(), 1u);
    EXPECT_EQ(r.clusters[0].members, (std::vector<int>{0, 1}));
    EXPECT_NEAR(r.clusters[0].wallet, 0.7, 1e-12);
    EXPECT_EQ(r.ledger.at(1), 1.0);
}

TEST(MarketClustering, CoreMergeDoesNotCheckThePrice) {
    const Scan s = scan_of(400, 40, {box(16, {10, 10, 13, 13}), box(16, {370, 10, 373, 13})});
    const auto r = market_clustering(s, std::vector<double>{0.01, 0.009}, {}, with_k(2));
    ASSERT_EQ(r.clusters.size(), 1u);
    EXPECT_GT(r.trace.front().price, r.trace.front().wallet_before);
    EXPECT_EQ(r.trace.front().kind, TraceEvent::Kind::merge);
}

TEST(MarketClustering, FrozenTrace) {
    const Scan s = fixture_scan();
    const std::vector<double> scores{0.25, 0.25, 0.25, 0.5};
    const auto r = market_clustering(s, scores, {}, with_k(3));
    std::string got = format_trace(r.trace);
    ASSERT_EQ(r.clusters.size(), 1u);
    const auto& c = r.clusters[0];
    got += "final cores=" + join(c.cores) + " members=" + join(c.members) + " wallet=" + format_fixed(c.wallet, 6) + "\n";
    got += "ledger";
    for (const auto& [o, bid] : r.ledger) got += " " + std::to_string(o) + "=" + format_fixed(bid, 6);
    got += "\n";
    EXPECT_EQ(got, read_fixture("market_trace.txt"));
    EXPECT_EQ(r.passes, 3u);
}

TEST(MarketClustering, StrictConvergenceRunsUntilNothingChanges) {
    const Scan s = fixture_scan();
    const std::vector<double> scores{0.25, 0.25, 0.25, 0.5};
    auto opt = with_k(3);
    opt.convergence = Convergence::no_state_change;
    const auto strict = market_clustering(s, scores, {}, opt);
    EXPECT_EQ(strict.clusters.size(), 1u);
    EXPECT_GE(strict.passes, 3u);
}

TEST(MarketClustering, PassBudgetFlagsNonTermination) {
    auto opt = with_k(3);
    opt.pass_budget = 2;
    EXPECT_THROW(market_clustering(fixture_scan(), std::vector<double>{0.25, 0.25, 0.25, 0.5}, {}, opt), InvalidInput);
}

TEST(MarketClustering, RejectsUnscoredImpurities) {
    const Scan s = fixture_scan();
    EXPECT_THROW(market_clustering(s, std::vector<double>{0.1, 0.2}, {}, with_k(1)), InvalidInput);
    EXPECT_THROW(market_clustering(s, std::vector<double>{0.1, NAN, 0.3, 0.4}, {}, with_k(1)), InvalidInput);
}

TEST(MarketClustering, InvariantsOnRandomScans) {
    std::mt19937 rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        const Scan s = random_scan(rng, 40);
        const auto scores = random_scores(rng, s.size());
        PriceParams p;
        p.wallet_scale = 1.0 + trial % 4;
        auto opt = with_k(2 + trial % 7);
        opt.convergence = trial % 2 ? Convergence::literal : Convergence::no_state_change;
        const auto r = market_clustering(s, scores, p, opt);

        std::set<int> seen, cores;
        for (const auto& c : r.clusters) {
            EXPECT_GE(c.wallet, 0.0);
            for (int m : c.members) EXPECT_TRUE(seen.insert(m).second) << "impurity in two clusters";
            for (int k : c.cores) {
                EXPECT_TRUE(cores.insert(k).second);
                EXPECT_TRUE(c.contains(k));
            }
        }
        EXPECT_EQ(cores.size(), std::size_t(opt.k));

        std::map<int, double> last_bid;
        for (const auto& e : r.trace) {
            EXPECT_GE(e.wallet_before, 0.0);
            EXPECT_GE(e.wallet_after, 0.0);
            if (e.kind == TraceEvent::Kind::merge || e.kind == TraceEvent::Kind::purchase) {
                auto it = last_bid.find(e.o);
                if (it != last_bid.end()) {
                    EXPECT_GT(e.bid, it->second);
                }
                last_bid[e.o] = e.bid;
            }
        }
        for (const auto& [o, bid] : r.ledger) EXPECT_GE(bid, 0.0);
    }
}

TEST(MarketClustering, DeterministicAcrossWorkerCounts) {
    std::mt19937 rng(4);
    const Scan s = random_scan(rng, 120);
    const auto scores = random_scores(rng, s.size());
    auto opt = with_k(8);
    const auto base = market_clustering(s, scores, {}, opt);
    for (unsigned w : {2u, 3u, 7u}) {
        opt.workers = w;
        const auto r = market_clustering(s, scores, {}, opt);
        EXPECT_EQ(format_trace(r.trace), format_trace(base.trace));
        ASSERT_EQ(r.clusters.size(), base.clusters.size());
        for (std::size_t i = 0; i < r.clusters.size(); ++i) {
            EXPECT_EQ(r.clusters[i].members, base.clusters[i].members);
            EXPECT_EQ(r.clusters[i].wallet, base.clusters[i].wallet);
        }
    }
}

TEST(ClusterDiameter, Examples) {
    const Scan s = scan_of(50, 50, {box(2, {0, 0, 3, 4}), box(1, {0, 0, 1, 1}), box(1, {10, 0, 11, 1}), box(1, {3, 14, 4, 15})});
    EXPECT_DOUBLE_EQ(cluster_diameter({{0}, {0}, 0, 0}, s), 5.0);
    EXPECT_DOUBLE_EQ(cluster_diameter({{1}, {1, 2}, 0, 0}, s), 10.0);
    // Centers (0.5,0.5), (10.5,0.5), (3.5,14.5): the longest pair is 2-3.
    EXPECT_DOUBLE_EQ(cluster_diameter({{1}, {1, 2, 3}, 0, 0}, s), std::hypot(7.0, 14.0));
    EXPECT_THROW(cluster_diameter({{1}, {}, 0, 0}, s), InvalidInput);
}

TEST(AreaMeasure, Examples) {
    const Scan s = scan_of(50, 50, {box(2, {0, 0, 3, 4}), box(1, {0, 0, 1, 1}), box(2, {10, 0, 11, 1})});
    const std::vector<double> scores{0.5, 1.0, 0.5};
    EXPECT_DOUBLE_EQ(area_measure({{0}, {0}, 0, 0}, scores, s), 10.0);
    EXPECT_DOUBLE_EQ(area_measure({{1}, {1, 2}, 0, 0}, scores, s), 60.0);
    EXPECT_DOUBLE_EQ(area_measure({{1}, {1, 2}, 0, 0}, scores, s, 0.5), 15.0);
}

TEST(AreaMeasure, MonotoneUnderGrowth) {
    std::mt19937 rng(12);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        Scan s = random_scan(rng, 12);
        const auto scores = random_scores(rng, s.size());
        std::vector<double> pos(scores.size());
        for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = 0.01 + scores[i];
        Cluster c{{0}, {0, 1, 2, 3, 4}, 0, 0};
        const double base = area_measure(c, pos, s);
        Cluster bigger = c;
        bigger.members.push_back(5 + trial % 7);
        EXPECT_GT(area_measure(bigger, pos, s), base);

        auto more = pos;
        more[std::size_t(trial % 5)] *= 1.0 + u(rng);
        EXPECT_GT(area_measure(c, more, s), base);

        s.impurities[std::size_t(trial % 5)].area += 1;
        EXPECT_GT(area_measure(c, pos, s), base);
    }
}

TEST(Ranking, OrderAndDeciles) {
    std::vector<ScanClusters> scans(1);
    scans[0].scan_id = "a";
    for (double am : {5.0, 1.0, 3.0}) scans[0].clusters.push_back({{int(am)}, {int(am)}, 0, am});
    const auto r = rank_clusters(scans);
    ASSERT_EQ(r.size(), 3u);
    std::map<double, std::size_t> rank_of;
    for (const auto& x : r) rank_of[x.am] = x.rank;
    EXPECT_EQ(rank_of[5.0], 3u);
    EXPECT_EQ(rank_of[1.0], 1u);
    EXPECT_EQ(rank_of[3.0], 2u);
    EXPECT_EQ(r.back().decile, 1);

    EXPECT_EQ(decile_of(1588, 1653), 1);
    EXPECT_EQ(decile_of(1642, 1653), 1);
    EXPECT_EQ(decile_of(916, 1653), 5);
    EXPECT_EQ(decile_of(1, 1), 1);
    EXPECT_EQ(decile_of(1, 1653), 10);
    EXPECT_THROW(decile_of(0, 5), InvalidInput);

    std::vector<ScanClusters> one{{"s", {{{0}, {0}, 0, 2.0}}}};
    const auto single = rank_clusters(one);
    EXPECT_EQ(single[0].rank, 1u);
    EXPECT_EQ(single[0].decile, 1);
    EXPECT_THROW(rank_clusters(std::vector<ScanClusters>{}), InvalidInput);
}

TEST(Ranking, TiesByScanThenLeadCore) {
    std::vector<ScanClusters> scans{{"b", {{{4}, {4}, 0, 1.0}}}, {"a", {{{7}, {7}, 0, 1.0}, {{2}, {2}, 0, 1.0}}}};
    const auto r = rank_clusters(scans);
    EXPECT_EQ(r[0].scan_id, "a");
    EXPECT_EQ(r[0].cluster.lead(), 2);
    EXPECT_EQ(r[1].cluster.lead(), 7);
    EXPECT_EQ(r[2].scan_id, "b");
}

TEST(Ranking, DecilesAreBalanced) {
    for (std::size_t n : {10u, 37u, 1653u}) {
        std::map<int, std::size_t> count;
        for (std::size_t r = 1; r <= n; ++r) {
            const int d = decile_of(r, n);
            EXPECT_GE(d, 1);
            EXPECT_LE(d, 10);
            if (r > 1) {
                EXPECT_LE(d, decile_of(r - 1, n));
            }
            ++count[d];
        }
        EXPECT_EQ(count.size(), 10u);
    }
}
