#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <anomet/pipeline.hpp>
#include <anomet/testkit/synth.hpp>

#include "oracles/oracles.hpp"
#include "test_util.hpp"

using namespace anomet;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool ok = true;
    std::string detail;

    void check(bool cond, const std::string& what) {
        if (!cond && ok) detail = what;
        ok = ok && cond;
    }
};

int run(int number, const char* title, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out.ok = false;
        out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (secs >= limit_s) {
        if (out.ok) out.detail = "over time budget";
        out.ok = false;
    }
    std::printf("%s AC%d %s (%.2f s of %.0f s)%s%s\n", out.ok ? "PASS" : "FAIL", number, title, secs, limit_s,
                out.detail.empty() ? "" : ": ", out.detail.c_str());
    std::fflush(stdout);
    return out.ok ? 0 : 1;
}

oracle::Rect to_oracle(const BoundingRect& r) { return {r.min_x, r.min_y, r.max_x, r.max_y}; }

bool overlap_or_touch(const BoundingRect& a, const BoundingRect& b) {
    return a.min_x <= b.max_x && b.min_x <= a.max_x && a.min_y <= b.max_y && b.min_y <= a.max_y;
}

Outcome geometry() {
    Outcome o;
    std::mt19937 rng(1001);
    std::uniform_int_distribution<int> pos(0, 120), side(0, 25);
    int zero_cases = 0;
    for (int i = 0; i < 1000; ++i) {
        auto make = [&] {
            const int x = pos(rng), y = pos(rng);
            return BoundingRect{x, y, x + side(rng), y + side(rng)};
        };
        const BoundingRect a = make(), b = make();
        const double got = rect_distance(a, b);
        o.check(std::abs(got - oracle::rect_distance(to_oracle(a), to_oracle(b))) <= 1e-6, "oracle mismatch");
        o.check((got == 0.0) == overlap_or_touch(a, b), "zero iff intersect/touch violated");
        zero_cases += got == 0.0;
    }
    o.check(zero_cases > 0 && zero_cases < 1000, "random pairs did not cover both cases");

    const BoundingRect a{0, 0, 2, 2}, b{2, 0, 20, 1}, c{20, 0, 22, 2};
    o.check(rect_distance(a, c) > rect_distance(a, b) + rect_distance(b, c), "triangle inequality witness");
    const BoundingRect p{0, 0, 5, 5}, q{3, 3, 9, 9};
    o.check(!(p == q) && rect_distance(p, q) == 0.0, "zero-distance distinct pair witness");
    return o;
}

Outcome spatial_equivalence() {
    Outcome o;
    warnings_enabled() = false;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        testkit::SynthSpec spec;
        spec.width = spec.height = 600;
        const int n = 20 + int(seed * 37 % 150);
        spec.disks = n / 2;
        spec.ellipses = n / 4;
        spec.crosses = n / 8;
        spec.rods = n / 8;
        spec.spatial_outliers = int(seed % 3);
        spec.seed = seed;
        const Scan s = extract_impurities(testkit::generate_synthetic_scan(spec).mask, "s" + std::to_string(seed));
        o.check(s.size() >= 2 && s.size() <= 200, "scan size outside 2..200");
        std::vector<oracle::Blob> blobs;
        for (const auto& imp : s.impurities) blobs.push_back({imp.area, to_oracle(imp.rect)});
        for (int k : {1, 5, 50}) {
            const SpatialParams p{k, 4.0, 2.0};
            o.check(spatial_scores(s, p) == oracle::spatial_scores(blobs, k, p.c1, p.c2, oracle::box_gap),
                    "scores differ at seed " + std::to_string(seed) + " k " + std::to_string(k));
        }
    }
    warnings_enabled() = true;
    return o;
}

Impurity only_impurity(const MaskImage& m) {
    Scan s = extract_impurities(m, "anchor");
    if (s.size() != 1) throw InvalidInput("anchor shape split into " + std::to_string(s.size()) + " components");
    return s.impurities.front();
}

Outcome circle_anchors() {
    Outcome o;
    MaskImage disk(70, 70, 0);
    for (int y = 0; y < 70; ++y)
        for (int x = 0; x < 70; ++x)
            if ((x - 35) * (x - 35) + (y - 35) * (y - 35) <= 30 * 30) disk.at(x, y) = 1;
    const double d = circle_diff_score(only_impurity(disk));

    MaskImage sq(104, 104, 0);
    testutil::fill_block(sq, 2, 2, 100, 100);
    const double s = circle_diff_score(only_impurity(sq));

    MaskImage x(104, 104, 0);
    for (int v = 0; v < 100; ++v)
        for (int u = 0; u < 100; ++u)
            if (std::abs(u - v) < 3 || std::abs(u + v - 99) < 3) x.at(u + 2, v + 2) = 1;
    const double t = circle_diff_score(only_impurity(x));

    std::ostringstream msg;
    msg << "disk " << d << " square " << s << " X " << t;
    o.check(d <= 0.05 && std::abs(s - (1.0 - 2.0 / M_PI)) <= 0.02 && t >= 0.55, msg.str());
    return o;
}

Outcome blank_label_separation() {
    Outcome o;
    const auto corpus = testkit::generate_shape_corpus(500, 200, 7);
    // Every fifth shape of each class is held out.
    std::vector<BinaryImage> normal, anomalous, held_normal, held_anomalous;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const bool anomalous_kind = testkit::is_anomalous(corpus[i].kind);
        if (i % 5 == 0)
            (anomalous_kind ? held_anomalous : held_normal).push_back(corpus[i].image);
        else
            (anomalous_kind ? anomalous : normal).push_back(corpus[i].image);
    }
    ShapeTrainConfig cfg;
    cfg.rng_seed = 7;

    struct Eval {
        double auc, gap;
    };
    auto evaluate = [&](bool blank) {
        ShapeTrainConfig c = cfg;
        c.blank_labels = blank;
        ShapeModel model = train_shape_model(normal, anomalous, c);
        std::vector<BinaryImage> all = held_normal;
        all.insert(all.end(), held_anomalous.begin(), held_anomalous.end());
        const auto norm = min_max_normalize(shape_raw_scores(model, all, PostprocessParams{}));
        const std::vector<double> neg(norm.begin(), norm.begin() + std::ptrdiff_t(held_normal.size()));
        const std::vector<double> pos(norm.begin() + std::ptrdiff_t(held_normal.size()), norm.end());
        double mn = 0, ma = 0;
        for (double v : neg) mn += v;
        for (double v : pos) ma += v;
        return Eval{oracle::auc(pos, neg), ma / double(pos.size()) - mn / double(neg.size())};
    };
    const auto t0 = Clock::now();
    const Eval m1 = evaluate(true);
    const double m1_secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const Eval m2 = evaluate(false);

    std::ostringstream msg;
    msg << "train " << normal.size() << "/" << anomalous.size() << ", model 1 AUC " << m1.auc << " gap " << m1.gap
        << " (" << m1_secs << " s), model 2 AUC " << m2.auc << " gap " << m2.gap;
    o.check(m1.auc >= 0.90 && m1.gap >= 0.3 && m1.auc >= m2.auc && m1_secs <= 600.0, msg.str());
    if (o.ok) o.detail = msg.str();
    return o;
}

std::string fixture_lines() {
    std::ifstream is(std::string(ANOMET_FIXTURE_DIR) + "/market_trace.txt");
    if (!is) throw InvalidInput("fixture market_trace.txt missing");
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

std::string describe(const ClusteringResult& r) {
    std::string s = format_trace(r.trace);
    for (const auto& c : r.clusters)
        s += "final cores=" + join(c.cores) + " members=" + join(c.members) + " wallet=" + format_fixed(c.wallet, 6) + "\n";
    s += "ledger";
    for (const auto& [o, bid] : r.ledger) s += " " + std::to_string(o) + "=" + format_fixed(bid, 6);
    return s + "\n";
}

std::string describe_exact(const ClusteringResult& r) {
    std::string s = format_trace(r.trace);
    for (const auto& c : r.clusters) s += join(c.cores) + "|" + join(c.members) + "|" + format_exact(c.wallet) + "\n";
    for (const auto& e : r.trace) s += format_exact(e.price) + " " + format_exact(e.wallet_after) + "\n";
    for (const auto& [o, bid] : r.ledger) s += std::to_string(o) + "=" + format_exact(bid) + "\n";
    return s;
}

Impurity box(std::int64_t area, BoundingRect r) {
    Impurity imp;
    imp.area = area;
    imp.rect = r;
    return imp;
}

Outcome clustering_fixture() {
    Outcome o;
    Scan s{"fixture", 200, 40,
           {box(30, {4, 10, 8, 15}), box(35, {20, 10, 24, 16}), box(30, {178, 10, 183, 14}), box(16, {188, 10, 191, 13})}};
    for (std::size_t i = 0; i < s.size(); ++i) s.impurities[i].id = int(i);
    ClusteringOptions opt;
    opt.k = 3;
    const auto r = market_clustering(s, std::vector<double>{0.25, 0.25, 0.25, 0.5}, {}, opt);
    o.check(describe(r) == fixture_lines(), "hand trace differs");

    testkit::SynthSpec spec;
    spec.width = spec.height = 700;
    spec.disks = 120;
    spec.ellipses = 50;
    spec.crosses = 15;
    spec.rods = 15;
    spec.seed = 5;
    const Scan big = extract_impurities(testkit::generate_synthetic_scan(spec).mask, "big");
    o.check(big.size() == 200, "determinism scan has " + std::to_string(big.size()) + " impurities");
    const auto scores = spatial_scores(big, {});
    std::string first;
    for (int rep = 0; rep < 10; ++rep) {
        ClusteringOptions ro;
        ro.k = 10;
        ro.workers = unsigned(1 + rep % 4);
        const std::string text = describe_exact(market_clustering(big, scores, {}, ro));
        if (rep == 0) first = text;
        o.check(text == first, "run " + std::to_string(rep) + " differs");
    }
    return o;
}

Outcome area_monotonicity() {
    Outcome o;
    std::mt19937 rng(606);
    std::uniform_int_distribution<int> pos(0, 900), side(1, 30), count(1, 12);
    std::uniform_real_distribution<double> score(0.001, 1.0), factor(1.01, 3.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = count(rng) + 1;
        Scan s{"m", 1000, 1000, {}};
        std::vector<double> sc;
        for (int i = 0; i < n; ++i) {
            const int x = pos(rng), y = pos(rng), w = side(rng), h = side(rng);
            s.impurities.push_back(box(std::int64_t(w) * h, {x, y, x + w, y + h}));
            s.impurities.back().id = i;
            sc.push_back(score(rng));
        }
        Cluster c{{0}, {}, 0.0, 0.0};
        for (int i = 0; i < n - 1; ++i) c.members.push_back(i);
        const double base = area_measure(c, sc, s);

        Cluster grown = c;
        grown.members.push_back(n - 1);
        o.check(area_measure(grown, sc, s) > base, "appending a member did not increase am");

        const std::size_t pick = std::size_t(rng() % std::uint32_t(n - 1));
        auto more = sc;
        more[pick] *= factor(rng);
        o.check(area_measure(c, more, s) > base, "scaling a score did not increase am");

        Scan bigger = s;
        bigger.impurities[pick].area = std::int64_t(std::ceil(double(bigger.impurities[pick].area) * factor(rng)));
        o.check(area_measure(c, sc, bigger) > base, "scaling an area did not increase am");
    }

    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        testkit::SynthSpec spec;
        spec.disks = 60;
        spec.crosses = 10;
        spec.rods = 10;
        spec.seed = seed;
        const Scan s = extract_impurities(testkit::generate_synthetic_scan(spec).mask, "w");
        ClusteringOptions opt;
        opt.k = 8;
        const auto r = market_clustering(s, spatial_scores(s, {}), {}, opt);
        for (const auto& e : r.trace) o.check(e.wallet_before >= 0.0 && e.wallet_after >= 0.0, "negative wallet in trace");
        for (const auto& c : r.clusters) o.check(c.wallet >= 0.0, "negative final wallet");
    }
    return o;
}

Outcome decile_placements() {
    Outcome o;
    o.check(decile_of(1588, 1653) == 1, "rank 1588");
    o.check(decile_of(1642, 1653) == 1, "rank 1642");
    o.check(decile_of(916, 1653) == 5, "rank 916");
    return o;
}

Outcome end_to_end() {
    Outcome o;
    testutil::TempDir dir("acceptance-e2e");
    std::filesystem::create_directories(dir.path() / "scans");
    std::vector<testkit::SynthScan> truth;
    for (int i = 0; i < 3; ++i) {
        testkit::SynthSpec spec;
        spec.width = spec.height = 768;
        spec.disks = 45;
        spec.ellipses = 25;
        spec.crosses = 4;
        spec.rods = 4;
        spec.spatial_outliers = 1;
        spec.seed = std::uint64_t(300 + i);
        if (i == 1) {
            // A defect: large anomalous shapes packed together.
            spec.dense.count = 8;
            spec.dense.radius = 150.0;
            spec.dense.scale = 2.0;
        }
        truth.push_back(testkit::generate_synthetic_scan(spec));
        save_mask(truth.back().mask, dir.file("scans/scan" + std::to_string(i) + ".png"));
    }

    PipelineConfig cfg;
    cfg.scan_dir = dir.file("scans");
    cfg.out_dir = dir.file("out");
    cfg.validate();
    warnings_enabled() = false;
    const auto report = run_pipeline(cfg);
    o.check(!report.empty(), "empty report");
    if (!o.ok) return o;

    const auto& top = report.front();
    o.check(top.scan_id == "scan1", "top cluster is in " + top.scan_id);
    if (o.ok) {
        const Scan scan = load_impurities(dir.file("out/scan1.imp"));
        const auto match = testkit::match_truth(scan, truth[1].truth);
        auto in_region = [&](int id) {
            const int t = match[std::size_t(id)];
            return t >= 0 && truth[1].truth[std::size_t(t)].in_dense_region;
        };
        std::size_t covered = 0;
        for (int m : top.cluster.members) covered += in_region(m);
        const std::size_t region = std::size_t(std::count_if(truth[1].truth.begin(), truth[1].truth.end(),
                                                              [](const testkit::SynthShape& s) { return s.in_dense_region; }));
        o.check(in_region(top.cluster.cores.front()), "top cluster's founding core is outside the dense region");
        o.check(2 * covered > region,
                "top cluster holds " + std::to_string(covered) + " of " + std::to_string(region) + " region impurities");
        if (o.ok)
            o.detail = "top cluster holds " + std::to_string(covered) + " of " + std::to_string(region) +
                       " region impurities among " + std::to_string(top.cluster.members.size()) + " members";
    }

    auto snapshot = [&] {
        std::map<std::string, std::string> files;
        for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path() / "out")) {
            if (!e.is_regular_file()) continue;
            std::ifstream is(e.path(), std::ios::binary);
            std::ostringstream os;
            os << is.rdbuf();
            files[std::filesystem::relative(e.path(), dir.path()).string()] = os.str();
        }
        return files;
    };
    const auto first = snapshot();
    std::filesystem::remove_all(dir.path() / "out");
    run_pipeline(cfg);
    const auto second = snapshot();
    warnings_enabled() = true;
    o.check(first.count("out/report.txt") && first.count("out/overlays/scan1.clusters.png"), "report or overlay missing");
    for (const auto& [name, bytes] : first) {
        auto it = second.find(name);
        o.check(it != second.end() && it->second == bytes, name + " differs between runs");
    }
    return o;
}

} // namespace

int main() {
    int failed = 0;
    failed += run(1, "geometry soundness", 5, geometry);
    failed += run(2, "spatial oracle equivalence", 30, spatial_equivalence);
    failed += run(3, "circle-difference anchors", 5, circle_anchors);
    failed += run(4, "blank-label separation", 1200, blank_label_separation);
    failed += run(5, "clustering fixture and determinism", 10, clustering_fixture);
    failed += run(6, "area measure monotonicity", 5, area_monotonicity);
    failed += run(7, "decile placements", 1, decile_placements);
    failed += run(8, "end-to-end ranking", 900, end_to_end);
    std::printf("%d of 8 criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
