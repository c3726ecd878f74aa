#pragma once

// Synthetic impurity scans with ground truth, for tests and demos.
//
// Normal shapes are disks and mildly eccentric ellipses; anomalous shapes are
// 'X' crosses and rods. Shapes never touch: every bounding rectangle keeps a
// background margin from the others, so each one extracts as exactly one
// impurity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "../error.hpp"
#include "../geometry.hpp"
#include "../image.hpp"
#include "../ingestion.hpp"
#include "../shape.hpp"

namespace anomet::testkit {

enum class ShapeKind { disk, ellipse, cross, rod };

inline const char* to_string(ShapeKind k) {
    switch (k) {
        case ShapeKind::disk: return "disk";
        case ShapeKind::ellipse: return "ellipse";
        case ShapeKind::cross: return "cross";
        case ShapeKind::rod: return "rod";
    }
    return "?";
}

inline bool is_anomalous(ShapeKind k) { return k == ShapeKind::cross || k == ShapeKind::rod; }

/// Deterministic generator (splitmix64) independent of std distributions.
class SynthRng {
public:
    explicit SynthRng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * double(hi - lo + 1)); }

private:
    std::uint64_t state_;
};

/// Geometric parameters of one shape, centered at the origin.
struct ShapeParams {
    ShapeKind kind = ShapeKind::disk;
    double size = 10.0;       // radius (disk), semi-major axis (ellipse), half length (cross arm, rod)
    double aspect = 1.0;      // ellipse minor/major ratio
    double thickness = 3.0;   // bar thickness (cross, rod)
    double angle = 0.0;       // rotation in radians
    double spread = M_PI / 2; // angle between the two bars of a cross
};

namespace detail {

inline bool in_bar(double x, double y, double half_len, double thick, double angle) {
    const double ux = std::cos(angle), uy = std::sin(angle);
    const double along = x * ux + y * uy;
    const double across = -x * uy + y * ux;
    return std::abs(along) <= half_len && std::abs(across) <= thick / 2.0;
}

inline bool inside(const ShapeParams& s, double x, double y) {
    switch (s.kind) {
        case ShapeKind::disk: return x * x + y * y <= s.size * s.size;
        case ShapeKind::ellipse: {
            const double c = std::cos(s.angle), sn = std::sin(s.angle);
            const double u = x * c + y * sn, v = -x * sn + y * c;
            const double a = s.size, b = s.size * s.aspect;
            return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
        }
        case ShapeKind::cross:
            return in_bar(x, y, s.size, s.thickness, s.angle) || in_bar(x, y, s.size, s.thickness, s.angle + s.spread);
        case ShapeKind::rod: return in_bar(x, y, s.size, s.thickness, s.angle);
    }
    return false;
}

} // namespace detail

/// Rasterizes a shape (pixel centers sampled) into a tight binary crop.
inline BinaryImage render_shape(const ShapeParams& s) {
    const int r = static_cast<int>(std::ceil(s.size + s.thickness)) + 1;
    const int n = 2 * r + 1;
    BinaryImage canvas(n, n, 0);
    int minx = n, miny = n, maxx = -1, maxy = -1;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            if (detail::inside(s, x - r + 0.5, y - r + 0.5)) {
                canvas.at(x, y) = 1;
                minx = std::min(minx, x);
                maxx = std::max(maxx, x);
                miny = std::min(miny, y);
                maxy = std::max(maxy, y);
            }
    if (maxx < 0) {
        BinaryImage dot(1, 1, 1);
        return dot;
    }
    BinaryImage crop(maxx - minx + 1, maxy - miny + 1, 0);
    for (int y = miny; y <= maxy; ++y)
        for (int x = minx; x <= maxx; ++x) crop.at(x - minx, y - miny) = canvas.at(x, y);
    return crop;
}

/// Ranges the generator samples shape parameters from.
struct ShapeRanges {
    double disk_radius_min = 5, disk_radius_max = 14;
    double ellipse_major_min = 7, ellipse_major_max = 16;
    double ellipse_aspect_min = 0.75, ellipse_aspect_max = 0.95;
    double bar_half_length_min = 10, bar_half_length_max = 22;
    double bar_thickness_ratio_min = 0.2, bar_thickness_ratio_max = 0.35;  // relative to half length
    double bar_thickness_floor = 2;
};

inline ShapeParams random_shape(ShapeKind kind, SynthRng& rng, const ShapeRanges& r = {}) {
    ShapeParams s;
    s.kind = kind;
    s.angle = rng.uniform(0.0, M_PI);
    switch (kind) {
        case ShapeKind::disk: s.size = rng.uniform(r.disk_radius_min, r.disk_radius_max); break;
        case ShapeKind::ellipse:
            s.size = rng.uniform(r.ellipse_major_min, r.ellipse_major_max);
            s.aspect = rng.uniform(r.ellipse_aspect_min, r.ellipse_aspect_max);
            break;
        case ShapeKind::cross:
        case ShapeKind::rod:
            s.size = rng.uniform(r.bar_half_length_min, r.bar_half_length_max);
            s.thickness = std::max(r.bar_thickness_floor,
                                   s.size * rng.uniform(r.bar_thickness_ratio_min, r.bar_thickness_ratio_max));
            if (kind == ShapeKind::cross) s.spread = rng.uniform(M_PI / 3.0, M_PI / 2.0);
            break;
    }
    return s;
}

struct DenseRegion {
    int count = 0;                 // anomalous shapes packed into the region
    std::optional<PointD> center;  // random when unset
    double radius = 60.0;
    double scale = 1.5;            // size multiplier for region shapes
};

struct SynthSpec {
    int width = 512;
    int height = 512;
    int disks = 0;
    int ellipses = 0;
    int crosses = 0;
    int rods = 0;
    int spatial_outliers = 0;  // disks placed as far as possible from everything else
    DenseRegion dense;
    ShapeRanges ranges;
    int margin = 3;            // minimum background gap between bounding rectangles
    std::uint64_t seed = 1;
};

struct SynthShape {
    ShapeParams params;
    BoundingRect rect;
    bool spatial_outlier = false;
    bool in_dense_region = false;
};

struct SynthScan {
    MaskImage mask;
    std::vector<SynthShape> truth;
};

namespace detail {

inline bool clear_of(const BoundingRect& r, const std::vector<SynthShape>& placed, int margin) {
    for (const auto& s : placed) {
        const auto& o = s.rect;
        if (r.min_x - margin <= o.max_x && o.min_x - margin <= r.max_x && r.min_y - margin <= o.max_y &&
            o.min_y - margin <= r.max_y)
            return false;
    }
    return true;
}

inline double gap_to(const BoundingRect& r, const std::vector<SynthShape>& placed) {
    double best = 1e300;
    for (const auto& s : placed) best = std::min(best, rect_distance(r, s.rect));
    return best;
}

} // namespace detail

/// Renders the shapes a SynthSpec asks for. Deterministic in the seed.
inline SynthScan generate_synthetic_scan(const SynthSpec& spec) {
    if (spec.width < 1 || spec.height < 1) throw GenerationError("synthetic canvas must be non-empty");
    if (spec.disks < 0 || spec.ellipses < 0 || spec.crosses < 0 || spec.rods < 0 || spec.spatial_outliers < 0 ||
        spec.dense.count < 0)
        throw GenerationError("synthetic shape counts must be non-negative");

    SynthRng rng(spec.seed);
    SynthScan out{MaskImage(spec.width, spec.height, 0), {}};
    constexpr int kAttempts = 2000;

    auto place = [&](const BinaryImage& crop, int x, int y, SynthShape shape) {
        shape.rect = {x, y, x + crop.width - 1, y + crop.height - 1};
        for (int v = 0; v < crop.height; ++v)
            for (int u = 0; u < crop.width; ++u)
                if (crop.at(u, v)) out.mask.at(x + u, y + v) = 1;
        out.truth.push_back(shape);
    };
    auto fits = [&](const BinaryImage& crop) { return crop.width <= spec.width && crop.height <= spec.height; };

    // Dense anomalous region first, so the region is not crowded out.
    if (spec.dense.count > 0) {
        ShapeRanges big = spec.ranges;
        big.bar_half_length_min *= spec.dense.scale;
        big.bar_half_length_max *= spec.dense.scale;
        const PointD c = spec.dense.center.value_or(PointD{rng.uniform(0.25, 0.75) * spec.width,
                                                           rng.uniform(0.25, 0.75) * spec.height});
        for (int n = 0; n < spec.dense.count; ++n) {
            const ShapeKind kind = n % 2 == 0 ? ShapeKind::cross : ShapeKind::rod;
            auto params = random_shape(kind, rng, big);
            auto crop = render_shape(params);
            if (!fits(crop)) throw GenerationError("canvas too small for dense-region shape");
            bool done = false;
            for (int a = 0; a < kAttempts && !done; ++a) {
                const double ang = rng.uniform(0.0, 2.0 * M_PI);
                const double rad = spec.dense.radius * std::sqrt(rng.uniform());
                const int x = static_cast<int>(c.x + rad * std::cos(ang)) - crop.width / 2;
                const int y = static_cast<int>(c.y + rad * std::sin(ang)) - crop.height / 2;
                if (x < 0 || y < 0 || x + crop.width > spec.width || y + crop.height > spec.height) continue;
                BoundingRect r{x, y, x + crop.width - 1, y + crop.height - 1};
                if (!detail::clear_of(r, out.truth, spec.margin)) continue;
                SynthShape s;
                s.params = params;
                s.in_dense_region = true;
                place(crop, x, y, s);
                done = true;
            }
            if (!done) throw GenerationError("canvas too small: cannot pack the dense anomalous region");
        }
    }

    std::vector<ShapeKind> kinds;
    kinds.insert(kinds.end(), spec.disks, ShapeKind::disk);
    kinds.insert(kinds.end(), spec.ellipses, ShapeKind::ellipse);
    kinds.insert(kinds.end(), spec.crosses, ShapeKind::cross);
    kinds.insert(kinds.end(), spec.rods, ShapeKind::rod);
    for (auto kind : kinds) {
        auto params = random_shape(kind, rng, spec.ranges);
        auto crop = render_shape(params);
        if (!fits(crop)) throw GenerationError("canvas too small for shape");
        bool done = false;
        for (int a = 0; a < kAttempts && !done; ++a) {
            const int x = rng.integer(0, spec.width - crop.width);
            const int y = rng.integer(0, spec.height - crop.height);
            BoundingRect r{x, y, x + crop.width - 1, y + crop.height - 1};
            if (!detail::clear_of(r, out.truth, spec.margin)) continue;
            SynthShape s;
            s.params = params;
            place(crop, x, y, s);
            done = true;
        }
        if (!done) throw GenerationError("canvas too small to place " + std::to_string(kinds.size()) + " shapes");
    }

    for (int n = 0; n < spec.spatial_outliers; ++n) {
        auto params = random_shape(ShapeKind::disk, rng, spec.ranges);
        auto crop = render_shape(params);
        if (!fits(crop)) throw GenerationError("canvas too small for outlier");
        std::optional<BoundingRect> best;
        double best_gap = -1.0;
        for (int a = 0; a < 256; ++a) {
            const int x = rng.integer(0, spec.width - crop.width);
            const int y = rng.integer(0, spec.height - crop.height);
            BoundingRect r{x, y, x + crop.width - 1, y + crop.height - 1};
            if (!detail::clear_of(r, out.truth, spec.margin)) continue;
            const double gap = out.truth.empty() ? 0.0 : detail::gap_to(r, out.truth);
            if (gap > best_gap) {
                best_gap = gap;
                best = r;
            }
        }
        if (!best) throw GenerationError("canvas too small to place a spatial outlier");
        SynthShape s;
        s.params = params;
        s.spatial_outlier = true;
        place(crop, best->min_x, best->min_y, s);
    }
    return out;
}

/// Index into `truth` for every extracted impurity (matched by bounding rect),
/// -1 when no shape matches.
inline std::vector<int> match_truth(const Scan& scan, const std::vector<SynthShape>& truth) {
    std::vector<int> out(scan.size(), -1);
    for (std::size_t i = 0; i < scan.size(); ++i)
        for (std::size_t t = 0; t < truth.size(); ++t)
            if (truth[t].rect == scan.impurities[i].rect) {
                out[i] = static_cast<int>(t);
                break;
            }
    return out;
}

/// A single normalized shape image with its ground-truth kind.
struct LabeledShape {
    ShapeKind kind;
    BinaryImage image;         // 100x100 normalized
    double circle_diff = 0.0;  // circle-difference score of the source shape
};

/// Independent shapes for autoencoder experiments: `normal` disks/ellipses
/// (alternating) and `anomalous` crosses/rods (alternating).
inline std::vector<LabeledShape> generate_shape_corpus(int normal, int anomalous, std::uint64_t seed,
                                                       const ShapeRanges& ranges = {}) {
    SynthRng rng(seed);
    std::vector<LabeledShape> out;
    auto make = [&](ShapeKind kind) {
        auto crop = render_shape(random_shape(kind, rng, ranges));
        MaskImage padded(crop.width + 2, crop.height + 2, 0);
        for (int y = 0; y < crop.height; ++y)
            for (int x = 0; x < crop.width; ++x) padded.at(x + 1, y + 1) = crop.at(x, y);
        Scan s = extract_impurities(padded, "shape");
        if (s.size() != 1) throw GenerationError("shape rendered as " + std::to_string(s.size()) + " components");
        const Impurity& imp = s.impurities.front();
        out.push_back({kind, normalize_shape_image(imp), circle_diff_score(imp)});
    };
    for (int i = 0; i < normal; ++i) make(i % 2 == 0 ? ShapeKind::disk : ShapeKind::ellipse);
    for (int i = 0; i < anomalous; ++i) make(i % 2 == 0 ? ShapeKind::cross : ShapeKind::rod);
    return out;
}

} // namespace anomet::testkit
