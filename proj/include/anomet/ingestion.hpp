#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "image.hpp"

namespace anomet {

/// Binary tag mask: 1 = impurity, 0 = background.
using MaskImage = BinaryImage;

/// One metallographic scan: its impurities in raster discovery order, with
/// ids dense in 0..n-1.
struct Scan {
    std::string scan_id;
    int width = 0;
    int height = 0;
    std::vector<Impurity> impurities;

    std::size_t size() const { return impurities.size(); }
};

enum class Connectivity { four = 4, eight = 8 };

inline constexpr int kImpurityStoreVersion = 1;
inline constexpr const char* kImpurityStoreMagic = "anomet-impurities";

/// Fills every background region not reachable from the image border. Used
/// when tags were drawn as outlines rather than filled regions.
inline MaskImage fill_enclosed_regions(const MaskImage& mask) {
    const int w = mask.width, h = mask.height;
    BinaryImage outside(w, h, 0);
    std::vector<Point> stack;
    auto seed = [&](int x, int y) {
        if (!mask.at(x, y) && !outside.at(x, y)) {
            outside.at(x, y) = 1;
            stack.push_back({x, y});
        }
    };
    for (int x = 0; x < w; ++x) {
        seed(x, 0);
        seed(x, h - 1);
    }
    for (int y = 0; y < h; ++y) {
        seed(0, y);
        seed(w - 1, y);
    }
    // Background flows 4-connected so that 8-connected outlines are closed.
    constexpr std::array<Point, 4> steps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    while (!stack.empty()) {
        Point p = stack.back();
        stack.pop_back();
        for (auto s : steps) {
            int nx = p.x + s.x, ny = p.y + s.y;
            if (mask.contains(nx, ny)) seed(nx, ny);
        }
    }
    MaskImage out = mask;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!outside.pixels[i]) out.pixels[i] = 1;
    return out;
}

namespace detail {

// Clockwise ring in image coordinates (y grows downward), starting west.
inline constexpr std::array<Point, 8> kRing{{{-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}}};

inline int ring_index(int dx, int dy) {
    for (int i = 0; i < 8; ++i)
        if (kRing[i].x == dx && kRing[i].y == dy) return i;
    return -1;
}

/// Moore-neighbour tracing of the outer boundary of the single component held
/// in `local` (cropped to its bounding rect). `start` must be the first pixel in
/// raster order. Returned points are in local coordinates.
inline std::vector<Point> trace_outer_boundary(const BinaryImage& local, Point start) {
    auto fg = [&](int x, int y) { return local.contains(x, y) && local.at(x, y) != 0; };

    std::vector<Point> contour{start};
    Point cur = start;
    int backtrack = 0;  // west of the raster-first pixel is background
    int first_move = -1;
    const std::size_t limit = 4 * local.size() + 16;

    for (std::size_t step = 0; step < limit; ++step) {
        int found = -1;
        for (int k = 1; k <= 8; ++k) {
            int d = (backtrack + k) % 8;
            if (fg(cur.x + kRing[d].x, cur.y + kRing[d].y)) {
                found = d;
                break;
            }
        }
        if (found < 0) break;  // isolated pixel
        if (cur == start) {
            if (first_move < 0)
                first_move = found;
            else if (found == first_move)
                break;
        }
        const int prev = (found + 7) % 8;
        Point next{cur.x + kRing[found].x, cur.y + kRing[found].y};
        backtrack = ring_index(kRing[prev].x - kRing[found].x, kRing[prev].y - kRing[found].y);
        cur = next;
        if (cur == start) continue;
        contour.push_back(cur);
    }
    return contour;
}

} // namespace detail

/// Labels connected components of `mask` and returns one impurity per
/// component, ids in raster-scan order of discovery.
inline Scan extract_impurities(const MaskImage& mask, const std::string& scan_id,
                               Connectivity connectivity = Connectivity::eight) {
    Scan scan{scan_id, mask.width, mask.height, {}};
    const int w = mask.width, h = mask.height;
    std::vector<std::int32_t> label(mask.size(), -1);
    std::vector<Point> stack;
    std::vector<Point> pixels;
    const int nsteps = connectivity == Connectivity::eight ? 8 : 4;
    static constexpr std::array<Point, 8> steps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, 1}, {1, -1}, {-1, -1}}};

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            if (!mask.pixels[idx] || label[idx] >= 0) continue;

            const int id = static_cast<int>(scan.impurities.size());
            label[idx] = id;
            stack.assign(1, {x, y});
            pixels.clear();
            BoundingRect rect{x, y, x, y};
            while (!stack.empty()) {
                Point p = stack.back();
                stack.pop_back();
                pixels.push_back(p);
                rect.min_x = std::min(rect.min_x, p.x);
                rect.max_x = std::max(rect.max_x, p.x);
                rect.min_y = std::min(rect.min_y, p.y);
                rect.max_y = std::max(rect.max_y, p.y);
                for (int s = 0; s < nsteps; ++s) {
                    int nx = p.x + steps[s].x, ny = p.y + steps[s].y;
                    if (!mask.contains(nx, ny)) continue;
                    const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
                    if (mask.pixels[nidx] && label[nidx] < 0) {
                        label[nidx] = id;
                        stack.push_back({nx, ny});
                    }
                }
            }

            Impurity imp;
            imp.id = id;
            imp.area = static_cast<std::int64_t>(pixels.size());
            imp.rect = rect;
            BinaryImage local(rect.pixel_width(), rect.pixel_height(), 0);
            for (auto p : pixels) local.at(p.x - rect.min_x, p.y - rect.min_y) = 1;
            auto contour = detail::trace_outer_boundary(local, {x - rect.min_x, 0});
            for (auto& p : contour) p = {p.x + rect.min_x, p.y + rect.min_y};
            imp.contour = std::move(contour);
            imp.mask = std::move(local);
            scan.impurities.push_back(std::move(imp));
        }
    }
    return scan;
}

/// Renders the impurity centered in a size x size frame, scaled so its longer
/// bounding side spans the frame (aspect preserved, nearest-neighbour).
inline BinaryImage normalize_shape_image(const Impurity& imp, int size = 100) {
    if (!imp.mask) throw InvalidInput("normalize_shape_image: impurity " + std::to_string(imp.id) + " has no pixel mask");
    const BinaryImage& src = *imp.mask;
    if (src.width == 0 || src.height == 0 || count_ones(src) == 0)
        throw InvalidInput("normalize_shape_image: impurity " + std::to_string(imp.id) + " is empty");

    const double scale = double(size) / std::max(src.width, src.height);
    const int ow = std::clamp(static_cast<int>(std::lround(src.width * scale)), 1, size);
    const int oh = std::clamp(static_cast<int>(std::lround(src.height * scale)), 1, size);
    const int ox = (size - ow) / 2;
    const int oy = (size - oh) / 2;

    BinaryImage out(size, size, 0);
    for (int v = 0; v < oh; ++v) {
        const int sy = std::min(src.height - 1, static_cast<int>((v + 0.5) / scale));
        for (int u = 0; u < ow; ++u) {
            const int sx = std::min(src.width - 1, static_cast<int>((u + 0.5) / scale));
            out.at(ox + u, oy + v) = src.at(sx, sy) ? 1 : 0;
        }
    }
    return out;
}

/// Populates `shape_image` for every impurity that carries a pixel mask.
inline void attach_shape_images(Scan& scan, int size = 100) {
    for (auto& imp : scan.impurities)
        if (imp.mask) imp.shape_image = normalize_shape_image(imp, size);
}

// ---------------------------------------------------------------------------
// Impurity store: line-delimited text.
//
//   anomet-impurities <version> <scan_id> <width> <height> <count>
//   <id> <area> <min_x> <min_y> <max_x> <max_y> <npoints> <x0> <y0> <x1> <y1> ...
// ---------------------------------------------------------------------------

inline void write_impurities(std::ostream& os, const Scan& scan) {
    if (scan.scan_id.empty() || scan.scan_id.find_first_of(" \t\r\n") != std::string::npos)
        throw InvalidInput("scan id must be non-empty and free of whitespace: '" + scan.scan_id + "'");
    os << kImpurityStoreMagic << ' ' << kImpurityStoreVersion << ' ' << scan.scan_id << ' ' << scan.width << ' '
       << scan.height << ' ' << scan.impurities.size() << '\n';
    for (const auto& imp : scan.impurities) {
        os << imp.id << ' ' << imp.area << ' ' << imp.rect.min_x << ' ' << imp.rect.min_y << ' ' << imp.rect.max_x
           << ' ' << imp.rect.max_y << ' ' << imp.contour.size();
        for (auto p : imp.contour) os << ' ' << p.x << ' ' << p.y;
        os << '\n';
    }
}

inline Scan read_impurities(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw MalformedRecord("impurity store: missing header");
    std::istringstream header(line);
    std::string magic;
    int version = 0;
    Scan scan;
    std::size_t count = 0;
    if (!(header >> magic) || magic != kImpurityStoreMagic) throw MalformedRecord("impurity store: bad magic");
    if (!(header >> version)) throw MalformedRecord("impurity store: missing version");
    if (version != kImpurityStoreVersion)
        throw VersionMismatch("impurity store: unsupported version " + std::to_string(version));
    if (!(header >> scan.scan_id >> scan.width >> scan.height >> count))
        throw MalformedRecord("impurity store: truncated header");

    scan.impurities.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        if (!std::getline(is, line))
            throw MalformedRecord("impurity store: expected " + std::to_string(count) + " records, found " +
                                  std::to_string(n));
        std::istringstream rec(line);
        Impurity imp;
        std::size_t npts = 0;
        if (!(rec >> imp.id >> imp.area >> imp.rect.min_x >> imp.rect.min_y >> imp.rect.max_x >> imp.rect.max_y >>
              npts))
            throw MalformedRecord("impurity store: malformed record " + std::to_string(n));
        imp.contour.resize(npts);
        for (auto& p : imp.contour)
            if (!(rec >> p.x >> p.y)) throw MalformedRecord("impurity store: truncated contour in record " + std::to_string(n));
        std::string extra;
        if (rec >> extra) throw MalformedRecord("impurity store: trailing data in record " + std::to_string(n));
        if (imp.id != static_cast<int>(n) || imp.area <= 0 || !imp.rect.valid())
            throw MalformedRecord("impurity store: inconsistent record " + std::to_string(n));
        scan.impurities.push_back(std::move(imp));
    }
    return scan;
}

inline void persist_impurities(const Scan& scan, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidInput("cannot open for writing: " + path);
    write_impurities(os, scan);
    if (!os) throw InvalidInput("write failed: " + path);
}

inline Scan load_impurities(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DecodeError("cannot open impurity store: " + path);
    return read_impurities(is);
}

} // namespace anomet
