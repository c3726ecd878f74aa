#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "error.hpp"
#include "image_io.hpp"
#include "ingestion.hpp"

namespace anomet {

using Rgb = std::array<std::uint8_t, 3>;

/// Piecewise-linear blue -> cyan -> yellow -> red with breakpoints at 0, 1/3,
/// 2/3 and 1.
inline Rgb colormap(double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("colormap: value " + std::to_string(v) + " outside [0,1]");
    static constexpr std::array<std::array<double, 3>, 4> stops{{{0, 0, 255}, {0, 255, 255}, {255, 255, 0}, {255, 0, 0}}};
    const double t = v * 3.0;
    const int seg = std::min(2, static_cast<int>(t));
    const double f = t - seg;
    Rgb out{};
    for (int c = 0; c < 3; ++c)
        out[std::size_t(c)] = static_cast<std::uint8_t>(
            std::lround(stops[std::size_t(seg)][std::size_t(c)] * (1.0 - f) + stops[std::size_t(seg) + 1][std::size_t(c)] * f));
    return out;
}

/// Gray rendering of a mask: background black, impurities mid-gray.
inline RgbImage mask_background(const MaskImage& mask) {
    RgbImage img(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            const std::uint8_t g = mask.at(x, y) ? 128 : 0;
            auto* p = img.px(x, y);
            p[0] = p[1] = p[2] = g;
        }
    return img;
}

/// Tints every pixel of impurity i with colormap(values[i]); all other pixels
/// keep the background. Requires impurity masks, i.e. a scan extracted in this
/// process.
inline RgbImage render_overlay(const Scan& scan, std::span<const double> values, const RgbImage& background) {
    if (values.size() != scan.size()) throw InvalidInput("render_overlay: one value per impurity required");
    if (background.width != scan.width || background.height != scan.height)
        throw InvalidInput("render_overlay: background size differs from scan");
    RgbImage out = background;
    for (std::size_t i = 0; i < scan.size(); ++i) {
        const auto& imp = scan.impurities[i];
        const Rgb c = colormap(values[i]);
        if (!imp.mask) throw InvalidInput("render_overlay: impurity " + std::to_string(imp.id) + " has no pixel mask");
        for (int v = 0; v < imp.mask->height; ++v)
            for (int u = 0; u < imp.mask->width; ++u)
                if (imp.mask->at(u, v)) {
                    auto* p = out.px(imp.rect.min_x + u, imp.rect.min_y + v);
                    p[0] = c[0];
                    p[1] = c[1];
                    p[2] = c[2];
                }
    }
    return out;
}

} // namespace anomet
