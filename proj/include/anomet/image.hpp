#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "error.hpp"

namespace anomet {

/// Row-major single-channel raster. `BinaryImage` holds 0/1 values,
/// `FloatImage` holds intensities in [0,1].
template <typename T>
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<T> pixels;

    Raster() = default;
    Raster(int w, int h, T fill = T{}) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
        if (w < 0 || h < 0) throw InvalidInput("raster dimensions must be non-negative");
    }

    T& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
    std::size_t size() const { return pixels.size(); }

    friend bool operator==(const Raster&, const Raster&) = default;
};

using BinaryImage = Raster<std::uint8_t>;
using FloatImage = Raster<float>;

inline std::size_t count_ones(const BinaryImage& img) {
    std::size_t n = 0;
    for (auto v : img.pixels) n += v != 0;
    return n;
}

inline FloatImage to_float(const BinaryImage& img) {
    FloatImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) out.pixels[i] = img.pixels[i] ? 1.0f : 0.0f;
    return out;
}

} // namespace anomet
