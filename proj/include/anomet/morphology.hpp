#pragma once

#include <algorithm>

#include "error.hpp"
#include "image.hpp"

namespace anomet {

// Square-kernel binary morphology. Pixels outside the image are neutral:
// they never erode a pixel and never dilate into one.

inline BinaryImage erode(const BinaryImage& img, int kernel = 3) {
    if (kernel < 1 || kernel % 2 == 0) throw InvalidInput("morphology kernel must be odd and positive");
    const int r = kernel / 2;
    BinaryImage out(img.width, img.height, 0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            bool all = true;
            for (int dy = -r; dy <= r && all; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (img.contains(nx, ny) && !img.at(nx, ny)) {
                        all = false;
                        break;
                    }
                }
            out.at(x, y) = all && img.at(x, y) ? 1 : 0;
        }
    return out;
}

inline BinaryImage dilate(const BinaryImage& img, int kernel = 3) {
    if (kernel < 1 || kernel % 2 == 0) throw InvalidInput("morphology kernel must be odd and positive");
    const int r = kernel / 2;
    BinaryImage out(img.width, img.height, 0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (!img.at(x, y)) continue;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    if (out.contains(x + dx, y + dy)) out.at(x + dx, y + dy) = 1;
        }
    return out;
}

inline BinaryImage threshold(const FloatImage& img, float t) {
    BinaryImage out(img.width, img.height, 0);
    for (std::size_t i = 0; i < img.size(); ++i) out.pixels[i] = img.pixels[i] >= t ? 1 : 0;
    return out;
}

} // namespace anomet
