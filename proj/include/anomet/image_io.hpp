#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "error.hpp"
#include "image.hpp"
#include "ingestion.hpp"

namespace anomet {

enum class Polarity {
    light_on_dark,  // bright tags on a dark slide
    dark_on_light,
};

struct MaskLoadOptions {
    int binarize_threshold = 128;
    Polarity polarity = Polarity::light_on_dark;
    bool fill_outlines = false;
};

/// Decodes a raster file and binarizes it. Multi-channel images are reduced to
/// gray by the mean of their color channels (alpha ignored); pixels at or above
/// the threshold are tags under light-on-dark polarity.
inline MaskImage load_mask(const std::string& path, const MaskLoadOptions& opt = {}) {
    cv::Mat raw = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (raw.empty()) throw DecodeError("cannot decode image: " + path);
    if (raw.rows == 0 || raw.cols == 0) throw InvalidInput("zero-area image: " + path);

    cv::Mat img;
    if (raw.depth() == CV_8U) {
        img = raw;
    } else if (raw.depth() == CV_16U) {
        raw.convertTo(img, CV_8U, 1.0 / 257.0);
    } else {
        raw.convertTo(img, CV_8U);
    }

    const int channels = img.channels();
    const int color = channels == 4 ? 3 : (channels == 2 ? 1 : channels);
    MaskImage mask(img.cols, img.rows, 0);
    for (int y = 0; y < img.rows; ++y) {
        const std::uint8_t* row = img.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.cols; ++x) {
            int sum = 0;
            for (int c = 0; c < color; ++c) sum += row[x * channels + c];
            const bool bright = sum >= opt.binarize_threshold * color;
            const bool tag = opt.polarity == Polarity::light_on_dark ? bright : !bright;
            mask.at(x, y) = tag ? 1 : 0;
        }
    }
    return opt.fill_outlines ? fill_enclosed_regions(mask) : mask;
}

/// Writes a binary image as an 8-bit PNG (1 -> 255).
inline void save_mask(const BinaryImage& mask, const std::string& path) {
    cv::Mat m(mask.height, mask.width, CV_8UC1);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) m.at<std::uint8_t>(y, x) = mask.at(x, y) ? 255 : 0;
    if (!cv::imwrite(path, m)) throw InvalidInput("cannot write image: " + path);
}

/// Interleaved 8-bit RGB raster.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t* px(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
    const std::uint8_t* px(int x, int y) const { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

inline void save_rgb(const RgbImage& img, const std::string& path) {
    cv::Mat m(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const auto* p = img.px(x, y);
            m.at<cv::Vec3b>(y, x) = cv::Vec3b(p[2], p[1], p[0]);
        }
    if (!cv::imwrite(path, m)) throw InvalidInput("cannot write image: " + path);
}

inline RgbImage load_rgb(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
    if (m.empty()) throw DecodeError("cannot decode image: " + path);
    RgbImage img(m.cols, m.rows);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            auto v = m.at<cv::Vec3b>(y, x);
            auto* p = img.px(x, y);
            p[0] = v[2];
            p[1] = v[1];
            p[2] = v[0];
        }
    return img;
}

} // namespace anomet
