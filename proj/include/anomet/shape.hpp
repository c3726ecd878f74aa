#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "image.hpp"
#include "morphology.hpp"
#include "scores.hpp"

namespace anomet {

struct ShapeTrainConfig {
    double normal_threshold = 0.3;
    double anomalous_threshold = 0.55;
    int image_size = 100;
    bool blank_labels = true;  // false trains the normal-only variant
    int epochs = 12;
    double learning_rate = 1e-3;
    int batch_size = 16;
    std::uint64_t rng_seed = 42;
    int channel_width = 16;

    void validate() const {
        if (!(normal_threshold >= 0.0 && normal_threshold < anomalous_threshold && anomalous_threshold <= 1.0))
            throw InvalidInput("shape thresholds must satisfy 0 <= normal < anomalous <= 1");
        if (image_size != 100) throw InvalidInput("shape image size is fixed at 100");
        if (epochs < 1 || batch_size < 1 || channel_width < 1 || !(learning_rate > 0.0))
            throw InvalidInput("shape training: epochs, batch size, channel width and learning rate must be positive");
    }
};

struct PostprocessParams {
    double binarize_threshold = 0.5;
    int kernel_size = 3;
    int erode_iterations = 1;
    int dilate_iterations = 1;
};

/// (Area(c) - Area(i)) / Area(c) with c the smallest circle enclosing the
/// impurity outline, clamped to [0,1]. 0 for disks, close to 1 for thin shapes.
inline double circle_diff_score(const Impurity& imp) {
    if (imp.contour.empty() || imp.area <= 0)
        throw InvalidInput("circle_diff_score: impurity " + std::to_string(imp.id) + " is empty");
    const auto outline = contour_corner_points(imp.contour);
    const double circle_area = smallest_enclosing_circle(outline).area();
    if (!(circle_area > 0.0)) return 0.0;
    return std::clamp((circle_area - double(imp.area)) / circle_area, 0.0, 1.0);
}

struct TrainingSelection {
    std::vector<std::size_t> normal;
    std::vector<std::size_t> anomalous;
};

/// Splits by circle-difference score: normal = score < normal_threshold,
/// anomalous = score >= anomalous_threshold; the band in between is unused.
inline TrainingSelection select_training_sets(std::span<const double> scores, const ShapeTrainConfig& cfg) {
    if (scores.empty()) throw InvalidInput("select_training_sets: no scores");
    TrainingSelection sel;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] < cfg.normal_threshold)
            sel.normal.push_back(i);
        else if (scores[i] >= cfg.anomalous_threshold)
            sel.anomalous.push_back(i);
    }
    if (sel.normal.empty())
        throw TrainingFailed("training impossible: no impurity scores below the normal threshold");
    if (sel.anomalous.empty() && cfg.blank_labels)
        throw TrainingFailed("training impossible: blank-label training needs anomalous impurities");
    return sel;
}

/// Threshold, then erode, then dilate.
inline BinaryImage postprocess(const FloatImage& img, const PostprocessParams& p) {
    if (p.kernel_size < 1 || p.kernel_size % 2 == 0) throw InvalidInput("postprocess: kernel size must be odd");
    BinaryImage out = threshold(img, static_cast<float>(p.binarize_threshold));
    for (int i = 0; i < p.erode_iterations; ++i) out = erode(out, p.kernel_size);
    for (int i = 0; i < p.dilate_iterations; ++i) out = dilate(out, p.kernel_size);
    return out;
}

/// Mean squared error between two binary images, on the 0-255 intensity scale
/// when `scale_255` is set, otherwise on 0-1.
inline double reconstruction_mse(const BinaryImage& input, const BinaryImage& output, bool scale_255 = true) {
    if (input.width != output.width || input.height != output.height)
        throw InvalidInput("reconstruction_mse: size mismatch");
    if (input.size() == 0) return 0.0;
    std::size_t diff = 0;
    for (std::size_t i = 0; i < input.size(); ++i) diff += (input.pixels[i] != 0) != (output.pixels[i] != 0);
    const double unit = scale_255 ? 255.0 * 255.0 : 1.0;
    return unit * double(diff) / double(input.size());
}

/// Per-impurity product of the spatial and shape channels, min-max normalized.
inline std::vector<double> combined_scores(std::span<const double> spatial, std::span<const double> shape) {
    if (spatial.size() != shape.size())
        throw InvalidInput("combined_scores: id mismatch (" + std::to_string(spatial.size()) + " spatial vs " +
                           std::to_string(shape.size()) + " shape)");
    std::vector<double> product(spatial.size());
    for (std::size_t i = 0; i < spatial.size(); ++i) product[i] = spatial[i] * shape[i];
    return min_max_normalize(product);
}

} // namespace anomet
