#pragma once

// Pipeline configuration: JSON file, unknown keys rejected, every constant
// overridable as "section.key=value".

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <string>

#include <json.hpp>

#include "area.hpp"
#include "error.hpp"
#include "image_io.hpp"
#include "ingestion.hpp"
#include "shape.hpp"
#include "spatial.hpp"

namespace anomet {

enum class Normalization { per_scan, dataset };
enum class AreaNormalization { none, scan_area };

struct PipelineConfig {
    // input
    std::string scan_dir;
    std::string manifest;  // optional training manifest
    MaskLoadOptions mask;
    Connectivity connectivity = Connectivity::eight;
    // output
    std::string out_dir = "anomet-out";
    std::string model_path;  // empty: <out_dir>/model.bin
    bool overlays = true;

    std::uint64_t seed = 42;
    unsigned workers = 1;

    SpatialParams spatial;
    Normalization spatial_normalization = Normalization::per_scan;

    ShapeTrainConfig shape;
    bool train = true;        // run: train a model rather than load one
    bool mse_scale_255 = true;
    PostprocessParams post;

    PriceParams price;
    ClusteringOptions clustering;
    AreaNormalization area_normalization = AreaNormalization::none;

    std::string resolved_model_path() const { return model_path.empty() ? out_dir + "/model.bin" : model_path; }

    void validate() const {
        if (spatial.k < 1) throw InvalidInput("config: spatial.k must be >= 1");
        if (!std::isfinite(spatial.c1) || !std::isfinite(spatial.c2)) throw InvalidInput("config: spatial exponents must be finite");
        if (mask.binarize_threshold < 0 || mask.binarize_threshold > 255) throw InvalidInput("config: input.threshold must be in [0,255]");
        shape.validate();
        if (post.kernel_size < 1 || post.kernel_size % 2 == 0) throw InvalidInput("config: postprocess.kernel_size must be odd");
        if (post.erode_iterations < 0 || post.dilate_iterations < 0)
            throw InvalidInput("config: postprocess iterations must be >= 0");
        price.validate();
        if (clustering.k < 1) throw InvalidInput("config: clustering.k must be >= 1");
        if (clustering.pass_budget < 1) throw InvalidInput("config: clustering.pass_budget must be >= 1");
        if (workers < 1) throw InvalidInput("config: workers must be >= 1");
    }
};

namespace detail {

using json = nlohmann::json;

template <typename E>
std::string enum_name(E v, const std::map<std::string, E>& names) {
    for (const auto& [k, e] : names)
        if (e == v) return k;
    return "?";
}

template <typename E>
E enum_value(const json& j, const std::map<std::string, E>& names, const std::string& key) {
    const auto s = j.get<std::string>();
    auto it = names.find(s);
    if (it == names.end()) {
        std::string opts;
        for (const auto& [k, e] : names) opts += (opts.empty() ? "" : ", ") + k;
        throw InvalidInput("config: " + key + " must be one of " + opts + ", got '" + s + "'");
    }
    return it->second;
}

inline const std::map<std::string, Polarity> kPolarity{{"light_on_dark", Polarity::light_on_dark},
                                                       {"dark_on_light", Polarity::dark_on_light}};
inline const std::map<std::string, Normalization> kNormalization{{"per_scan", Normalization::per_scan},
                                                                 {"dataset", Normalization::dataset}};
inline const std::map<std::string, DistanceNormalizer> kDistance{{"image_diagonal", DistanceNormalizer::image_diagonal},
                                                                 {"none", DistanceNormalizer::none}};
inline const std::map<std::string, Convergence> kConvergence{{"literal", Convergence::literal},
                                                             {"no_state_change", Convergence::no_state_change}};
inline const std::map<std::string, AreaNormalization> kAreaNorm{{"none", AreaNormalization::none},
                                                                {"scan_area", AreaNormalization::scan_area}};

using Setter = std::function<void(const json&, const std::string&)>;

inline void read_section(const json& j, const std::string& prefix, const std::map<std::string, Setter>& fields) {
    if (!j.is_object()) throw InvalidInput("config: '" + prefix + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        auto it = fields.find(key);
        if (it == fields.end()) throw InvalidInput("config: unknown key '" + path + "'");
        try {
            it->second(value, path);
        } catch (const json::exception& e) {
            throw InvalidInput("config: bad value for '" + path + "': " + e.what());
        }
    }
}

template <typename T>
Setter assign(T& dst) {
    return [&dst](const json& v, const std::string&) { dst = v.get<T>(); };
}

template <typename T, std::size_t N>
Setter assign_array(std::array<T, N>& dst) {
    return [&dst](const json& v, const std::string& path) {
        if (!v.is_array() || v.size() != N)
            throw InvalidInput("config: '" + path + "' must be an array of " + std::to_string(N) + " numbers");
        for (std::size_t i = 0; i < N; ++i) dst[i] = v[i].get<T>();
    };
}

template <typename E>
Setter assign_enum(E& dst, const std::map<std::string, E>& names) {
    return [&dst, &names](const json& v, const std::string& path) { dst = enum_value(v, names, path); };
}

} // namespace detail

inline nlohmann::json config_to_json(const PipelineConfig& c) {
    using detail::enum_name;
    nlohmann::json j;
    j["input"] = {{"scan_dir", c.scan_dir},
                  {"manifest", c.manifest},
                  {"threshold", c.mask.binarize_threshold},
                  {"polarity", enum_name(c.mask.polarity, detail::kPolarity)},
                  {"fill_outlines", c.mask.fill_outlines},
                  {"connectivity", static_cast<int>(c.connectivity)}};
    j["output"] = {{"out_dir", c.out_dir}, {"model_path", c.model_path}, {"overlays", c.overlays}};
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["spatial"] = {{"k", c.spatial.k},
                    {"c1", c.spatial.c1},
                    {"c2", c.spatial.c2},
                    {"normalization", enum_name(c.spatial_normalization, detail::kNormalization)}};
    j["shape"] = {{"normal_threshold", c.shape.normal_threshold},
                  {"anomalous_threshold", c.shape.anomalous_threshold},
                  {"image_size", c.shape.image_size},
                  {"blank_labels", c.shape.blank_labels},
                  {"epochs", c.shape.epochs},
                  {"learning_rate", c.shape.learning_rate},
                  {"batch_size", c.shape.batch_size},
                  {"channel_width", c.shape.channel_width},
                  {"train", c.train},
                  {"mse_scale_255", c.mse_scale_255}};
    j["postprocess"] = {{"binarize_threshold", c.post.binarize_threshold},
                        {"kernel_size", c.post.kernel_size},
                        {"erode_iterations", c.post.erode_iterations},
                        {"dilate_iterations", c.post.dilate_iterations}};
    j["price"] = {{"c1", c.price.c1},
                  {"c2", c.price.c2},
                  {"c3", c.price.c3},
                  {"c4", c.price.c4},
                  {"c5", c.price.c5},
                  {"c6", c.price.c6},
                  {"c7", c.price.c7},
                  {"distance_normalizer", enum_name(c.price.distance_normalizer, detail::kDistance)},
                  {"wallet_scale", c.price.wallet_scale}};
    j["clustering"] = {{"k", c.clustering.k},
                       {"pass_budget", c.clustering.pass_budget},
                       {"convergence", enum_name(c.clustering.convergence, detail::kConvergence)},
                       {"area_normalization", enum_name(c.area_normalization, detail::kAreaNorm)}};
    return j;
}

/// Starts from the defaults and applies every key present in `j`.
inline PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig c = {}) {
    using namespace detail;
    int connectivity = static_cast<int>(c.connectivity);
    read_section(j, "",
                 {{"input",
                   [&](const json& v, const std::string& p) {
                       read_section(v, p,
                                    {{"scan_dir", assign(c.scan_dir)},
                                     {"manifest", assign(c.manifest)},
                                     {"threshold", assign(c.mask.binarize_threshold)},
                                     {"polarity", assign_enum(c.mask.polarity, kPolarity)},
                                     {"fill_outlines", assign(c.mask.fill_outlines)},
                                     {"connectivity", assign(connectivity)}});
                   }},
                  {"output",
                   [&](const json& v, const std::string& p) {
                       read_section(v, p,
                                    {{"out_dir", assign(c.out_dir)},
                                     {"model_path", assign(c.model_path)},
                                     {"overlays", assign(c.overlays)}});
                   }},
                  {"seed", assign(c.seed)},
                  {"workers", assign(c.workers)},
                  {"spatial",
                   [&](const json& v, const std::string& p) {
                       read_section(v, p,
                                    {{"k", assign(c.spatial.k)},
                                     {"c1", assign(c.spatial.c1)},
                                     {"c2", assign(c.spatial.c2)},
                                     {"normalization", assign_enum(c.spatial_normalization, kNormalization)}});
                   }},
                  {"shape",
                   [&](const json& v, const std::string& p) {
                       read_section(v, p,
                                    {{"normal_threshold", assign(c.shape.normal_threshold)},
                                     {"anomalous_threshold", assign(c.shape.anomalous_threshold)},
                                     {"image_size", assign(c.shape.image_size)},
                                     {"blank_labels", assign(c.shape.blank_labels)},
                                     {"epochs", assign(c.shape.epochs)},
                                     {"learning_rate", assign(c.shape.learning_rate)},
                                     {"batch_size", assign(c.shape.batch_size)},
                                     {"channel_width", assign(c.shape.channel_width)},
                                     {"train", assign(c.train)},
                                     {"mse_scale_255", assign(c.mse_scale_255)}});
                   }},
                  {"postprocess",
                   [&](const json& v, const std::string& p) {
                       read_section(v, p,
                                    {{"binarize_threshold", assign(c.post.binarize_threshold)},
                                     {"kernel_size", assign(c.post.kernel_size)},
                                     {"erode_iterations", assign(c.post.erode_iterations)},
                                     {"dilate_iterations", assign(c.post.dilate_iterations)}});
                   }},
                  {"price",
                   [&](const json& v, const std::string& p) {
                       read_section(v, p,
                                    {{"c1", assign(c.price.c1)},
                                     {"c2", assign_array(c.price.c2)},
                                     {"c3", assign_array(c.price.c3)},
                                     {"c4", assign(c.price.c4)},
                                     {"c5", assign_array(c.price.c5)},
                                     {"c6", assign(c.price.c6)},
                                     {"c7", assign(c.price.c7)},
                                     {"distance_normalizer", assign_enum(c.price.distance_normalizer, kDistance)},
                                     {"wallet_scale", assign(c.price.wallet_scale)}});
                   }},
                  {"clustering", [&](const json& v, const std::string& p) {
                       read_section(v, p,
                                    {{"k", assign(c.clustering.k)},
                                     {"pass_budget", assign(c.clustering.pass_budget)},
                                     {"convergence", assign_enum(c.clustering.convergence, kConvergence)},
                                     {"area_normalization", assign_enum(c.area_normalization, kAreaNorm)}});
                   }}});
    if (connectivity != 4 && connectivity != 8) throw InvalidInput("config: input.connectivity must be 4 or 8");
    c.connectivity = connectivity == 4 ? Connectivity::four : Connectivity::eight;
    c.shape.rng_seed = c.seed;
    c.clustering.workers = c.workers;
    c.validate();
    return c;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidInput("config: cannot read " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("config: " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

/// Applies "section.key=value"; the value is parsed as JSON, falling back to a
/// plain string.
inline PipelineConfig apply_override(const PipelineConfig& c, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidInput("override '" + assignment + "' must be key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    nlohmann::json patch = nlohmann::json::object();
    nlohmann::json* node = &patch;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw InvalidInput("override key '" + key + "' is malformed");
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = value;
    return config_from_json(patch, c);
}

} // namespace anomet
