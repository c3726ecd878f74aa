#pragma once

// File-based pipeline stages. Each stage reads the previous stage's files from
// the output directory, so every intermediate can be inspected or replaced.
//
//   <out>/<scan>.imp             impurity store
//   <out>/<scan>.spatial.txt     score records (also .shape.txt, .combined.txt)
//   <out>/<scan>.clusters.txt    cluster records with am
//   <out>/model.bin              shape autoencoder
//   <out>/training.txt           per-epoch training loss
//   <out>/report.txt             globally ranked clusters, most anomalous first
//   <out>/deciles.txt            cluster count per decile
//   <out>/overlays/<scan>.{combined,clusters}.png

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "area.hpp"
#include "autoencoder.hpp"
#include "config.hpp"
#include "error.hpp"
#include "image_io.hpp"
#include "ingestion.hpp"
#include "parallel.hpp"
#include "render.hpp"
#include "report.hpp"
#include "shape.hpp"
#include "spatial.hpp"

namespace anomet {

/// Error raised by a pipeline stage; what() reads "<stage>: <message>".
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, Error::Kind kind, const std::string& msg)
        : std::runtime_error(stage + ": " + msg), stage_(std::move(stage)), kind_(kind) {}

    const std::string& stage() const noexcept { return stage_; }
    Error::Kind kind() const noexcept { return kind_; }

private:
    std::string stage_;
    Error::Kind kind_;
};

namespace fs = std::filesystem;

struct ScanSource {
    std::string scan_id;
    std::string path;
};

namespace detail {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e.kind(), e.what());
    } catch (const fs::filesystem_error& e) {
        throw StageError(name, Error::Kind::invalid_input, e.what());
    }
}

inline std::string out_path(const PipelineConfig& cfg, const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InvalidInput("cannot create directory " + dir + ": " + ec.message());
}

inline bool is_raster(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return ext == ".png" || ext == ".tif" || ext == ".tiff" || ext == ".bmp" || ext == ".jpg" || ext == ".jpeg" ||
           ext == ".pgm" || ext == ".ppm" || ext == ".pbm";
}

} // namespace detail

/// Mask rasters in the scan directory, sorted by file name. The scan id is the
/// file stem.
inline std::vector<ScanSource> list_scans(const PipelineConfig& cfg) {
    if (cfg.scan_dir.empty()) throw InvalidInput("no scan directory configured");
    if (!fs::is_directory(cfg.scan_dir)) throw InvalidInput("scan directory not found: " + cfg.scan_dir);
    std::vector<ScanSource> out;
    for (const auto& entry : fs::directory_iterator(cfg.scan_dir))
        if (entry.is_regular_file() && detail::is_raster(entry.path()))
            out.push_back({entry.path().stem().string(), entry.path().string()});
    std::sort(out.begin(), out.end(), [](const ScanSource& a, const ScanSource& b) { return a.path < b.path; });
    for (std::size_t i = 0; i < out.size(); ++i) {
        check_token(out[i].scan_id, "scan id");
        if (i && out[i].scan_id == out[i - 1].scan_id) throw InvalidInput("duplicate scan id '" + out[i].scan_id + "'");
    }
    if (out.empty()) throw InvalidInput("no scan images in " + cfg.scan_dir);
    return out;
}

/// Scan with pixel masks and normalized shape images, extracted from the raster.
inline Scan load_scan_pixels(const PipelineConfig& cfg, const ScanSource& src) {
    Scan scan = extract_impurities(load_mask(src.path, cfg.mask), src.scan_id, cfg.connectivity);
    attach_shape_images(scan, cfg.shape.image_size);
    return scan;
}

inline void stage_extract(const PipelineConfig& cfg, std::ostream* log = nullptr) {
    detail::stage("extract", [&] {
        const auto scans = list_scans(cfg);
        detail::ensure_dir(cfg.out_dir);
        std::vector<std::size_t> counts(scans.size());
        parallel_for_chunks(scans.size(), cfg.workers, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                Scan scan = extract_impurities(load_mask(scans[i].path, cfg.mask), scans[i].scan_id, cfg.connectivity);
                persist_impurities(scan, detail::out_path(cfg, scans[i].scan_id + ".imp"));
                counts[i] = scan.size();
            }
        });
        if (log)
            for (std::size_t i = 0; i < scans.size(); ++i)
                *log << "extract: " << scans[i].scan_id << " " << counts[i] << " impurities\n";
    });
}

inline Scan load_stored_scan(const PipelineConfig& cfg, const std::string& scan_id) {
    return load_impurities(detail::out_path(cfg, scan_id + ".imp"));
}

inline void stage_score_spatial(const PipelineConfig& cfg, std::ostream* log = nullptr) {
    detail::stage("spatial", [&] {
        const auto scans = list_scans(cfg);
        std::vector<std::vector<double>> raw(scans.size());
        parallel_for_chunks(scans.size(), cfg.workers, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) raw[i] = spatial_raw_scores(load_stored_scan(cfg, scans[i].scan_id), cfg.spatial);
        });
        if (cfg.spatial_normalization == Normalization::dataset) {
            std::vector<double> all;
            for (const auto& r : raw) all.insert(all.end(), r.begin(), r.end());
            const auto norm = min_max_normalize(all);
            std::size_t at = 0;
            for (auto& r : raw)
                for (auto& v : r) v = norm[at++];
        } else {
            for (auto& r : raw) r = min_max_normalize(r);
        }
        for (std::size_t i = 0; i < scans.size(); ++i)
            save_scores(detail::out_path(cfg, scans[i].scan_id + ".spatial.txt"), scans[i].scan_id, "spatial", raw[i]);
        if (log) *log << "spatial: scored " << scans.size() << " scans\n";
    });
}

/// Training images from a manifest: one "<normal|anomalous> <path>" per line;
/// every impurity in each listed raster becomes a sample.
inline void read_manifest_images(const PipelineConfig& cfg, std::vector<BinaryImage>& normal,
                                 std::vector<BinaryImage>& anomalous) {
    std::ifstream is(cfg.manifest);
    if (!is) throw InvalidInput("cannot read training manifest " + cfg.manifest);
    const fs::path base = fs::path(cfg.manifest).parent_path();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string label, path;
        if (!(ls >> label) || label[0] == '#') continue;
        if (!(ls >> path) || (label != "normal" && label != "anomalous"))
            throw MalformedRecord("manifest line " + std::to_string(lineno) + ": expected '<normal|anomalous> <path>'");
        fs::path p(path);
        if (p.is_relative()) p = base / p;
        Scan s = extract_impurities(load_mask(p.string(), cfg.mask), "manifest", cfg.connectivity);
        attach_shape_images(s, cfg.shape.image_size);
        for (auto& imp : s.impurities) (label == "normal" ? normal : anomalous).push_back(std::move(*imp.shape_image));
    }
}

inline TrainingReport stage_train_shape(const PipelineConfig& cfg, std::ostream* log = nullptr) {
    return detail::stage("train", [&] {
        std::vector<BinaryImage> normal, anomalous;
        if (!cfg.manifest.empty()) {
            read_manifest_images(cfg, normal, anomalous);
            if (normal.empty()) throw TrainingFailed("training impossible: manifest lists no normal impurities");
        } else {
            std::vector<double> diff;
            std::vector<BinaryImage> images;
            for (const auto& src : list_scans(cfg)) {
                Scan scan = load_scan_pixels(cfg, src);
                for (auto& imp : scan.impurities) {
                    diff.push_back(circle_diff_score(imp));
                    images.push_back(std::move(*imp.shape_image));
                }
            }
            if (diff.empty()) throw TrainingFailed("training impossible: no impurities");
            const auto sel = select_training_sets(diff, cfg.shape);
            for (auto i : sel.normal) normal.push_back(images[i]);
            for (auto i : sel.anomalous) anomalous.push_back(images[i]);
        }
        if (log)
            *log << "train: " << normal.size() << " normal, " << anomalous.size() << " anomalous images"
                 << (cfg.shape.blank_labels ? " (blank labels)" : "") << "\n";
        TrainingReport report;
        ShapeModel model = train_shape_model(normal, anomalous, cfg.shape, &report, [&](int epoch, double loss) {
            if (log) *log << "train: epoch " << epoch << " loss " << format_fixed(loss, 6) << "\n";
        });
        detail::ensure_dir(cfg.out_dir);
        const std::string model_path = cfg.resolved_model_path();
        if (auto parent = fs::path(model_path).parent_path(); !parent.empty()) detail::ensure_dir(parent.string());
        model.save(model_path);
        std::ofstream tl(detail::out_path(cfg, "training.txt"));
        tl << "# epoch loss\n";
        for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
            tl << e + 1 << ' ' << format_fixed(report.epoch_loss[e], 6) << '\n';
        return report;
    });
}

inline void stage_score_shape(const PipelineConfig& cfg, std::ostream* log = nullptr) {
    detail::stage("shape", [&] {
        const std::string model_path = cfg.resolved_model_path();
        if (!fs::is_regular_file(model_path)) throw InvalidInput("model unavailable (" + model_path + ")");
        ShapeModel model = ShapeModel::load(model_path);
        for (const auto& src : list_scans(cfg)) {
            Scan scan = load_scan_pixels(cfg, src);
            if (scan.size() != load_stored_scan(cfg, src.scan_id).size())
                throw InvalidInput("scan '" + src.scan_id + "' no longer matches its impurity store");
            const auto s = shape_scores(scan, model, cfg.post, cfg.mse_scale_255);
            save_scores(detail::out_path(cfg, src.scan_id + ".shape.txt"), src.scan_id, "shape", s);
        }
        if (log) *log << "shape: scored with " << model_path << "\n";
    });
}

inline void stage_score_combined(const PipelineConfig& cfg, std::ostream* log = nullptr) {
    detail::stage("combined", [&] {
        const auto scans = list_scans(cfg);
        for (const auto& src : scans) {
            const auto sp = load_scores(detail::out_path(cfg, src.scan_id + ".spatial.txt"), src.scan_id, "spatial");
            const auto sh = load_scores(detail::out_path(cfg, src.scan_id + ".shape.txt"), src.scan_id, "shape");
            save_scores(detail::out_path(cfg, src.scan_id + ".combined.txt"), src.scan_id, "combined",
                        combined_scores(sp, sh));
        }
        if (log) *log << "combined: scored " << scans.size() << " scans\n";
    });
}

inline void stage_cluster(const PipelineConfig& cfg, std::ostream* log = nullptr) {
    detail::stage("cluster", [&] {
        const auto scans = list_scans(cfg);
        std::vector<std::vector<ClusterRecord>> records(scans.size());
        ClusteringOptions opt = cfg.clustering;
        opt.workers = 1;  // scans already run in parallel
        parallel_for_chunks(scans.size(), cfg.workers, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                const Scan scan = load_stored_scan(cfg, scans[i].scan_id);
                const auto scores =
                    load_scores(detail::out_path(cfg, scans[i].scan_id + ".combined.txt"), scans[i].scan_id, "combined");
                auto result = market_clustering(scan, scores, cfg.price, opt);
                const double area_scale = cfg.area_normalization == AreaNormalization::scan_area
                                              ? 1.0 / (double(scan.width) * double(scan.height))
                                              : 1.0;
                for (std::size_t c = 0; c < result.clusters.size(); ++c) {
                    result.clusters[c].am = area_measure(result.clusters[c], scores, scan, area_scale);
                    records[i].push_back({scans[i].scan_id, c, result.clusters[c], 0, 0});
                }
            }
        });
        for (std::size_t i = 0; i < scans.size(); ++i)
            save_cluster_records(detail::out_path(cfg, scans[i].scan_id + ".clusters.txt"), records[i]);
        if (log) *log << "cluster: clustered " << scans.size() << " scans\n";
    });
}

inline std::vector<ClusterRecord> stage_rank(const PipelineConfig& cfg, std::ostream* log = nullptr) {
    return detail::stage("rank", [&] {
        std::vector<ScanClusters> all;
        for (const auto& src : list_scans(cfg)) {
            ScanClusters sc{src.scan_id, {}};
            for (auto& r : load_cluster_records(detail::out_path(cfg, src.scan_id + ".clusters.txt"))) {
                if (r.scan_id != src.scan_id) throw MalformedRecord("cluster file of '" + src.scan_id + "' names " + r.scan_id);
                sc.clusters.push_back(std::move(r.cluster));
            }
            all.push_back(std::move(sc));
        }
        const auto ranked = rank_clusters(all);
        std::vector<ClusterRecord> report;
        for (auto it = ranked.rbegin(); it != ranked.rend(); ++it)
            report.push_back({it->scan_id, it->cluster_index, it->cluster, it->rank, it->decile});
        save_cluster_records(detail::out_path(cfg, "report.txt"), report);

        std::ofstream d(detail::out_path(cfg, "deciles.txt"));
        d << "# decile clusters (of " << ranked.size() << ")\n";
        for (int dec = 1; dec <= 10; ++dec)
            d << dec << ' '
              << std::count_if(ranked.begin(), ranked.end(), [&](const RankedCluster& r) { return r.decile == dec; })
              << '\n';
        if (log && !report.empty())
            *log << "rank: " << report.size() << " clusters, top: " << report.front().scan_id << " cluster "
                 << report.front().index << "\n";
        return report;
    });
}

inline void stage_render(const PipelineConfig& cfg, std::ostream* log = nullptr) {
    detail::stage("render", [&] {
        const auto report = load_cluster_records(detail::out_path(cfg, "report.txt"));
        double lo = INFINITY, hi = -INFINITY;
        for (const auto& r : report) {
            lo = std::min(lo, r.cluster.am);
            hi = std::max(hi, r.cluster.am);
        }
        const std::string dir = detail::out_path(cfg, "overlays");
        detail::ensure_dir(dir);
        const auto scans = list_scans(cfg);
        parallel_for_chunks(scans.size(), cfg.workers, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                const auto& src = scans[i];
                const MaskImage mask = load_mask(src.path, cfg.mask);
                const Scan scan = extract_impurities(mask, src.scan_id, cfg.connectivity);
                const RgbImage bg = mask_background(mask);
                const auto combined = load_scores(detail::out_path(cfg, src.scan_id + ".combined.txt"), src.scan_id, "combined");
                save_rgb(render_overlay(scan, combined, bg), (fs::path(dir) / (src.scan_id + ".combined.png")).string());

                // Unclustered impurities take the bottom of the scale.
                std::vector<double> tint(scan.size(), 0.0);
                for (const auto& r : report) {
                    if (r.scan_id != src.scan_id) continue;
                    const double v = hi > lo ? (r.cluster.am - lo) / (hi - lo) : 0.0;
                    for (int m : r.cluster.members) tint.at(std::size_t(m)) = v;
                }
                save_rgb(render_overlay(scan, tint, bg), (fs::path(dir) / (src.scan_id + ".clusters.png")).string());
            }
        });
        if (log) *log << "render: " << scans.size() << " overlays in " << dir << "\n";
    });
}

/// All stages in order. Trains the shape model when `cfg.train` is set,
/// otherwise loads it from the configured path.
inline std::vector<ClusterRecord> run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr) {
    stage_extract(cfg, log);
    stage_score_spatial(cfg, log);
    if (cfg.train) stage_train_shape(cfg, log);
    stage_score_shape(cfg, log);
    stage_score_combined(cfg, log);
    stage_cluster(cfg, log);
    auto report = stage_rank(cfg, log);
    if (cfg.overlays) stage_render(cfg, log);
    return report;
}

} // namespace anomet
