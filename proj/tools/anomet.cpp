// anomet: command-line front end for the impurity anomaly pipeline.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <anomet/config.hpp>
#include <anomet/log.hpp>
#include <anomet/pipeline.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTraining = 3;

int exit_code_for(anomet::Error::Kind kind) {
    return kind == anomet::Error::Kind::training_failed ? kExitTraining : kExitData;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Anomaly scoring, clustering and ranking of impurities in metallographic scan masks"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, scan_dir, out_dir, manifest;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    int k_spatial = 0, k_clusters = 0;
    unsigned workers = 0;
    bool quiet = false;

    app.add_option("-c,--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--scan-dir", scan_dir, "Directory of scan mask images");
    app.add_option("--out-dir", out_dir, "Directory for stage outputs");
    auto* seed_opt = app.add_option("--seed", seed, "RNG seed for shape model training");
    app.add_option("--k-spatial", k_spatial, "Neighbour rank k of the spatial score")->check(CLI::PositiveNumber);
    app.add_option("--k-clusters", k_clusters, "Number of clusters seeded per scan")->check(CLI::PositiveNumber);
    app.add_option("--workers", workers, "Worker threads for per-scan stages")->check(CLI::PositiveNumber);
    app.add_option("--set", overrides, "Override a config constant, e.g. --set price.c1=1.5");
    app.add_flag("-q,--quiet", quiet, "Suppress progress output and warnings");

    struct Command {
        const char* name;
        const char* help;
    };
    const std::vector<Command> commands{
        {"extract", "Label impurities in every scan and store their geometry"},
        {"score-spatial", "Spatial anomaly scores"},
        {"train-shape", "Train the shape autoencoder"},
        {"score-shape", "Shape anomaly scores from the trained model"},
        {"score-combined", "Combine spatial and shape scores"},
        {"cluster", "Group impurities into anomalous areas"},
        {"rank", "Rank clusters of all scans and assign deciles"},
        {"render", "Write colormapped overlays"},
        {"run", "Run every stage"},
        {"config", "Print the effective configuration as JSON"},
    };
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        if (std::string(c.name) == "train-shape")
            sub->add_option("--manifest", manifest, "Training manifest: '<normal|anomalous> <path>' per line");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    anomet::PipelineConfig cfg;
    try {
        if (!config_path.empty()) cfg = anomet::load_config(config_path);
        if (!scan_dir.empty()) cfg.scan_dir = scan_dir;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (*seed_opt) cfg = anomet::apply_override(cfg, "seed=" + std::to_string(seed));
        if (k_spatial > 0) cfg.spatial.k = k_spatial;
        if (k_clusters > 0) cfg.clustering.k = k_clusters;
        if (workers > 0) cfg = anomet::apply_override(cfg, "workers=" + std::to_string(workers));
        if (!manifest.empty()) cfg.manifest = manifest;
        for (const auto& o : overrides) cfg = anomet::apply_override(cfg, o);
        cfg.validate();
    } catch (const anomet::Error& e) {
        std::cerr << "config: " << e.what() << "\n";
        return kExitUsage;
    }

    anomet::warnings_enabled() = !quiet;
    std::ostream* log = quiet ? nullptr : &std::cerr;
    const std::string cmd = app.get_subcommands().front()->get_name();

    try {
        if (cmd == "config") {
            std::cout << anomet::config_to_json(cfg).dump(2) << "\n";
        } else if (cmd == "extract") {
            anomet::stage_extract(cfg, log);
        } else if (cmd == "score-spatial") {
            anomet::stage_score_spatial(cfg, log);
        } else if (cmd == "train-shape") {
            anomet::stage_train_shape(cfg, log);
        } else if (cmd == "score-shape") {
            anomet::stage_score_shape(cfg, log);
        } else if (cmd == "score-combined") {
            anomet::stage_score_combined(cfg, log);
        } else if (cmd == "cluster") {
            anomet::stage_cluster(cfg, log);
        } else if (cmd == "rank") {
            anomet::stage_rank(cfg, log);
        } else if (cmd == "render") {
            anomet::stage_render(cfg, log);
        } else if (cmd == "run") {
            anomet::run_pipeline(cfg, log);
        }
    } catch (const anomet::StageError& e) {
        std::cerr << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << cmd << ": " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
