// ganlab command line: train/evaluate GAN ensembles on synthetic data.
//
//   ganlab run <config.json> [--seed N] [--out-dir DIR] [--jobs N]
//   ganlab eval <generated.csv> <test.csv> [--k 10] [--alpha 0.05]
//                                          [--baseline train.csv] [--jobs N]
//   ganlab summarize <manifest.json>
//
// Exit codes: 0 success, 1 invalid configuration or arguments,
//             2 runtime failure (a partial manifest is still written when
//             possible).

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ganlab/csv.hpp"
#include "ganlab/experiment.hpp"

namespace {

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> out_dir, std::size_t jobs) {
    ganlab::ExperimentConfig cfg;
    try {
        cfg = ganlab::load_experiment_config(config_path);
        if (seed) cfg.master_seed = *seed;
        if (out_dir) cfg.output_dir = *out_dir;
        cfg.validate();
    } catch (const ganlab::ValidationError& e) {
        std::cerr << "invalid config " << config_path << ":\n";
        for (const auto& item : e.items) std::cerr << "  - " << item << "\n";
        return 1;
    } catch (const ganlab::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        const ganlab::RunManifest manifest = ganlab::run_experiment(cfg, jobs);
        std::cout << "run complete: " << manifest.repetitions.size() << " repetition(s), "
                  << manifest.reports.size() << " report file(s)\n";
        std::cout << "manifest: "
                  << (std::filesystem::path(cfg.output_dir) / "manifest.json").string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        // Leave behind what we know about the failed run.
        try {
            nlohmann::json partial;
            partial["format"] = ganlab::kManifestFormat;
            partial["artifact_version"] = ganlab::kArtifactVersion;
            partial["config"] = ganlab::experiment_config_to_json(cfg);
            partial["config_hash"] = ganlab::config_hash(cfg);
            partial["status"] = "failed";
            partial["error"] = e.what();
            std::filesystem::create_directories(cfg.output_dir);
            std::ofstream out(std::filesystem::path(cfg.output_dir) / "manifest.json");
            out << partial.dump(2) << "\n";
            std::cerr << "partial manifest written to "
                      << (std::filesystem::path(cfg.output_dir) / "manifest.json").string()
                      << "\n";
        } catch (...) {
        }
        return 2;
    }
}

int cmd_eval(const std::string& generated_path, const std::string& test_path, std::size_t k,
             double alpha, const std::string& baseline_path, std::size_t jobs) {
    try {
        const ganlab::PointSet generated = ganlab::load_pointset_csv(generated_path);
        const ganlab::PointSet test = ganlab::load_pointset_csv(test_path);

        std::vector<ganlab::PointSet> targets = {test, generated};
        std::optional<ganlab::PointSet> baseline;
        if (!baseline_path.empty()) {
            baseline = ganlab::load_pointset_csv(baseline_path);
            targets.push_back(*baseline);
        }
        // Normalize every set with scales fitted on the reference: the
        // baseline when given, the test set otherwise.
        const ganlab::PointSet& reference = baseline ? *baseline : test;
        const std::vector<double> scales = ganlab::block_scales(reference);
        for (auto& t : targets) t = ganlab::apply_block_scales(std::move(t), scales);

        const ganlab::DistanceMatrix dm =
            ganlab::knn_distances(targets[0], targets[1], k, "generated", jobs);

        nlohmann::json out;
        out["n_test"] = dm.queries();
        out["n_generated"] = targets[1].size();
        out["k"] = k;
        nlohmann::json means = nlohmann::json::array();
        for (std::size_t j = 1; j <= k; ++j) means.push_back(ganlab::mean_distance_at(dm, j));
        out["mean_distance"] = std::move(means);

        if (baseline) {
            const std::size_t n_base = std::min(targets[2].size(), targets[1].size());
            const ganlab::PointSet base_sample =
                ganlab::detail::sample_rows(targets[2], n_base, 0);
            const ganlab::DistanceMatrix base_dm =
                ganlab::knn_distances(targets[0], base_sample, k, "pdata", jobs);
            out["dhat"] = ganlab::relative_nn_increase_curve(dm, base_dm);
            const ganlab::WilcoxonResult w = ganlab::wilcoxon_signed_rank(
                ganlab::detail::nearest_column(dm), ganlab::detail::nearest_column(base_dm),
                alpha);
            out["wilcoxon_vs_baseline"] = {{"n_effective", w.n_effective},
                                           {"w_plus", w.w_plus},
                                           {"p_value", w.p_value},
                                           {"code", w.code},
                                           {"alpha", w.alpha}};
        }
        std::cout << out.dump(2) << "\n";
        return 0;
    } catch (const ganlab::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ganlab::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
}

int cmd_summarize(const std::string& manifest_path) {
    try {
        const nlohmann::json summary = ganlab::report_summary(manifest_path);
        std::cout << summary.dump(2) << "\n";
        return 0;
    } catch (const ganlab::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GAN ensemble laboratory for low-dimensional synthetic distributions"};
    app.require_subcommand(1);

    std::size_t jobs = 1;
    app.add_option("--jobs", jobs, "worker threads for k-NN evaluation")
        ->check(CLI::PositiveNumber);

    auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--seed", seed, "override the master seed");
    run->add_option("--out-dir", out_dir, "override the output directory");

    auto* eval = app.add_subcommand("eval", "retrieval metrics for a generated set");
    std::string generated_path, test_path, baseline_path;
    std::size_t k = 10;
    double alpha = 0.05;
    eval->add_option("generated", generated_path, "generated points (CSV)")->required();
    eval->add_option("test", test_path, "test/query points (CSV)")->required();
    eval->add_option("--k", k, "nearest neighbors per query")->check(CLI::PositiveNumber);
    eval->add_option("--alpha", alpha, "significance level");
    eval->add_option("--baseline", baseline_path,
                     "training points (CSV); enables dhat and the signed-rank test");

    auto* summarize = app.add_subcommand("summarize", "consolidate a finished run");
    std::string manifest_path;
    summarize->add_option("manifest", manifest_path, "manifest.json of a run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (run->parsed()) return cmd_run(config_path, seed, out_dir, jobs);
    if (eval->parsed()) return cmd_eval(generated_path, test_path, k, alpha, baseline_path, jobs);
    return cmd_summarize(manifest_path);
}
