#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "symbreak/experiment.hpp"

namespace {

using namespace symbreak;

ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed,
                             const std::string& out_dir) {
    ExperimentConfig cfg = ExperimentConfig::load(path);
    if (seed) cfg.seeds = {*seed};
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return cfg;
}

int cmd_gen_data(const ExperimentConfig& cfg) {
    for (std::uint64_t seed : cfg.seeds) {
        const RegressionDataset data = build_dataset(cfg, seed);
        save_dataset_snapshot(cfg.out_dir, cfg.experiment + "_seed" + std::to_string(seed),
                              data);
        std::cout << "seed " << seed << ": " << data.x_train.rows() << " train / "
                  << data.x_test.rows() << " test rows -> " << cfg.out_dir << '\n';
    }
    return 0;
}

int cmd_train_map(const ExperimentConfig& cfg) {
    const Architecture arch =
        Architecture::mlp(cfg.dims, activation_from_string(cfg.activation));
    const GaussianLikelihood lik{cfg.likelihood_sigma};
    std::filesystem::create_directories(cfg.out_dir);
    for (std::uint64_t seed : cfg.seeds) {
        const RegressionDataset data = build_dataset(cfg, seed);
        SeededRng rng(SeededRng::derive_seed(seed, 2));
        TrainLog log;
        const MlpParams params = train_map(arch, data, lik, cfg.map, rng, &log);
        const std::string stem = cfg.out_dir + "/map_seed" + std::to_string(seed);
        save_params(stem + "_params.txt", params);
        log.save_csv(stem + "_log.csv", "log_joint");
        std::cout << "seed " << seed << ": final log-joint " << log.objective.back()
                  << " -> " << stem << "_params.txt\n";
    }
    return 0;
}

int report_summaries(const std::vector<ColumnSummary>& summaries,
                     const ExperimentConfig& cfg) {
    bool any_failed = false;
    for (const auto& s : summaries) {
        std::cout << s.column << ": RMSE " << s.rmse_mean << " +- " << s.rmse_std
                  << ", LPP " << s.lpp_mean << " +- " << s.lpp_std << " (" << s.completed
                  << "/" << cfg.seeds.size() << " seeds)\n";
        if (s.completed < cfg.seeds.size()) any_failed = true;
    }
    std::cout << "aggregate written to " << cfg.out_dir << "/aggregate.{csv,txt}\n";
    return any_failed ? 1 : 0;
}

int cmd_train_vi(const ExperimentConfig& cfg, std::size_t threads) {
    const auto summaries =
        run_experiment(cfg, {run_spec_from_config(cfg)}, threads);
    return report_summaries(summaries, cfg);
}

int cmd_suite(const ExperimentConfig& cfg, std::size_t threads) {
    std::vector<RunSpec> specs;
    const auto& columns = cfg.suite_columns.empty() ? all_columns() : cfg.suite_columns;
    for (const std::string& col : columns) specs.push_back(run_spec_for_column(col));
    const auto summaries = run_experiment(cfg, specs, threads);
    return report_summaries(summaries, cfg);
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint) {
    auto [q, assignment] = load_posterior(checkpoint);
    const GaussianLikelihood lik{cfg.likelihood_sigma};
    std::filesystem::create_directories(cfg.out_dir);
    for (std::uint64_t seed : cfg.seeds) {
        const RegressionDataset data = build_dataset(cfg, seed);
        const EvalReport report = evaluate(q, assignment, data, lik, cfg.eval_samples,
                                           SeededRng::derive_seed(seed, 5));
        const std::string stem = cfg.out_dir + "/eval_seed" + std::to_string(seed);
        save_report_json(stem + "_report.json", report, cfg.to_json());
        save_report_csv(stem + "_points.csv", report);
        std::cout << "seed " << seed << ": RMSE " << report.rmse << ", LPP " << report.lpp
                  << '\n';
    }
    return 0;
}

int cmd_verify_masks(const ExperimentConfig& cfg) {
    const std::vector<std::vector<std::size_t>> family = {{2, 3, 2}, {3, 4, 4, 3}};
    const auto reports = verify_masks(cfg, family);
    for (const auto& r : reports) {
        std::cout << "dims";
        for (std::size_t d : r.dims) std::cout << ' ' << d;
        std::cout << " -> residual permutations per hidden layer:";
        for (std::size_t c : r.residual_counts) std::cout << ' ' << c;
        std::cout << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"structured partial stochasticity experiments for Bayesian MLPs"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand name

    std::string config_path, out_dir, checkpoint;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;
    app.add_option("--config", config_path, "experiment config JSON")->required();
    app.add_option("--seed", seed, "override the config seed list with one seed");
    app.add_option("--out", out_dir, "output directory override");
    app.add_option("--threads", threads, "parallel worker slots (0 = hardware)");

    auto* gen = app.add_subcommand("gen-data", "generate or load the dataset snapshot");
    auto* tmap = app.add_subcommand("train-map", "MAP-train the baseline network");
    auto* tvi = app.add_subcommand("train-vi", "run the configured MFVI pipeline per seed");
    auto* ev = app.add_subcommand("evaluate", "evaluate a saved posterior checkpoint");
    ev->add_option("--checkpoint", checkpoint, "posterior checkpoint path")->required();
    auto* suite = app.add_subcommand("suite", "run the multi-column results table");
    auto* verify = app.add_subcommand("verify-masks",
                                      "brute-force residual-symmetry report");

    CLI11_PARSE(app, argc, argv);

    try {
        const ExperimentConfig cfg = load_config(config_path, seed, out_dir);
        if (gen->parsed()) return cmd_gen_data(cfg);
        if (tmap->parsed()) return cmd_train_map(cfg);
        if (tvi->parsed()) return cmd_train_vi(cfg, threads);
        if (ev->parsed()) return cmd_evaluate(cfg, checkpoint);
        if (suite->parsed()) return cmd_suite(cfg, threads);
        if (verify->parsed()) return cmd_verify_masks(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
