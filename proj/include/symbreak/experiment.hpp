#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "symbreak/data.hpp"
#include "symbreak/map_training.hpp"
#include "symbreak/metrics.hpp"
#include "symbreak/mfvi.hpp"
#include "symbreak/sym_oracle.hpp"

namespace symbreak {

// Full experiment description, loaded from a JSON config file and echoed
// verbatim into every report.
struct ExperimentConfig {
    std::string experiment = "toy";  // toy | uci
    std::vector<std::size_t> dims = {1, 50, 50, 1};
    std::string activation = "sigmoid";

    std::string scheme = "none";  // none | light | heavy | random
    std::string policy = "prune";
    double c = 5.0;
    bool c_learnable = false;
    std::size_t random_n_fixed = 0;  // scheme=random; 0 = match the heavy count

    double likelihood_sigma = 0.05;
    AdamConfig vi;
    std::size_t train_samples = 16;
    std::size_t eval_samples = 300;
    AdamConfig map;  // MAP pretraining (policy=map and the HMAP/LMAP columns)

    std::vector<std::uint64_t> seeds = {0};
    GpGenConfig gp;
    std::string data_path;  // uci CSV
    std::string out_dir = "results";

    std::vector<std::string> suite_columns;  // empty = all nine
    std::size_t grid_points = 161;           // toy prediction grid over [-4, 4]

    void validate() const;
    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
    static ExperimentConfig load(const std::string& path);
};

// One (scheme, policy) cell of the results table.
struct RunSpec {
    std::string name;                    // e.g. "HF"
    std::optional<Scheme> scheme;        // nullopt = vanilla or random
    bool random_mask = false;
    std::optional<Scheme> random_size_of;  // which structured count a random mask copies
    Policy policy = Policy::Prune;
    bool uses_c = false;
};

RunSpec run_spec_from_config(const ExperimentConfig& cfg);
RunSpec run_spec_for_column(const std::string& column);
const std::vector<std::string>& all_columns();

struct SeedResult {
    std::uint64_t seed = 0;
    EvalReport report;
    double final_c = 0.0;
    bool failed = false;
    std::string error;
};

struct ColumnSummary {
    std::string column;
    double rmse_mean = 0.0, rmse_std = 0.0;
    double lpp_mean = 0.0, lpp_std = 0.0;
    std::size_t completed = 0;
};

// Build the dataset for one trial.
RegressionDataset build_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

// Data -> (optional MAP) -> mask+assignment -> MFVI -> evaluate, writing
// the per-seed report JSON (and the toy prediction grid) under out_dir.
SeedResult run_single(const ExperimentConfig& cfg, const RunSpec& spec, std::uint64_t seed);

// Multi-seed (and, for suites, multi-column) driver; seeds run in
// parallel worker slots. Writes aggregate CSV and aligned-text tables.
std::vector<ColumnSummary> run_experiment(const ExperimentConfig& cfg,
                                          const std::vector<RunSpec>& specs,
                                          std::size_t threads);

struct MaskVerification {
    std::vector<std::size_t> dims;
    std::vector<std::size_t> residual_counts;  // per hidden layer
};

// Brute-force oracle report for the configured scheme/policy over a small
// architecture family.
std::vector<MaskVerification> verify_masks(const ExperimentConfig& cfg,
                                           const std::vector<std::vector<std::size_t>>& family);

}  // namespace symbreak
