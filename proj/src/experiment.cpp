#include "symbreak/experiment.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace symbreak {

namespace {

// sub-stream tags for per-seed rng derivation
enum Stage : std::uint64_t {
    kStageData = 1,
    kStageMap = 2,
    kStageSigns = 3,
    kStageVi = 4,
    kStageEval = 5,
    kStageRandomMask = 6,
};

nlohmann::json adam_to_json(const AdamConfig& a) {
    return {{"lr_start", a.lr_start}, {"lr_end", a.lr_end},     {"epochs", a.epochs},
            {"batch_size", a.batch_size}, {"beta1", a.beta1},   {"beta2", a.beta2},
            {"eps", a.eps}};
}

AdamConfig adam_from_json(const nlohmann::json& j, AdamConfig base) {
    if (j.contains("lr_start")) base.lr_start = j["lr_start"];
    if (j.contains("lr_end")) base.lr_end = j["lr_end"];
    if (j.contains("epochs")) base.epochs = j["epochs"];
    if (j.contains("batch_size")) base.batch_size = j["batch_size"];
    if (j.contains("beta1")) base.beta1 = j["beta1"];
    if (j.contains("beta2")) base.beta2 = j["beta2"];
    if (j.contains("eps")) base.eps = j["eps"];
    return base;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (experiment != "toy" && experiment != "uci")
        throw std::invalid_argument("config: experiment must be 'toy' or 'uci'");
    if (seeds.empty()) throw std::invalid_argument("config: seeds list must not be empty");
    if (!(likelihood_sigma > 0.0))
        throw std::invalid_argument("config: likelihood_sigma must be > 0");
    if (experiment == "uci" && data_path.empty())
        throw std::invalid_argument("config: uci experiment needs data_path");
    Architecture::mlp(dims, activation_from_string(activation));
    if (scheme != "none" && scheme != "light" && scheme != "heavy" && scheme != "random")
        throw std::invalid_argument("config: unknown scheme " + scheme);
    policy_from_string(policy);
    if (train_samples < 1 || eval_samples < 1)
        throw std::invalid_argument("config: sample counts must be >= 1");
    for (const std::string& col : suite_columns) run_spec_for_column(col);
}

std::string ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["experiment"] = experiment;
    j["dims"] = dims;
    j["activation"] = activation;
    j["scheme"] = scheme;
    j["policy"] = policy;
    j["c"] = c_learnable ? nlohmann::json("learnable") : nlohmann::json(c);
    j["random_n_fixed"] = random_n_fixed;
    j["likelihood_sigma"] = likelihood_sigma;
    j["vi"] = adam_to_json(vi);
    j["train_samples"] = train_samples;
    j["eval_samples"] = eval_samples;
    j["map"] = adam_to_json(map);
    j["seeds"] = seeds;
    j["gp"] = {{"lengthscale", gp.lengthscale},
               {"noise_sigma", gp.noise_sigma},
               {"n_points", gp.n_points},
               {"n_test", gp.n_test}};
    j["data_path"] = data_path;
    j["out_dir"] = out_dir;
    j["suite_columns"] = suite_columns;
    j["grid_points"] = grid_points;
    return j.dump();
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    ExperimentConfig cfg;
    if (j.contains("experiment")) cfg.experiment = j["experiment"];
    if (j.contains("dims")) cfg.dims = j["dims"].get<std::vector<std::size_t>>();
    if (j.contains("activation")) cfg.activation = j["activation"];
    if (j.contains("scheme")) cfg.scheme = j["scheme"];
    if (j.contains("policy")) cfg.policy = j["policy"];
    if (j.contains("c")) {
        if (j["c"].is_string() && j["c"] == "learnable") {
            cfg.c_learnable = true;
            cfg.c = 1.0;  // learnable c starts at 1
        } else {
            cfg.c = j["c"];
        }
    }
    if (j.contains("random_n_fixed")) cfg.random_n_fixed = j["random_n_fixed"];
    if (j.contains("likelihood_sigma")) cfg.likelihood_sigma = j["likelihood_sigma"];
    if (j.contains("vi")) cfg.vi = adam_from_json(j["vi"], cfg.vi);
    if (j.contains("train_samples")) cfg.train_samples = j["train_samples"];
    if (j.contains("eval_samples")) cfg.eval_samples = j["eval_samples"];
    if (j.contains("map")) cfg.map = adam_from_json(j["map"], cfg.map);
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("gp")) {
        const auto& g = j["gp"];
        if (g.contains("lengthscale")) cfg.gp.lengthscale = g["lengthscale"];
        if (g.contains("noise_sigma")) cfg.gp.noise_sigma = g["noise_sigma"];
        if (g.contains("n_points")) cfg.gp.n_points = g["n_points"];
        if (g.contains("n_test")) cfg.gp.n_test = g["n_test"];
    }
    if (j.contains("data_path")) cfg.data_path = j["data_path"];
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"];
    if (j.contains("suite_columns"))
        cfg.suite_columns = j["suite_columns"].get<std::vector<std::string>>();
    if (j.contains("grid_points")) cfg.grid_points = j["grid_points"];
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return from_json(buf.str());
}

const std::vector<std::string>& all_columns() {
    static const std::vector<std::string> cols = {"HF",   "LF",   "HP",  "LP",     "HMAP",
                                                  "LMAP", "HRF",  "LRF", "Vanilla"};
    return cols;
}

RunSpec run_spec_for_column(const std::string& column) {
    RunSpec s;
    s.name = column;
    if (column == "HF" || column == "LF") {
        s.scheme = column[0] == 'H' ? Scheme::Heavy : Scheme::Light;
        s.policy = Policy::SignedConstant;
        s.uses_c = true;
    } else if (column == "HP" || column == "LP") {
        s.scheme = column[0] == 'H' ? Scheme::Heavy : Scheme::Light;
        s.policy = Policy::Prune;
    } else if (column == "HMAP" || column == "LMAP") {
        s.scheme = column[0] == 'H' ? Scheme::Heavy : Scheme::Light;
        s.policy = Policy::MapValues;
    } else if (column == "HRF" || column == "LRF") {
        s.random_mask = true;
        s.random_size_of = column[0] == 'H' ? Scheme::Heavy : Scheme::Light;
        s.policy = Policy::SignedConstant;
        s.uses_c = true;
    } else if (column == "Vanilla") {
        // empty mask
    } else {
        throw std::invalid_argument("unknown suite column " + column);
    }
    return s;
}

RunSpec run_spec_from_config(const ExperimentConfig& cfg) {
    RunSpec s;
    s.name = cfg.scheme + "+" + cfg.policy;
    if (cfg.scheme == "light" || cfg.scheme == "heavy")
        s.scheme = scheme_from_string(cfg.scheme);
    else if (cfg.scheme == "random")
        s.random_mask = true;
    if (cfg.scheme != "none") {
        s.policy = policy_from_string(cfg.policy);
        s.uses_c = s.policy == Policy::SignedConstant;
    } else {
        s.name = "Vanilla";
    }
    return s;
}

RegressionDataset build_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (cfg.experiment == "toy") {
        GpGenConfig g = cfg.gp;
        g.n_points = cfg.train_samples;
        g.seed = SeededRng::derive_seed(seed, kStageData);
        return generate_gp_dataset(g);
    }
    return load_uci_energy(cfg.data_path, seed);
}

namespace {

LayerMask build_mask(const ExperimentConfig& cfg, const RunSpec& spec,
                     const Architecture& arch, std::uint64_t seed) {
    if (spec.scheme) return generate_mask(arch, *spec.scheme);
    if (spec.random_mask) {
        std::size_t n_fixed = cfg.random_n_fixed;
        if (n_fixed == 0) {
            const Scheme size_of = spec.random_size_of.value_or(Scheme::Heavy);
            n_fixed = count_fixed(generate_mask(arch, size_of));
        }
        SeededRng rng(SeededRng::derive_seed(seed, kStageRandomMask));
        return generate_random_mask(arch, n_fixed, rng);
    }
    return empty_mask(arch);
}

FixedAssignment build_assignment(const ExperimentConfig& cfg, const RunSpec& spec,
                                 const Architecture& arch, LayerMask mask,
                                 const RegressionDataset& data, std::uint64_t seed) {
    switch (spec.policy) {
        case Policy::Prune:
            return make_prune(std::move(mask));
        case Policy::SignedConstant: {
            SeededRng rng(SeededRng::derive_seed(seed, kStageSigns));
            return make_signed_constant(std::move(mask), cfg.c, cfg.c_learnable, rng);
        }
        case Policy::MapValues: {
            SeededRng rng(SeededRng::derive_seed(seed, kStageMap));
            const MlpParams map_params =
                train_map(arch, data, GaussianLikelihood{cfg.likelihood_sigma}, cfg.map, rng);
            return extract_fixed_values(map_params, mask);
        }
    }
    throw std::logic_error("bad policy tag");
}

void write_prediction_grid(const std::string& path, const MeanFieldPosterior& q,
                           const FixedAssignment& a, std::size_t n_samples,
                           std::size_t n_grid, std::uint64_t seed) {
    Matrix grid(n_grid, 1);
    for (std::size_t i = 0; i < n_grid; ++i)
        grid(i, 0) = -4.0 + 8.0 * static_cast<double>(i) / static_cast<double>(n_grid - 1);

    SeededRng rng(seed);
    Matrix mean(n_grid, 1), m2(n_grid, 1);
    for (std::size_t s = 0; s < n_samples; ++s) {
        const Matrix pred = forward(sample_params(q, a, rng), grid);
        for (std::size_t i = 0; i < n_grid; ++i) {
            mean(i, 0) += pred(i, 0);
            m2(i, 0) += pred(i, 0) * pred(i, 0);
        }
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "x,mean,std\n";
    os.precision(17);
    for (std::size_t i = 0; i < n_grid; ++i) {
        const double mu = mean(i, 0) / static_cast<double>(n_samples);
        const double var =
            std::max(0.0, m2(i, 0) / static_cast<double>(n_samples) - mu * mu);
        os << grid(i, 0) << ',' << mu << ',' << std::sqrt(var) << '\n';
    }
}

}  // namespace

SeedResult run_single(const ExperimentConfig& cfg, const RunSpec& spec, std::uint64_t seed) {
    SeedResult result;
    result.seed = seed;
    try {
        const Architecture arch =
            Architecture::mlp(cfg.dims, activation_from_string(cfg.activation));
        const GaussianLikelihood lik{cfg.likelihood_sigma};
        const RegressionDataset data = build_dataset(cfg, seed);

        LayerMask mask = build_mask(cfg, spec, arch, seed);
        FixedAssignment assignment =
            build_assignment(cfg, spec, arch, std::move(mask), data, seed);

        ViConfig vi_cfg;
        vi_cfg.adam = cfg.vi;
        SeededRng vi_rng(SeededRng::derive_seed(seed, kStageVi));
        TrainLog log;
        auto [q, trained_assignment] =
            train_vi(arch, std::move(assignment), data, lik, vi_cfg, vi_rng, &log);

        result.report = evaluate(q, trained_assignment, data, lik, cfg.eval_samples,
                                 SeededRng::derive_seed(seed, kStageEval));
        result.final_c = trained_assignment.c;

        std::filesystem::create_directories(cfg.out_dir);
        const std::string stem =
            cfg.out_dir + "/" + spec.name + "_seed" + std::to_string(seed);
        nlohmann::json echo = nlohmann::json::parse(cfg.to_json());
        echo["column"] = spec.name;
        echo["final_c"] = result.final_c;
        save_report_json(stem + "_report.json", result.report, echo.dump());
        save_report_csv(stem + "_points.csv", result.report);
        log.save_csv(stem + "_elbo.csv", "elbo");
        save_posterior(stem + "_posterior.txt", q, trained_assignment);
        if (cfg.experiment == "toy" && cfg.grid_points > 1)
            write_prediction_grid(stem + "_grid.csv", q, trained_assignment,
                                  cfg.eval_samples, cfg.grid_points,
                                  SeededRng::derive_seed(seed, kStageEval) ^ 0x9d2cULL);
    } catch (const std::exception& e) {
        result.failed = true;
        result.error = e.what();
    }
    return result;
}

namespace {

ColumnSummary summarize(const std::string& column, const std::vector<SeedResult>& results) {
    ColumnSummary s;
    s.column = column;
    std::vector<double> rmse, lpp;
    for (const SeedResult& r : results) {
        if (r.failed) continue;
        rmse.push_back(r.report.rmse);
        lpp.push_back(r.report.lpp);
    }
    s.completed = rmse.size();
    if (s.completed == 0) return s;
    auto mean_std = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - m) * (x - m);
        // sample std over seeds, matching +-1 sd error bars
        const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1))
                                       : 0.0;
        return std::pair{m, sd};
    };
    std::tie(s.rmse_mean, s.rmse_std) = mean_std(rmse);
    std::tie(s.lpp_mean, s.lpp_std) = mean_std(lpp);
    return s;
}

void write_aggregate(const std::string& out_dir,
                     const std::vector<ColumnSummary>& summaries) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream os(out_dir + "/aggregate.csv");
        os << "column,rmse_mean,rmse_std,lpp_mean,lpp_std,completed_seeds\n";
        os.precision(17);
        for (const auto& s : summaries)
            os << s.column << ',' << s.rmse_mean << ',' << s.rmse_std << ',' << s.lpp_mean
               << ',' << s.lpp_std << ',' << s.completed << '\n';
    }
    {
        std::ofstream os(out_dir + "/aggregate.txt");
        os << std::left << std::setw(10) << "column" << std::right << std::setw(20)
           << "RMSE" << std::setw(20) << "LPP" << std::setw(8) << "seeds" << '\n';
        for (const auto& s : summaries) {
            std::ostringstream r, l;
            r << std::fixed << std::setprecision(3) << s.rmse_mean << " +- " << s.rmse_std;
            l << std::fixed << std::setprecision(3) << s.lpp_mean << " +- " << s.lpp_std;
            os << std::left << std::setw(10) << s.column << std::right << std::setw(20)
               << r.str() << std::setw(20) << l.str() << std::setw(8) << s.completed
               << '\n';
        }
    }
}

}  // namespace

std::vector<ColumnSummary> run_experiment(const ExperimentConfig& cfg,
                                          const std::vector<RunSpec>& specs,
                                          std::size_t threads) {
    cfg.validate();
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());

    struct Task {
        std::size_t spec_idx, seed_idx;
    };
    std::vector<Task> tasks;
    for (std::size_t s = 0; s < specs.size(); ++s)
        for (std::size_t k = 0; k < cfg.seeds.size(); ++k) tasks.push_back({s, k});

    std::vector<std::vector<SeedResult>> results(specs.size(),
                                                 std::vector<SeedResult>(cfg.seeds.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks.size()) return;
            const Task& task = tasks[t];
            results[task.spec_idx][task.seed_idx] =
                run_single(cfg, specs[task.spec_idx], cfg.seeds[task.seed_idx]);
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < std::min(threads, tasks.size()); ++i)
        pool.emplace_back(worker);
    worker();
    for (std::thread& th : pool) th.join();

    std::vector<ColumnSummary> summaries;
    for (std::size_t s = 0; s < specs.size(); ++s)
        summaries.push_back(summarize(specs[s].name, results[s]));
    write_aggregate(cfg.out_dir, summaries);
    return summaries;
}

std::vector<MaskVerification> verify_masks(
    const ExperimentConfig& cfg, const std::vector<std::vector<std::size_t>>& family) {
    const RunSpec spec = run_spec_from_config(cfg);
    std::vector<MaskVerification> out;
    for (const auto& dims : family) {
        const Architecture arch =
            Architecture::mlp(dims, activation_from_string(cfg.activation));
        for (std::size_t h = 1; h <= arch.num_hidden(); ++h)
            if (arch.dims[h] > kOracleWidthLimit)
                throw std::invalid_argument("verify_masks: layer width exceeds oracle limit");

        LayerMask mask = build_mask(cfg, spec, arch, cfg.seeds.front());
        FixedAssignment assignment;
        switch (spec.policy) {
            case Policy::Prune:
                assignment = make_prune(std::move(mask));
                break;
            case Policy::SignedConstant: {
                SeededRng rng(SeededRng::derive_seed(cfg.seeds.front(), kStageSigns));
                assignment =
                    make_signed_constant(std::move(mask), cfg.c, cfg.c_learnable, rng);
                break;
            }
            case Policy::MapValues: {
                // stand-in MAP values: a random network is enough for structure checks
                SeededRng rng(SeededRng::derive_seed(cfg.seeds.front(), kStageMap));
                assignment = make_map_values(mask, init_params(arch, rng));
                break;
            }
        }

        MaskVerification v;
        v.dims = dims;
        for (std::size_t h = 1; h <= arch.num_hidden(); ++h)
            v.residual_counts.push_back(residual_permutations(assignment, h).size());
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace symbreak
