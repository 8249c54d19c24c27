#include "symbreak/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace symbreak {

double logsumexp(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("logsumexp: empty input");
    const double mx = *std::max_element(values.begin(), values.end());
    if (!std::isfinite(mx)) return mx;  // all -inf, or a stray inf propagates
    double s = 0.0;
    for (double v : values) s += std::exp(v - mx);
    return mx + std::log(s);
}

namespace {

// predictions[s] = forward of sampled network s on all of x
std::vector<Matrix> sample_predictions(const MeanFieldPosterior& q,
                                       const FixedAssignment& a, const Matrix& x,
                                       std::size_t n_samples, SeededRng& rng) {
    if (n_samples < 1) throw std::invalid_argument("evaluate: need n_samples >= 1");
    std::vector<Matrix> preds;
    preds.reserve(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
        const MlpParams p = sample_params(q, a, rng);
        preds.push_back(forward(p, x));
    }
    return preds;
}

Matrix mean_prediction(const std::vector<Matrix>& preds) {
    Matrix mean(preds[0].rows(), preds[0].cols());
    for (const Matrix& p : preds)
        for (std::size_t i = 0; i < p.size(); ++i) mean.data()[i] += p.data()[i];
    for (double& v : mean.data()) v /= static_cast<double>(preds.size());
    return mean;
}

double rmse_of(const Matrix& mean, const Matrix& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = mean.data()[i] - y.data()[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(y.size()));
}

}  // namespace

double predictive_mean_rmse(const MeanFieldPosterior& q, const FixedAssignment& assignment,
                            const Matrix& x_test, const Matrix& y_test,
                            std::size_t n_samples, SeededRng& rng) {
    const auto preds = sample_predictions(q, assignment, x_test, n_samples, rng);
    return rmse_of(mean_prediction(preds), y_test);
}

double log_posterior_predictive(const MeanFieldPosterior& q,
                                const FixedAssignment& assignment, const Matrix& x_point,
                                const Matrix& y_point, const GaussianLikelihood& lik,
                                std::size_t n_samples, SeededRng& rng) {
    const auto preds = sample_predictions(q, assignment, x_point, n_samples, rng);
    std::vector<double> log_liks(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s)
        log_liks[s] = gaussian_log_likelihood(y_point, preds[s], lik);
    return logsumexp(log_liks) - std::log(static_cast<double>(n_samples));
}

EvalReport evaluate(const MeanFieldPosterior& q, const FixedAssignment& assignment,
                    const RegressionDataset& data, const GaussianLikelihood& lik,
                    std::size_t n_samples, std::uint64_t seed) {
    lik.validate();
    SeededRng rng(seed);
    const Matrix& x = data.x_test;
    const Matrix& y = data.y_test;
    const auto preds = sample_predictions(q, assignment, x, n_samples, rng);
    const Matrix mean = mean_prediction(preds);

    EvalReport report;
    report.n_eval_samples = n_samples;
    report.seed = seed;
    report.rmse = rmse_of(mean, y);

    const std::size_t n_points = x.rows(), d_out = y.cols();
    const double var = lik.variance();
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * var);
    std::vector<double> log_liks(n_samples);
    for (std::size_t p = 0; p < n_points; ++p) {
        for (std::size_t s = 0; s < n_samples; ++s) {
            double ll = static_cast<double>(d_out) * log_norm;
            for (std::size_t j = 0; j < d_out; ++j) {
                const double r = y(p, j) - preds[s](p, j);
                ll -= 0.5 * r * r / var;
            }
            log_liks[s] = ll;
        }
        report.per_point_lpp.push_back(logsumexp(log_liks) -
                                       std::log(static_cast<double>(n_samples)));

        std::vector<double> pm(d_out), ps(d_out);
        for (std::size_t j = 0; j < d_out; ++j) {
            pm[j] = mean(p, j);
            double sq = 0.0;
            for (std::size_t s = 0; s < n_samples; ++s) {
                const double d = preds[s](p, j) - mean(p, j);
                sq += d * d;
            }
            ps[j] = std::sqrt(sq / static_cast<double>(n_samples));
        }
        report.predictive_mean.push_back(std::move(pm));
        report.predictive_std.push_back(std::move(ps));
    }
    double lpp_sum = 0.0;
    for (double v : report.per_point_lpp) lpp_sum += v;
    report.lpp = lpp_sum / static_cast<double>(n_points);

    // RMSE in original target units as well, when targets were standardized
    if (data.y_stats.applied) {
        const Matrix mean_raw = destandardize(mean, data.y_stats);
        const Matrix y_raw = destandardize(y, data.y_stats);
        report.rmse_destandardized = rmse_of(mean_raw, y_raw);
    } else {
        report.rmse_destandardized = report.rmse;
    }
    return report;
}

void save_report_json(const std::string& path, const EvalReport& report,
                      const std::string& config_echo_json) {
    nlohmann::json j;
    j["rmse"] = report.rmse;
    j["lpp"] = report.lpp;
    j["rmse_destandardized"] = report.rmse_destandardized;
    j["n_eval_samples"] = report.n_eval_samples;
    j["seed"] = report.seed;
    j["per_point_lpp"] = report.per_point_lpp;
    if (!config_echo_json.empty()) j["config"] = nlohmann::json::parse(config_echo_json);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_report_json: cannot open " + path);
    os << j.dump(2) << '\n';
}

void save_report_csv(const std::string& path, const EvalReport& report) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_report_csv: cannot open " + path);
    const std::size_t d_out =
        report.predictive_mean.empty() ? 0 : report.predictive_mean[0].size();
    os << "point";
    for (std::size_t j = 0; j < d_out; ++j) os << ",mean" << j + 1;
    for (std::size_t j = 0; j < d_out; ++j) os << ",std" << j + 1;
    os << ",lpp\n";
    os.precision(17);
    for (std::size_t p = 0; p < report.per_point_lpp.size(); ++p) {
        os << p;
        for (std::size_t j = 0; j < d_out; ++j) os << ',' << report.predictive_mean[p][j];
        for (std::size_t j = 0; j < d_out; ++j) os << ',' << report.predictive_std[p][j];
        os << ',' << report.per_point_lpp[p] << '\n';
    }
}

}  // namespace symbreak
