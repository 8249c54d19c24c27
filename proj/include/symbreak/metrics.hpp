#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "symbreak/data.hpp"
#include "symbreak/mfvi.hpp"

namespace symbreak {

// Max-subtracted log(sum(exp(v))).
double logsumexp(std::span<const double> values);

struct EvalReport {
    double rmse = 0.0;
    double lpp = 0.0;  // mean of per_point_lpp
    double rmse_destandardized = 0.0;
    std::size_t n_eval_samples = 0;
    std::uint64_t seed = 0;
    std::vector<double> per_point_lpp;
    std::vector<std::vector<double>> predictive_mean;  // per test point, per output dim
    std::vector<std::vector<double>> predictive_std;
};

double predictive_mean_rmse(const MeanFieldPosterior& q, const FixedAssignment& assignment,
                            const Matrix& x_test, const Matrix& y_test,
                            std::size_t n_samples, SeededRng& rng);

// Monte Carlo log posterior predictive of one test point: LogSumExp over
// sampled networks of the Gaussian log-likelihood, minus log(n_samples).
double log_posterior_predictive(const MeanFieldPosterior& q,
                                const FixedAssignment& assignment, const Matrix& x_point,
                                const Matrix& y_point, const GaussianLikelihood& lik,
                                std::size_t n_samples, SeededRng& rng);

// Full test-set report. The same n_samples sampled networks are reused
// across all test points.
EvalReport evaluate(const MeanFieldPosterior& q, const FixedAssignment& assignment,
                    const RegressionDataset& data, const GaussianLikelihood& lik,
                    std::size_t n_samples, std::uint64_t seed);

void save_report_json(const std::string& path, const EvalReport& report,
                      const std::string& config_echo_json);
// Per-test-point CSV: predictive mean/std per output dim and the point's LPP.
void save_report_csv(const std::string& path, const EvalReport& report);

}  // namespace symbreak
