#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symbreak/data.hpp"
#include "symbreak/network.hpp"

namespace symbreak {

// Homoscedastic Gaussian observation noise shared across output
// dimensions. Configured by its standard deviation; densities use sigma^2.
struct GaussianLikelihood {
    double sigma = 1.0;

    double variance() const { return sigma * sigma; }
    void validate() const;
};

// Sum over rows of log N(y_i; mean_i, sigma^2 I).
double gaussian_log_likelihood(const Matrix& y, const Matrix& mean,
                               const GaussianLikelihood& lik);

struct AdamConfig {
    double lr_start = 1e-2;
    double lr_end = 1e-3;
    std::size_t epochs = 1000;
    std::size_t batch_size = 0;  // 0 = full batch
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Flat-vector Adam ascent with the standard bias-corrected recurrences.
class AdamOptimizer {
public:
    explicit AdamOptimizer(std::size_t n, const AdamConfig& cfg);

    // params += update(grad) with the given learning rate (maximization).
    void step(std::span<double> params, std::span<const double> grad, double lr);
    std::size_t step_count() const { return steps_; }

private:
    AdamConfig cfg_;
    std::vector<double> m_, v_;
    std::size_t steps_ = 0;
};

// Linear schedule from lr_start to lr_end across total epochs.
double scheduled_lr(const AdamConfig& cfg, std::size_t epoch);

struct TrainLog {
    std::vector<double> objective;  // one entry per epoch
    void save_csv(const std::string& path, const std::string& column) const;
};

// log p(Y | X, params) + log p(params) with a standard normal prior over
// every weight and bias.
double log_joint(const MlpParams& params, const RegressionDataset& data,
                 const GaussianLikelihood& lik);

// Gradients of log_joint at params (likelihood on a batch scaled up to the
// dataset size plus the full prior term).
Gradients log_joint_gradients(const MlpParams& params, const Matrix& x_batch,
                              const Matrix& y_batch, const GaussianLikelihood& lik,
                              std::size_t dataset_size);

MlpParams train_map(const Architecture& arch, const RegressionDataset& data,
                    const GaussianLikelihood& lik, const AdamConfig& cfg,
                    SeededRng& rng, TrainLog* log = nullptr);

// Read the MAP values at the mask's fixed positions into an assignment.
FixedAssignment extract_fixed_values(const MlpParams& map_params, const LayerMask& mask);

}  // namespace symbreak
