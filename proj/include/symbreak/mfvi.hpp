#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "symbreak/map_training.hpp"
#include "symbreak/network.hpp"

namespace symbreak {

double softplus(double x);
double inv_softplus(double s);

// Fully factorized Gaussian over the free parameters: mean mu and
// pre-scale rho per position, sigma = softplus(rho). Storage is full-shape
// for simplicity; entries at fixed weight positions are inert and carry no
// variational meaning.
struct MeanFieldPosterior {
    Architecture arch;
    std::vector<Matrix> mu_w, rho_w;
    std::vector<Matrix> mu_b, rho_b;

    double sigma_w(std::size_t l, std::size_t i, std::size_t j) const {
        return softplus(rho_w[l](i, j));
    }
    double sigma_b(std::size_t l, std::size_t j) const { return softplus(rho_b[l](0, j)); }
};

inline constexpr double kDefaultInitSigma = 0.05;

MeanFieldPosterior init_posterior(const Architecture& arch, SeededRng& rng,
                                  double init_sigma = kDefaultInitSigma);

// Number of free variational parameter sites (total params minus fixed).
std::size_t free_parameter_count(const MeanFieldPosterior& q, const LayerMask& mask);

// Reparameterized draw: free positions mu + sigma * eps, fixed positions
// take the assignment's value (using its current c).
MlpParams sample_params(const MeanFieldPosterior& q, const FixedAssignment& assignment,
                        SeededRng& rng);

// Analytic KL(q || N(0, I)) summed over free positions only.
double kl_to_standard_normal(const MeanFieldPosterior& q, const LayerMask& mask);

struct ElboEstimate {
    double value = 0.0;
    double expected_log_lik = 0.0;
    double kl = 0.0;
    std::size_t samples = 0;
};

struct ViGradients {
    std::vector<Matrix> mu_w, rho_w, mu_b, rho_b;
    double c = 0.0;
};

// Monte Carlo ELBO on a batch, scaled to the full dataset of size
// dataset_size. Deterministic given the rng state.
ElboEstimate elbo(const MeanFieldPosterior& q, const FixedAssignment& assignment,
                  const Matrix& x_batch, const Matrix& y_batch,
                  const GaussianLikelihood& lik, std::size_t n_samples, SeededRng& rng,
                  std::size_t dataset_size);

// Pathwise gradients with the same noise stream as elbo for a given rng
// state (common random numbers). Gradient entries at fixed weight
// positions are zero; the c gradient aggregates sign-weighted gradients at
// fixed positions when the assignment learns c.
ElboEstimate elbo_gradients(const MeanFieldPosterior& q, const FixedAssignment& assignment,
                            const Matrix& x_batch, const Matrix& y_batch,
                            const GaussianLikelihood& lik, std::size_t n_samples,
                            SeededRng& rng, std::size_t dataset_size, ViGradients& out);

struct ViConfig {
    AdamConfig adam;
    std::size_t mc_samples = 16;
    double init_sigma = kDefaultInitSigma;
};

std::pair<MeanFieldPosterior, FixedAssignment>
train_vi(const Architecture& arch, FixedAssignment assignment, const RegressionDataset& data,
         const GaussianLikelihood& lik, const ViConfig& cfg, SeededRng& rng,
         TrainLog* log = nullptr);

// Checkpoint with header (arch, policy, c), the mask in its text format,
// and flat hex-double mu/rho (plus sign/value payload); exact round trip.
void save_posterior(const std::string& path, const MeanFieldPosterior& q,
                    const FixedAssignment& assignment);
std::pair<MeanFieldPosterior, FixedAssignment> load_posterior(const std::string& path);

}  // namespace symbreak
