#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "symbreak/matrix.hpp"

namespace symbreak {

struct Standardization {
    std::vector<double> mean;
    std::vector<double> stddev;
    bool applied = false;  // identity transform when false
};

struct RegressionDataset {
    Matrix x_train, y_train;
    Matrix x_test, y_test;
    Standardization x_stats, y_stats;
    std::vector<std::size_t> train_indices, test_indices;  // into the source file, when split
};

struct GpGenConfig {
    double lengthscale = 0.2;
    double noise_sigma = 0.05;
    std::array<double, 2> interval_left{-2.5, -0.75};
    std::array<double, 2> interval_right{0.75, 2.5};
    std::size_t n_points = 64;
    std::size_t n_test = 16;
    std::uint64_t seed = 0;
};

double rbf_kernel(double x1, double x2, double lengthscale);

// 1D inputs half-and-half from the two intervals, targets drawn from a GP
// with the exponentiated quadratic kernel plus observation noise. Left
// unstandardized. Train and test targets come from one joint GP draw.
RegressionDataset generate_gp_dataset(const GpGenConfig& cfg);

// CSV with a header row, 8 feature columns then 2 target columns.
// Random 80/20 split by seed; X and Y standardized with train statistics.
RegressionDataset load_uci_energy(const std::string& path, std::uint64_t split_seed);

Matrix standardize(const Matrix& values, const Standardization& stats);
Matrix destandardize(const Matrix& values, const Standardization& stats);

// Fit per-column mean/std on rows of m.
Standardization fit_standardization(const Matrix& m);

// Dataset snapshot: train/test CSVs plus a JSON sidecar carrying the
// standardization statistics and split indices.
void save_dataset_snapshot(const std::string& dir, const std::string& name,
                           const RegressionDataset& data);

}  // namespace symbreak
