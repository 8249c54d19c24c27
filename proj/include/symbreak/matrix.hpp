#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace symbreak {

// Dense row-major matrix of doubles. Small-scale by design; no BLAS.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool all_finite() const;
    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// Lower-triangular L with L*L^T == a. Throws std::domain_error on a
// non-positive pivot. The caller is responsible for any jitter.
Matrix cholesky(const Matrix& a);

double frobenius_distance(const Matrix& a, const Matrix& b);

// Deterministic seeded generator. The sample stream is a pure function of
// the seed: mt19937_64 underneath, uniforms from the top 53 bits, normals
// via the Marsaglia polar method.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t next_u64();
    double uniform();               // [0, 1)
    double uniform(double lo, double hi);
    double normal();                // standard normal
    std::size_t uniform_index(std::size_t n);  // {0, ..., n-1}, unbiased

    // Stream-splitting helper for independent per-stage generators.
    static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

Matrix sample_std_normal(SeededRng& rng, std::size_t rows, std::size_t cols);

}  // namespace symbreak
