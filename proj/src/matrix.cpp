#include "symbreak/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace symbreak {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions disagree (" +
                                    std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + ")");
    Matrix out(a.rows(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    // i-k-j order keeps the inner loop contiguous in b and out
    for (std::size_t i = 0; i < n; ++i) {
        double* orow = &out.data()[i * m];
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a(i, p);
            const double* brow = &b.data()[p * m];
            for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Matrix cholesky(const Matrix& a) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("cholesky: matrix not square");
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a(j, j);
        for (std::size_t p = 0; p < j; ++p) diag -= l(j, p) * l(j, p);
        if (diag <= 0.0 || !std::isfinite(diag))
            throw std::domain_error("cholesky: matrix not positive definite at pivot " +
                                    std::to_string(j));
        l(j, j) = std::sqrt(diag);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t p = 0; p < j; ++p) s -= l(i, p) * l(j, p);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("frobenius_distance: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

SeededRng::SeededRng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t SeededRng::next_u64() { return engine_(); }

double SeededRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double SeededRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

std::size_t SeededRng::uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

std::uint64_t SeededRng::derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 over the combined value
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Matrix sample_std_normal(SeededRng& rng, std::size_t rows, std::size_t cols) {
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("sample_std_normal: rows and cols must be >= 1");
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.normal();
    return m;
}

}  // namespace symbreak
