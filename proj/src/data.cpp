#include "symbreak/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace symbreak {

double rbf_kernel(double x1, double x2, double lengthscale) {
    const double d = x1 - x2;
    return std::exp(-d * d / (2.0 * lengthscale * lengthscale));
}

RegressionDataset generate_gp_dataset(const GpGenConfig& cfg) {
    if (cfg.n_points < 2) throw std::invalid_argument("generate_gp_dataset: need n_points >= 2");
    if (cfg.lengthscale <= 0.0 || cfg.noise_sigma < 0.0)
        throw std::invalid_argument("generate_gp_dataset: bad kernel config");

    SeededRng rng(cfg.seed);
    const std::size_t n_total = cfg.n_points + cfg.n_test;
    std::vector<double> xs(n_total);
    for (std::size_t i = 0; i < n_total; ++i) {
        const auto& interval = (i % 2 == 0) ? cfg.interval_left : cfg.interval_right;
        xs[i] = rng.uniform(interval[0], interval[1]);
    }

    Matrix k(n_total, n_total);
    for (std::size_t i = 0; i < n_total; ++i)
        for (std::size_t j = 0; j < n_total; ++j)
            k(i, j) = rbf_kernel(xs[i], xs[j], cfg.lengthscale);

    // escalate jitter on Cholesky failure, give up past 1e-6
    Matrix l;
    double jitter = 1e-10;
    for (;;) {
        Matrix kj = k;
        for (std::size_t i = 0; i < n_total; ++i) kj(i, i) += jitter;
        try {
            l = cholesky(kj);
            break;
        } catch (const std::domain_error&) {
            jitter *= 10.0;
            if (jitter > 1e-6)
                throw std::runtime_error("generate_gp_dataset: kernel matrix not factorizable");
        }
    }

    const Matrix eps = sample_std_normal(rng, n_total, 1);
    const Matrix f = matmul(l, eps);

    RegressionDataset data;
    data.x_train = Matrix(cfg.n_points, 1);
    data.y_train = Matrix(cfg.n_points, 1);
    data.x_test = Matrix(cfg.n_test, 1);
    data.y_test = Matrix(cfg.n_test, 1);
    for (std::size_t i = 0; i < n_total; ++i) {
        const double y = f(i, 0) + cfg.noise_sigma * rng.normal();
        if (i < cfg.n_points) {
            data.x_train(i, 0) = xs[i];
            data.y_train(i, 0) = y;
        } else {
            data.x_test(i - cfg.n_points, 0) = xs[i];
            data.y_test(i - cfg.n_points, 0) = y;
        }
    }
    return data;
}

namespace {

std::vector<std::vector<double>> parse_csv(const std::string& path, std::size_t expected_cols) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open CSV file: " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty CSV file: " + path);

    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        // tolerate trailing \r from windows-origin files
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            std::size_t pos = 0;
            double v;
            try {
                v = std::stod(cell, &pos);
            } catch (const std::exception&) {
                throw std::runtime_error("CSV parse error at row " + std::to_string(lineno) +
                                         ", column " + std::to_string(row.size() + 1) +
                                         ": non-numeric cell '" + cell + "'");
            }
            row.push_back(v);
        }
        if (row.size() != expected_cols)
            throw std::runtime_error("CSV parse error at row " + std::to_string(lineno) +
                                     ": expected " + std::to_string(expected_cols) +
                                     " columns, found " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

Standardization fit_standardization(const Matrix& m) {
    Standardization s;
    s.applied = true;
    s.mean.resize(m.cols());
    s.stddev.resize(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double mu = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) mu += m(i, j);
        mu /= static_cast<double>(m.rows());
        double var = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) {
            const double d = m(i, j) - mu;
            var += d * d;
        }
        var /= static_cast<double>(m.rows());
        s.mean[j] = mu;
        s.stddev[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

Matrix standardize(const Matrix& values, const Standardization& stats) {
    if (!stats.applied) return values;
    if (values.cols() != stats.mean.size())
        throw std::invalid_argument("standardize: column count mismatch");
    Matrix out = values;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
            out(i, j) = (out(i, j) - stats.mean[j]) / stats.stddev[j];
    return out;
}

Matrix destandardize(const Matrix& values, const Standardization& stats) {
    if (!stats.applied) return values;
    if (values.cols() != stats.mean.size())
        throw std::invalid_argument("destandardize: column count mismatch");
    Matrix out = values;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
            out(i, j) = out(i, j) * stats.stddev[j] + stats.mean[j];
    return out;
}

RegressionDataset load_uci_energy(const std::string& path, std::uint64_t split_seed) {
    constexpr std::size_t kFeatures = 8, kTargets = 2;
    const auto rows = parse_csv(path, kFeatures + kTargets);
    const std::size_t n = rows.size();
    if (n < 2) throw std::runtime_error("load_uci_energy: too few rows in " + path);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    SeededRng rng(SeededRng::derive_seed(split_seed, 71ULL));
    for (std::size_t i = n; i-- > 1;)
        std::swap(order[i], order[rng.uniform_index(i + 1)]);

    const std::size_t n_train = (n * 8) / 10;
    RegressionDataset data;
    data.train_indices.assign(order.begin(), order.begin() + n_train);
    data.test_indices.assign(order.begin() + n_train, order.end());

    auto fill = [&](const std::vector<std::size_t>& idx, Matrix& x, Matrix& y) {
        x = Matrix(idx.size(), kFeatures);
        y = Matrix(idx.size(), kTargets);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < kFeatures; ++j) x(i, j) = rows[idx[i]][j];
            for (std::size_t j = 0; j < kTargets; ++j) y(i, j) = rows[idx[i]][kFeatures + j];
        }
    };
    fill(data.train_indices, data.x_train, data.y_train);
    fill(data.test_indices, data.x_test, data.y_test);

    data.x_stats = fit_standardization(data.x_train);
    data.y_stats = fit_standardization(data.y_train);
    data.x_train = standardize(data.x_train, data.x_stats);
    data.x_test = standardize(data.x_test, data.x_stats);
    data.y_train = standardize(data.y_train, data.y_stats);
    data.y_test = standardize(data.y_test, data.y_stats);
    return data;
}

namespace {

void write_csv(const std::string& path, const Matrix& x, const Matrix& y) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    for (std::size_t j = 0; j < x.cols(); ++j) os << "x" << j + 1 << ",";
    for (std::size_t j = 0; j < y.cols(); ++j) os << "y" << j + 1 << (j + 1 < y.cols() ? "," : "");
    os << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) os << x(i, j) << ",";
        for (std::size_t j = 0; j < y.cols(); ++j)
            os << y(i, j) << (j + 1 < y.cols() ? "," : "");
        os << '\n';
    }
}

}  // namespace

void save_dataset_snapshot(const std::string& dir, const std::string& name,
                           const RegressionDataset& data) {
    std::filesystem::create_directories(dir);
    write_csv(dir + "/" + name + "_train.csv", data.x_train, data.y_train);
    write_csv(dir + "/" + name + "_test.csv", data.x_test, data.y_test);

    nlohmann::json j;
    j["x_stats"] = {{"applied", data.x_stats.applied},
                    {"mean", data.x_stats.mean},
                    {"stddev", data.x_stats.stddev}};
    j["y_stats"] = {{"applied", data.y_stats.applied},
                    {"mean", data.y_stats.mean},
                    {"stddev", data.y_stats.stddev}};
    j["train_indices"] = data.train_indices;
    j["test_indices"] = data.test_indices;
    std::ofstream os(dir + "/" + name + "_meta.json");
    os << j.dump(2) << '\n';
}

}  // namespace symbreak
