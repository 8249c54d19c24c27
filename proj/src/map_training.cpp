#include "symbreak/map_training.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace symbreak {

void GaussianLikelihood::validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("GaussianLikelihood: sigma must be > 0");
}

double gaussian_log_likelihood(const Matrix& y, const Matrix& mean,
                               const GaussianLikelihood& lik) {
    lik.validate();
    if (!y.same_shape(mean))
        throw std::invalid_argument("gaussian_log_likelihood: shape mismatch");
    const double var = lik.variance();
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * var);
    double total = static_cast<double>(y.size()) * log_norm;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y.data()[i] - mean.data()[i];
        total -= 0.5 * r * r / var;
    }
    return total;
}

AdamOptimizer::AdamOptimizer(std::size_t n, const AdamConfig& cfg)
    : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad, double lr) {
    if (params.size() != m_.size() || grad.size() != m_.size())
        throw std::invalid_argument("AdamOptimizer: size mismatch");
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < m_.size(); ++i) {
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
        params[i] += lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.eps);
    }
}

double scheduled_lr(const AdamConfig& cfg, std::size_t epoch) {
    if (cfg.epochs <= 1) return cfg.lr_start;
    const double t = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
    return cfg.lr_start + t * (cfg.lr_end - cfg.lr_start);
}

void TrainLog::save_csv(const std::string& path, const std::string& column) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("TrainLog: cannot write " + path);
    os << "epoch," << column << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < objective.size(); ++i) os << i << ',' << objective[i] << '\n';
}

namespace {

double log_prior(const MlpParams& params) {
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi);
    double total = 0.0;
    auto add = [&](const Matrix& m) {
        for (double v : m.data()) total += log_norm - 0.5 * v * v;
    };
    for (const Matrix& w : params.weights) add(w);
    for (const Matrix& b : params.biases) add(b);
    return total;
}

std::size_t flat_size(const MlpParams& p) {
    return p.arch.total_weight_count() + p.arch.total_bias_count();
}

void pack(const MlpParams& p, std::vector<double>& out) {
    out.clear();
    out.reserve(flat_size(p));
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        out.insert(out.end(), p.weights[l].data().begin(), p.weights[l].data().end());
        out.insert(out.end(), p.biases[l].data().begin(), p.biases[l].data().end());
    }
}

void unpack(std::span<const double> flat, MlpParams& p) {
    std::size_t k = 0;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        for (double& v : p.weights[l].data()) v = flat[k++];
        for (double& v : p.biases[l].data()) v = flat[k++];
    }
}

}  // namespace

double log_joint(const MlpParams& params, const RegressionDataset& data,
                 const GaussianLikelihood& lik) {
    const Matrix pred = forward(params, data.x_train);
    return gaussian_log_likelihood(data.y_train, pred, lik) + log_prior(params);
}

Gradients log_joint_gradients(const MlpParams& params, const Matrix& x_batch,
                              const Matrix& y_batch, const GaussianLikelihood& lik,
                              std::size_t dataset_size) {
    lik.validate();
    const double scale =
        static_cast<double>(dataset_size) / static_cast<double>(x_batch.rows());
    const Matrix pred = forward(params, x_batch);
    Matrix upstream(pred.rows(), pred.cols());
    const double var = lik.variance();
    for (std::size_t i = 0; i < pred.size(); ++i)
        upstream.data()[i] = scale * (y_batch.data()[i] - pred.data()[i]) / var;
    Gradients g = backward(params, x_batch, upstream);
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        for (std::size_t i = 0; i < g.weights[l].size(); ++i)
            g.weights[l].data()[i] -= params.weights[l].data()[i];
        for (std::size_t i = 0; i < g.biases[l].size(); ++i)
            g.biases[l].data()[i] -= params.biases[l].data()[i];
    }
    return g;
}

MlpParams train_map(const Architecture& arch, const RegressionDataset& data,
                    const GaussianLikelihood& lik, const AdamConfig& cfg,
                    SeededRng& rng, TrainLog* log) {
    lik.validate();
    MlpParams params = init_params(arch, rng);
    const std::size_t n = data.x_train.rows();
    const std::size_t batch = (cfg.batch_size == 0 || cfg.batch_size > n) ? n : cfg.batch_size;

    AdamOptimizer opt(flat_size(params), cfg);
    std::vector<double> flat, grad_flat;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    MlpParams grads = zero_params(arch);  // reused as the packing container
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (batch < n) {
            for (std::size_t i = n; i-- > 1;)
                std::swap(order[i], order[rng.uniform_index(i + 1)]);
        }
        const double lr = scheduled_lr(cfg, epoch);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t count = std::min(batch, n - start);
            Matrix xb(count, data.x_train.cols()), yb(count, data.y_train.cols());
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t r = order[start + i];
                for (std::size_t j = 0; j < xb.cols(); ++j) xb(i, j) = data.x_train(r, j);
                for (std::size_t j = 0; j < yb.cols(); ++j) yb(i, j) = data.y_train(r, j);
            }
            const Gradients g = log_joint_gradients(params, xb, yb, lik, n);
            grads.weights = g.weights;
            grads.biases = g.biases;
            pack(params, flat);
            pack(grads, grad_flat);
            opt.step(flat, grad_flat, lr);
            unpack(flat, params);
        }
        const double obj = log_joint(params, data, lik);
        if (!std::isfinite(obj))
            throw std::runtime_error("train_map: non-finite objective at epoch " +
                                     std::to_string(epoch));
        if (log) log->objective.push_back(obj);
    }
    return params;
}

FixedAssignment extract_fixed_values(const MlpParams& map_params, const LayerMask& mask) {
    return make_map_values(mask, map_params);
}

}  // namespace symbreak
