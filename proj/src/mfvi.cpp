#include "symbreak/mfvi.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace symbreak {

double softplus(double x) {
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}

double inv_softplus(double s) {
    if (s <= 0.0) throw std::invalid_argument("inv_softplus: argument must be positive");
    if (s > 30.0) return s;
    return std::log(std::expm1(s));
}

MeanFieldPosterior init_posterior(const Architecture& arch, SeededRng& rng,
                                  double init_sigma) {
    arch.validate();
    const double rho0 = inv_softplus(init_sigma);
    MeanFieldPosterior q;
    q.arch = arch;
    MlpParams means = init_params(arch, rng);
    for (std::size_t l = 0; l < means.weights.size(); ++l) {
        q.mu_w.push_back(means.weights[l]);
        q.mu_b.push_back(means.biases[l]);
        q.rho_w.emplace_back(means.weights[l].rows(), means.weights[l].cols(), rho0);
        q.rho_b.emplace_back(1, means.biases[l].cols(), rho0);
    }
    return q;
}

std::size_t free_parameter_count(const MeanFieldPosterior& q, const LayerMask& mask) {
    const std::size_t total =
        q.arch.total_weight_count() + q.arch.total_bias_count();
    return total - count_fixed(mask);
}

MlpParams sample_params(const MeanFieldPosterior& q, const FixedAssignment& assignment,
                        SeededRng& rng) {
    if (q.arch != assignment.mask.arch)
        throw std::invalid_argument("sample_params: architecture mismatch");
    MlpParams p = zero_params(q.arch);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        const BoolMat& m = assignment.mask.weights[l];
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j)
                p.weights[l](i, j) = m.get(i, j)
                                         ? assignment.value_at(l, i, j)
                                         : q.mu_w[l](i, j) + q.sigma_w(l, i, j) * rng.normal();
        for (std::size_t j = 0; j < p.biases[l].cols(); ++j)
            p.biases[l](0, j) = q.mu_b[l](0, j) + q.sigma_b(l, j) * rng.normal();
    }
    return p;
}

double kl_to_standard_normal(const MeanFieldPosterior& q, const LayerMask& mask) {
    double kl = 0.0;
    auto term = [](double mu, double sigma) {
        return 0.5 * (mu * mu + sigma * sigma - 1.0) - std::log(sigma);
    };
    for (std::size_t l = 0; l < q.mu_w.size(); ++l) {
        const BoolMat& m = mask.weights[l];
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j)
                if (!m.get(i, j)) kl += term(q.mu_w[l](i, j), q.sigma_w(l, i, j));
        for (std::size_t j = 0; j < q.mu_b[l].cols(); ++j)
            kl += term(q.mu_b[l](0, j), q.sigma_b(l, j));
    }
    return kl;
}

namespace {

// One reparameterized draw that also records the noise at free positions,
// so elbo and elbo_gradients consume identical streams for a given rng.
MlpParams sample_with_noise(const MeanFieldPosterior& q, const FixedAssignment& a,
                            SeededRng& rng, std::vector<Matrix>& eps_w,
                            std::vector<Matrix>& eps_b) {
    MlpParams p = zero_params(q.arch);
    eps_w.clear();
    eps_b.clear();
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        const BoolMat& m = a.mask.weights[l];
        Matrix ew(m.rows, m.cols), eb(1, p.biases[l].cols());
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j) {
                if (m.get(i, j)) {
                    p.weights[l](i, j) = a.value_at(l, i, j);
                } else {
                    ew(i, j) = rng.normal();
                    p.weights[l](i, j) = q.mu_w[l](i, j) + q.sigma_w(l, i, j) * ew(i, j);
                }
            }
        for (std::size_t j = 0; j < eb.cols(); ++j) {
            eb(0, j) = rng.normal();
            p.biases[l](0, j) = q.mu_b[l](0, j) + q.sigma_b(l, j) * eb(0, j);
        }
        eps_w.push_back(std::move(ew));
        eps_b.push_back(std::move(eb));
    }
    return p;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

ViGradients zero_vi_gradients(const Architecture& arch) {
    ViGradients g;
    for (std::size_t l = 1; l < arch.dims.size(); ++l) {
        g.mu_w.emplace_back(arch.dims[l - 1], arch.dims[l]);
        g.rho_w.emplace_back(arch.dims[l - 1], arch.dims[l]);
        g.mu_b.emplace_back(1, arch.dims[l]);
        g.rho_b.emplace_back(1, arch.dims[l]);
    }
    return g;
}

ElboEstimate elbo_impl(const MeanFieldPosterior& q, const FixedAssignment& a,
                       const Matrix& xb, const Matrix& yb, const GaussianLikelihood& lik,
                       std::size_t n_samples, SeededRng& rng, std::size_t dataset_size,
                       ViGradients* grads) {
    lik.validate();
    if (n_samples < 1) throw std::invalid_argument("elbo: need at least one sample");
    if (q.arch != a.mask.arch) throw std::invalid_argument("elbo: architecture mismatch");

    const double scale =
        static_cast<double>(dataset_size) / static_cast<double>(xb.rows());
    const double var = lik.variance();
    const bool want_c_grad = grads && a.policy == Policy::SignedConstant && a.learn_c;

    if (grads) *grads = zero_vi_gradients(q.arch);

    double ell_acc = 0.0;
    std::vector<Matrix> eps_w, eps_b;
    for (std::size_t s = 0; s < n_samples; ++s) {
        const MlpParams p = sample_with_noise(q, a, rng, eps_w, eps_b);
        if (!grads) {
            const Matrix pred = forward(p, xb);
            ell_acc += gaussian_log_likelihood(yb, pred, lik);
            continue;
        }
        // gradient pass shares the forward through backward()
        const Matrix pred = forward(p, xb);
        ell_acc += gaussian_log_likelihood(yb, pred, lik);
        Matrix upstream(pred.rows(), pred.cols());
        for (std::size_t i = 0; i < pred.size(); ++i)
            upstream.data()[i] = (yb.data()[i] - pred.data()[i]) / var;
        const Gradients g = backward(p, xb, upstream);
        for (std::size_t l = 0; l < g.weights.size(); ++l) {
            const BoolMat& m = a.mask.weights[l];
            for (std::size_t i = 0; i < m.rows; ++i)
                for (std::size_t j = 0; j < m.cols; ++j) {
                    const double gw = g.weights[l](i, j);
                    if (m.get(i, j)) {
                        if (want_c_grad) grads->c += a.signs[l](i, j) * gw;
                    } else {
                        grads->mu_w[l](i, j) += gw;
                        grads->rho_w[l](i, j) +=
                            gw * eps_w[l](i, j) * sigmoid(q.rho_w[l](i, j));
                    }
                }
            for (std::size_t j = 0; j < g.biases[l].cols(); ++j) {
                const double gb = g.biases[l](0, j);
                grads->mu_b[l](0, j) += gb;
                grads->rho_b[l](0, j) += gb * eps_b[l](0, j) * sigmoid(q.rho_b[l](0, j));
            }
        }
    }

    ElboEstimate est;
    est.samples = n_samples;
    est.expected_log_lik = scale * ell_acc / static_cast<double>(n_samples);
    est.kl = kl_to_standard_normal(q, a.mask);
    est.value = est.expected_log_lik - est.kl;

    if (grads) {
        const double f = scale / static_cast<double>(n_samples);
        for (std::size_t l = 0; l < grads->mu_w.size(); ++l) {
            const BoolMat& m = a.mask.weights[l];
            for (std::size_t i = 0; i < m.rows; ++i)
                for (std::size_t j = 0; j < m.cols; ++j) {
                    if (m.get(i, j)) continue;
                    const double mu = q.mu_w[l](i, j);
                    const double sg = q.sigma_w(l, i, j);
                    grads->mu_w[l](i, j) = grads->mu_w[l](i, j) * f - mu;
                    grads->rho_w[l](i, j) =
                        grads->rho_w[l](i, j) * f -
                        (sg - 1.0 / sg) * sigmoid(q.rho_w[l](i, j));
                }
            for (std::size_t j = 0; j < grads->mu_b[l].cols(); ++j) {
                const double mu = q.mu_b[l](0, j);
                const double sg = q.sigma_b(l, j);
                grads->mu_b[l](0, j) = grads->mu_b[l](0, j) * f - mu;
                grads->rho_b[l](0, j) =
                    grads->rho_b[l](0, j) * f - (sg - 1.0 / sg) * sigmoid(q.rho_b[l](0, j));
            }
        }
        grads->c *= f;
    }
    return est;
}

}  // namespace

ElboEstimate elbo(const MeanFieldPosterior& q, const FixedAssignment& assignment,
                  const Matrix& x_batch, const Matrix& y_batch,
                  const GaussianLikelihood& lik, std::size_t n_samples, SeededRng& rng,
                  std::size_t dataset_size) {
    return elbo_impl(q, assignment, x_batch, y_batch, lik, n_samples, rng, dataset_size,
                     nullptr);
}

ElboEstimate elbo_gradients(const MeanFieldPosterior& q, const FixedAssignment& assignment,
                            const Matrix& x_batch, const Matrix& y_batch,
                            const GaussianLikelihood& lik, std::size_t n_samples,
                            SeededRng& rng, std::size_t dataset_size, ViGradients& out) {
    return elbo_impl(q, assignment, x_batch, y_batch, lik, n_samples, rng, dataset_size,
                     &out);
}

namespace {

// Flat layout: per layer [mu_w free | mu_b | rho_w free | rho_b], then c.
std::size_t flat_vi_size(const MeanFieldPosterior& q, const FixedAssignment& a) {
    const bool with_c = a.policy == Policy::SignedConstant && a.learn_c;
    return 2 * free_parameter_count(q, a.mask) + (with_c ? 1 : 0);
}

void pack_vi(const MeanFieldPosterior& q, const FixedAssignment& a, std::vector<double>& out) {
    out.clear();
    for (std::size_t l = 0; l < q.mu_w.size(); ++l) {
        const BoolMat& m = a.mask.weights[l];
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j)
                if (!m.get(i, j)) out.push_back(q.mu_w[l](i, j));
        for (std::size_t j = 0; j < q.mu_b[l].cols(); ++j) out.push_back(q.mu_b[l](0, j));
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j)
                if (!m.get(i, j)) out.push_back(q.rho_w[l](i, j));
        for (std::size_t j = 0; j < q.rho_b[l].cols(); ++j) out.push_back(q.rho_b[l](0, j));
    }
    if (a.policy == Policy::SignedConstant && a.learn_c) out.push_back(a.c);
}

void unpack_vi(std::span<const double> flat, MeanFieldPosterior& q, FixedAssignment& a) {
    std::size_t k = 0;
    for (std::size_t l = 0; l < q.mu_w.size(); ++l) {
        const BoolMat& m = a.mask.weights[l];
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j)
                if (!m.get(i, j)) q.mu_w[l](i, j) = flat[k++];
        for (std::size_t j = 0; j < q.mu_b[l].cols(); ++j) q.mu_b[l](0, j) = flat[k++];
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j)
                if (!m.get(i, j)) q.rho_w[l](i, j) = flat[k++];
        for (std::size_t j = 0; j < q.rho_b[l].cols(); ++j) q.rho_b[l](0, j) = flat[k++];
    }
    if (a.policy == Policy::SignedConstant && a.learn_c) a.c = flat[k++];
}

void pack_vi_gradients(const ViGradients& g, const FixedAssignment& a,
                       std::vector<double>& out) {
    out.clear();
    for (std::size_t l = 0; l < g.mu_w.size(); ++l) {
        const BoolMat& m = a.mask.weights[l];
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j)
                if (!m.get(i, j)) out.push_back(g.mu_w[l](i, j));
        for (std::size_t j = 0; j < g.mu_b[l].cols(); ++j) out.push_back(g.mu_b[l](0, j));
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j)
                if (!m.get(i, j)) out.push_back(g.rho_w[l](i, j));
        for (std::size_t j = 0; j < g.rho_b[l].cols(); ++j) out.push_back(g.rho_b[l](0, j));
    }
    if (a.policy == Policy::SignedConstant && a.learn_c) out.push_back(g.c);
}

}  // namespace

std::pair<MeanFieldPosterior, FixedAssignment>
train_vi(const Architecture& arch, FixedAssignment assignment, const RegressionDataset& data,
         const GaussianLikelihood& lik, const ViConfig& cfg, SeededRng& rng, TrainLog* log) {
    lik.validate();
    if (arch != assignment.mask.arch)
        throw std::invalid_argument("train_vi: architecture mismatch with assignment");
    MeanFieldPosterior q = init_posterior(arch, rng, cfg.init_sigma);

    const std::size_t n = data.x_train.rows();
    const std::size_t batch =
        (cfg.adam.batch_size == 0 || cfg.adam.batch_size > n) ? n : cfg.adam.batch_size;

    AdamOptimizer opt(flat_vi_size(q, assignment), cfg.adam);
    std::vector<double> flat, grad_flat;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    ViGradients grads;

    for (std::size_t epoch = 0; epoch < cfg.adam.epochs; ++epoch) {
        if (batch < n) {
            for (std::size_t i = n; i-- > 1;)
                std::swap(order[i], order[rng.uniform_index(i + 1)]);
        }
        const double lr = scheduled_lr(cfg.adam, epoch);
        double epoch_elbo = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t count = std::min(batch, n - start);
            Matrix xb(count, data.x_train.cols()), yb(count, data.y_train.cols());
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t r = order[start + i];
                for (std::size_t j = 0; j < xb.cols(); ++j) xb(i, j) = data.x_train(r, j);
                for (std::size_t j = 0; j < yb.cols(); ++j) yb(i, j) = data.y_train(r, j);
            }
            const ElboEstimate est = elbo_gradients(q, assignment, xb, yb, lik,
                                                    cfg.mc_samples, rng, n, grads);
            if (!std::isfinite(est.value))
                throw std::runtime_error("train_vi: non-finite ELBO at epoch " +
                                         std::to_string(epoch));
            epoch_elbo += est.value;
            ++n_batches;
            pack_vi(q, assignment, flat);
            pack_vi_gradients(grads, assignment, grad_flat);
            opt.step(flat, grad_flat, lr);
            unpack_vi(flat, q, assignment);
        }
        if (log) log->objective.push_back(epoch_elbo / static_cast<double>(n_batches));
    }
    return {std::move(q), std::move(assignment)};
}

namespace {

void write_block(std::ostream& os, const Matrix& m) {
    char buf[32];
    for (double v : m.data()) {
        std::snprintf(buf, sizeof buf, "%a", v);
        os << buf << '\n';
    }
}

void read_block(std::istream& is, Matrix& m) {
    std::string tok;
    for (double& v : m.data()) {
        if (!(is >> tok)) throw std::runtime_error("load_posterior: truncated file");
        v = std::strtod(tok.c_str(), nullptr);
    }
}

}  // namespace

void save_posterior(const std::string& path, const MeanFieldPosterior& q,
                    const FixedAssignment& assignment) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_posterior: cannot open " + path);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%a", assignment.c);
    os << "posterior v1\npolicy " << to_string(assignment.policy) << " c " << buf
       << " learn_c " << (assignment.learn_c ? 1 : 0) << '\n';
    os << mask_to_text(assignment.mask, "checkpoint");
    for (std::size_t l = 0; l < q.mu_w.size(); ++l) {
        write_block(os, q.mu_w[l]);
        write_block(os, q.mu_b[l]);
        write_block(os, q.rho_w[l]);
        write_block(os, q.rho_b[l]);
        if (assignment.policy == Policy::SignedConstant) write_block(os, assignment.signs[l]);
        if (assignment.policy == Policy::MapValues) write_block(os, assignment.values[l]);
    }
}

std::pair<MeanFieldPosterior, FixedAssignment> load_posterior(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_posterior: cannot open " + path);
    std::string line, word;
    std::getline(is, line);
    if (line != "posterior v1") throw std::runtime_error("load_posterior: bad header");

    FixedAssignment a;
    {
        std::getline(is, line);
        std::istringstream ls(line);
        std::string policy_s, c_s;
        int learn;
        ls >> word >> policy_s >> word >> c_s >> word >> learn;
        a.policy = policy_from_string(policy_s);
        a.c = std::strtod(c_s.c_str(), nullptr);
        a.learn_c = learn != 0;
    }
    // mask section: header + dims + activations + one line per layer
    std::string mask_text;
    std::getline(is, line);  // "mask v1 ..."
    mask_text += line + "\n";
    std::getline(is, line);  // dims
    std::size_t n_layers = 0;
    {
        std::istringstream ls(line);
        std::size_t d;
        ls >> word;
        while (ls >> d) ++n_layers;
        if (n_layers > 0) --n_layers;  // L = dims count - 1
    }
    mask_text += line + "\n";
    std::getline(is, line);  // activations
    mask_text += line + "\n";
    for (std::size_t l = 0; l < n_layers; ++l) {
        std::getline(is, line);
        mask_text += line + "\n";
    }
    a.mask = mask_from_text(mask_text);

    MeanFieldPosterior q;
    q.arch = a.mask.arch;
    for (std::size_t l = 1; l < q.arch.dims.size(); ++l) {
        const std::size_t r = q.arch.dims[l - 1], c = q.arch.dims[l];
        q.mu_w.emplace_back(r, c);
        q.mu_b.emplace_back(1, c);
        q.rho_w.emplace_back(r, c);
        q.rho_b.emplace_back(1, c);
        read_block(is, q.mu_w.back());
        read_block(is, q.mu_b.back());
        read_block(is, q.rho_w.back());
        read_block(is, q.rho_b.back());
        if (a.policy == Policy::SignedConstant) {
            a.signs.emplace_back(r, c);
            read_block(is, a.signs.back());
        }
        if (a.policy == Policy::MapValues) {
            a.values.emplace_back(r, c);
            read_block(is, a.values.back());
        }
    }
    return {std::move(q), std::move(a)};
}

}  // namespace symbreak
