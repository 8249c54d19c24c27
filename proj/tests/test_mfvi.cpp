#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "symbreak/mfvi.hpp"

using namespace symbreak;

namespace {

RegressionDataset tiny_dataset(SeededRng& rng, std::size_t n, std::size_t d_in,
                               std::size_t d_out) {
    RegressionDataset d;
    d.x_train = sample_std_normal(rng, n, d_in);
    d.y_train = sample_std_normal(rng, n, d_out);
    d.x_test = d.x_train;
    d.y_test = d.y_train;
    return d;
}

}  // namespace

TEST_CASE("softplus inverse round trip") {
    for (double s : {0.01, 0.05, 1.0, 7.5, 40.0})
        CHECK(softplus(inv_softplus(s)) == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("sample_params degenerate and prune cases") {
    const auto arch = Architecture::mlp({2, 3, 2}, Activation::Tanh);
    SeededRng init_rng(1);
    MeanFieldPosterior q = init_posterior(arch, init_rng);
    for (Matrix* rho : {&q.rho_w[0], &q.rho_w[1], &q.rho_b[0], &q.rho_b[1]})
        for (double& v : rho->data()) v = -60.0;  // sigma -> 0

    const FixedAssignment prune = make_prune(generate_mask(arch, Scheme::Light));
    SeededRng rng(2);
    const MlpParams p = sample_params(q, prune, rng);
    CHECK(p.weights[0](0, 0) == 0.0);
    CHECK(p.weights[1](2, 1) == 0.0);
    CHECK(p.weights[0](1, 1) == doctest::Approx(q.mu_w[0](1, 1)).epsilon(1e-12));
    CHECK(p.biases[0](0, 2) == doctest::Approx(q.mu_b[0](0, 2)).epsilon(1e-12));
}

TEST_CASE("sample mean of one free weight obeys the CLT bound") {
    const auto arch = Architecture::mlp({1, 2, 1}, Activation::Tanh);
    SeededRng init_rng(3);
    MeanFieldPosterior q = init_posterior(arch, init_rng);
    q.mu_w[0](0, 0) = 0.7;
    q.rho_w[0](0, 0) = inv_softplus(0.3);
    const FixedAssignment none = make_prune(empty_mask(arch));

    SeededRng rng(4);
    const std::size_t n = 100000;
    double mean = 0.0;
    for (std::size_t s = 0; s < n; ++s) mean += sample_params(q, none, rng).weights[0](0, 0);
    mean /= static_cast<double>(n);
    CHECK(std::fabs(mean - 0.7) <= 4.0 * 0.3 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("KL closed-form trivial cases") {
    const auto arch = Architecture::mlp({1, 1, 1}, Activation::Identity);
    SeededRng rng(5);
    MeanFieldPosterior q = init_posterior(arch, rng);
    const LayerMask none = empty_mask(arch);
    for (Matrix* m : {&q.mu_w[0], &q.mu_w[1], &q.mu_b[0], &q.mu_b[1]})
        for (double& v : m->data()) v = 0.0;
    for (Matrix* m : {&q.rho_w[0], &q.rho_w[1], &q.rho_b[0], &q.rho_b[1]})
        for (double& v : m->data()) v = inv_softplus(1.0);
    CHECK(kl_to_standard_normal(q, none) == doctest::Approx(0.0).epsilon(1e-12));

    q.mu_w[0](0, 0) = 1.0;  // one N(1,1) factor contributes 1/2
    CHECK(kl_to_standard_normal(q, none) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("KL matches a Monte Carlo estimate") {
    const auto arch = Architecture::mlp({1, 2, 1}, Activation::Tanh);
    SeededRng init_rng(6);
    MeanFieldPosterior q = init_posterior(arch, init_rng);
    // randomize the posterior away from the init
    for (Matrix* m : {&q.mu_w[0], &q.mu_w[1]})
        for (double& v : m->data()) v = init_rng.normal();
    for (Matrix* m : {&q.rho_w[0], &q.rho_w[1]})
        for (double& v : m->data()) v = inv_softplus(0.2 + init_rng.uniform());
    const LayerMask none = empty_mask(arch);
    const double analytic = kl_to_standard_normal(q, none);

    // MC oracle: E_q[log q(z) - log p(z)] over all free factors
    SeededRng rng(7);
    const std::size_t n = 1000000;
    double acc = 0.0, acc2 = 0.0;
    auto factor = [&](double mu, double sigma) {
        const double z = mu + sigma * rng.normal();
        const double lq = -0.5 * std::log(2.0 * std::numbers::pi * sigma * sigma) -
                          0.5 * (z - mu) * (z - mu) / (sigma * sigma);
        const double lp = -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * z * z;
        return lq - lp;
    };
    for (std::size_t s = 0; s < n; ++s) {
        double v = 0.0;
        for (std::size_t l = 0; l < q.mu_w.size(); ++l) {
            for (std::size_t i = 0; i < q.mu_w[l].rows(); ++i)
                for (std::size_t j = 0; j < q.mu_w[l].cols(); ++j)
                    v += factor(q.mu_w[l](i, j), q.sigma_w(l, i, j));
            for (std::size_t j = 0; j < q.mu_b[l].cols(); ++j)
                v += factor(q.mu_b[l](0, j), q.sigma_b(l, j));
        }
        acc += v;
        acc2 += v * v;
    }
    const double mc = acc / static_cast<double>(n);
    const double se =
        std::sqrt((acc2 / static_cast<double>(n) - mc * mc) / static_cast<double>(n));
    CHECK(std::fabs(mc - analytic) <= 3.0 * se);
}

TEST_CASE("elbo decomposition and degenerate collapse") {
    const auto arch = Architecture::mlp({2, 3, 1}, Activation::Tanh);
    SeededRng data_rng(8);
    const RegressionDataset d = tiny_dataset(data_rng, 6, 2, 1);
    const GaussianLikelihood lik{0.4};

    SeededRng init_rng(9);
    MeanFieldPosterior q = init_posterior(arch, init_rng);
    const FixedAssignment none = make_prune(empty_mask(arch));

    SeededRng rng(10);
    const ElboEstimate est = elbo(q, none, d.x_train, d.y_train, lik, 8, rng, 6);
    CHECK(est.value == est.expected_log_lik - est.kl);
    CHECK(est.kl == kl_to_standard_normal(q, none.mask));

    // sigma -> 0 collapses the ELL onto the likelihood at the mean
    for (auto* rho : {&q.rho_w[0], &q.rho_w[1], &q.rho_b[0], &q.rho_b[1]})
        for (double& v : rho->data()) v = -60.0;
    SeededRng rng2(11);
    const ElboEstimate point = elbo(q, none, d.x_train, d.y_train, lik, 1, rng2, 6);
    MlpParams mean_net = zero_params(arch);
    mean_net.weights = q.mu_w;
    mean_net.biases = q.mu_b;
    const double expected = gaussian_log_likelihood(d.y_train, forward(mean_net, d.x_train), lik);
    CHECK(point.expected_log_lik == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("elbo is deterministic given the seed and scales minibatches") {
    const auto arch = Architecture::mlp({2, 3, 1}, Activation::Sigmoid);
    SeededRng data_rng(12);
    const RegressionDataset d = tiny_dataset(data_rng, 8, 2, 1);
    const GaussianLikelihood lik{0.5};
    SeededRng init_rng(13);
    const MeanFieldPosterior q = init_posterior(arch, init_rng);
    const FixedAssignment none = make_prune(empty_mask(arch));

    SeededRng a(14), b(14);
    const ElboEstimate e1 = elbo(q, none, d.x_train, d.y_train, lik, 4, a, 8);
    const ElboEstimate e2 = elbo(q, none, d.x_train, d.y_train, lik, 4, b, 8);
    CHECK(e1.value == e2.value);

    // half batch with dataset_size 8 doubles the ELL weight relative to
    // the same half batch treated as a full dataset of 4
    Matrix xh(4, 2), yh(4, 1);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 2; ++j) xh(i, j) = d.x_train(i, j);
        yh(i, 0) = d.y_train(i, 0);
    }
    SeededRng c1(15), c2(15);
    const ElboEstimate full = elbo(q, none, xh, yh, lik, 4, c1, 8);
    const ElboEstimate half = elbo(q, none, xh, yh, lik, 4, c2, 4);
    CHECK(full.expected_log_lik == doctest::Approx(2.0 * half.expected_log_lik).epsilon(1e-12));
}

TEST_CASE("elbo gradients match finite differences with common random numbers") {
    const auto arch = Architecture::mlp({2, 3, 1}, Activation::Tanh);
    SeededRng data_rng(16);
    const RegressionDataset d = tiny_dataset(data_rng, 5, 2, 1);
    const GaussianLikelihood lik{0.6};

    SeededRng init_rng(17);
    MeanFieldPosterior q = init_posterior(arch, init_rng);
    SeededRng sign_rng(18);
    FixedAssignment a =
        make_signed_constant(generate_mask(arch, Scheme::Light), 2.0, true, sign_rng);

    const std::uint64_t noise_seed = 19;
    const std::size_t S = 4;
    ViGradients g;
    {
        SeededRng rng(noise_seed);
        elbo_gradients(q, a, d.x_train, d.y_train, lik, S, rng, 5, g);
    }
    auto eval = [&]() {
        SeededRng rng(noise_seed);
        return elbo(q, a, d.x_train, d.y_train, lik, S, rng, 5).value;
    };
    const double h = 1e-5;
    auto check_entry = [&](double* theta, double analytic) {
        const double orig = *theta;
        *theta = orig + h;
        const double up = eval();
        *theta = orig - h;
        const double down = eval();
        *theta = orig;
        const double fd = (up - down) / (2 * h);
        CHECK(std::fabs(fd - analytic) <= 1e-4 * std::max(1.0, std::fabs(fd)));
    };
    const BoolMat& m0 = a.mask.weights[0];
    for (std::size_t l = 0; l < q.mu_w.size(); ++l) {
        const BoolMat& m = a.mask.weights[l];
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j) {
                if (m.get(i, j)) {
                    CHECK(g.mu_w[l](i, j) == 0.0);
                    CHECK(g.rho_w[l](i, j) == 0.0);
                    continue;
                }
                check_entry(&q.mu_w[l](i, j), g.mu_w[l](i, j));
                check_entry(&q.rho_w[l](i, j), g.rho_w[l](i, j));
            }
        for (std::size_t j = 0; j < q.mu_b[l].cols(); ++j) {
            check_entry(&q.mu_b[l](0, j), g.mu_b[l](0, j));
            check_entry(&q.rho_b[l](0, j), g.rho_b[l](0, j));
        }
    }
    (void)m0;
    check_entry(&a.c, g.c);
}

TEST_CASE("no c gradient without fixed positions or under prune") {
    const auto arch = Architecture::mlp({2, 3, 1}, Activation::Tanh);
    SeededRng data_rng(20);
    const RegressionDataset d = tiny_dataset(data_rng, 4, 2, 1);
    SeededRng init_rng(21);
    const MeanFieldPosterior q = init_posterior(arch, init_rng);

    SeededRng sign_rng(22);
    FixedAssignment empty_sc = make_signed_constant(empty_mask(arch), 3.0, true, sign_rng);
    ViGradients g;
    SeededRng rng(23);
    elbo_gradients(q, empty_sc, d.x_train, d.y_train, GaussianLikelihood{0.5}, 2, rng, 4, g);
    CHECK(g.c == 0.0);

    FixedAssignment prune = make_prune(generate_mask(arch, Scheme::Light));
    CHECK(prune.learn_c == false);
    SeededRng rng2(24);
    elbo_gradients(q, prune, d.x_train, d.y_train, GaussianLikelihood{0.5}, 2, rng2, 4, g);
    CHECK(g.c == 0.0);
}

TEST_CASE("train_vi on the conjugate linear-Gaussian model") {
    // y = w x + b with symmetric inputs: the exact posterior factorizes,
    // so mean-field can match it exactly.
    Architecture lin;
    lin.dims = {1, 1};
    lin.activations = {Activation::Identity};

    RegressionDataset d;
    d.x_train = Matrix(6, 1);
    d.y_train = Matrix(6, 1);
    const double xs[6] = {-1.5, 1.5, -0.8, 0.8, -0.3, 0.3};
    const double ys[6] = {-1.1, 1.3, -0.5, 0.9, -0.4, 0.6};
    for (int i = 0; i < 6; ++i) {
        d.x_train(i, 0) = xs[i];
        d.y_train(i, 0) = ys[i];
    }
    d.x_test = d.x_train;
    d.y_test = d.y_train;
    const GaussianLikelihood lik{0.5};

    // exact factorized posterior: precision 1 + sum x^2 / s2 for w,
    // 1 + n / s2 for b (cross terms vanish since sum x = 0)
    const double s2 = lik.variance();
    double sxx = 0.0, sxy = 0.0, sy = 0.0;
    for (int i = 0; i < 6; ++i) {
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
        sy += ys[i];
    }
    const double prec_w = 1.0 + sxx / s2, prec_b = 1.0 + 6.0 / s2;
    const double post_mu_w = (sxy / s2) / prec_w, post_mu_b = (sy / s2) / prec_b;

    ViConfig cfg;
    cfg.adam.lr_start = 5e-3;
    cfg.adam.lr_end = 1e-4;
    cfg.adam.epochs = 4000;
    cfg.mc_samples = 32;
    SeededRng rng(25);
    const auto [q, _] =
        train_vi(lin, make_prune(empty_mask(lin)), d, lik, cfg, rng);
    CHECK(q.mu_w[0](0, 0) == doctest::Approx(post_mu_w).scale(1).epsilon(0.01));
    CHECK(q.mu_b[0](0, 0) == doctest::Approx(post_mu_b).scale(1).epsilon(0.01));
    CHECK(q.sigma_w(0, 0, 0) == doctest::Approx(1.0 / std::sqrt(prec_w)).scale(1).epsilon(0.01));
    CHECK(q.sigma_b(0, 0) == doctest::Approx(1.0 / std::sqrt(prec_b)).scale(1).epsilon(0.01));
}

TEST_CASE("train_vi zero epochs returns the initialization") {
    const auto arch = Architecture::mlp({1, 3, 1}, Activation::Tanh);
    SeededRng data_rng(26);
    const RegressionDataset d = tiny_dataset(data_rng, 4, 1, 1);
    ViConfig cfg;
    cfg.adam.epochs = 0;
    SeededRng rng_a(27), rng_b(27);
    const auto [q, _] = train_vi(arch, make_prune(empty_mask(arch)), d,
                                 GaussianLikelihood{0.5}, cfg, rng_a);
    const MeanFieldPosterior init = init_posterior(arch, rng_b, cfg.init_sigma);
    for (std::size_t l = 0; l < q.mu_w.size(); ++l) {
        CHECK(frobenius_distance(q.mu_w[l], init.mu_w[l]) == 0.0);
        CHECK(frobenius_distance(q.rho_w[l], init.rho_w[l]) == 0.0);
    }
}

TEST_CASE("elbo trend improves over training") {
    const auto arch = Architecture::mlp({1, 8, 1}, Activation::Tanh);
    SeededRng data_rng(28);
    RegressionDataset d;
    d.x_train = sample_std_normal(data_rng, 16, 1);
    d.y_train = Matrix(16, 1);
    for (std::size_t i = 0; i < 16; ++i)
        d.y_train(i, 0) = std::sin(2.0 * d.x_train(i, 0));
    d.x_test = d.x_train;
    d.y_test = d.y_train;

    ViConfig cfg;
    cfg.adam.epochs = 400;
    cfg.mc_samples = 8;
    SeededRng rng(29);
    TrainLog log;
    train_vi(arch, make_prune(empty_mask(arch)), d, GaussianLikelihood{0.3}, cfg, rng, &log);
    REQUIRE(log.objective.size() == 400);
    auto median_of = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    const std::vector<double> first(log.objective.begin(), log.objective.begin() + 40);
    const std::vector<double> last(log.objective.end() - 40, log.objective.end());
    CHECK(median_of(last) > median_of(first));
}

TEST_CASE("free parameter count excludes fixed positions") {
    const auto arch = Architecture::mlp({8, 50, 50, 2}, Activation::Tanh);
    SeededRng rng(30);
    const MeanFieldPosterior q = init_posterior(arch, rng);
    const LayerMask heavy = generate_mask(arch, Scheme::Heavy);
    const std::size_t total = arch.total_weight_count() + arch.total_bias_count();
    CHECK(free_parameter_count(q, heavy) == total - count_fixed(heavy));
}

TEST_CASE("posterior checkpoint exact round trip") {
    const auto arch = Architecture::mlp({2, 4, 2}, Activation::Sigmoid);
    SeededRng rng(31);
    MeanFieldPosterior q = init_posterior(arch, rng);
    SeededRng sign_rng(32);
    FixedAssignment a =
        make_signed_constant(generate_mask(arch, Scheme::Heavy), 4.5, true, sign_rng);
    a.c = 3.25;

    const std::string path =
        (std::filesystem::temp_directory_path() / "sb_posterior.txt").string();
    save_posterior(path, q, a);
    const auto [q2, a2] = load_posterior(path);
    CHECK(q2.arch == q.arch);
    CHECK(a2.policy == a.policy);
    CHECK(a2.c == a.c);
    CHECK(a2.learn_c == a.learn_c);
    CHECK(a2.mask == a.mask);
    for (std::size_t l = 0; l < q.mu_w.size(); ++l) {
        CHECK(frobenius_distance(q2.mu_w[l], q.mu_w[l]) == 0.0);
        CHECK(frobenius_distance(q2.rho_w[l], q.rho_w[l]) == 0.0);
        CHECK(frobenius_distance(q2.mu_b[l], q.mu_b[l]) == 0.0);
        CHECK(frobenius_distance(q2.rho_b[l], q.rho_b[l]) == 0.0);
        CHECK(frobenius_distance(a2.signs[l], a.signs[l]) == 0.0);
    }
    std::remove(path.c_str());
}
