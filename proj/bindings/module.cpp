#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "symbreak/data.hpp"
#include "symbreak/experiment.hpp"
#include "symbreak/masks.hpp"
#include "symbreak/metrics.hpp"
#include "symbreak/mfvi.hpp"
#include "symbreak/network.hpp"
#include "symbreak/sym_oracle.hpp"

namespace py = pybind11;
using namespace symbreak;

namespace {

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2D array");
    Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::memcpy(m.data().data(), a.data(), sizeof(double) * m.size());
    return m;
}

py::array_t<double> to_array(const Matrix& m) {
    py::array_t<double> a({m.rows(), m.cols()});
    std::memcpy(a.mutable_data(), m.data().data(), sizeof(double) * m.size());
    return a;
}

py::array_t<bool> to_array(const BoolMat& m) {
    py::array_t<bool> a({m.rows, m.cols});
    auto r = a.mutable_unchecked<2>();
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) r(i, j) = m.get(i, j);
    return a;
}

Architecture make_arch(const std::vector<std::size_t>& dims, const std::string& activation) {
    return Architecture::mlp(dims, activation_from_string(activation));
}

FixedAssignment make_assignment(const Architecture& arch, const std::string& scheme,
                                const std::string& policy, double c, std::uint64_t seed) {
    const LayerMask mask = scheme == "none" ? empty_mask(arch)
                                            : generate_mask(arch, scheme_from_string(scheme));
    SeededRng rng(seed);
    switch (policy_from_string(policy)) {
        case Policy::Prune: return make_prune(mask);
        case Policy::SignedConstant: return make_signed_constant(mask, c, false, rng);
        case Policy::MapValues: return make_map_values(mask, init_params(arch, rng));
    }
    throw std::logic_error("unreachable");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "symmetry-breaking weight masks and mean-field VI for small MLPs";

    m.def(
        "generate_mask",
        [](const std::vector<std::size_t>& dims, const std::string& scheme,
           const std::string& activation) {
            const LayerMask mask = generate_mask(make_arch(dims, activation),
                                                 scheme_from_string(scheme));
            py::list weights;
            for (const BoolMat& w : mask.weights) weights.append(to_array(w));
            return py::dict(py::arg("weights") = weights,
                            py::arg("n_fixed") = count_fixed(mask),
                            py::arg("warning") = mask.warning);
        },
        py::arg("dims"), py::arg("scheme"), py::arg("activation") = "sigmoid",
        "Structured fixing mask: one boolean array per weight matrix.");

    m.def(
        "fully_connected_count",
        [](const std::vector<std::size_t>& dims, std::size_t hidden_layer) {
            return fully_connected_count(make_arch(dims, "sigmoid"), hidden_layer);
        },
        py::arg("dims"), py::arg("hidden_layer"),
        "Neurons of a hidden layer left fully connected on both sides.");

    m.def(
        "residual_permutation_counts",
        [](const std::vector<std::size_t>& dims, const std::string& scheme,
           const std::string& policy, double c, std::uint64_t seed) {
            const Architecture arch = make_arch(dims, "sigmoid");
            const FixedAssignment a = make_assignment(arch, scheme, policy, c, seed);
            std::vector<std::size_t> counts;
            for (std::size_t l = 1; l + 1 <= arch.num_layers(); ++l)
                counts.push_back(residual_permutations(a, l).size());
            return counts;
        },
        py::arg("dims"), py::arg("scheme"), py::arg("policy") = "prune", py::arg("c") = 5.0,
        py::arg("seed") = 0,
        "Brute-force count of structure-preserving hidden-neuron permutations per layer.");

    m.def(
        "forward",
        [](const std::vector<std::size_t>& dims, const std::string& activation,
           const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& ws,
           const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& bs,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
            MlpParams p;
            p.arch = make_arch(dims, activation);
            for (const auto& w : ws) p.weights.push_back(to_matrix(w));
            for (const auto& b : bs) p.biases.push_back(to_matrix(b));
            p.validate();
            return to_array(forward(p, to_matrix(x)));
        },
        py::arg("dims"), py::arg("activation"), py::arg("weights"), py::arg("biases"),
        py::arg("x"), "Batched MLP forward pass; rows of x are datapoints.");

    m.def(
        "generate_gp_dataset",
        [](std::size_t n_train, std::size_t n_test, double lengthscale, double noise_sigma,
           std::uint64_t seed) {
            GpGenConfig cfg;
            cfg.n_points = n_train;
            cfg.n_test = n_test;
            cfg.lengthscale = lengthscale;
            cfg.noise_sigma = noise_sigma;
            cfg.seed = seed;
            const RegressionDataset d = generate_gp_dataset(cfg);
            return py::dict(py::arg("x_train") = to_array(d.x_train),
                            py::arg("y_train") = to_array(d.y_train),
                            py::arg("x_test") = to_array(d.x_test),
                            py::arg("y_test") = to_array(d.y_test));
        },
        py::arg("n_train") = 64, py::arg("n_test") = 16, py::arg("lengthscale") = 0.2,
        py::arg("noise_sigma") = 0.05, py::arg("seed") = 0,
        "Two-interval 1D GP regression draw (train and test from one joint sample).");

    m.def(
        "logsumexp",
        [](const std::vector<double>& v) { return logsumexp(v); }, py::arg("values"),
        "Max-subtracted log-sum-exp.");

    m.def(
        "run_single",
        [](const std::string& config_json, const std::string& column, std::uint64_t seed) {
            const ExperimentConfig cfg = ExperimentConfig::from_json(config_json);
            cfg.validate();
            const SeedResult r = run_single(cfg, run_spec_for_column(column), seed);
            if (r.failed) throw std::runtime_error(r.error);
            return py::dict(py::arg("rmse") = r.report.rmse, py::arg("lpp") = r.report.lpp,
                            py::arg("rmse_destandardized") = r.report.rmse_destandardized,
                            py::arg("final_c") = r.final_c, py::arg("seed") = r.seed);
        },
        py::arg("config_json"), py::arg("column"), py::arg("seed") = 0,
        "Data -> mask -> MFVI -> evaluation for one table column and seed; "
        "writes the per-seed artifacts under the config's out_dir.");

    m.def("all_columns", [] { return all_columns(); },
          "Names of the nine result-table columns.");

    m.def(
        "default_config",
        [] {
            ExperimentConfig cfg;
            return cfg.to_json();
        },
        "JSON text of the default experiment configuration.");
}
