#include "symbreak/network.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace symbreak {

void MlpParams::validate() const {
    arch.validate();
    const std::size_t L = arch.num_layers();
    if (weights.size() != L || biases.size() != L)
        throw std::invalid_argument("MlpParams: layer count mismatch");
    for (std::size_t l = 0; l < L; ++l) {
        if (weights[l].rows() != arch.dims[l] || weights[l].cols() != arch.dims[l + 1])
            throw std::invalid_argument("MlpParams: weight shape mismatch at layer " +
                                        std::to_string(l + 1));
        if (biases[l].rows() != 1 || biases[l].cols() != arch.dims[l + 1])
            throw std::invalid_argument("MlpParams: bias shape mismatch at layer " +
                                        std::to_string(l + 1));
    }
}

MlpParams zero_params(const Architecture& arch) {
    arch.validate();
    MlpParams p;
    p.arch = arch;
    for (std::size_t l = 1; l < arch.dims.size(); ++l) {
        p.weights.emplace_back(arch.dims[l - 1], arch.dims[l]);
        p.biases.emplace_back(1, arch.dims[l]);
    }
    return p;
}

MlpParams init_params(const Architecture& arch, SeededRng& rng) {
    MlpParams p = zero_params(arch);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(arch.dims[l]));
        for (double& v : p.weights[l].data()) v = scale * rng.normal();
        for (double& v : p.biases[l].data()) v = scale * rng.normal();
    }
    return p;
}

namespace {

struct ForwardCache {
    std::vector<Matrix> activations;  // h_0 = x, ..., h_L
};

Matrix forward_impl(const MlpParams& params, const Matrix& x, ForwardCache* cache) {
    if (x.cols() != params.arch.dims[0])
        throw std::invalid_argument("forward: input has " + std::to_string(x.cols()) +
                                    " columns, expected " +
                                    std::to_string(params.arch.dims[0]));
    Matrix h = x;
    if (cache) cache->activations.push_back(h);
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        Matrix z = matmul(h, params.weights[l]);
        const Matrix& b = params.biases[l];
        const Activation act = params.arch.activations[l];
        for (std::size_t i = 0; i < z.rows(); ++i)
            for (std::size_t j = 0; j < z.cols(); ++j)
                z(i, j) = activate(act, z(i, j) + b(0, j));
        h = std::move(z);
        if (cache) cache->activations.push_back(h);
    }
    return h;
}

}  // namespace

Matrix forward(const MlpParams& params, const Matrix& x) {
    return forward_impl(params, x, nullptr);
}

Gradients backward(const MlpParams& params, const Matrix& x, const Matrix& upstream) {
    ForwardCache cache;
    Matrix out = forward_impl(params, x, &cache);
    if (!upstream.same_shape(out))
        throw std::invalid_argument("backward: upstream shape mismatch");

    const std::size_t L = params.weights.size();
    Gradients g;
    g.weights.resize(L);
    g.biases.resize(L);

    // delta holds d<upstream, out>/dz_l going backwards
    Matrix delta = upstream;
    for (std::size_t l = L; l-- > 0;) {
        const Matrix& h_out = cache.activations[l + 1];
        const Activation act = params.arch.activations[l];
        for (std::size_t i = 0; i < delta.rows(); ++i)
            for (std::size_t j = 0; j < delta.cols(); ++j)
                delta(i, j) *= activate_derivative(act, h_out(i, j));

        const Matrix& h_in = cache.activations[l];
        g.weights[l] = matmul(transpose(h_in), delta);
        Matrix db(1, delta.cols());
        for (std::size_t i = 0; i < delta.rows(); ++i)
            for (std::size_t j = 0; j < delta.cols(); ++j) db(0, j) += delta(i, j);
        g.biases[l] = std::move(db);

        if (l > 0) delta = matmul(delta, transpose(params.weights[l]));
    }
    return g;
}

Policy policy_from_string(const std::string& s) {
    if (s == "prune") return Policy::Prune;
    if (s == "signed_constant") return Policy::SignedConstant;
    if (s == "map") return Policy::MapValues;
    throw std::invalid_argument("unknown policy: " + s);
}

std::string to_string(Policy p) {
    switch (p) {
        case Policy::Prune: return "prune";
        case Policy::SignedConstant: return "signed_constant";
        case Policy::MapValues: return "map";
    }
    throw std::logic_error("bad policy tag");
}

double FixedAssignment::value_at(std::size_t layer, std::size_t i, std::size_t j) const {
    switch (policy) {
        case Policy::Prune: return 0.0;
        case Policy::SignedConstant: return signs[layer](i, j) * c;
        case Policy::MapValues: return values[layer](i, j);
    }
    throw std::logic_error("bad policy tag");
}

FixedAssignment make_prune(LayerMask mask) {
    FixedAssignment a;
    a.mask = std::move(mask);
    a.policy = Policy::Prune;
    return a;
}

FixedAssignment make_signed_constant(LayerMask mask, double c, bool learn_c, SeededRng& rng) {
    FixedAssignment a;
    a.policy = Policy::SignedConstant;
    a.c = c;
    a.learn_c = learn_c;
    for (const BoolMat& w : mask.weights) {
        Matrix s(w.rows, w.cols);
        for (std::size_t i = 0; i < w.rows; ++i)
            for (std::size_t j = 0; j < w.cols; ++j)
                if (w.get(i, j)) s(i, j) = rng.uniform() < 0.5 ? -1.0 : 1.0;
        a.signs.push_back(std::move(s));
    }
    a.mask = std::move(mask);
    return a;
}

FixedAssignment make_map_values(LayerMask mask, const MlpParams& map_params) {
    map_params.validate();
    if (map_params.arch != mask.arch)
        throw std::invalid_argument("make_map_values: architecture mismatch");
    FixedAssignment a;
    a.policy = Policy::MapValues;
    for (std::size_t l = 0; l < mask.weights.size(); ++l) {
        const BoolMat& w = mask.weights[l];
        Matrix v(w.rows, w.cols);
        for (std::size_t i = 0; i < w.rows; ++i)
            for (std::size_t j = 0; j < w.cols; ++j)
                if (w.get(i, j)) v(i, j) = map_params.weights[l](i, j);
        a.values.push_back(std::move(v));
    }
    a.mask = std::move(mask);
    return a;
}

MlpParams apply_fixed(MlpParams params, const FixedAssignment& assignment) {
    params.validate();
    if (params.arch != assignment.mask.arch)
        throw std::invalid_argument("apply_fixed: architecture mismatch");
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        const BoolMat& m = assignment.mask.weights[l];
        for (std::size_t i = 0; i < m.rows; ++i)
            for (std::size_t j = 0; j < m.cols; ++j)
                if (m.get(i, j)) params.weights[l](i, j) = assignment.value_at(l, i, j);
    }
    return params;
}

namespace {

void write_doubles(std::ostream& os, std::span<const double> vals) {
    char buf[32];
    for (double v : vals) {
        std::snprintf(buf, sizeof buf, "%a", v);
        os << buf << '\n';
    }
}

void read_doubles(std::istream& is, std::span<double> vals) {
    std::string tok;
    for (double& v : vals) {
        if (!(is >> tok)) throw std::runtime_error("load_params: truncated file");
        v = std::strtod(tok.c_str(), nullptr);
    }
}

}  // namespace

void save_params(const std::string& path, const MlpParams& params) {
    params.validate();
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_params: cannot open " + path);
    os << "mlp v1\ndims";
    for (std::size_t d : params.arch.dims) os << ' ' << d;
    os << "\nactivations";
    for (Activation a : params.arch.activations) os << ' ' << to_string(a);
    os << '\n';
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        write_doubles(os, params.weights[l].data());
        write_doubles(os, params.biases[l].data());
    }
}

MlpParams load_params(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_params: cannot open " + path);
    std::string line, word;
    std::getline(is, line);
    if (line != "mlp v1") throw std::runtime_error("load_params: bad header in " + path);

    Architecture arch;
    std::getline(is, line);
    {
        std::istringstream ls(line);
        ls >> word;
        std::size_t d;
        while (ls >> d) arch.dims.push_back(d);
    }
    std::getline(is, line);
    {
        std::istringstream ls(line);
        ls >> word;
        while (ls >> word) arch.activations.push_back(activation_from_string(word));
    }
    MlpParams p = zero_params(arch);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        read_doubles(is, p.weights[l].data());
        read_doubles(is, p.biases[l].data());
    }
    return p;
}

}  // namespace symbreak
