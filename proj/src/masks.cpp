#include "symbreak/masks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace symbreak {

Activation activation_from_string(const std::string& s) {
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "tanh") return Activation::Tanh;
    if (s == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    throw std::logic_error("bad activation tag");
}

double activate(Activation a, double z) {
    switch (a) {
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::Tanh: return std::tanh(z);
        case Activation::Identity: return z;
    }
    throw std::logic_error("bad activation tag");
}

double activate_derivative(Activation a, double activated) {
    switch (a) {
        case Activation::Sigmoid: return activated * (1.0 - activated);
        case Activation::Tanh: return 1.0 - activated * activated;
        case Activation::Identity: return 1.0;
    }
    throw std::logic_error("bad activation tag");
}

Architecture Architecture::mlp(std::vector<std::size_t> dims, Activation hidden) {
    Architecture arch;
    arch.dims = std::move(dims);
    if (arch.dims.size() >= 2) {
        arch.activations.assign(arch.dims.size() - 2, hidden);
        arch.activations.push_back(Activation::Identity);
    }
    arch.validate();
    return arch;
}

std::size_t Architecture::total_weight_count() const {
    std::size_t n = 0;
    for (std::size_t l = 1; l < dims.size(); ++l) n += dims[l - 1] * dims[l];
    return n;
}

std::size_t Architecture::total_bias_count() const {
    std::size_t n = 0;
    for (std::size_t l = 1; l < dims.size(); ++l) n += dims[l];
    return n;
}

void Architecture::validate() const {
    if (dims.size() < 2)
        throw std::invalid_argument("Architecture: need at least one weight layer");
    for (std::size_t d : dims)
        if (d < 1) throw std::invalid_argument("Architecture: all dims must be >= 1");
    if (activations.size() != dims.size() - 1)
        throw std::invalid_argument("Architecture: one activation per weight layer required");
}

Scheme scheme_from_string(const std::string& s) {
    if (s == "light") return Scheme::Light;
    if (s == "heavy") return Scheme::Heavy;
    throw std::invalid_argument("unknown scheme: " + s);
}

std::string to_string(Scheme s) {
    return s == Scheme::Light ? "light" : "heavy";
}

std::size_t BoolMat::count() const {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

long fully_connected_count(const Architecture& arch, std::size_t hidden_layer) {
    arch.validate();
    if (hidden_layer < 1 || hidden_layer > arch.num_hidden())
        throw std::out_of_range("fully_connected_count: hidden layer index out of range");
    const long dl = static_cast<long>(arch.dims[hidden_layer]);
    const long dprev = static_cast<long>(arch.dims[hidden_layer - 1]);
    const long dnext = static_cast<long>(arch.dims[hidden_layer + 1]);
    return std::max(0L, dl - dprev - dnext + 2);
}

std::vector<std::pair<std::size_t, std::size_t>>
top_block_positions(std::size_t rows, std::size_t cols, Scheme scheme) {
    const std::size_t m = std::min(rows - 1, cols - 1);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < m; ++i) {
        if (scheme == Scheme::Light) {
            out.emplace_back(i, i);
        } else {
            for (std::size_t j = i; j < m; ++j) out.emplace_back(i, j);
        }
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>>
bottom_block_positions(std::size_t rows, std::size_t cols, Scheme scheme) {
    // Mirror of the top-anchored block through the trailing corner: the
    // light diagonal maps onto the trailing diagonal, the heavy triangle
    // onto the triangle on and above it. Keeping the heavy triangle on the
    // upper side matters on a matrix shared by two hidden layers: the
    // union with the top-anchored triangle then leaves every row and
    // column pattern distinct, so pruning (all fixed values equal) still
    // breaks every permutation. A plain 180-degree rotation would merge
    // the middle row patterns and leave residual swaps.
    auto top = top_block_positions(rows, cols, scheme);
    for (auto& [i, j] : top) {
        const std::size_t ni = rows - 1 - j;
        const std::size_t nj = cols - 1 - i;
        i = ni;
        j = nj;
    }
    return top;
}

LayerMask empty_mask(const Architecture& arch) {
    arch.validate();
    LayerMask mask;
    mask.arch = arch;
    for (std::size_t l = 1; l < arch.dims.size(); ++l)
        mask.weights.emplace_back(arch.dims[l - 1], arch.dims[l]);
    return mask;
}

LayerMask generate_mask(const Architecture& arch, Scheme scheme) {
    LayerMask mask = empty_mask(arch);
    for (std::size_t h = 1; h <= arch.num_hidden(); ++h) {
        // W_h gets a top-anchored block, W_{h+1} a bottom-anchored one;
        // blocks landing on a shared matrix are unioned.
        BoolMat& w_in = mask.weights[h - 1];
        for (auto [i, j] : top_block_positions(w_in.rows, w_in.cols, scheme))
            w_in.set(i, j, true);
        BoolMat& w_out = mask.weights[h];
        for (auto [i, j] : bottom_block_positions(w_out.rows, w_out.cols, scheme))
            w_out.set(i, j, true);

        if (fully_connected_count(arch, h) > 1) {
            mask.warning += "hidden layer " + std::to_string(h) +
                            " has fully-connected count " +
                            std::to_string(fully_connected_count(arch, h)) +
                            " > 1; residual permutation symmetries remain\n";
        }
    }
    return mask;
}

LayerMask generate_random_mask(const Architecture& arch, std::size_t n_fixed, SeededRng& rng) {
    LayerMask mask = empty_mask(arch);
    const std::size_t total = arch.total_weight_count();
    if (n_fixed > total)
        throw std::invalid_argument("generate_random_mask: n_fixed exceeds weight count");
    // Fisher-Yates partial shuffle over flat weight indices
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t k = 0; k < n_fixed; ++k) {
        const std::size_t r = k + rng.uniform_index(total - k);
        std::swap(idx[k], idx[r]);
    }
    for (std::size_t k = 0; k < n_fixed; ++k) {
        std::size_t flat = idx[k];
        for (BoolMat& w : mask.weights) {
            if (flat < w.data.size()) {
                w.data[flat] = 1;
                break;
            }
            flat -= w.data.size();
        }
    }
    return mask;
}

std::size_t count_fixed(const LayerMask& mask) {
    std::size_t n = 0;
    for (const BoolMat& w : mask.weights) n += w.count();
    return n;
}

std::string mask_to_text(const LayerMask& mask, const std::string& tag) {
    std::ostringstream os;
    os << "mask v1 " << tag << "\ndims";
    for (std::size_t d : mask.arch.dims) os << ' ' << d;
    os << "\nactivations";
    for (Activation a : mask.arch.activations) os << ' ' << to_string(a);
    os << '\n';
    for (const BoolMat& w : mask.weights) {
        os << "layer";
        for (std::size_t i = 0; i < w.rows; ++i)
            for (std::size_t j = 0; j < w.cols; ++j)
                if (w.get(i, j)) os << ' ' << (i + 1) << ',' << (j + 1);
        os << '\n';
    }
    return os.str();
}

LayerMask mask_from_text(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line.rfind("mask v1", 0) != 0)
        throw std::invalid_argument("mask_from_text: bad header");

    Architecture arch;
    std::string word;
    {
        std::getline(is, line);
        std::istringstream ls(line);
        ls >> word;
        if (word != "dims") throw std::invalid_argument("mask_from_text: expected dims line");
        std::size_t d;
        while (ls >> d) arch.dims.push_back(d);
    }
    {
        std::getline(is, line);
        std::istringstream ls(line);
        ls >> word;
        if (word != "activations")
            throw std::invalid_argument("mask_from_text: expected activations line");
        while (ls >> word) arch.activations.push_back(activation_from_string(word));
    }
    arch.validate();

    LayerMask mask = empty_mask(arch);
    for (BoolMat& w : mask.weights) {
        if (!std::getline(is, line))
            throw std::invalid_argument("mask_from_text: missing layer line");
        std::istringstream ls(line);
        ls >> word;
        if (word != "layer") throw std::invalid_argument("mask_from_text: expected layer line");
        while (ls >> word) {
            const auto comma = word.find(',');
            if (comma == std::string::npos)
                throw std::invalid_argument("mask_from_text: bad coordinate " + word);
            const std::size_t i = std::stoul(word.substr(0, comma));
            const std::size_t j = std::stoul(word.substr(comma + 1));
            if (i < 1 || i > w.rows || j < 1 || j > w.cols)
                throw std::invalid_argument("mask_from_text: coordinate out of range " + word);
            w.set(i - 1, j - 1, true);
        }
    }
    return mask;
}

}  // namespace symbreak
