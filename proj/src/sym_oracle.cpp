#include "symbreak/sym_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace symbreak {

bool Permutation::is_identity() const {
    for (std::size_t i = 0; i < map.size(); ++i)
        if (map[i] != i) return false;
    return true;
}

void Permutation::validate(const Architecture& arch) const {
    if (layer < 1 || layer > arch.num_hidden())
        throw std::invalid_argument("Permutation: layer index out of hidden range");
    if (map.size() != arch.dims[layer])
        throw std::invalid_argument("Permutation: size mismatch with layer width");
    std::vector<bool> seen(map.size(), false);
    for (std::size_t v : map) {
        if (v >= map.size() || seen[v])
            throw std::invalid_argument("Permutation: mapping is not a bijection");
        seen[v] = true;
    }
}

namespace {

// True when relabelling layer-l neurons by pi leaves the fixed structure
// of both adjacent matrices unchanged: fixed positions map onto fixed
// positions and carry equal values.
bool preserves_structure(const FixedAssignment& a, std::size_t layer,
                         const std::vector<std::size_t>& pi, double tol) {
    const BoolMat& min = a.mask.weights[layer - 1];   // columns are layer-l neurons
    const BoolMat& mout = a.mask.weights[layer];      // rows are layer-l neurons
    for (std::size_t i = 0; i < min.rows; ++i) {
        for (std::size_t j = 0; j < min.cols; ++j) {
            if (min.get(i, j) != min.get(i, pi[j])) return false;
            if (min.get(i, j) &&
                std::fabs(a.value_at(layer - 1, i, j) - a.value_at(layer - 1, i, pi[j])) > tol)
                return false;
        }
    }
    for (std::size_t i = 0; i < mout.rows; ++i) {
        for (std::size_t j = 0; j < mout.cols; ++j) {
            if (mout.get(i, j) != mout.get(pi[i], j)) return false;
            if (mout.get(i, j) &&
                std::fabs(a.value_at(layer, i, j) - a.value_at(layer, pi[i], j)) > tol)
                return false;
        }
    }
    return true;
}

}  // namespace

std::vector<Permutation> residual_permutations(const FixedAssignment& assignment,
                                               std::size_t hidden_layer, double tol) {
    const Architecture& arch = assignment.mask.arch;
    if (hidden_layer < 1 || hidden_layer > arch.num_hidden())
        throw std::invalid_argument("residual_permutations: not a hidden layer index");
    const std::size_t width = arch.dims[hidden_layer];
    if (width > kOracleWidthLimit)
        throw std::invalid_argument("residual_permutations: layer width " +
                                    std::to_string(width) + " exceeds enumeration limit " +
                                    std::to_string(kOracleWidthLimit));

    std::vector<std::size_t> pi(width);
    std::iota(pi.begin(), pi.end(), 0);
    std::vector<Permutation> out;
    do {
        if (preserves_structure(assignment, hidden_layer, pi, tol))
            out.push_back(Permutation{hidden_layer, pi});
    } while (std::next_permutation(pi.begin(), pi.end()));
    return out;
}

MlpParams permute_hidden(const MlpParams& params, const Permutation& pi) {
    params.validate();
    pi.validate(params.arch);
    MlpParams out = params;
    const std::size_t l = pi.layer;
    const Matrix& w_in = params.weights[l - 1];
    const Matrix& b = params.biases[l - 1];
    const Matrix& w_out = params.weights[l];
    for (std::size_t j = 0; j < pi.map.size(); ++j) {
        for (std::size_t i = 0; i < w_in.rows(); ++i)
            out.weights[l - 1](i, pi.map[j]) = w_in(i, j);
        out.biases[l - 1](0, pi.map[j]) = b(0, j);
        for (std::size_t k = 0; k < w_out.cols(); ++k)
            out.weights[l](pi.map[j], k) = w_out(j, k);
    }
    return out;
}

bool functional_equivalence_check(const MlpParams& params, const Permutation& pi,
                                  const Matrix& probe_inputs, double tol) {
    const MlpParams permuted = permute_hidden(params, pi);
    const Matrix a = forward(params, probe_inputs);
    const Matrix b = forward(permuted, probe_inputs);
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::fabs(a.data()[i] - b.data()[i]) > tol) return false;
    return true;
}

}  // namespace symbreak
