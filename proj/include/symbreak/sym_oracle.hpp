#pragma once

#include <vector>

#include "symbreak/network.hpp"

namespace symbreak {

// Permutation of the neurons of one hidden layer (1-based layer index,
// 0-based mapping: neuron i moves to position map[i]).
struct Permutation {
    std::size_t layer = 0;
    std::vector<std::size_t> map;

    bool is_identity() const;
    void validate(const Architecture& arch) const;
};

inline constexpr std::size_t kOracleWidthLimit = 8;

// Brute-force enumeration of every neuron permutation of hidden layer
// `hidden_layer` that maps the fixed structure (positions and values) of
// W_l and W_{l+1} onto itself within tol. Always contains the identity.
// Throws when the layer is wider than the enumeration limit.
std::vector<Permutation> residual_permutations(const FixedAssignment& assignment,
                                               std::size_t hidden_layer,
                                               double tol = 1e-12);

// Apply the hidden-layer relabelling to concrete parameters: permute the
// columns of W_l, the entries of b_l, and the rows of W_{l+1}.
MlpParams permute_hidden(const MlpParams& params, const Permutation& pi);

// Network outputs on probe_inputs must be unchanged by any hidden-layer
// relabelling; this checks that algebraic identity directly.
bool functional_equivalence_check(const MlpParams& params, const Permutation& pi,
                                  const Matrix& probe_inputs, double tol);

}  // namespace symbreak
