#pragma once

#include <string>
#include <vector>

#include "symbreak/masks.hpp"
#include "symbreak/matrix.hpp"

namespace symbreak {

// Weight matrices W_l (D_{l-1} x D_l) and bias row vectors b_l (1 x D_l).
struct MlpParams {
    Architecture arch;
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;

    void validate() const;
};

// Zero-initialized parameters for an architecture.
MlpParams zero_params(const Architecture& arch);

// i.i.d. N(0, 1/fan_in) weights and biases.
MlpParams init_params(const Architecture& arch, SeededRng& rng);

// Batched forward pass; rows of x are datapoints with D_0 columns.
Matrix forward(const MlpParams& params, const Matrix& x);

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;
    double c = 0.0;
};

// Exact reverse-mode gradients of <upstream, forward(x)> with respect to
// every weight and bias.
Gradients backward(const MlpParams& params, const Matrix& x, const Matrix& upstream);

enum class Policy { Prune, SignedConstant, MapValues };

Policy policy_from_string(const std::string& s);
std::string to_string(Policy p);

// A mask together with the concrete value held at each fixed position.
// SignedConstant positions evaluate to sign * c for the current c, so a
// learnable c propagates without rebuilding the assignment.
struct FixedAssignment {
    LayerMask mask;
    Policy policy = Policy::Prune;
    std::vector<Matrix> values;  // MapValues payload; zero elsewhere
    std::vector<Matrix> signs;   // +-1 at fixed positions under SignedConstant
    double c = 0.0;
    bool learn_c = false;

    double value_at(std::size_t layer, std::size_t i, std::size_t j) const;
    std::size_t n_fixed() const { return count_fixed(mask); }
};

FixedAssignment make_prune(LayerMask mask);
// Sign pattern drawn once here with equal probability and then frozen.
FixedAssignment make_signed_constant(LayerMask mask, double c, bool learn_c, SeededRng& rng);
FixedAssignment make_map_values(LayerMask mask, const MlpParams& map_params);

// Overwrite fixed positions with their assigned values; idempotent.
MlpParams apply_fixed(MlpParams params, const FixedAssignment& assignment);

// Flat text checkpoint with a header (dims, activations) and row-major
// dumps; round-trips exactly via hex doubles.
void save_params(const std::string& path, const MlpParams& params);
MlpParams load_params(const std::string& path);

}  // namespace symbreak
