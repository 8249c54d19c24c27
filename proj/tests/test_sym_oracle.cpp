#include <doctest.h>

#include <stdexcept>

#include <algorithm>

#include "symbreak/sym_oracle.hpp"

using namespace symbreak;

namespace {

Permutation random_permutation(std::size_t layer, std::size_t n, SeededRng& rng) {
    Permutation pi;
    pi.layer = layer;
    pi.map.resize(n);
    for (std::size_t i = 0; i < n; ++i) pi.map[i] = i;
    for (std::size_t i = n; i-- > 1;) std::swap(pi.map[i], pi.map[rng.uniform_index(i + 1)]);
    return pi;
}

bool contains(const std::vector<Permutation>& perms, const std::vector<std::size_t>& map) {
    return std::any_of(perms.begin(), perms.end(),
                       [&](const Permutation& p) { return p.map == map; });
}

}  // namespace

TEST_CASE("light prune mask on (2,3,2) leaves only the identity") {
    const auto arch = Architecture::mlp({2, 3, 2}, Activation::Tanh);
    const FixedAssignment a = make_prune(generate_mask(arch, Scheme::Light));
    const auto perms = residual_permutations(a, 1);
    REQUIRE(perms.size() == 1);
    CHECK(perms[0].is_identity());
}

TEST_CASE("(2,4,2) light mask keeps the unpinned transposition") {
    const auto arch = Architecture::mlp({2, 4, 2}, Activation::Tanh);
    const FixedAssignment a = make_prune(generate_mask(arch, Scheme::Light));
    const auto perms = residual_permutations(a, 1);
    CHECK(perms.size() > 1);
    CHECK(contains(perms, {0, 1, 2, 3}));
    // W1 pins neuron 0 (top diagonal), W2 pins neuron 3 (bottom diagonal);
    // neurons 1 and 2 are fully connected and swappable
    CHECK(contains(perms, {0, 2, 1, 3}));
}

TEST_CASE("empty mask yields the full symmetric group") {
    const auto arch = Architecture::mlp({2, 3, 2}, Activation::Tanh);
    const FixedAssignment a = make_prune(empty_mask(arch));
    CHECK(residual_permutations(a, 1).size() == 6);
}

TEST_CASE("value differences break symmetry that positions alone allow") {
    // two fixed positions that a hidden-neuron swap maps onto each other:
    // rows 0 and 1 of W2, same output column
    const auto arch = Architecture::mlp({2, 2, 2}, Activation::Tanh);
    LayerMask mask = empty_mask(arch);
    mask.weights[1].set(0, 0, true);
    mask.weights[1].set(1, 0, true);

    MlpParams vals = zero_params(arch);
    vals.weights[1](0, 0) = 3.0;
    vals.weights[1](1, 0) = 3.0;
    FixedAssignment same = make_map_values(mask, vals);
    CHECK(residual_permutations(same, 1).size() == 2);  // swap allowed, values equal

    vals.weights[1](1, 0) = -3.0;
    FixedAssignment distinct = make_map_values(mask, vals);
    const auto perms = residual_permutations(distinct, 1);
    REQUIRE(perms.size() == 1);
    CHECK(perms[0].is_identity());
}

TEST_CASE("residual permutations form a group") {
    const auto arch = Architecture::mlp({2, 4, 2}, Activation::Tanh);
    const FixedAssignment a = make_prune(generate_mask(arch, Scheme::Light));
    for (std::size_t layer = 1; layer <= arch.num_hidden(); ++layer) {
        const auto perms = residual_permutations(a, layer);
        for (const Permutation& p : perms)
            for (const Permutation& q : perms) {
                std::vector<std::size_t> comp(p.map.size());
                for (std::size_t i = 0; i < comp.size(); ++i) comp[i] = p.map[q.map[i]];
                CHECK(contains(perms, comp));
            }
    }
}

TEST_CASE("enumeration bound") {
    const auto arch = Architecture::mlp({2, 9, 2}, Activation::Tanh);
    const FixedAssignment a = make_prune(empty_mask(arch));
    CHECK_THROWS_AS(residual_permutations(a, 1), std::invalid_argument);
}

TEST_CASE("hidden-layer relabelling is functionally invisible") {
    SeededRng rng(17);
    const auto arch = Architecture::mlp({3, 6, 4, 2}, Activation::Sigmoid);
    const MlpParams params = init_params(arch, rng);
    const Matrix probe = sample_std_normal(rng, 64, 3);

    Permutation identity;
    identity.layer = 1;
    identity.map = {0, 1, 2, 3, 4, 5};
    CHECK(functional_equivalence_check(params, identity, probe, 1e-12));

    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t layer = 1 + rng.uniform_index(arch.num_hidden());
        const Permutation pi = random_permutation(layer, arch.dims[layer], rng);
        CHECK(functional_equivalence_check(params, pi, probe, 1e-9));
    }
}

TEST_CASE("one-sided permutation changes the function") {
    SeededRng rng(23);
    const auto arch = Architecture::mlp({2, 4, 2}, Activation::Tanh);
    const MlpParams params = init_params(arch, rng);
    const Matrix probe = sample_std_normal(rng, 16, 2);

    // permute W1 columns and b1 but leave W2 rows untouched
    MlpParams broken = params;
    const std::vector<std::size_t> pi = {1, 2, 3, 0};
    for (std::size_t j = 0; j < 4; ++j) {
        for (std::size_t i = 0; i < 2; ++i) broken.weights[0](i, pi[j]) = params.weights[0](i, j);
        broken.biases[0](0, pi[j]) = params.biases[0](0, j);
    }
    const Matrix a = forward(params, probe);
    const Matrix b = forward(broken, probe);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        max_diff = std::max(max_diff, std::fabs(a.data()[i] - b.data()[i]));
    CHECK(max_diff > 1e-6);
}
