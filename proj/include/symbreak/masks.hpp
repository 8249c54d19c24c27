#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "symbreak/matrix.hpp"

namespace symbreak {

enum class Activation { Sigmoid, Tanh, Identity };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

double activate(Activation a, double z);
double activate_derivative(Activation a, double activated);  // derivative in terms of the activation value

// Layer widths D_0..D_L plus one activation tag per weight layer. Hidden
// layers are 1..L-1; the output layer of a regression network is Identity.
struct Architecture {
    std::vector<std::size_t> dims;
    std::vector<Activation> activations;

    static Architecture mlp(std::vector<std::size_t> dims, Activation hidden);

    std::size_t num_layers() const { return dims.empty() ? 0 : dims.size() - 1; }  // L
    std::size_t num_hidden() const { return num_layers() == 0 ? 0 : num_layers() - 1; }
    std::size_t total_weight_count() const;
    std::size_t total_bias_count() const;

    void validate() const;  // throws std::invalid_argument
    bool operator==(const Architecture&) const = default;
};

enum class Scheme { Light, Heavy };

Scheme scheme_from_string(const std::string& s);
std::string to_string(Scheme s);

struct BoolMat {
    std::size_t rows = 0, cols = 0;
    std::vector<std::uint8_t> data;

    BoolMat() = default;
    BoolMat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}
    bool get(std::size_t i, std::size_t j) const { return data[i * cols + j] != 0; }
    void set(std::size_t i, std::size_t j, bool v) { data[i * cols + j] = v ? 1 : 0; }
    std::size_t count() const;
    bool operator==(const BoolMat&) const = default;
};

// One boolean matrix per weight matrix; true marks a fixed position.
// Biases are never masked.
struct LayerMask {
    Architecture arch;
    std::vector<BoolMat> weights;
    std::string warning;  // non-empty when symmetry removal is not guaranteed

    bool operator==(const LayerMask& o) const {
        return arch == o.arch && weights == o.weights;
    }
};

// Count of hidden-layer neurons fully connected on both sides after
// the structured fixing: max(0, D_l - D_{l-1} - D_{l+1} + 2).
// hidden_layer is 1-based, 1..L-1.
long fully_connected_count(const Architecture& arch, std::size_t hidden_layer);

// Block patterns on a single weight matrix, 0-based coordinates.
// Top-anchored extent m = min(rows-1, cols-1); Light fixes the leading
// diagonal (i,i) for i < m, Heavy the triangle i <= j < m. Bottom-anchored
// blocks are the mirror image through the trailing corner (the heavy
// triangle lands on and above the trailing diagonal).
std::vector<std::pair<std::size_t, std::size_t>>
top_block_positions(std::size_t rows, std::size_t cols, Scheme scheme);
std::vector<std::pair<std::size_t, std::size_t>>
bottom_block_positions(std::size_t rows, std::size_t cols, Scheme scheme);

LayerMask empty_mask(const Architecture& arch);
LayerMask generate_mask(const Architecture& arch, Scheme scheme);
LayerMask generate_random_mask(const Architecture& arch, std::size_t n_fixed, SeededRng& rng);

std::size_t count_fixed(const LayerMask& mask);

// Portable text format: header with dims and scheme tag, then one line per
// weight matrix listing 1-indexed (row,col) fixed coordinates.
std::string mask_to_text(const LayerMask& mask, const std::string& tag);
LayerMask mask_from_text(const std::string& text);

}  // namespace symbreak
