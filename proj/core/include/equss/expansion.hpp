#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace equss {

// Dense layer y = W f + b with W stored row-major (out x in).
struct Linear {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weight;  // out * in
    std::vector<double> bias;    // out
};

// Two-branch expansion head: x = A2(relu(A1(f))) + B(f).
// Per-vector linear layers stand in for the 1x1 convolutions; the expansion
// to d_E happens at the first layer of each branch.
struct ExpansionHead {
    std::size_t input_dim = 0;     // d_F
    std::size_t expanded_dim = 0;  // d_E
    Linear a1;                     // d_F -> d_E
    Linear a2;                     // d_E -> d_E
    Linear b;                      // d_F -> d_E

    void validate() const;

    // Declared parameter order: a1.w, a1.b, a2.w, a2.b, b.w, b.b.
    std::size_t param_count() const;
    std::vector<double> flatten_params() const;
    void unflatten_params(std::span<const double> flat);
};

// Activations cached by forward, sufficient to reproduce the output exactly.
struct ForwardTrace {
    std::vector<double> input;     // f
    std::vector<double> pre_relu;  // A1 f + b1
    std::vector<double> hidden;    // relu(pre_relu)
};

// Parameter gradients in head layout plus the gradient w.r.t. the input.
struct HeadGradients {
    ExpansionHead params;       // same shapes as the head, holding gradients
    std::vector<double> input;  // d_F
};

// Xavier-uniform weights, zero biases, deterministic per seed.
ExpansionHead init_head(std::size_t input_dim, std::size_t expanded_dim,
                        std::uint64_t seed);

std::vector<double> forward(const ExpansionHead& head, std::span<const double> f,
                            ForwardTrace* trace = nullptr);

// Exact gradients of <grad_x, forward(head, f)>; relu subgradient at 0 is 0.
HeadGradients backward(const ExpansionHead& head, const ForwardTrace& trace,
                       std::span<const double> grad_x);

// Binary head file ("PQEH"): magic, u32 version=1, u32 d_F, u32 d_E, then the
// parameter tensors in declared order as f32 little-endian.
ExpansionHead read_head(const std::string& path);
void write_head(const ExpansionHead& head, const std::string& path);

}  // namespace equss
