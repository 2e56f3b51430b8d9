#pragma once

#include "ppcm/tensor.hpp"

#include <span>

namespace ppcm {

// Differentiable layer operations. Every op validates shapes and throws
// ShapeError on mismatch. Reductions sum in row-major index order, bias first.

Var add(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);
Var sum(Tape& tape, Var a);

/// x: B x 3 x H x W, w: h x 3 x M x M, b: h  ->  B x h x H/M x W/M.
/// Non-overlapping stride-M convolution.
Var patch_embed(Tape& tape, Var x, Var w, Var b);

/// x: B x h x s x s, w: h x k x k (k odd), b: h. Zero "same" padding.
Var depthwise_conv(Tape& tape, Var x, Var w, Var b);

/// x: B x h_in x s x s or B x h_in, w: h_out x h_in, b: h_out.
Var channel_affine(Tape& tape, Var x, Var w, Var b);

struct BatchNormState {
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    BatchNormState() = default;
    explicit BatchNormState(std::size_t channels)
        : running_mean(Shape{channels}, 0.0), running_var(Shape{channels}, 1.0) {}
};

enum class NormMode { train, eval };

/// Per-channel normalisation of B x h x s x s. Train mode uses biased batch
/// variance and updates the running statistics (unbiased variance).
Var batchnorm(Tape& tape, Var x, Var gamma, Var beta, BatchNormState& state, NormMode mode);

/// x * Phi(x) with the exact normal CDF.
Var gelu(Tape& tape, Var x);

/// B x h x s x s -> B x h.
Var global_avg_pool(Tape& tape, Var x);

/// Mean over the batch of -log softmax(logits)[label].
Var softmax_xent(Tape& tape, Var logits, std::span<const int> labels);

/// x: B x h x g x g, u: n x n with n = g*g. Output token t = sum_s u[t,s] * token s,
/// tokens flattened row-major over the grid.
Var token_mix(Tape& tape, Var x, Var u);

/// ||U^T U - I||_F^2 + ||min(U, 0)||_F^2. Zero exactly on permutation matrices.
Var permutation_penalty(Tape& tape, Var u);
double permutation_penalty(const Tensor& u);

double gelu_value(double x);

} // namespace ppcm
