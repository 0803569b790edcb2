#pragma once

#include <cstddef>

#include "procan/autograd.hpp"
#include "procan/rng.hpp"
#include "procan/tensor.hpp"

namespace procan {

enum class Mode { Train, Eval };
enum class Activation { Relu, Sigmoid };

// Differentiable operations recorded on the graph that owns their inputs.
// Shapes are checked eagerly and mismatches raise DimensionError.

Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var a);
Var mean(Var a);
Var reshape(Var a, Shape shape);

/// Swaps the last two axes of a rank-2 or rank-3 tensor.
Var transpose_last2(Var a);

/// [M×K]·[K×N].
Var matmul(Var a, Var b);

/// Batched product: [B×M×K]·[B×K×N] -> [B×M×N].
Var bmm(Var a, Var b);

/// Batched product [B×C×N]·[B×N×N] whose reductions run over the spatial axis.
/// Each output is an error-compensated sum, so the result does not depend on the
/// order in which spatial positions are visited (up to faithful rounding).
Var attend(Var values, Var weights);

/// Cross-correlation with zero padding. x: [B×Cin×H×W], kernel: [Cout×Cin×k×k].
Var conv2d(Var x, Var kernel, std::size_t stride, std::size_t padding);

/// Softmax over the last axis, stabilised by subtracting the row maximum.
Var softmax_rows(Var s);

Var relu(Var x);
Var sigmoid(Var x);
Var activation(Var x, Activation kind);

/// a: [..×C×N] scaled row-wise by g: [..×C×1].
Var scale_rows(Var a, Var g);

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormState(std::size_t channels = 1)
      : running_mean({channels}, 0.0), running_var({channels}, 1.0) {}
};

/// Per-channel normalisation of [B×C×H×W]. Train mode uses batch statistics and
/// updates the running estimates; eval mode uses the running estimates.
Var batchnorm2d(Var x, Var gamma, Var beta, BatchNormState& state, Mode mode);

/// [B×C×H×W] -> [B×C].
Var global_avg_pool(Var x);

/// Inverted dropout. Identity in eval mode or when p == 0.
Var dropout(Var x, double p, Mode mode, Rng& rng);

/// x: [B×F], w: [O×F], bias: [O] -> [B×O].
Var linear(Var x, Var w, Var bias);
Var linear(Var x, Var w);

/// Mean binary cross-entropy over logits [B] against 0/1 labels.
Var bce_loss(Var logits, const Tensor& labels);

/// Per-pixel routing: where mask(h,w) is 1 take `chosen`, else `other`.
/// Both inputs are [B×C×H×W]; mask is [H×W] and treated as a constant.
Var masked_select(Var chosen, Var other, const Tensor& mask);

/// p·a + (1−p)·b.
Var lerp(Var a, Var b, double p);

/// Stable scalar sigmoid, clamped to the open interval (0, 1).
double stable_sigmoid(double z);

}  // namespace procan
