#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "coep/numerics/autograd.hpp"
#include "coep/numerics/rng.hpp"

namespace coep {

using TokenId = std::int32_t;

namespace ops {

/// Wraps a tensor as a graph constant (never receives a gradient).
Var constant(Tensor t);
Var detach(const Var& x);

/// [m x k] x [k x n] -> [m x n]
Var matmul(const Var& a, const Var& b);
/// [m x k] x [n x k]^T -> [m x n]
Var matmul_nt(const Var& a, const Var& b);

Var add(const Var& a, const Var& b);
/// Adds a length-n bias to every row of a [.. x n] tensor.
Var add_bias(const Var& x, const Var& bias);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, float factor);
/// Sum of same-shape terms.
Var add_n(std::span<const Var> terms);

Var relu(const Var& x);
/// Exact (erf) GELU.
Var gelu(const Var& x);
Var tanh(const Var& x);

/// Softmax along `axis` (negative counts from the end). Entries equal to
/// -inf are allowed and map to exactly 0; NaN or +inf throws NumericError.
Var softmax(const Var& x, int axis = -1);
Var log_softmax(const Var& x);

/// Normalizes each row over the last axis, then applies gain and bias.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, float eps = 1e-5f);

/// Gathers rows of a [V x d] table.
Var embedding(const Var& table, std::span<const TokenId> ids);

Var concat_rows(std::span<const Var> parts);
Var slice_rows(const Var& x, std::size_t start, std::size_t count);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(const Var& x, std::size_t start, std::size_t count);

Var sum(const Var& x);
Var mean(const Var& x);

/// Mean over unmasked rows of -log softmax(logits)[target]. `padding[i]`
/// true excludes row i; an empty mask keeps every row.
Var cross_entropy(const Var& logits, std::span<const TokenId> targets,
                  std::span<const bool> padding = {});

/// Inverted dropout; identity when p == 0.
Var dropout(const Var& x, float p, Rng& rng);

struct GumbelOptions {
  float temperature = 1.0f;
  bool straight_through = true;
  /// Row-wise forward index for the straight-through value. Unset means the
  /// argmax of the relaxed sample.
  std::optional<std::vector<std::size_t>> hard_index;
};

/// Draws i.i.d. Gumbel(0, 1) noise as -ln(-ln u), u clamped to [1e-10, 1 - 1e-7].
Tensor gumbel_noise(const Shape& shape, Rng& rng);

/// Relaxed sample softmax((logits + noise) / temperature) along the last axis.
/// With straight_through the forward value is the row one-hot while the
/// backward pass differentiates the relaxed sample.
Var gumbel_softmax_with_noise(const Var& logits, const Tensor& noise, const GumbelOptions& opts);
Var gumbel_softmax(const Var& logits, float temperature, Rng& rng, bool straight_through);

std::size_t argmax(std::span<const float> values);

}  // namespace ops
}  // namespace coep
