// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "antlab/tensor.hpp"

// Differentiable operations on tape-recorded values. Every op validates
// shapes and throws ShapeError naming the offending shapes.
namespace antlab {

/// a [..., k] x b [k, n] -> [..., n]. Leading axes of `a` are flattened into rows.
Var matmul(Var a, Var b);
/// Batched product: a [B, n, k] x b [B, k, m] -> [B, n, m].
Var bmm(Var a, Var b);
/// Swaps the last two axes of a rank-3 tensor.
Var transpose_last2(Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double s);
Var add_scalar(Var x, double s);
Var square(Var x);
Var silu(Var x);
Var exponential(Var x);

/// x [..., d] + b [d]
Var add_bias(Var x, Var b);
/// x [..., d] * g [d]
Var mul_lastaxis(Var x, Var g);
/// x [..., d] / s [d]
Var div_lastaxis(Var x, Var s);

/// x [B, n, d] or [n, d], plus one row per batch entry y [B, d] -> [B, n, d].
Var add_per_batch(Var x, Var y);
/// Repeats x [n, d] along a new leading batch axis.
Var expand_batch(Var x, std::size_t batch);
/// Rows `index` of x along axis 0.
Var select_batch(Var x, const std::vector<std::size_t>& index);
/// a, b [B, ...] of equal shape; entry i comes from b where take_b[i] != 0.
Var batch_where(Var a, Var b, const std::vector<unsigned char>& take_b);

/// Numerically stable softmax along `axis` (max-subtracted).
Var softmax(Var x, int axis);
/// scores [B, nq, nk]; keys with mask[b * nk + j] == 0 get a huge negative
/// score so their softmax weight is exactly zero.
Var mask_keys(Var scores, const std::vector<unsigned char>& mask);

/// Standard layer normalization over the last axis (mean-centred).
Var layer_norm(Var x, Var gamma, Var beta, double eps);
/// gamma * x / (sigma + eps) + beta with sigma the population standard
/// deviation of each row over the last axis. No mean subtraction.
Var feature_std_scale(Var x, Var gamma, Var beta, double eps);

/// Row lookup: table [V, d], ids -> [ids.size(), d] reshaped to `prefix` + [d].
Var embedding(Var table, const std::vector<std::size_t>& ids, const Shape& prefix);

Var sum(Var x);
Var mean(Var x);
/// Mean of squared differences over all elements.
Var mse(Var pred, Var target);

}  // namespace antlab
