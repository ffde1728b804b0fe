// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "antlab/ops.hpp"
#include "antlab/rng.hpp"
#include "antlab/tensor.hpp"

namespace antlab {

/// Visits every trainable tensor under a stable dotted name.
using ParamVisitor = std::function<void(const std::string& name, Tensor& param)>;

/// Normal init with stddev 1/sqrt(fan_in); the tensor is marked trainable.
Tensor init_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor init_const(Shape shape, double value);

struct Linear {
  Tensor w;  // [in, out]
  Tensor b;  // [out]

  static Linear make(std::size_t in, std::size_t out, Rng& rng);
  Var operator()(Tape& tape, Var x);
  void visit(const std::string& prefix, const ParamVisitor& f);
};

struct Norm {
  Tensor gamma, beta;

  static Norm make(std::size_t d);
  Var operator()(Tape& tape, Var x);  // layer_norm with eps 1e-5
  void visit(const std::string& prefix, const ParamVisitor& f);
};

/// Scaled dot-product attention with query/key/value/output projections (no
/// biases). Each head owns a d/heads slice; head outputs are summed after
/// their own output projection, which equals concatenation then one [d, d].
struct Attention {
  struct Head {
    Tensor wq, wk, wv;  // [d, d/heads]
    Tensor wo;          // [d/heads, d]
  };
  std::vector<Head> heads;

  static Attention make(std::size_t d, Rng& rng, std::size_t n_heads = 1);
  /// queries [B, nq, d], keys_values [B, nk, d]; `mask` has B * nk entries or
  /// is empty. When `weights` is given it receives the softmax matrix
  /// [B, nq, nk], averaged over heads.
  Var operator()(Tape& tape, Var queries, Var keys_values, const std::vector<unsigned char>& mask,
                 Tensor* weights = nullptr);
  void visit(const std::string& prefix, const ParamVisitor& f);
};

/// Sinusoidal features of integer timesteps, pairs [sin(t f_i), cos(t f_i)]
/// with frequencies geometric between pi/2 per step and a quarter turn over
/// `horizon`. Output [ts.size(), d].
Tensor sinusoidal_features(const std::vector<int>& ts, std::size_t d, double horizon);

/// Per-row population variance of a stochastic matrix's entries, averaged
/// over all rows of `weights` [..., n].
double mean_row_variance(const Tensor& weights);

}  // namespace antlab
