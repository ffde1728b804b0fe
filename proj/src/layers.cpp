// SPDX-License-Identifier: Apache-2.0
#include "antlab/layers.hpp"

#include <cmath>

namespace antlab {

Tensor init_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor w = randn({fan_in, fan_out}, rng, 1.0 / std::sqrt(static_cast<double>(fan_in)));
  w.set_requires_grad(true);
  return w;
}

Tensor init_const(Shape shape, double value) {
  Tensor t(std::move(shape), value);
  t.set_requires_grad(true);
  return t;
}

Linear Linear::make(std::size_t in, std::size_t out, Rng& rng) { return {init_weight(in, out, rng), init_const({out}, 0.0)}; }

Var Linear::operator()(Tape& tape, Var x) { return add_bias(matmul(x, tape.leaf(w)), tape.leaf(b)); }

void Linear::visit(const std::string& prefix, const ParamVisitor& f) {
  f(prefix + ".w", w);
  f(prefix + ".b", b);
}

Norm Norm::make(std::size_t d) { return {init_const({d}, 1.0), init_const({d}, 0.0)}; }

Var Norm::operator()(Tape& tape, Var x) { return layer_norm(x, tape.leaf(gamma), tape.leaf(beta), 1e-5); }

void Norm::visit(const std::string& prefix, const ParamVisitor& f) {
  f(prefix + ".gamma", gamma);
  f(prefix + ".beta", beta);
}

Attention Attention::make(std::size_t d, Rng& rng, std::size_t n_heads) {
  if (n_heads == 0 || d % n_heads != 0) throw ShapeError("attention: width must split evenly over heads");
  const std::size_t dh = d / n_heads;
  Attention a;
  for (std::size_t h = 0; h < n_heads; ++h) {
    Head hd{init_weight(d, dh, rng), init_weight(d, dh, rng), init_weight(d, dh, rng), init_weight(dh, d, rng)};
    // keep the summed output at the single-head scale
    for (auto& w : hd.wo.data()) w *= std::sqrt(static_cast<double>(dh) / static_cast<double>(d));
    a.heads.push_back(std::move(hd));
  }
  return a;
}

Var Attention::operator()(Tape& tape, Var queries, Var keys_values, const std::vector<unsigned char>& mask,
                          Tensor* weights) {
  Var out;
  Tensor mean_w;
  bool first = true;
  for (auto& h : heads) {
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(h.wq.dim(1)));
    Var q = matmul(queries, tape.leaf(h.wq));
    Var k = matmul(keys_values, tape.leaf(h.wk));
    Var v = matmul(keys_values, tape.leaf(h.wv));
    Var scores = scale(bmm(q, transpose_last2(k)), inv_sqrt_d);
    if (!mask.empty()) scores = mask_keys(scores, mask);
    Var attn = softmax(scores, -1);
    if (weights) {
      if (mean_w.numel() == 0) mean_w = Tensor(attn.shape(), 0.0);
      for (std::size_t i = 0; i < mean_w.numel(); ++i) mean_w[i] += attn.value()[i] / static_cast<double>(heads.size());
    }
    Var o = matmul(bmm(attn, v), tape.leaf(h.wo));
    out = first ? o : add(out, o);
    first = false;
  }
  if (weights) *weights = std::move(mean_w);
  return out;
}

void Attention::visit(const std::string& prefix, const ParamVisitor& f) {
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const std::string p = heads.size() == 1 ? prefix : prefix + ".h" + std::to_string(h);
    f(p + ".wq", heads[h].wq);
    f(p + ".wk", heads[h].wk);
    f(p + ".wv", heads[h].wv);
    f(p + ".wo", heads[h].wo);
  }
}

Tensor sinusoidal_features(const std::vector<int>& ts, std::size_t d, double horizon) {
  if (d % 2 != 0 || ts.empty()) throw ShapeError("sinusoidal_features: need even width and at least one timestep");
  const std::size_t half = d / 2;
  Tensor out({ts.size(), d});
  for (std::size_t r = 0; r < ts.size(); ++r)
    for (std::size_t i = 0; i < half; ++i) {
      // slowest frequency covers a quarter turn over the horizon
      const double freq = (std::acos(0.0) / horizon) * std::pow(horizon, static_cast<double>(half - 1 - i) / half);
      const double a = ts[r] * freq;
      out[r * d + 2 * i] = std::sin(a);
      out[r * d + 2 * i + 1] = std::cos(a);
    }
  return out;
}

double mean_row_variance(const Tensor& weights) {
  const std::size_t n = weights.dim(-1);
  const std::size_t rows = weights.numel() / n;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double m = 0.0;
    for (std::size_t j = 0; j < n; ++j) m += weights[r * n + j];
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t j = 0; j < n; ++j) v += (weights[r * n + j] - m) * (weights[r * n + j] - m);
    total += v / static_cast<double>(n);
  }
  return total / static_cast<double>(rows);
}

}  // namespace antlab
