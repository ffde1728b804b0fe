// SPDX-License-Identifier: Apache-2.0
#include "antlab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

namespace antlab {

namespace {

constexpr double kMaskedScore = -1e300;

void same_tape(Var a, Var b, const char* op) {
  if (a.tape() != b.tape() || !a.tape())
    throw std::invalid_argument(std::string(op) + ": operands recorded on different tapes");
}

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

auto ei(std::size_t v) { return static_cast<Eigen::Index>(v); }

// c[m x n] += a[m x k] * b[k x n]
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  MMap(c, ei(m), ei(n)).noalias() += CMap(a, ei(m), ei(k)) * CMap(b, ei(k), ei(n));
}

// c[k x n] += a[m x k]^T * g[m x n]
void gemm_at_b_acc(const double* a, const double* g, double* c, std::size_t m, std::size_t k, std::size_t n) {
  MMap(c, ei(k), ei(n)).noalias() += CMap(a, ei(m), ei(k)).transpose() * CMap(g, ei(m), ei(n));
}

std::vector<double> transpose(const double* x, std::size_t rows, std::size_t cols) {
  std::vector<double> t(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = x[r * cols + c];
  return t;
}

// c[m x k] += g[m x n] * b[k x n]^T
void gemm_a_bt_acc(const double* g, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  MMap(c, ei(m), ei(k)).noalias() += CMap(g, ei(m), ei(n)) * CMap(b, ei(k), ei(n)).transpose();
}

Shape broadcast_check_lastaxis(Var x, Var p, const char* op) {
  same_tape(x, p, op);
  const auto& xs = x.shape();
  const auto& ps = p.shape();
  if (ps.size() != 1 || ps[0] != xs.back()) mismatch(op, xs, ps);
  return xs;
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b, "matmul");
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() < 2 || bs.size() != 2 || as.back() != bs[0]) mismatch("matmul", as, bs);
  const std::size_t k = bs[0], n = bs[1];
  const std::size_t m = a.value().numel() / k;
  Shape out = as;
  out.back() = n;
  Tensor c(out);
  gemm_acc(a.value().data().data(), b.value().data().data(), c.data().data(), m, k, n);
  const auto ia = a.id(), ib = b.id();
  return a.tape()->push(std::move(c), {ia, ib}, [ia, ib, m, k, n](Tape& t, std::size_t self) {
    const double* g = t.grad(self).data();
    if (t.needs_grad(ia)) gemm_a_bt_acc(g, t.value(ib).data().data(), t.grad(ia).data(), m, k, n);
    if (t.needs_grad(ib)) gemm_at_b_acc(t.value(ia).data().data(), g, t.grad(ib).data(), m, k, n);
  });
}

Var bmm(Var a, Var b) {
  same_tape(a, b, "bmm");
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0] || as[2] != bs[1]) mismatch("bmm", as, bs);
  const std::size_t batch = as[0], m = as[1], k = as[2], n = bs[2];
  Tensor c({batch, m, n});
  const double* ad = a.value().data().data();
  const double* bd = b.value().data().data();
  for (std::size_t s = 0; s < batch; ++s) gemm_acc(ad + s * m * k, bd + s * k * n, c.data().data() + s * m * n, m, k, n);
  const auto ia = a.id(), ib = b.id();
  return a.tape()->push(std::move(c), {ia, ib}, [ia, ib, batch, m, k, n](Tape& t, std::size_t self) {
    const double* g = t.grad(self).data();
    const double* av = t.value(ia).data().data();
    const double* bv = t.value(ib).data().data();
    if (t.needs_grad(ia)) {
      double* ga = t.grad(ia).data();
      for (std::size_t s = 0; s < batch; ++s) gemm_a_bt_acc(g + s * m * n, bv + s * k * n, ga + s * m * k, m, k, n);
    }
    if (t.needs_grad(ib)) {
      double* gb = t.grad(ib).data();
      for (std::size_t s = 0; s < batch; ++s) gemm_at_b_acc(av + s * m * k, g + s * m * n, gb + s * k * n, m, k, n);
    }
  });
}

Var transpose_last2(Var x) {
  const auto& xs = x.shape();
  if (xs.size() != 3) throw ShapeError("transpose_last2: expected rank 3, got " + shape_str(xs));
  const std::size_t batch = xs[0], r = xs[1], c = xs[2];
  Tensor out({batch, c, r});
  const double* xd = x.value().data().data();
  for (std::size_t s = 0; s < batch; ++s) {
    auto t = transpose(xd + s * r * c, r, c);
    std::copy(t.begin(), t.end(), out.data().begin() + static_cast<std::ptrdiff_t>(s * r * c));
  }
  const auto ix = x.id();
  return x.tape()->push(std::move(out), {ix}, [ix, batch, r, c](Tape& t, std::size_t self) {
    const double* g = t.grad(self).data();
    double* gx = t.grad(ix).data();
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < r; ++j) gx[s * r * c + j * c + i] += g[s * r * c + i * r + j];
  });
}

namespace {

template <class F, class GA, class GB>
Var binary(Var a, Var b, const char* op, F f, GA ga, GB gb) {
  same_tape(a, b, op);
  if (a.shape() != b.shape()) mismatch(op, a.shape(), b.shape());
  Tensor out(a.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(av[i], bv[i]);
  const auto ia = a.id(), ib = b.id();
  return a.tape()->push(std::move(out), {ia, ib}, [ia, ib, ga, gb](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    const auto& av = t.value(ia);
    const auto& bv = t.value(ib);
    if (t.needs_grad(ia)) {
      auto gx = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += ga(g[i], av[i], bv[i]);
    }
    if (t.needs_grad(ib)) {
      auto gx = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += gb(g[i], av[i], bv[i]);
    }
  });
}

// Elementwise unary op; `d` receives (x, y) and returns dy/dx.
template <class F, class D>
Var unary(Var x, F f, D d) {
  Tensor out(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(xv[i]);
  const auto ix = x.id();
  return x.tape()->push(std::move(out), {ix}, [ix, d](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    const auto& xv = t.value(ix);
    const auto& yv = t.value(self);
    auto gx = t.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * d(xv[i], yv[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double g, double, double) { return g; },
      [](double g, double, double) { return g; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double g, double, double) { return g; },
      [](double g, double, double) { return -g; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

Var scale(Var x, double s) {
  return unary(x, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Var add_scalar(Var x, double s) {
  return unary(x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Var square(Var x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var silu(Var x) {
  return unary(
      x, [](double v) { return v / (1.0 + std::exp(-v)); },
      [](double v, double) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 + v * (1.0 - s));
      });
}

Var exponential(Var x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var add_bias(Var x, Var b) {
  const auto xs = broadcast_check_lastaxis(x, b, "add_bias");
  const std::size_t d = xs.back();
  Tensor out = x.value().detached();
  const auto& bv = b.value();
  for (std::size_t o = 0; o < out.numel(); o += d)
    for (std::size_t c = 0; c < d; ++c) out[o + c] += bv[c];
  const auto ix = x.id(), ib = b.id();
  return x.tape()->push(std::move(out), {ix, ib}, [ix, ib, d](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    if (t.needs_grad(ix)) {
      auto gx = t.grad(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      auto gb = t.grad(ib);
      for (std::size_t o = 0; o < g.size(); o += d)
        for (std::size_t c = 0; c < d; ++c) gb[c] += g[o + c];
    }
  });
}

Var mul_lastaxis(Var x, Var gv) {
  const auto xs = broadcast_check_lastaxis(x, gv, "mul_lastaxis");
  const std::size_t d = xs.back();
  Tensor out = x.value().detached();
  const auto& s = gv.value();
  for (std::size_t o = 0; o < out.numel(); o += d)
    for (std::size_t c = 0; c < d; ++c) out[o + c] *= s[c];
  const auto ix = x.id(), ig = gv.id();
  return x.tape()->push(std::move(out), {ix, ig}, [ix, ig, d](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    const auto& xv = t.value(ix);
    const auto& sv = t.value(ig);
    if (t.needs_grad(ix)) {
      auto gx = t.grad(ix);
      for (std::size_t o = 0; o < g.size(); o += d)
        for (std::size_t c = 0; c < d; ++c) gx[o + c] += g[o + c] * sv[c];
    }
    if (t.needs_grad(ig)) {
      auto gs = t.grad(ig);
      for (std::size_t o = 0; o < g.size(); o += d)
        for (std::size_t c = 0; c < d; ++c) gs[c] += g[o + c] * xv[o + c];
    }
  });
}

Var div_lastaxis(Var x, Var sv) {
  const auto xs = broadcast_check_lastaxis(x, sv, "div_lastaxis");
  const std::size_t d = xs.back();
  Tensor out = x.value().detached();
  const auto& s = sv.value();
  for (std::size_t o = 0; o < out.numel(); o += d)
    for (std::size_t c = 0; c < d; ++c) out[o + c] /= s[c];
  const auto ix = x.id(), is = sv.id();
  return x.tape()->push(std::move(out), {ix, is}, [ix, is, d](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    const auto& yv = t.value(self);
    const auto& s = t.value(is);
    if (t.needs_grad(ix)) {
      auto gx = t.grad(ix);
      for (std::size_t o = 0; o < g.size(); o += d)
        for (std::size_t c = 0; c < d; ++c) gx[o + c] += g[o + c] / s[c];
    }
    if (t.needs_grad(is)) {
      auto gs = t.grad(is);
      for (std::size_t o = 0; o < g.size(); o += d)
        for (std::size_t c = 0; c < d; ++c) gs[c] -= g[o + c] * yv[o + c] / s[c];
    }
  });
}

Var add_per_batch(Var x, Var y) {
  same_tape(x, y, "add_per_batch");
  const auto& xs = x.shape();
  const auto& ys = y.shape();
  if (ys.size() != 2 || xs.back() != ys[1]) mismatch("add_per_batch", xs, ys);
  const std::size_t batch = ys[0], d = ys[1];
  bool shared = false;
  std::size_t n = 0;
  if (xs.size() == 2) {
    shared = true;
    n = xs[0];
  } else if (xs.size() == 3 && xs[0] == batch) {
    n = xs[1];
  } else {
    mismatch("add_per_batch", xs, ys);
  }
  Tensor out({batch, n, d});
  const auto& xv = x.value();
  const auto& yv = y.value();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t xi = shared ? i * d + j : (b * n + i) * d + j;
        out[(b * n + i) * d + j] = xv[xi] + yv[b * d + j];
      }
  const auto ix = x.id(), iy = y.id();
  return x.tape()->push(std::move(out), {ix, iy}, [ix, iy, batch, n, d, shared](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    if (t.needs_grad(ix)) {
      auto gx = t.grad(ix);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t k = 0; k < n * d; ++k) gx[shared ? k : b * n * d + k] += g[b * n * d + k];
    }
    if (t.needs_grad(iy)) {
      auto gy = t.grad(iy);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) gy[b * d + j] += g[(b * n + i) * d + j];
    }
  });
}

Var expand_batch(Var x, std::size_t batch) {
  const auto& xs = x.shape();
  if (xs.size() != 2 || batch == 0) throw ShapeError("expand_batch: expected rank 2, got " + shape_str(xs));
  const std::size_t per = x.value().numel();
  Tensor out({batch, xs[0], xs[1]});
  for (std::size_t b = 0; b < batch; ++b)
    std::copy(x.value().data().begin(), x.value().data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(b * per));
  const auto ix = x.id();
  return x.tape()->push(std::move(out), {ix}, [ix, batch, per](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    auto gx = t.grad(ix);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < per; ++k) gx[k] += g[b * per + k];
  });
}

Var select_batch(Var x, const std::vector<std::size_t>& index) {
  const auto& xs = x.shape();
  if (index.empty()) throw ShapeError("select_batch: empty index");
  const std::size_t per = x.value().numel() / xs[0];
  for (auto i : index)
    if (i >= xs[0]) throw ShapeError("select_batch: index out of range for " + shape_str(xs));
  Shape os = xs;
  os[0] = index.size();
  Tensor out(os);
  for (std::size_t r = 0; r < index.size(); ++r)
    std::copy_n(x.value().data().begin() + static_cast<std::ptrdiff_t>(index[r] * per), per,
                out.data().begin() + static_cast<std::ptrdiff_t>(r * per));
  const auto ix = x.id();
  return x.tape()->push(std::move(out), {ix}, [ix, index, per](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    auto gx = t.grad(ix);
    for (std::size_t r = 0; r < index.size(); ++r)
      for (std::size_t k = 0; k < per; ++k) gx[index[r] * per + k] += g[r * per + k];
  });
}

Var batch_where(Var a, Var b, const std::vector<unsigned char>& take_b) {
  same_tape(a, b, "batch_where");
  const auto& as = a.shape();
  if (as != b.shape() || as.empty() || take_b.size() != as[0]) mismatch("batch_where", as, b.shape());
  const std::size_t stride = a.value().numel() / as[0];
  Tensor out(as);
  for (std::size_t i = 0; i < as[0]; ++i) {
    const auto& src = take_b[i] ? b.value() : a.value();
    for (std::size_t k = 0; k < stride; ++k) out[i * stride + k] = src[i * stride + k];
  }
  const auto ia = a.id(), ib = b.id();
  return a.tape()->push(std::move(out), {ia, ib}, [ia, ib, stride, take_b](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    for (std::size_t i = 0; i < take_b.size(); ++i) {
      const auto id = take_b[i] ? ib : ia;
      if (!t.needs_grad(id)) continue;
      auto gd = t.grad(id);
      for (std::size_t k = 0; k < stride; ++k) gd[i * stride + k] += g[i * stride + k];
    }
  });
}

Var softmax(Var x, int axis) {
  const auto& xs = x.shape();
  const std::size_t len = x.value().dim(axis);
  const int r = static_cast<int>(xs.size());
  const std::size_t ax = static_cast<std::size_t>(axis < 0 ? axis + r : axis);
  std::size_t inner = 1;
  for (std::size_t i = ax + 1; i < xs.size(); ++i) inner *= xs[i];
  const std::size_t outer = x.value().numel() / (inner * len);
  Tensor out(xs);
  const auto& xv = x.value();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = xv[base];
      for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, xv[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const double e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= z;
    }
  const auto ix = x.id();
  return x.tape()->push(std::move(out), {ix}, [ix, outer, inner, len](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    const auto& y = t.value(self);
    auto gx = t.grad(ix);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < len; ++j) dot += g[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t k = base + j * inner;
          gx[k] += y[k] * (g[k] - dot);
        }
      }
  });
}

Var mask_keys(Var scores, const std::vector<unsigned char>& mask) {
  const auto& ss = scores.shape();
  if (ss.size() != 3 || mask.size() != ss[0] * ss[2])
    throw ShapeError("mask_keys: mask of " + std::to_string(mask.size()) + " entries does not fit scores " +
                     shape_str(ss));
  const std::size_t batch = ss[0], nq = ss[1], nk = ss[2];
  for (std::size_t b = 0; b < batch; ++b) {
    bool any = false;
    for (std::size_t j = 0; j < nk; ++j) any = any || mask[b * nk + j];
    if (!any) throw std::invalid_argument("mask_keys: every key of a batch entry is masked");
  }
  Tensor out = scores.value().detached();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < nq; ++i)
      for (std::size_t j = 0; j < nk; ++j)
        if (!mask[b * nk + j]) out[(b * nq + i) * nk + j] = kMaskedScore;
  const auto ix = scores.id();
  return scores.tape()->push(std::move(out), {ix}, [ix, mask, batch, nq, nk](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    auto gx = t.grad(ix);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < nq; ++i)
        for (std::size_t j = 0; j < nk; ++j)
          if (mask[b * nk + j]) gx[(b * nq + i) * nk + j] += g[(b * nq + i) * nk + j];
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const auto xs = broadcast_check_lastaxis(x, gamma, "layer_norm");
  broadcast_check_lastaxis(x, beta, "layer_norm");
  if (!(eps > 0)) throw std::invalid_argument("layer_norm: eps must be positive");
  const std::size_t d = xs.back();
  const std::size_t rows = x.value().numel() / d;
  const auto& xv = x.value();
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  Tensor out(xs);
  std::vector<double> xhat(xv.numel()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xv[r * d + j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xv[r * d + j] - mu) * (xv[r * d + j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t k = r * d + j;
      xhat[k] = (xv[k] - mu) * inv_std[r];
      out[k] = gv[j] * xhat[k] + bv[j];
    }
  }
  const auto ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape()->push(
      std::move(out), {ix, ig, ib},
      [ix, ig, ib, d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
        const auto g = t.grad(self);
        const auto& gv = t.value(ig);
        if (t.needs_grad(ig)) {
          auto gg = t.grad(ig);
          for (std::size_t o = 0; o < g.size(); o += d)
            for (std::size_t c = 0; c < d; ++c) gg[c] += g[o + c] * xhat[o + c];
        }
        if (t.needs_grad(ib)) {
          auto gb = t.grad(ib);
          for (std::size_t o = 0; o < g.size(); o += d)
            for (std::size_t c = 0; c < d; ++c) gb[c] += g[o + c];
        }
        if (t.needs_grad(ix)) {
          auto gx = t.grad(ix);
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = g[r * d + j] * gv[j];
              s1 += dh;
              s2 += dh * xhat[r * d + j];
            }
            for (std::size_t j = 0; j < d; ++j) {
              const std::size_t k = r * d + j;
              const double dh = g[k] * gv[j];
              gx[k] += inv_std[r] * (dh - inv_d * s1 - xhat[k] * inv_d * s2);
            }
          }
        }
      });
}

Var feature_std_scale(Var x, Var gamma, Var beta, double eps) {
  const auto xs = broadcast_check_lastaxis(x, gamma, "feature_std_scale");
  broadcast_check_lastaxis(x, beta, "feature_std_scale");
  if (!(eps > 0)) throw std::invalid_argument("feature_std_scale: eps must be positive");
  const std::size_t d = xs.back();
  const std::size_t rows = x.value().numel() / d;
  const auto& xv = x.value();
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  Tensor out(xs);
  std::vector<double> sigma(rows), mu(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double m = 0.0;
    for (std::size_t j = 0; j < d; ++j) m += xv[r * d + j];
    m /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xv[r * d + j] - m) * (xv[r * d + j] - m);
    var /= static_cast<double>(d);
    mu[r] = m;
    sigma[r] = std::sqrt(var);
    const double denom = sigma[r] + eps;
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = gv[j] * xv[r * d + j] / denom + bv[j];
  }
  const auto ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape()->push(
      std::move(out), {ix, ig, ib},
      [ix, ig, ib, d, rows, eps, sigma = std::move(sigma), mu = std::move(mu)](Tape& t, std::size_t self) {
        const auto g = t.grad(self);
        const auto& xv = t.value(ix);
        const auto& gv = t.value(ig);
        if (t.needs_grad(ig)) {
          auto gg = t.grad(ig);
          for (std::size_t o = 0; o < g.size(); o += d)
            for (std::size_t c = 0; c < d; ++c) gg[c] += g[o + c] * xv[o + c] / (sigma[o / d] + eps);
        }
        if (t.needs_grad(ib)) {
          auto gb = t.grad(ib);
          for (std::size_t o = 0; o < g.size(); o += d)
            for (std::size_t c = 0; c < d; ++c) gb[c] += g[o + c];
        }
        if (t.needs_grad(ix)) {
          auto gx = t.grad(ix);
          for (std::size_t r = 0; r < rows; ++r) {
            const double denom = sigma[r] + eps;
            // d out_j / d x_i = gamma_j * (delta_ij / denom - x_j * dsigma_i / denom^2),
            // dsigma_i = (x_i - mu) / (d * sigma); zero subgradient at sigma == 0.
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += g[r * d + j] * gv[j] * xv[r * d + j];
            const double dsig = sigma[r] > 0.0 ? 1.0 / (static_cast<double>(d) * sigma[r]) : 0.0;
            for (std::size_t i = 0; i < d; ++i) {
              const std::size_t k = r * d + i;
              gx[k] += g[k] * gv[i] / denom - s * (xv[k] - mu[r]) * dsig / (denom * denom);
            }
          }
        }
      });
}

Var embedding(Var table, const std::vector<std::size_t>& ids, const Shape& prefix) {
  const auto& ts = table.shape();
  if (ts.size() != 2) throw ShapeError("embedding: table must be rank 2, got " + shape_str(ts));
  if (shape_numel(prefix) != ids.size() || prefix.empty())
    throw ShapeError("embedding: prefix " + shape_str(prefix) + " does not hold " + std::to_string(ids.size()) +
                     " ids");
  const std::size_t d = ts[1];
  Shape os = prefix;
  os.push_back(d);
  Tensor out(os);
  const auto& tv = table.value();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= ts[0]) throw std::out_of_range("embedding: id " + std::to_string(ids[r]) + " out of range");
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = tv[ids[r] * d + j];
  }
  const auto it = table.id();
  return table.tape()->push(std::move(out), {it}, [it, ids, d](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    auto gt = t.grad(it);
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (std::size_t j = 0; j < d; ++j) gt[ids[r] * d + j] += g[r * d + j];
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const auto ix = x.id();
  return x.tape()->push(Tensor::scalar(s), {ix}, [ix](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (auto& v : t.grad(ix)) v += g;
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().numel())); }

Var mse(Var pred, Var target) { return mean(square(sub(pred, target))); }

}  // namespace antlab
