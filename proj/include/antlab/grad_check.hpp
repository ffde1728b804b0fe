// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

#include "antlab/tensor.hpp"

namespace antlab {

/// Scalar-valued function of one tape input.
using ScalarFn = std::function<Var(Tape&, Var)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  bool passed = false;
};

/// Compares the tape gradient of `f` at `x` with central differences of step
/// `h`. Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-6); the
/// floor keeps vanishing gradients from being judged on round-off alone.
/// Throws std::domain_error when an evaluation of `f` is not finite.
GradCheckReport grad_check(const ScalarFn& f, const Tensor& x, double h, double tol);

}  // namespace antlab
