// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "antlab/tensor.hpp"

namespace antlab {

/// Discrete noise schedule over T steps. `alpha_bar[t]` is the cumulative
/// signal coefficient at step t with alpha_bar[0] == 1; `beta[s - 1]` is the
/// per-step variance of step s.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;
  std::vector<double> alpha_bar;

  double abar(int t) const;
};

/// Squared-cosine profile (offset 0.008), betas clipped to (0, 0.999].
NoiseSchedule make_cosine_schedule(int T);
/// CSV with header `t,beta,alpha_bar`, one row per t in [0, T] (beta is 0 at t = 0).
void write_schedule_csv(const NoiseSchedule& sched, std::ostream& os);

enum class SamplerMethod { kFirstOrder, kSecondOrderMultistep };

struct SamplerPlan {
  SamplerMethod method = SamplerMethod::kFirstOrder;
  std::vector<int> step_times;  // strictly decreasing, within [1, T]

  std::size_t size() const { return step_times.size(); }
  /// Target time of step i: the next step time, or 0 after the last step.
  int target(std::size_t i) const { return i + 1 < step_times.size() ? step_times[i + 1] : 0; }
};

/// Equispaced plan t_i = T - floor(i * T / steps), i = 0..steps-1.
SamplerPlan make_plan(int T, int steps, SamplerMethod method = SamplerMethod::kSecondOrderMultistep);
void validate_plan(const SamplerPlan& plan, int T);

/// sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps
Tensor forward_noise(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched);
/// (x_t - sqrt(abar_t) * x0_hat) / sqrt(1 - abar_t). Throws when abar_t == 1.
Tensor x0_to_eps(const Tensor& x0_hat, const Tensor& x_t, int t, const NoiseSchedule& sched);
/// (x_t - sqrt(1 - abar_t) * eps_hat) / sqrt(abar_t)
Tensor eps_to_x0(const Tensor& eps_hat, const Tensor& x_t, int t, const NoiseSchedule& sched);

/// Previous data prediction kept by the multistep sampler.
struct MultistepHistory {
  std::optional<Tensor> x0_hat;
  int t = 0;
};

/// One deterministic reverse step from `from_t` to `to_t` < `from_t`.
///
/// First order (DDIM / first-order data-prediction solver):
///   x_to = sqrt(abar_to) x0_hat + sqrt(1 - abar_to) eps_hat.
/// Second-order multistep (data-prediction 2M form), with
/// lambda = log(sqrt(abar) / sqrt(1 - abar)), h = lambda_to - lambda_from,
/// r = h_prev / h and D = (1 + 1/(2r)) x0_hat - 1/(2r) x0_prev:
///   x_to = (sigma_to / sigma_from) x_from - alpha_to (exp(-h) - 1) D.
/// The multistep form needs history and a finite lambda_to, so the first step
/// and any step landing on t = 0 fall back to first order. `history` is
/// updated in place when given.
Tensor sampler_step(const Tensor& x_t, const Tensor& eps_hat, int from_t, int to_t, const NoiseSchedule& sched,
                    SamplerMethod method, MultistepHistory* history = nullptr);

/// Constant diffusion coefficient g(t) = sigma of the continuous process.
struct ConstantDiffusion {
  double sigma = 1.0;
};

double accumulated_noise_energy(const ConstantDiffusion& g, double t);
/// Discrete counterpart in signal units: (1 - abar_t) / abar_t.
double accumulated_noise_energy(const NoiseSchedule& sched, int t);

/// |m0(omega)|^2 divided by the accumulated noise energy. Throws
/// std::domain_error when no noise has accumulated.
double snr_at(double signal_power, double t, const ConstantDiffusion& g);
double snr_at(double signal_power, int t, const NoiseSchedule& sched);

}  // namespace antlab
