// SPDX-License-Identifier: Apache-2.0
#include "antlab/diffusion.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

namespace antlab {

double NoiseSchedule::abar(int t) const {
  if (t < 0 || t > T) throw std::out_of_range("timestep " + std::to_string(t) + " outside [0, " + std::to_string(T) + "]");
  return alpha_bar[static_cast<std::size_t>(t)];
}

NoiseSchedule make_cosine_schedule(int T) {
  if (T < 1) throw std::invalid_argument("cosine schedule needs T >= 1, got " + std::to_string(T));
  constexpr double s = 0.008;
  auto f = [T](double t) {
    const double c = std::cos((t / T + s) / (1.0 + s) * std::numbers::pi / 2.0);
    return c * c;
  };
  NoiseSchedule sched;
  sched.T = T;
  sched.beta.resize(static_cast<std::size_t>(T));
  sched.alpha_bar.resize(static_cast<std::size_t>(T) + 1);
  sched.alpha_bar[0] = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double b = std::min(1.0 - f(t) / f(t - 1), 0.999);
    sched.beta[static_cast<std::size_t>(t - 1)] = b;
    sched.alpha_bar[static_cast<std::size_t>(t)] = sched.alpha_bar[static_cast<std::size_t>(t - 1)] * (1.0 - b);
  }
  return sched;
}

void write_schedule_csv(const NoiseSchedule& sched, std::ostream& os) {
  os << "t,beta,alpha_bar\n" << std::setprecision(17);
  for (int t = 0; t <= sched.T; ++t)
    os << t << ',' << (t == 0 ? 0.0 : sched.beta[static_cast<std::size_t>(t - 1)]) << ','
       << sched.alpha_bar[static_cast<std::size_t>(t)] << '\n';
}

SamplerPlan make_plan(int T, int steps, SamplerMethod method) {
  if (T < 1 || steps < 1 || steps > T)
    throw std::invalid_argument("sampler plan needs 1 <= steps <= T, got steps=" + std::to_string(steps) +
                                " T=" + std::to_string(T));
  SamplerPlan plan;
  plan.method = method;
  for (int i = 0; i < steps; ++i)
    plan.step_times.push_back(T - static_cast<int>((static_cast<long long>(i) * T) / steps));
  return plan;
}

void validate_plan(const SamplerPlan& plan, int T) {
  if (plan.step_times.empty()) throw std::invalid_argument("sampler plan is empty");
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const int t = plan.step_times[i];
    if (t < 1 || t > T) throw std::invalid_argument("plan step time " + std::to_string(t) + " outside [1, T]");
    if (i && t >= plan.step_times[i - 1]) throw std::invalid_argument("plan step times must strictly decrease");
  }
}

namespace {
void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

Tensor lincomb(double ca, const Tensor& a, double cb, const Tensor& b) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = ca * a[i] + cb * b[i];
  return out;
}
}  // namespace

Tensor forward_noise(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched) {
  require_same(x0, eps, "forward_noise");
  if (t < 1 || t > sched.T) throw std::out_of_range("forward_noise: t=" + std::to_string(t) + " outside [1, T]");
  const double ab = sched.abar(t);
  return lincomb(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps);
}

Tensor x0_to_eps(const Tensor& x0_hat, const Tensor& x_t, int t, const NoiseSchedule& sched) {
  require_same(x0_hat, x_t, "x0_to_eps");
  const double ab = sched.abar(t);
  if (ab >= 1.0) throw std::domain_error("x0_to_eps: alpha_bar == 1 leaves no noise to recover");
  const double s = std::sqrt(1.0 - ab);
  return lincomb(1.0 / s, x_t, -std::sqrt(ab) / s, x0_hat);
}

Tensor eps_to_x0(const Tensor& eps_hat, const Tensor& x_t, int t, const NoiseSchedule& sched) {
  require_same(eps_hat, x_t, "eps_to_x0");
  const double ab = sched.abar(t);
  return lincomb(1.0 / std::sqrt(ab), x_t, -std::sqrt(1.0 - ab) / std::sqrt(ab), eps_hat);
}

Tensor sampler_step(const Tensor& x_t, const Tensor& eps_hat, int from_t, int to_t, const NoiseSchedule& sched,
                    SamplerMethod method, MultistepHistory* history) {
  if (!(from_t > to_t && to_t >= 0))
    throw std::invalid_argument("sampler_step: need from_t > to_t >= 0, got " + std::to_string(from_t) + " -> " +
                                std::to_string(to_t));
  require_same(x_t, eps_hat, "sampler_step");
  const Tensor x0_hat = eps_to_x0(eps_hat, x_t, from_t, sched);
  const double ab_to = sched.abar(to_t);
  const double ab_from = sched.abar(from_t);
  const double alpha_to = std::sqrt(ab_to), sigma_to = std::sqrt(1.0 - ab_to);

  Tensor out;
  const bool multistep = method == SamplerMethod::kSecondOrderMultistep && history && history->x0_hat &&
                         to_t > 0 && ab_to < 1.0;
  if (!multistep) {
    out = lincomb(alpha_to, x0_hat, sigma_to, eps_hat);
  } else {
    auto lambda = [](double ab) { return 0.5 * std::log(ab / (1.0 - ab)); };
    const double sigma_from = std::sqrt(1.0 - ab_from);
    const double h = lambda(ab_to) - lambda(ab_from);
    const double h_prev = lambda(ab_from) - lambda(sched.abar(history->t));
    const double r = h_prev / h;
    const Tensor d = lincomb(1.0 + 0.5 / r, x0_hat, -0.5 / r, *history->x0_hat);
    out = lincomb(sigma_to / sigma_from, x_t, -alpha_to * std::expm1(-h), d);
  }
  if (history) {
    history->x0_hat = x0_hat;
    history->t = from_t;
  }
  return out;
}

double accumulated_noise_energy(const ConstantDiffusion& g, double t) { return g.sigma * g.sigma * t; }

double accumulated_noise_energy(const NoiseSchedule& sched, int t) {
  const double ab = sched.abar(t);
  return (1.0 - ab) / ab;
}

namespace {
double ratio(double signal_power, double energy) {
  if (!(energy > 0.0)) throw std::domain_error("snr: no accumulated noise energy");
  return signal_power / energy;
}
}  // namespace

double snr_at(double signal_power, double t, const ConstantDiffusion& g) {
  return ratio(signal_power, accumulated_noise_energy(g, t));
}

double snr_at(double signal_power, int t, const NoiseSchedule& sched) {
  return ratio(signal_power, accumulated_noise_energy(sched, t));
}

}  // namespace antlab
