// SPDX-License-Identifier: Apache-2.0
#include "antlab/guidance.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "antlab/io.hpp"

namespace antlab {

void GuidancePolicy::validate() const {
  if (!(omega_min >= 0.0)) throw std::invalid_argument("guidance: omega_min must be >= 0");
  if (!(omega_max >= omega_min)) throw std::invalid_argument("guidance: omega_max must be >= omega_min");
  if (!(lambda > 0.0)) throw std::invalid_argument("guidance: lambda must be > 0");
  if (!(skip_fraction >= 0.0 && skip_fraction <= 1.0))
    throw std::invalid_argument("guidance: skip_fraction must lie in [0, 1]");
}

double omega_at(int t, int T, const GuidancePolicy& policy) {
  if (T < 1 || t < 0 || t > T)
    throw std::out_of_range("omega_at: t=" + std::to_string(t) + " outside [0, " + std::to_string(T) + "]");
  if (policy.mode == GuidanceMode::kStatic) return policy.omega_max;
  const double elapsed = static_cast<double>(T - t) / T;
  const double w = policy.omega_min + 0.5 * (1.0 + std::cos(policy.lambda * elapsed * std::numbers::pi)) *
                                          (policy.omega_max - policy.omega_min);
  return std::max(w, 0.0);
}

Tensor guided_eps(const Tensor& eps_cond, const Tensor& eps_uncond, double omega) {
  if (eps_cond.shape() != eps_uncond.shape())
    throw ShapeError("guided_eps: shape mismatch " + shape_str(eps_cond.shape()) + " vs " +
                     shape_str(eps_uncond.shape()));
  Tensor out(eps_cond.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = eps_uncond[i] + omega * (eps_cond[i] - eps_uncond[i]);
  return out;
}

bool skips_conditional(int t, int T, const GuidancePolicy& policy) {
  if (policy.skip_rule == SkipRule::kLiteralTime) return t > (1.0 - policy.skip_fraction) * T;
  const double elapsed = static_cast<double>(T - t) / T;
  return elapsed >= policy.skip_fraction;
}

StepCost& StepCost::operator+=(const StepCost& o) {
  cond_evals += o.cond_evals;
  uncond_evals += o.uncond_evals;
  wall_seconds += o.wall_seconds;
  return *this;
}

namespace {
bool finite(const Tensor& t) { return t.all_finite(); }
}  // namespace

SampleResult guided_sample(Model& model, const Tensor& x_T, const std::vector<const Prompt*>& prompts,
                           const SamplerPlan& plan, const GuidancePolicy& policy, const NoiseSchedule& sched,
                           const SampleOptions& options) {
  policy.validate();
  validate_plan(plan, sched.T);
  if (x_T.rank() != 3 || x_T.dim(0) != prompts.size())
    throw ShapeError("guided_sample: x_T " + shape_str(x_T.shape()) + " does not hold " +
                     std::to_string(prompts.size()) + " trajectories");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t batch = prompts.size();
  const EncodedText text = encode_batch(model, prompts);
  SampleResult res;
  Tensor x = x_T;
  MultistepHistory hist;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const int t = plan.step_times[i];
    const bool skip = skips_conditional(t, sched.T, policy);
    const Tensor eps_u = x0_to_eps(predict_x0(model, x, t, nullptr), x, t, sched);
    res.cost.uncond_evals += batch;
    Tensor eps = eps_u;
    if (!skip || options.record_attention) {
      std::vector<Tensor> attn;
      const Tensor x0_c = predict_x0(model, x, t, &text, options.record_attention ? &attn : nullptr);
      if (options.record_attention) res.attention.push_back(std::move(attn));
      if (!skip) {
        eps = guided_eps(x0_to_eps(x0_c, x, t, sched), eps_u, omega_at(t, sched.T, policy));
        res.cost.cond_evals += batch;
      }
    }
    if (options.record_x0) res.x0_track.push_back(eps_to_x0(eps, x, t, sched));
    x = sampler_step(x, eps, t, plan.target(i), sched, plan.method, &hist);
    if (!finite(x)) throw std::runtime_error("guided_sample: non-finite state after step " + std::to_string(i));
  }
  res.motions = std::move(x);
  res.cost.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

std::pair<double, double> mean_ci95(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  double m = 0.0;
  for (double v : values) m += v;
  m /= n;
  if (values.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return {m, 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

GridResult grid_search(const std::vector<double>& omega_mins, const std::vector<double>& omega_maxs,
                       const GuidancePolicy& base, std::size_t reps,
                       const std::function<double(const GuidancePolicy&, std::size_t rep)>& metric) {
  if (omega_mins.empty() || omega_maxs.empty()) throw std::invalid_argument("grid_search: empty grid");
  if (reps == 0) throw std::invalid_argument("grid_search: need at least one repetition");
  GridResult res;
  res.omega_mins = omega_mins;
  res.omega_maxs = omega_maxs;
  for (double lo : omega_mins)
    for (double hi : omega_maxs) {
      GridCell cell;
      cell.omega_min = lo;
      cell.omega_max = hi;
      try {
        GuidancePolicy p = base;
        p.omega_min = lo;
        p.omega_max = hi;
        p.validate();
        for (std::size_t r = 0; r < reps; ++r) {
          const double v = metric(p, r);
          if (!std::isfinite(v)) throw std::runtime_error("metric is not finite");
          cell.values.push_back(v);
        }
        std::tie(cell.mean, cell.half_width) = mean_ci95(cell.values);
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      if (cell.ok && (!res.any_ok || cell.mean > res.cells[res.best].mean)) {
        res.best = res.cells.size();
        res.any_ok = true;
      }
      res.cells.push_back(std::move(cell));
    }
  return res;
}

std::string GridResult::table_csv() const {
  std::vector<std::string> header{"omega_min/omega_max"};
  for (double hi : omega_maxs) header.push_back(fmt_real(hi));
  CsvTable t(header);
  for (std::size_t r = 0; r < omega_mins.size(); ++r) {
    std::vector<std::string> row{fmt_real(omega_mins[r])};
    for (std::size_t c = 0; c < omega_maxs.size(); ++c) {
      const auto& cell = cells[r * omega_maxs.size() + c];
      row.push_back(cell.ok ? fmt_real(cell.mean) : "NA");
    }
    t.row(row);
  }
  return t.str();
}

std::string GridResult::cells_csv() const {
  CsvTable t({"omega_min", "omega_max", "mean", "half_width", "reps", "status"});
  for (const auto& c : cells)
    t.row({fmt_real(c.omega_min), fmt_real(c.omega_max), c.ok ? fmt_real(c.mean) : "NA",
           c.ok ? fmt_real(c.half_width) : "NA", std::to_string(c.values.size()), c.ok ? "ok" : "failed"});
  return t.str();
}

}  // namespace antlab
