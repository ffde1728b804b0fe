// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "antlab/denoiser.hpp"
#include "antlab/diffusion.hpp"

namespace antlab {

enum class GuidanceMode { kStatic, kDynamic };

/// Where the conditional branch is dropped.
enum class SkipRule {
  kElapsedFraction,  // steps starting at elapsed fraction s = (T - t)/T >= skip_fraction (late, low noise)
  kLiteralTime,      // steps with t > (1 - skip_fraction) T (early, high noise)
};

struct GuidancePolicy {
  double omega_min = 1.5;
  double omega_max = 3.0;
  double lambda = 1.5;
  double skip_fraction = 0.5;
  GuidanceMode mode = GuidanceMode::kDynamic;
  SkipRule skip_rule = SkipRule::kElapsedFraction;

  /// Throws std::invalid_argument unless omega_max >= omega_min >= 0,
  /// lambda > 0 and skip_fraction in [0, 1].
  void validate() const;
};

/// max(omega_min + (1 + cos(lambda pi (T - t) / T)) (omega_max - omega_min) / 2, 0);
/// omega_max in static mode. Throws std::out_of_range unless 0 <= t <= T.
double omega_at(int t, int T, const GuidancePolicy& policy);

/// eps_uncond + omega (eps_cond - eps_uncond)
Tensor guided_eps(const Tensor& eps_cond, const Tensor& eps_uncond, double omega);

bool skips_conditional(int t, int T, const GuidancePolicy& policy);

/// Network evaluations summed over trajectories.
struct StepCost {
  std::size_t cond_evals = 0;
  std::size_t uncond_evals = 0;
  double wall_seconds = 0.0;

  std::size_t total() const { return cond_evals + uncond_evals; }
  StepCost& operator+=(const StepCost& o);
};

struct SampleOptions {
  bool record_x0 = false;
  /// Runs the conditional branch on skipped steps too, only to read its
  /// cross-attention; those diagnostic evaluations are not counted.
  bool record_attention = false;
};

struct SampleResult {
  Tensor motions;  // [B, N, d_m]
  StepCost cost;
  std::vector<Tensor> x0_track;  // per step: guided x0 estimate [B, N, d_m]
  /// per step, per denoiser block: conditional cross-attention [B, N, n_cond]
  std::vector<std::vector<Tensor>> attention;
};

/// Deterministic guided rollout of a batch from x_T [B, N, d_m]. Every step
/// evaluates the unconditional branch; the conditional branch runs unless
/// the policy skips it, and both are combined with omega_at(t). Throws
/// std::runtime_error naming the step when the state stops being finite.
SampleResult guided_sample(Model& model, const Tensor& x_T, const std::vector<const Prompt*>& prompts,
                           const SamplerPlan& plan, const GuidancePolicy& policy, const NoiseSchedule& sched,
                           const SampleOptions& options = {});

struct GridCell {
  double omega_min = 0.0;
  double omega_max = 0.0;
  std::vector<double> values;  // one metric value per repetition
  double mean = 0.0;
  double half_width = 0.0;  // 95% normal half-width of the mean
  bool ok = false;
  std::string error;
};

struct GridResult {
  std::vector<double> omega_mins, omega_maxs;
  std::vector<GridCell> cells;  // row-major: omega_mins x omega_maxs
  std::size_t best = 0;         // highest mean among ok cells, first on ties
  bool any_ok = false;

  /// Rows = omega_min, columns = omega_max, mean metric per cell ("NA" on failure).
  std::string table_csv() const;
  /// One row per cell: omega_min,omega_max,mean,half_width,reps,status.
  std::string cells_csv() const;
};

/// Evaluates metric(policy, rep) for every grid cell and repetition. A cell
/// whose policy is invalid or whose metric throws is recorded as failed.
GridResult grid_search(const std::vector<double>& omega_mins, const std::vector<double>& omega_maxs,
                       const GuidancePolicy& base, std::size_t reps,
                       const std::function<double(const GuidancePolicy&, std::size_t rep)>& metric);

/// Mean and 95% half-width 1.96 * sd / sqrt(n) (sample sd, 0 when n < 2).
std::pair<double, double> mean_ci95(const std::vector<double>& values);

}  // namespace antlab
