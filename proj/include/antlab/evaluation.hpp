// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "antlab/guidance.hpp"
#include "antlab/metrics.hpp"

namespace antlab {

struct EvalConfig {
  std::size_t reps = 20;
  std::size_t prompts_per_rep = 64;
  std::size_t mm_prompts = 3;  // prompts sampled 20 times each for multimodality
  int steps = 10;
  SamplerMethod method = SamplerMethod::kSecondOrderMultistep;
  GuidancePolicy policy;
  std::size_t diversity_pairs = 300;
  std::uint64_t seed = 0;
};

struct MetricStat {
  double mean = 0.0;
  double half_width = 0.0;
  std::vector<double> per_rep;
};

struct MetricReport {
  MetricStat fid, top1, top2, top3, diversity, multimodality;
  double corpus_diversity = 0.0;  // same pair protocol on the real motions of the evaluation set
  bool fid_ridged = false;

  /// metric,mean,ci95 rows for fid, top1..3, diversity, multimodality, then
  /// corpus_diversity and diversity_gap.
  std::string csv() const;
};

/// Repetition r shuffles the evaluation set with a seed of (cfg.seed, r),
/// generates its first prompts_per_rep prompts from fresh noise and scores
/// them: Frechet distance to the real motions of the same pairs, R-precision
/// against 31 mismatched canonical prompts, diversity, and multimodality over
/// the first mm_prompts prompts. Equal seeds give two models identical
/// prompts, noise and candidate pools, so per-repetition values pair up.
MetricReport evaluate_model(Model& model, const std::vector<Pair>& eval_set, const FeatureScaler& scaler,
                            const EvalConfig& cfg);

inline constexpr std::size_t kAttentionBins = 10;

struct AttentionStep {
  int t = 0;
  bool cond_branch = false;  // whether guidance used the conditional branch
  double variance = 0.0;     // mean row variance of cross-attention, averaged over blocks
  /// Fraction of all cross-attention weights of the step falling in each of
  /// kAttentionBins equal bins over [0, 1]; sums to 1.
  std::vector<double> histogram;
};

/// Cross-attention spread per sampling step for `prompts` from seeded noise.
std::vector<AttentionStep> capture_attention_profile(Model& model, const std::vector<const Prompt*>& prompts,
                                                     const SamplerPlan& plan, const GuidancePolicy& policy,
                                                     std::uint64_t seed);
std::string attention_csv(const std::vector<AttentionStep>& profile);

struct AttentionTrend {
  double first = 0.0;  // mean variance over the first 3 steps
  double last = 0.0;   // mean variance over the last 3 steps
  bool concentrates() const { return last < first; }
};
/// Throws std::invalid_argument for profiles shorter than 3 steps.
AttentionTrend attention_trend(const std::vector<AttentionStep>& profile);  // step,t,cond_branch,variance,bin0..bin9

struct BenchVariant {
  std::string name;
  GuidancePolicy policy;
};

struct BenchRow {
  std::string name;
  double median_seconds = 0.0;  // per batch
  double cond_evals = 0.0, uncond_evals = 0.0;  // per trajectory
  std::size_t multiplier = 1;  // batches per timed run
  bool flagged = false;        // multiplier had to grow to beat timer resolution
};

/// Median wall time per batch over `reps` timed runs after `warmup` untimed
/// ones; variants are interleaved within each repetition. A timed run shorter
/// than `min_seconds` doubles the batches per run and flags the row.
std::vector<BenchRow> bench_sampling(Model& model, const std::vector<const Prompt*>& prompts,
                                     const std::vector<BenchVariant>& variants, const SamplerPlan& plan,
                                     std::size_t reps, std::size_t warmup, std::uint64_t seed,
                                     double min_seconds = 0.02);
std::string bench_csv(const std::vector<BenchRow>& rows);  // method,avg_time_s,cond_evals,uncond_evals,total_evals

}  // namespace antlab
