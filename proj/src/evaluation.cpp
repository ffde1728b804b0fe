// SPDX-License-Identifier: Apache-2.0
#include "antlab/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "antlab/io.hpp"
#include "antlab/layers.hpp"
#include "antlab/rng.hpp"

namespace antlab {

namespace {

void finish(MetricStat& s) { std::tie(s.mean, s.half_width) = mean_ci95(s.per_rep); }

Feature motion_feature(const Tensor& batch, std::size_t b, const FeatureScaler& scaler) {
  const std::size_t n = batch.dim(1), d = batch.dim(2);
  Tensor one({n, d});
  std::copy_n(batch.data().begin() + static_cast<std::ptrdiff_t>(b * n * d), n * d, one.data().begin());
  return scaler(one);
}

bool same_attributes(const MotionParams& a, const MotionParams& b) {
  return a.amplitude == b.amplitude && a.omega == b.omega && a.direction == b.direction;
}

}  // namespace

std::string MetricReport::csv() const {
  CsvTable t({"metric", "mean", "ci95"});
  auto add = [&t](const char* name, const MetricStat& s) { t.row({name, fmt_real(s.mean), fmt_real(s.half_width)}); };
  add("fid", fid);
  add("top1", top1);
  add("top2", top2);
  add("top3", top3);
  add("diversity", diversity);
  add("multimodality", multimodality);
  t.row({"corpus_diversity", fmt_real(corpus_diversity), ""});
  t.row({"diversity_gap", fmt_real(std::abs(diversity.mean - corpus_diversity)), ""});
  return t.str();
}

MetricReport evaluate_model(Model& model, const std::vector<Pair>& eval_set, const FeatureScaler& scaler,
                            const EvalConfig& cfg) {
  if (cfg.reps == 0) throw std::invalid_argument("evaluate_model: need at least one repetition");
  if (eval_set.size() < kFeatureDim + 1) throw std::invalid_argument("evaluate_model: evaluation set too small");
  const std::size_t n_gen = std::min(cfg.prompts_per_rep, eval_set.size());
  if (n_gen < kFeatureDim + 1) throw std::invalid_argument("evaluate_model: prompts_per_rep too small for FID");
  if (cfg.mm_prompts > n_gen) throw std::invalid_argument("evaluate_model: mm_prompts exceeds prompts_per_rep");

  const NoiseSchedule sched = make_cosine_schedule(model.options.T);
  const SamplerPlan plan = make_plan(model.options.T, cfg.steps, cfg.method);
  const std::vector<Prompt> canon = canonical_prompts();
  std::vector<MotionParams> canon_params;
  std::vector<Feature> canon_proto;
  for (const auto& p : canon) {
    canon_params.push_back(prompt_params(p));
    canon_proto.push_back(prompt_prototype(p, scaler));
  }

  MetricReport rep;
  {
    std::vector<Feature> real;
    for (const auto& p : eval_set) real.push_back(scaler(p.motion.frames));
    rep.corpus_diversity = diversity(real, cfg.diversity_pairs, derive_seed(cfg.seed, "eval-corpus-diversity"));
  }

  const std::size_t N = model.options.frames;
  for (std::size_t r = 0; r < cfg.reps; ++r) {
    std::vector<std::size_t> order(eval_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng pick(derive_seed(cfg.seed, "eval-pick", r));
    for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[uniform_index(pick, 0, i)]);

    std::vector<const Prompt*> prompts;
    std::vector<Feature> real;
    for (std::size_t i = 0; i < n_gen; ++i) {
      prompts.push_back(&eval_set[order[i]].prompt);
      real.push_back(scaler(eval_set[order[i]].motion.frames));
    }
    Rng noise(derive_seed(cfg.seed, "eval-noise", r));
    const Tensor x_T = randn({n_gen, N, kMotionDim}, noise);
    const Tensor gen = guided_sample(model, x_T, prompts, plan, cfg.policy, sched).motions;
    std::vector<Feature> feats;
    for (std::size_t i = 0; i < n_gen; ++i) feats.push_back(motion_feature(gen, i, scaler));

    const FrechetResult fd = frechet_distance(feats, real);
    rep.fid_ridged = rep.fid_ridged || fd.ridged;
    rep.fid.per_rep.push_back(fd.value);

    double h1 = 0.0, h2 = 0.0, h3 = 0.0;
    for (std::size_t i = 0; i < n_gen; ++i) {
      const MotionParams truth = prompt_params(*prompts[i]);
      std::vector<std::size_t> others;
      for (std::size_t c = 0; c < canon.size(); ++c)
        if (!same_attributes(canon_params[c], truth)) others.push_back(c);
      Rng pool_rng(derive_seed(cfg.seed, "rprec-pool", r * n_gen + i));
      for (std::size_t k = 0; k + 1 < kRPrecisionPool; ++k)
        std::swap(others[k], others[k + uniform_index(pool_rng, 0, others.size() - 1 - k)]);
      std::vector<Candidate> pool;
      for (std::size_t k = 0; k + 1 < kRPrecisionPool; ++k) pool.push_back({canon_proto[others[k]], false});
      const std::size_t slot = uniform_index(pool_rng, 0, kRPrecisionPool - 1);
      pool.insert(pool.begin() + static_cast<std::ptrdiff_t>(slot), Candidate{prompt_prototype(*prompts[i], scaler), true});
      const RankHits hits = r_precision(feats[i], pool);
      h1 += hits.top1;
      h2 += hits.top2;
      h3 += hits.top3;
    }
    rep.top1.per_rep.push_back(h1 / static_cast<double>(n_gen));
    rep.top2.per_rep.push_back(h2 / static_cast<double>(n_gen));
    rep.top3.per_rep.push_back(h3 / static_cast<double>(n_gen));
    rep.diversity.per_rep.push_back(diversity(feats, cfg.diversity_pairs, derive_seed(cfg.seed, "eval-diversity", r)));

    if (cfg.mm_prompts > 0) {
      std::vector<const Prompt*> mm;
      for (std::size_t p = 0; p < cfg.mm_prompts; ++p)
        for (std::size_t s = 0; s < kMultimodalitySamples; ++s) mm.push_back(prompts[p]);
      Rng mm_noise(derive_seed(cfg.seed, "eval-mm-noise", r));
      const Tensor mm_T = randn({mm.size(), N, kMotionDim}, mm_noise);
      const Tensor mm_gen = guided_sample(model, mm_T, mm, plan, cfg.policy, sched).motions;
      std::vector<std::vector<Feature>> groups(cfg.mm_prompts);
      for (std::size_t i = 0; i < mm.size(); ++i)
        groups[i / kMultimodalitySamples].push_back(motion_feature(mm_gen, i, scaler));
      rep.multimodality.per_rep.push_back(multimodality(groups));
    }
  }
  for (MetricStat* s : {&rep.fid, &rep.top1, &rep.top2, &rep.top3, &rep.diversity, &rep.multimodality}) finish(*s);
  return rep;
}

std::vector<AttentionStep> capture_attention_profile(Model& model, const std::vector<const Prompt*>& prompts,
                                                     const SamplerPlan& plan, const GuidancePolicy& policy,
                                                     std::uint64_t seed) {
  if (prompts.empty()) throw std::invalid_argument("capture_attention_profile: no prompts");
  const NoiseSchedule sched = make_cosine_schedule(model.options.T);
  Rng noise(derive_seed(seed, "attention-noise"));
  const Tensor x_T = randn({prompts.size(), model.options.frames, kMotionDim}, noise);
  SampleOptions opt;
  opt.record_attention = true;
  const SampleResult res = guided_sample(model, x_T, prompts, plan, policy, sched, opt);
  std::vector<AttentionStep> out;
  for (std::size_t i = 0; i < res.attention.size(); ++i) {
    AttentionStep s;
    s.t = plan.step_times[i];
    s.cond_branch = !skips_conditional(s.t, sched.T, policy);
    s.histogram.assign(kAttentionBins, 0.0);
    double count = 0.0;
    for (const auto& w : res.attention[i]) {
      s.variance += mean_row_variance(w);
      for (double v : w.data()) {
        const auto bin = std::min(kAttentionBins - 1, static_cast<std::size_t>(v * kAttentionBins));
        s.histogram[bin] += 1.0;
        count += 1.0;
      }
    }
    s.variance /= static_cast<double>(res.attention[i].size());
    for (double& h : s.histogram) h /= count;
    out.push_back(s);
  }
  return out;
}

std::string attention_csv(const std::vector<AttentionStep>& profile) {
  std::vector<std::string> header{"step", "t", "cond_branch", "variance"};
  for (std::size_t b = 0; b < kAttentionBins; ++b) header.push_back("bin" + std::to_string(b));
  CsvTable t(header);
  for (std::size_t i = 0; i < profile.size(); ++i) {
    std::vector<std::string> row{std::to_string(i + 1), std::to_string(profile[i].t),
                                 profile[i].cond_branch ? "1" : "0", fmt_real(profile[i].variance)};
    for (double h : profile[i].histogram) row.push_back(fmt_real(h));
    t.row(row);
  }
  return t.str();
}

AttentionTrend attention_trend(const std::vector<AttentionStep>& profile) {
  if (profile.size() < 3) throw std::invalid_argument("attention_trend: need at least 3 steps");
  AttentionTrend tr;
  const std::size_t n = profile.size();
  for (std::size_t i = 0; i < 3; ++i) {
    tr.first += profile[i].variance / 3.0;
    tr.last += profile[n - 3 + i].variance / 3.0;
  }
  return tr;
}

std::vector<BenchRow> bench_sampling(Model& model, const std::vector<const Prompt*>& prompts,
                                     const std::vector<BenchVariant>& variants, const SamplerPlan& plan,
                                     std::size_t reps, std::size_t warmup, std::uint64_t seed, double min_seconds) {
  if (variants.empty() || reps == 0) throw std::invalid_argument("bench_sampling: need variants and repetitions");
  const NoiseSchedule sched = make_cosine_schedule(model.options.T);
  Rng noise(derive_seed(seed, "bench-noise"));
  const Tensor x_T = randn({prompts.size(), model.options.frames, kMotionDim}, noise);

  std::vector<BenchRow> rows(variants.size());
  std::vector<std::vector<double>> times(variants.size());
  auto run = [&](std::size_t v) {
    StepCost total;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t m = 0; m < rows[v].multiplier; ++m) total += guided_sample(model, x_T, prompts, plan, variants[v].policy, sched).cost;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double traj = static_cast<double>(prompts.size() * rows[v].multiplier);
    rows[v].cond_evals = static_cast<double>(total.cond_evals) / traj;
    rows[v].uncond_evals = static_cast<double>(total.uncond_evals) / traj;
    return secs;
  };
  for (std::size_t v = 0; v < variants.size(); ++v) {
    rows[v].name = variants[v].name;
    while (run(v) < min_seconds) {
      rows[v].multiplier *= 2;
      rows[v].flagged = true;
    }
  }
  for (std::size_t w = 0; w < warmup; ++w)
    for (std::size_t v = 0; v < variants.size(); ++v) run(v);
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t v = 0; v < variants.size(); ++v) times[v].push_back(run(v) / static_cast<double>(rows[v].multiplier));
  for (std::size_t v = 0; v < variants.size(); ++v) {
    auto& t = times[v];
    std::sort(t.begin(), t.end());
    rows[v].median_seconds = t.size() % 2 ? t[t.size() / 2] : 0.5 * (t[t.size() / 2 - 1] + t[t.size() / 2]);
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  CsvTable t({"method", "avg_time_s", "cond_evals", "uncond_evals", "total_evals"});
  for (const auto& r : rows)
    t.row({r.name, fmt_real(r.median_seconds), fmt_real(r.cond_evals), fmt_real(r.uncond_evals),
           fmt_real(r.cond_evals + r.uncond_evals)});
  return t.str();
}

}  // namespace antlab
