// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "antlab/evaluation.hpp"
#include "antlab/layers.hpp"

using namespace antlab;

TEST_CASE("attention variance closed forms") {
  // one-hot over n tokens: (n - 1) / n^2
  CHECK(mean_row_variance(Tensor({2, 4}, {0, 1, 0, 0, 0, 0, 0, 1})) == doctest::Approx(0.1875).epsilon(1e-15));
  CHECK(mean_row_variance(Tensor({3, 5}, 0.2)) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(mean_row_variance(Tensor({1, 2}, {0.25, 0.75})) == doctest::Approx(0.0625).epsilon(1e-15));
}

TEST_CASE("attention profile") {
  Model m = make_model(1);
  const std::vector<Prompt> prompts{{{"sine", "left"}}, {{"arc", "fast", "large"}}};
  const std::vector<const Prompt*> ptrs{&prompts[0], &prompts[1]};
  const SamplerPlan plan = make_plan(50, 10);
  const auto prof = capture_attention_profile(m, ptrs, plan, GuidancePolicy{}, 3);
  REQUIRE(prof.size() == 10);
  for (std::size_t i = 0; i < prof.size(); ++i) {
    CHECK(prof[i].t == plan.step_times[i]);
    CHECK(prof[i].cond_branch == (i < 5));
    CHECK(prof[i].variance >= 0.0);
    CHECK(prof[i].variance <= 0.25);  // a row of weights summing to 1 over n >= 2 entries
    REQUIRE(prof[i].histogram.size() == kAttentionBins);
    double total = 0.0;
    for (double h : prof[i].histogram) total += h;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  const auto again = capture_attention_profile(m, ptrs, plan, GuidancePolicy{}, 3);
  CHECK(attention_csv(again) == attention_csv(prof));
  const std::string csv = attention_csv(prof);
  CHECK(csv.rfind("step,t,cond_branch,variance,bin0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
  CHECK_THROWS_AS(capture_attention_profile(m, {}, plan, GuidancePolicy{}, 3), std::invalid_argument);
}

TEST_CASE("benchmark counts") {
  Model m = make_model(2);
  const std::vector<Prompt> prompts(4, Prompt{{"ramp", "right"}});
  std::vector<const Prompt*> ptrs;
  for (const auto& p : prompts) ptrs.push_back(&p);
  GuidancePolicy full;
  full.mode = GuidanceMode::kStatic;
  full.skip_fraction = 1.0;
  const std::vector<BenchVariant> variants{{"no-dcfg", full}, {"dcfg", GuidancePolicy{}}, {"dcfg-again", GuidancePolicy{}}};
  const auto rows = bench_sampling(m, ptrs, variants, make_plan(50, 10), 3, 1, 7, 0.0);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].cond_evals == 10.0);
  CHECK(rows[0].uncond_evals == 10.0);
  CHECK(rows[1].cond_evals == 5.0);
  CHECK(rows[1].uncond_evals == 10.0);
  CHECK(rows[2].cond_evals == rows[1].cond_evals);
  CHECK(rows[2].uncond_evals == rows[1].uncond_evals);
  for (const auto& r : rows) {
    CHECK(r.median_seconds > 0.0);
    CHECK_FALSE(r.flagged);
  }
  const std::string csv = bench_csv(rows);
  CHECK(csv.rfind("method,avg_time_s,cond_evals,uncond_evals,total_evals\nno-dcfg,", 0) == 0);
  CHECK(csv.find(",5,10,15\n") != std::string::npos);
  CHECK_THROWS_AS(bench_sampling(m, ptrs, {}, make_plan(50, 10), 3, 1, 7), std::invalid_argument);

  SUBCASE("a too-short run grows the multiplier and flags the row") {
    const auto slow = bench_sampling(m, ptrs, {variants[1]}, make_plan(50, 10), 1, 0, 7, 0.2);
    CHECK(slow[0].cond_evals == 5.0);
    CHECK(slow[0].multiplier > 1);
    CHECK(slow[0].flagged);
    CHECK(slow[0].median_seconds * static_cast<double>(slow[0].multiplier) >= 0.1);
  }
}

TEST_CASE("metric report") {
  Model m = make_model(3);
  const auto split = split_corpus(generate_corpus(200, 4));
  const FeatureScaler sc = fit_scaler(split.train);
  EvalConfig cfg;
  cfg.reps = 2;
  cfg.prompts_per_rep = 12;
  cfg.mm_prompts = 1;
  cfg.steps = 4;
  cfg.diversity_pairs = 50;
  cfg.seed = 5;
  const MetricReport a = evaluate_model(m, split.val, sc, cfg);
  CHECK(a.fid.per_rep.size() == 2);
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(a.fid.per_rep[r] >= 0.0);
    CHECK(a.top1.per_rep[r] <= a.top2.per_rep[r]);
    CHECK(a.top2.per_rep[r] <= a.top3.per_rep[r]);
    CHECK(a.top3.per_rep[r] <= 1.0);
  }
  CHECK(a.corpus_diversity > 0.0);
  CHECK(a.csv() == evaluate_model(m, split.val, sc, cfg).csv());
  CHECK(a.csv().rfind("metric,mean,ci95\nfid,", 0) == 0);
  CHECK(a.csv().find("\ndiversity_gap,") != std::string::npos);

  cfg.mm_prompts = 20;
  CHECK_THROWS_AS(evaluate_model(m, split.val, sc, cfg), std::invalid_argument);
  cfg.mm_prompts = 1;
  cfg.reps = 0;
  CHECK_THROWS_AS(evaluate_model(m, split.val, sc, cfg), std::invalid_argument);
}
