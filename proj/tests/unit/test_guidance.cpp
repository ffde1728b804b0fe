// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "antlab/guidance.hpp"
#include "antlab/rng.hpp"

using namespace antlab;

namespace {
// Independent transcription of the cosine schedule.
double omega_oracle(double elapsed, double lo, double hi, double lambda) {
  const double v = lo + 0.5 * (1.0 + std::cos(lambda * elapsed * std::numbers::pi)) * (hi - lo);
  return v < 0.0 ? 0.0 : v;
}

GuidancePolicy defaults() { return GuidancePolicy{}; }

struct Fixture {
  Model model = make_model(3);
  NoiseSchedule sched = make_cosine_schedule(50);
  std::vector<Prompt> prompts{{{"sine", "left", "fast"}}, {{"arc", "large"}}};
  std::vector<const Prompt*> ptrs{&prompts[0], &prompts[1]};
  Tensor x_T;

  Fixture() {
    Rng rng(17);
    x_T = randn({2, kFrames, kMotionDim}, rng);
  }
};
}  // namespace

TEST_CASE("guidance scale golden values") {
  const auto p = defaults();
  CHECK(p.omega_max == 3.0);
  CHECK(p.omega_min == 1.5);
  CHECK(p.lambda == 1.5);
  CHECK(p.skip_fraction == 0.5);
  CHECK(omega_at(50, 50, p) == 3.0);
  CHECK(omega_at(1, 3, p) == 1.5);  // elapsed 2/3 puts the cosine at its trough
  CHECK(omega_at(100, 300, p) == 1.5);
  CHECK(std::abs(omega_at(0, 50, p) - 2.25) < 1e-12);
  for (int T : {1, 7, 50, 1000})
    for (int t = 0; t <= T; ++t) {
      const double w = omega_at(t, T, p);
      CHECK(w >= 0.0);
      CHECK(std::abs(w - omega_oracle(static_cast<double>(T - t) / T, 1.5, 3.0, 1.5)) < 1e-12);
    }
  CHECK_THROWS_AS(omega_at(51, 50, p), std::out_of_range);
  CHECK_THROWS_AS(omega_at(-1, 50, p), std::out_of_range);
  CHECK_THROWS_AS(omega_at(0, 0, p), std::out_of_range);

  GuidancePolicy s = p;
  s.mode = GuidanceMode::kStatic;
  for (int t = 0; t <= 50; ++t) CHECK(omega_at(t, 50, s) == 3.0);
}

TEST_CASE("guidance scale properties across policies") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    GuidancePolicy p;
    p.omega_min = 4.0 * uniform(rng);
    p.omega_max = p.omega_min + 4.0 * uniform(rng);
    p.lambda = 0.1 + 3.0 * uniform(rng);
    const int T = 1000;
    CHECK(omega_at(T, T, p) == doctest::Approx(p.omega_max).epsilon(1e-12));
    double lo = 1e300, prev = omega_at(T, T, p);
    bool monotone = true;
    for (int t = T; t >= 0; --t) {
      const double w = omega_at(t, T, p);
      CHECK(w >= 0.0);
      lo = std::min(lo, w);
      monotone = monotone && w <= prev + 1e-12;
      prev = w;
    }
    if (p.lambda >= 1.0) CHECK(std::abs(lo - p.omega_min) < 1e-4);  // integer grid misses the trough by < 1e-4
    if (p.lambda <= 1.0) CHECK(monotone);
  }
}

TEST_CASE("policy validation") {
  auto p = defaults();
  p.omega_min = -0.1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = defaults();
  p.omega_max = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = defaults();
  p.lambda = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = defaults();
  p.skip_fraction = 1.01;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK_NOTHROW(defaults().validate());
}

TEST_CASE("guided epsilon combination") {
  const Tensor c({2}, {0.3, -1.0}), u({2}, {0.1, 2.0});
  const Tensor one = guided_eps(c, u, 1.0), zero = guided_eps(c, u, 0.0), two = guided_eps(c, u, 2.0);
  CHECK(one[0] == 0.3);
  CHECK(one[1] == -1.0);
  CHECK(zero[0] == 0.1);
  CHECK(zero[1] == 2.0);
  CHECK(two[0] == doctest::Approx(0.5).epsilon(1e-15));
  Rng rng(2);
  const Tensor a = randn({3, 4}, rng);
  for (double w : {-2.0, 0.0, 0.7, 3.0, 11.0}) {
    const Tensor g = guided_eps(a, a, w);
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(g[i] == a[i]);
  }
  CHECK_THROWS_AS(guided_eps(Tensor({2}), Tensor({3}), 1.0), ShapeError);
}

TEST_CASE("skip rule") {
  auto p = defaults();
  // elapsed fractions 0, 0.1, ..., 0.9 at step start for T = 50, 10 steps
  const SamplerPlan plan = make_plan(50, 10);
  int cond = 0;
  for (int t : plan.step_times) cond += !skips_conditional(t, 50, p);
  CHECK(cond == 5);
  p.skip_fraction = 1.0;
  for (int t : plan.step_times) CHECK_FALSE(skips_conditional(t, 50, p));
  p.skip_fraction = 0.0;
  for (int t : plan.step_times) CHECK(skips_conditional(t, 50, p));

  auto lit = defaults();
  lit.skip_rule = SkipRule::kLiteralTime;
  CHECK(skips_conditional(50, 50, lit));
  CHECK(skips_conditional(26, 50, lit));
  CHECK_FALSE(skips_conditional(25, 50, lit));
  CHECK_FALSE(skips_conditional(1, 50, lit));
}

TEST_CASE("sampling cost accounting") {
  Fixture f;
  SUBCASE("default policy, 10 steps: 15 evaluations per trajectory") {
    const auto res = guided_sample(f.model, f.x_T, f.ptrs, make_plan(50, 10), defaults(), f.sched);
    CHECK(res.cost.cond_evals == 5 * 2);
    CHECK(res.cost.uncond_evals == 10 * 2);
    CHECK(res.cost.total() / 2 == 15);
    CHECK(res.motions.shape() == f.x_T.shape());
    CHECK(res.motions.all_finite());
  }
  SUBCASE("never skipping: 20 evaluations per trajectory") {
    auto p = defaults();
    p.skip_fraction = 1.0;
    const auto res = guided_sample(f.model, f.x_T, f.ptrs, make_plan(50, 10), p, f.sched);
    CHECK(res.cost.cond_evals == 20);
    CHECK(res.cost.uncond_evals == 20);
  }
  SUBCASE("counts match a step-by-step tally for many plans and fractions") {
    for (int steps : {1, 2, 5, 10, 25, 50})
      for (double s : {0.0, 0.1, 0.25, 1.0 / 3.0, 0.5, 0.8, 1.0}) {
        auto p = defaults();
        p.skip_fraction = s;
        const SamplerPlan plan = make_plan(50, steps);
        std::size_t want = 0;
        for (int t : plan.step_times) want += (static_cast<double>(50 - t) / 50.0 < s) ? 1 : 0;
        const auto res = guided_sample(f.model, f.x_T, f.ptrs, plan, p, f.sched);
        CHECK(res.cost.cond_evals == 2 * want);
        CHECK(res.cost.uncond_evals == 2 * static_cast<std::size_t>(steps));
        // equispaced plans that divide the horizon: conditional count is ceil(s T')
        if (50 % steps == 0)
          CHECK(want == static_cast<std::size_t>(std::ceil(s * steps - 1e-9)));
      }
  }
  SUBCASE("attention diagnostics do not change the count or the result") {
    SampleOptions opt;
    opt.record_attention = true;
    opt.record_x0 = true;
    const auto plain = guided_sample(f.model, f.x_T, f.ptrs, make_plan(50, 10), defaults(), f.sched);
    const auto diag = guided_sample(f.model, f.x_T, f.ptrs, make_plan(50, 10), defaults(), f.sched, opt);
    CHECK(diag.cost.cond_evals == plain.cost.cond_evals);
    CHECK(diag.attention.size() == 10);
    CHECK(diag.x0_track.size() == 10);
    CHECK(diag.motions.values() == plain.motions.values());
  }
}

TEST_CASE("zero guidance equals the unconditional rollout") {
  Fixture f;
  auto p = defaults();
  p.omega_min = p.omega_max = 0.0;
  p.skip_fraction = 1.0;
  const SamplerPlan plan = make_plan(50, 10);
  const auto res = guided_sample(f.model, f.x_T, f.ptrs, plan, p, f.sched);
  Tensor x = f.x_T;
  MultistepHistory hist;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const int t = plan.step_times[i];
    const Tensor eps = x0_to_eps(predict_x0(f.model, x, t, nullptr), x, t, f.sched);
    x = sampler_step(x, eps, t, plan.target(i), f.sched, plan.method, &hist);
  }
  CHECK(res.motions.values() == x.values());
}

TEST_CASE("sampling is deterministic and rejects bad input") {
  Fixture f;
  const auto a = guided_sample(f.model, f.x_T, f.ptrs, make_plan(50, 10), defaults(), f.sched);
  const auto b = guided_sample(f.model, f.x_T, f.ptrs, make_plan(50, 10), defaults(), f.sched);
  CHECK(a.motions.values() == b.motions.values());
  CHECK_THROWS_AS(guided_sample(f.model, f.x_T, {f.ptrs[0]}, make_plan(50, 10), defaults(), f.sched), ShapeError);

  Tensor bad = f.x_T;
  bad[0] = std::numeric_limits<double>::infinity();
  try {
    guided_sample(f.model, bad, f.ptrs, make_plan(50, 10), defaults(), f.sched);
    FAIL("expected a non-finite state error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
}

TEST_CASE("grid search") {
  const auto base = defaults();
  SUBCASE("single cell") {
    const auto g = grid_search({1.5}, {3.0}, base, 2, [](const GuidancePolicy&, std::size_t) { return 0.4; });
    REQUIRE(g.any_ok);
    CHECK(g.best == 0);
    CHECK(g.cells[0].values.size() == 2);
    CHECK(g.cells[0].mean == 0.4);
    CHECK(g.cells[0].half_width == 0.0);
  }
  SUBCASE("dominated cells are never selected; invalid and failing cells are recorded") {
    auto metric = [](const GuidancePolicy& p, std::size_t rep) {
      if (p.omega_min == 2.0 && p.omega_max == 4.0) throw std::runtime_error("boom");
      return -std::abs(p.omega_min - 1.0) - 0.1 * std::abs(p.omega_max - 3.0) + 0.001 * static_cast<double>(rep);
    };
    const auto g = grid_search({0.5, 1.0, 2.0}, {1.5, 3.0, 4.0}, base, 5, metric);
    REQUIRE(g.any_ok);
    CHECK(g.cells.size() == 9);
    CHECK(g.cells[g.best].omega_min == 1.0);
    CHECK(g.cells[g.best].omega_max == 3.0);
    const auto& invalid = g.cells[2 * 3 + 0];  // omega_min 2 > omega_max 1.5
    CHECK_FALSE(invalid.ok);
    CHECK(invalid.error.find("omega_max") != std::string::npos);
    CHECK_FALSE(g.cells[2 * 3 + 2].ok);
    CHECK(g.cells[2 * 3 + 2].error == "boom");
    const std::string table = g.table_csv();
    CHECK(table.rfind("omega_min/omega_max,1.5,3,4\n", 0) == 0);
    CHECK(table.find("\n2,NA,") != std::string::npos);
    const std::string cells = g.cells_csv();
    CHECK(cells.rfind("omega_min,omega_max,mean,half_width,reps,status\n", 0) == 0);
    CHECK(std::count(cells.begin(), cells.end(), '\n') == 10);
  }
  CHECK_THROWS_AS(grid_search({}, {1.0}, base, 1, [](const GuidancePolicy&, std::size_t) { return 0.0; }),
                  std::invalid_argument);
}

TEST_CASE("mean and 95% interval") {
  const auto [m, h] = mean_ci95({1.0, 2.0, 3.0, 4.0});
  CHECK(m == 2.5);
  CHECK(h == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(mean_ci95({}).first == 0.0);
  CHECK(mean_ci95({7.0}).second == 0.0);
}
