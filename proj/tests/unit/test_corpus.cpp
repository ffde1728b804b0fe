// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "antlab/corpus.hpp"
#include "antlab/rng.hpp"

using namespace antlab;

namespace {
double peak(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

double phase_gap(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * std::numbers::pi)); }
}  // namespace

TEST_CASE("prompt validation") {
  CHECK_NOTHROW(validate_prompt({{"sine"}}));
  CHECK_NOTHROW(validate_prompt({{"arc", "left", "fast", "large", "jerky"}}));
  CHECK_THROWS(validate_prompt({{"left"}}));
  CHECK_THROWS(validate_prompt({{"sine", "ramp"}}));
  CHECK_THROWS(validate_prompt({{"sine", "wobbly"}}));
  CHECK_THROWS(validate_prompt({{"sine", "left", "right"}}));
  CHECK_THROWS(token_id("zigzag"));
  std::set<std::string> unique(vocabulary().begin(), vocabulary().end());
  CHECK(unique.size() == vocabulary().size());
}

TEST_CASE("generate_pair") {
  SUBCASE("same seed gives a bit-identical pair") {
    const Pair a = generate_pair(42), b = generate_pair(42);
    CHECK(a.prompt.tokens == b.prompt.tokens);
    CHECK(a.motion.frames.values() == b.motion.frames.values());
    CHECK(a.motion.params.phase == b.motion.params.phase);
  }
  SUBCASE("sine left slow small") {
    const Pair p = generate_pair(7, Prompt{{"sine", "left", "slow", "small"}});
    CHECK(p.motion.params.direction == -1.0);
    // three cycles over the sequence, amplitude 0.5
    CHECK(p.motion.params.omega == doctest::Approx(2.0 * std::numbers::pi * 3.0 / 64.0).epsilon(1e-15));
    const auto& f = p.motion.frames;
    for (std::size_t n = 0; n < kFrames; ++n) {
      const double want = 0.5 * std::cos(p.motion.params.phase - p.motion.params.omega * static_cast<double>(n));
      CHECK(std::abs(f[2 * n] - want) < 1e-12);
    }
    // below an eighth of the sampling rate
    CHECK(p.motion.params.omega < std::numbers::pi / 4.0);
  }
  SUBCASE("large amplitude peaks higher than small") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Pair lo = generate_pair(seed, Prompt{{"ramp", "small"}});
      const Pair hi = generate_pair(seed, Prompt{{"ramp", "large"}});
      CHECK(peak(hi.motion.frames) > peak(lo.motion.frames));
    }
  }
  SUBCASE("frames stay bounded and reproduce from params") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const Pair p = generate_pair(derive_seed(99, "bound", seed));
      validate_prompt(p.prompt);
      CHECK(peak(p.motion.frames) <= 4.0);
      const Tensor again = synthesize_frames(p.motion.params);
      for (std::size_t i = 0; i < again.numel(); ++i) CHECK(std::abs(again[i] - p.motion.frames[i]) <= 1e-9);
    }
  }
  CHECK_THROWS(generate_pair(1, Prompt{{"sine", "spin"}}));
}

TEST_CASE("fit_params") {
  SUBCASE("round trip on clean motions") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const Pair p = generate_pair(derive_seed(5, "fit", seed));
      const FitResult fit = fit_params(p.motion.frames);
      CHECK_FALSE(fit.degenerate);
      CHECK(std::abs(fit.params.amplitude - p.motion.params.amplitude) < 1e-6);
      CHECK(std::abs(fit.params.omega - p.motion.params.omega) < 1e-6);
      CHECK(phase_gap(fit.params.phase, p.motion.params.phase) < 1e-6);
      CHECK(fit.params.direction == p.motion.params.direction);
    }
  }
  SUBCASE("all-zero motion is degenerate") {
    const FitResult fit = fit_params(Tensor({kFrames, kMotionDim}));
    CHECK(fit.degenerate);
    CHECK(fit.params.amplitude == 0.0);
    CHECK(fit.params.omega == 0.0);
  }
  SUBCASE("noise sigma 0.01 keeps params within 5%") {
    Rng rng(77);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Pair p = generate_pair(derive_seed(6, "noisy", seed));
      Tensor noisy = p.motion.frames;
      for (auto& v : noisy.data()) v += 0.01 * normal(rng);
      const auto fit = fit_params(noisy).params;
      const auto& truth = p.motion.params;
      CHECK(std::abs(fit.amplitude / truth.amplitude - 1.0) < 0.05);
      CHECK(std::abs(fit.omega / truth.omega - 1.0) < 0.05);
      // phase is an angle; 5% of a half turn
      CHECK(phase_gap(fit.phase, truth.phase) < 0.05 * std::numbers::pi);
      CHECK(fit.direction == truth.direction);
    }
  }
  CHECK_THROWS(fit_params(Tensor({7, 2})));
  CHECK_THROWS_AS(fit_params(Tensor({16, 3})), ShapeError);
}

TEST_CASE("corpus split and serialization") {
  const auto corpus = generate_corpus(100, 3);
  const auto again = generate_corpus(100, 3);
  for (std::size_t i = 0; i < corpus.size(); ++i) CHECK(corpus[i].motion.frames.values() == again[i].motion.frames.values());
  const auto split = split_corpus(corpus);
  CHECK(split.train.size() == 80);
  CHECK(split.val.size() == 15);
  CHECK(split.test.size() == 5);
  CHECK(split.val.front().motion.frames.values() == corpus[80].motion.frames.values());

  std::stringstream ss;
  write_corpus_jsonl(corpus, ss);
  const auto back = read_corpus_jsonl(ss);
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(back[i].prompt.tokens == corpus[i].prompt.tokens);
    CHECK(back[i].motion.frames.values() == corpus[i].motion.frames.values());
    CHECK(back[i].motion.params.phase == corpus[i].motion.params.phase);
  }
  std::istringstream bad("{\"tokens\": [\"sine\", \"blue\"], \"params\": {}, \"frames\": []}\n");
  CHECK_THROWS(read_corpus_jsonl(bad));
}
