// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "antlab/denoiser.hpp"
#include "antlab/sta.hpp"

using namespace antlab;

namespace {
double diff_norm(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Plain-loop recomputation of the scaled tokens from the parameters.
std::vector<double> scaled_tokens_oracle(StaParams& p, int t) {
  const std::size_t d = kCondWidth;
  const Tensor z = timestep_embed(t, p);
  std::vector<double> out(kStaTokens * d);
  for (std::size_t k = 0; k < kStaTokens; ++k) {
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) {
      double shift = p.alpha.b[j];
      for (std::size_t i = 0; i < d; ++i) shift += z[i] * p.alpha.w[i * d + j];
      row[j] = p.tokens[k * d + j] + z[j] + shift;
    }
    double mean = 0.0;
    for (double v : row) mean += v / d;
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean) / d;
    for (std::size_t j = 0; j < d; ++j) out[k * d + j] = p.gamma[j] * row[j] / (std::sqrt(var) + 1e-5) + p.beta[j];
  }
  return out;
}

// Central-difference check of d loss / d param over a few coordinates.
double param_fd_error(const std::function<double(bool)>& loss, Tensor& param, std::initializer_list<std::size_t> coords) {
  param.zero_grad();
  loss(true);
  const std::vector<double> analytic(param.grad().begin(), param.grad().end());
  double worst = 0.0;
  for (std::size_t i : coords) {
    const double keep = param[i], h = 1e-5;
    param.data()[i] = keep + h;
    const double up = loss(false);
    param.data()[i] = keep - h;
    const double down = loss(false);
    param.data()[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6}));
  }
  return worst;
}

const Prompt kPrompt{{"sine", "left", "fast", "large"}};
}  // namespace

TEST_CASE("text encoder") {
  StaParams p = make_sta_params(1);
  const auto one = encode_prompt(Prompt{{"arc"}}, p);
  CHECK(one.c.shape() == Shape{1, kCondWidth});

  const auto a = encode_prompt(kPrompt, p);
  const auto b = encode_prompt(Prompt{{"sine", "fast", "left", "large"}}, p);
  CHECK(diff_norm(a.c, b.c) > 1e-6);  // position-aware
  CHECK(encode_prompt(kPrompt, p).c.values() == a.c.values());
  CHECK_THROWS_AS(encode_prompt(Prompt{{"sine", "sideways"}}, p), std::invalid_argument);
}

TEST_CASE("timestep embedding") {
  StaParams p = make_sta_params(2);
  CHECK(diff_norm(timestep_embed(0, p), timestep_embed(50, p)) > 1e-3);
  CHECK(timestep_embed(17, p).values() == timestep_embed(17, p).values());
  CHECK_THROWS_AS(timestep_embed(-1, p), std::out_of_range);
  CHECK_THROWS_AS(timestep_embed(51, p), std::out_of_range);
}

TEST_CASE("adaptive tokens") {
  StaParams p = make_sta_params(3);
  const auto text = encode_prompt(kPrompt, p);
  const Tensor c10 = sta_forward(text, 10, p);
  CHECK(c10.shape() == Shape{kStaTokens, kCondWidth});
  CHECK(diff_norm(c10, sta_forward(text, 40, p)) > 1e-6);
  CHECK(sta_forward(text, 10, p).values() == c10.values());

  SUBCASE("zero output projection leaves exactly the scaled tokens") {
    for (auto& h : p.cross.heads)
      for (auto& w : h.wo.data()) w = 0.0;
    const auto want = scaled_tokens_oracle(p, 23);
    const Tensor got = sta_forward(text, 23, p);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));

    for (auto& g : p.gamma.data()) g = 0.0;
    for (auto& b : p.beta.data()) b = 0.0;
    const Tensor zeroed = sta_forward(text, 23, p);
    for (double v : zeroed.data()) CHECK(v == 0.0);
  }

  SUBCASE("learned sigma reading") {
    ConditionerOptions o;
    o.sigma_mode = SigmaMode::kLearned;
    StaParams q = make_sta_params(3, o);
    for (auto& h : q.cross.heads)
      for (auto& w : h.wo.data()) w = 0.0;
    for (auto& s : q.log_sigma.data()) s = std::log(2.0);
    const Tensor z = timestep_embed(5, q);
    const Tensor got = sta_forward(encode_prompt(kPrompt, q), 5, q);
    const std::size_t d = kCondWidth;
    for (std::size_t j = 0; j < d; ++j) {
      double shift = q.alpha.b[j];
      for (std::size_t i = 0; i < d; ++i) shift += z[i] * q.alpha.w[i * d + j];
      CHECK(got[j] == doctest::Approx((q.tokens[j] + z[j] + shift) / (2.0 + 1e-5)).epsilon(1e-12));
    }
  }
}

TEST_CASE("cross-attention weights") {
  StaParams p = make_sta_params(4);
  const auto single = encode_prompt(Prompt{{"ramp"}}, p);
  const Tensor ones = attention_weights(single, 12, p);
  for (double w : ones.data()) CHECK(w == 1.0);

  const auto text = encode_prompt(kPrompt, p);
  const Tensor w = attention_weights(text, 12, p);
  REQUIRE(w.shape() == Shape{kStaTokens, 4});
  for (std::size_t k = 0; k < kStaTokens; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) s += w[k * 4 + j];
    CHECK(std::abs(s - 1.0) < 1e-12);
  }

  // Independent recomputation from the scaled tokens and the projections.
  const auto lhat = scaled_tokens_oracle(p, 12);
  const auto& h = p.cross.heads.at(0);
  const std::size_t d = kCondWidth;
  for (std::size_t k = 0; k < kStaTokens; ++k) {
    std::vector<double> q(d, 0.0), logits(4, 0.0);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t i = 0; i < d; ++i) q[j] += lhat[k * d + i] * h.wq[i * d + j];
    for (std::size_t n = 0; n < 4; ++n) {
      for (std::size_t j = 0; j < d; ++j) {
        double key = 0.0;
        for (std::size_t i = 0; i < d; ++i) key += text.c[n * d + i] * h.wk[i * d + j];
        logits[n] += q[j] * key / std::sqrt(static_cast<double>(d));
      }
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    for (std::size_t n = 0; n < 4; ++n) CHECK(std::abs(w[k * 4 + n] - std::exp(logits[n] - mx) / z) < 1e-12);
  }

  SUBCASE("identical keys give uniform rows") {
    const auto same = encode_prompt(Prompt{{"arc"}}, p);
    TextFeatures rep{Tensor({3, d}), {1, 1, 1}};
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t j = 0; j < d; ++j) rep.c[r * d + j] = same.c[j];
    const Tensor uniform_rows = attention_weights(rep, 30, p);
    for (double v : uniform_rows.data()) CHECK(std::abs(v - 1.0 / 3.0) < 1e-12);
  }
}

TEST_CASE("null condition") {
  StaParams sta = make_sta_params(5);
  CHECK(null_condition(sta).shape() == Shape{kStaTokens, kCondWidth});
  CHECK(null_condition(sta).values() == null_condition(sta).values());
  ConditionerOptions o;
  o.kind = ConditionerKind::kStatic;
  StaParams fixed = make_sta_params(5, o);
  CHECK(null_condition(fixed).shape() == Shape{kMaxPromptTokens, kCondWidth});
  CHECK_THROWS_AS(
      [&] {
        Tape tape(false);
        sta_forward(tape, fixed, encode_prompts(tape, fixed, {&kPrompt}), {3});
      }(),
      std::logic_error);
}

TEST_CASE("gradients through the full conditioner match central differences") {
  for (SigmaMode mode : {SigmaMode::kStatistic, SigmaMode::kLearned}) {
    ConditionerOptions o;
    o.sigma_mode = mode;
    StaParams p = make_sta_params(6, o);
    const Prompt other{{"arc", "right", "slow"}};
    Rng wr(9);
    const Tensor weights = randn({2, kStaTokens, kCondWidth}, wr);
    auto loss = [&](bool with_grad) {
      Tape tape(with_grad);
      const TextBatch text = encode_prompts(tape, p, {&kPrompt, &other});
      Var c = sta_forward(tape, p, text, {7, 44}).c_hat;
      Var l = sum(mul(c, tape.constant(weights)));
      if (with_grad) backward(tape, l);
      return l.item();
    };
    double worst = 0.0;
    p.visit([&](const std::string& name, Tensor& t) {
      if (name == "null.tokens") return;  // not on this path
      const std::size_t n = t.numel();
      const double e = param_fd_error(loss, t, {0, n / 3, n / 2, n - 1});
      CAPTURE(name);
      CHECK(e < 1e-4);
      worst = std::max(worst, e);
    });
    CHECK(worst < 1e-4);
  }
}
