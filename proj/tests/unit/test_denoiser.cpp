// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "antlab/checkpoint.hpp"
#include "antlab/trainer.hpp"

using namespace antlab;

namespace {
ModelOptions mini_options(ConditionerKind kind = ConditionerKind::kSta) {
  ModelOptions o;
  o.conditioner.kind = kind;
  o.frames = 4;
  o.T = 20;
  return o;
}

std::vector<Pair> mini_pairs(std::size_t n, std::size_t frames, std::uint64_t seed) {
  std::vector<Pair> out;
  for (std::size_t i = 0; i < n; ++i) {
    Pair p = generate_pair(derive_seed(seed, "mini", i));
    p.motion.frames = synthesize_frames(p.motion.params, frames);
    out.push_back(std::move(p));
  }
  return out;
}

double params_gap(Model& a, Model& b) {
  std::map<std::string, std::vector<double>> va;
  a.visit([&](const std::string& n, Tensor& t) { va[n] = t.values(); });
  double worst = 0.0;
  b.visit([&](const std::string& n, Tensor& t) {
    const auto& x = va.at(n);
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - t[i]));
  });
  return worst;
}
}  // namespace

TEST_CASE("denoiser shapes and conditioning") {
  Model m = make_model(1);
  Rng rng(2);
  const Tensor x = randn({2, kFrames, kMotionDim}, rng);
  const Prompt a{{"sine", "left"}}, b{{"arc", "right", "fast"}};
  const EncodedText text = encode_batch(m, {&a, &b});
  const Tensor cond = predict_x0(m, x, 25, &text), null = predict_x0(m, x, 25, nullptr);
  CHECK(cond.shape() == x.shape());
  double gap = 0.0;
  for (std::size_t i = 0; i < cond.numel(); ++i) gap += std::abs(cond[i] - null[i]);
  CHECK(gap > 0.0);
  CHECK(predict_x0(m, x, 25, &text).values() == cond.values());

  std::vector<Tensor> weights;
  predict_x0(m, x, 25, &text, &weights);
  REQUIRE(weights.size() == kBlocks);
  CHECK(weights[0].shape() == Shape{2, kFrames, kStaTokens});

  CHECK_THROWS_AS(predict_x0(m, x, 0, &text), std::out_of_range);
  CHECK_THROWS_AS(predict_x0(m, x, 51, &text), std::out_of_range);
  CHECK_THROWS_AS(predict_x0(m, randn({2, kFrames, 3}, rng), 5, &text), ShapeError);
}

TEST_CASE("end-to-end gradients on a 4-frame miniature") {
  for (ConditionerKind kind : {ConditionerKind::kSta, ConditionerKind::kStatic}) {
    Model m = make_model(3, mini_options(kind));
    const auto pairs = mini_pairs(3, 4, 4);
    TrainBatch batch;
    Rng rng(5);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      batch.pairs.push_back(&pairs[i]);
      batch.ts.push_back(static_cast<int>(3 + 6 * i));
      batch.eps.push_back(randn({4, kMotionDim}, rng));
    }
    const std::vector<unsigned char> drop{0, 1, 0};  // reaches the null tokens too
    const NoiseSchedule sched = make_cosine_schedule(20);
    auto loss = [&](bool with_grad) {
      Tape tape(with_grad);
      Var l = batch_loss(tape, m, batch, drop, sched);
      if (with_grad) backward(tape, l);
      return l.item();
    };
    m.zero_grad();
    loss(true);
    std::map<std::string, std::vector<double>> analytic;
    m.visit([&](const std::string& n, Tensor& t) { analytic[n] = {t.grad().begin(), t.grad().end()}; });

    std::size_t groups = 0;
    m.visit([&](const std::string& name, Tensor& t) {
      ++groups;
      double worst = 0.0;
      const std::size_t n = t.numel();
      for (std::size_t i : {std::size_t{0}, n / 2, n - 1}) {
        const double keep = t[i], h = 1e-5;
        t.data()[i] = keep + h;
        const double up = loss(false);
        t.data()[i] = keep - h;
        const double down = loss(false);
        t.data()[i] = keep;
        const double num = (up - down) / (2.0 * h), an = analytic.at(name)[i];
        worst = std::max(worst, std::abs(an - num) / std::max({std::abs(an), std::abs(num), 1e-6}));
      }
      CAPTURE(name);
      CHECK(worst < 1e-4);
    });
    CHECK(groups > 20);
  }
}

TEST_CASE("untrained loss matches the corpus second moment") {
  const auto corpus = generate_corpus(256, 11);
  double e2 = 0.0;
  std::size_t count = 0;
  for (const auto& p : corpus)
    for (double v : p.motion.frames.data()) {
      e2 += v * v;
      ++count;
    }
  e2 /= static_cast<double>(count);
  Model m = make_model(12);
  const double loss = validation_loss(m, corpus, make_cosine_schedule(50), 13);
  CHECK(loss > 0.7 * e2);
  CHECK(loss < 1.3 * e2);
}

TEST_CASE("training steps") {
  const auto pairs = generate_corpus(64, 21);
  TrainConfig cfg;
  cfg.seed = 22;
  cfg.batch_size = 8;
  const NoiseSchedule sched = make_cosine_schedule(50);

  SUBCASE("identical seeds give identical losses and parameters") {
    Model a = make_model(23), b = make_model(23);
    AdamW oa, ob;
    for (std::size_t s = 0; s < 2; ++s) {
      const TrainBatch batch = draw_batch(pairs, cfg, s, 50);
      Rng ra(derive_seed(cfg.seed, "drop", s)), rb(derive_seed(cfg.seed, "drop", s));
      CHECK(training_step(a, oa, batch, ra, sched, cfg) == training_step(b, ob, batch, rb, sched, cfg));
    }
    CHECK(params_gap(a, b) == 0.0);
  }

  SUBCASE("full condition dropout ignores the prompts") {
    cfg.cond_dropout = 1.0;
    std::vector<Pair> permuted = pairs;
    for (std::size_t i = 0; i < permuted.size(); ++i) permuted[i].prompt = pairs[(i + 7) % pairs.size()].prompt;
    Model a = make_model(24), b = make_model(24);
    AdamW oa, ob;
    for (std::size_t s = 0; s < 2; ++s) {
      Rng ra(1), rb(1);
      const double la = training_step(a, oa, draw_batch(pairs, cfg, s, 50), ra, sched, cfg);
      const double lb = training_step(b, ob, draw_batch(permuted, cfg, s, 50), rb, sched, cfg);
      CHECK(la == lb);
    }
    CHECK(params_gap(a, b) == 0.0);
  }

  SUBCASE("null tokens receive gradient from dropped samples") {
    cfg.cond_dropout = 0.5;
    Model m = make_model(25);
    AdamW opt;
    Rng r(2);
    const Tensor before = m.cond.null_tokens.detached();
    training_step(m, opt, draw_batch(pairs, cfg, 0, 50), r, sched, cfg);
    double norm = 0.0;
    for (double g : m.cond.null_tokens.grad()) norm += g * g;
    CHECK(norm > 0.0);
    CHECK(m.cond.null_tokens.values() != before.values());
  }

  SUBCASE("non-finite loss aborts") {
    Model m = make_model(26);
    m.net.out_proj.b[0] = std::numeric_limits<double>::quiet_NaN();
    AdamW opt;
    Rng r(3);
    CHECK_THROWS_AS(training_step(m, opt, draw_batch(pairs, cfg, 0, 50), r, sched, cfg), std::runtime_error);
  }
}

TEST_CASE("learning-rate schedule and config validation") {
  TrainConfig cfg;
  cfg.lr = 0.01;
  cfg.iterations = 100;
  CHECK(cfg.lr_at(0) == 0.01);
  CHECK(cfg.lr_at(50) == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(std::abs(cfg.lr_at(100)) < 1e-18);
  CHECK(std::abs(cfg.lr_at(250)) < 1e-18);
  for (std::size_t s = 1; s <= 100; ++s) CHECK(cfg.lr_at(s) <= cfg.lr_at(s - 1));
  cfg.lr_schedule = LrSchedule::kConstant;
  CHECK(cfg.lr_at(77) == 0.01);

  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  };
  bad([](TrainConfig& c) { c.lr = 0.0; });
  bad([](TrainConfig& c) { c.cond_dropout = 1.5; });
  bad([](TrainConfig& c) { c.batch_size = 0; });
  bad([](TrainConfig& c) { c.beta2 = 1.0; });
  TrainConfig ok;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("resume from a checkpoint is bit-identical") {
  const auto split = split_corpus(generate_corpus(80, 31));
  TrainConfig cfg;
  cfg.seed = 32;
  cfg.batch_size = 4;
  cfg.iterations = 6;
  cfg.val_every = 2;

  TrainState straight{make_model(33, mini_options()), {}, {}};
  const auto to_mini = [](std::vector<Pair> v) {
    for (auto& p : v) p.motion.frames = synthesize_frames(p.motion.params, 4);
    return v;
  };
  const auto train_set = to_mini(split.train), val_set = to_mini(split.val);
  train(straight, train_set, val_set, cfg, 6);

  TrainState first{make_model(33, mini_options()), {}, {}};
  train(first, train_set, val_set, cfg, 3);
  const Checkpoint saved = deserialize_checkpoint(serialize_checkpoint(make_training_checkpoint(first, R"({"k":1})")));
  TrainState resumed{make_model(99, mini_options()), {}, {}};
  resume_training(resumed, saved);
  CHECK(resumed.opt.step == 3);
  train(resumed, train_set, val_set, cfg, 6);

  CHECK(params_gap(straight.model, resumed.model) == 0.0);
  CHECK(train_log_csv(straight.log) == train_log_csv(resumed.log));
  CHECK(straight.opt.m == resumed.opt.m);
  CHECK(straight.opt.v == resumed.opt.v);

  TrainState other{make_model(33, mini_options(ConditionerKind::kStatic)), {}, {}};
  CHECK_THROWS_AS(resume_training(other, saved), std::runtime_error);
}

TEST_CASE("training log csv") {
  std::vector<TrainLogRow> log{{0, std::numeric_limits<double>::quiet_NaN(), 0.5, true}, {1, 0.25, 0.0, false}};
  CHECK(train_log_csv(log) == "step,loss,val_loss\n0,,0.5\n1,0.25,\n");
}
