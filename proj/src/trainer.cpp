// SPDX-License-Identifier: Apache-2.0
#include "antlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "antlab/io.hpp"

namespace antlab {

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (batch_size == 0) bad("batch_size must be positive");
  if (!(lr > 0.0)) bad("lr must be positive");
  if (!(cond_dropout >= 0.0 && cond_dropout <= 1.0)) bad("cond_dropout must lie in [0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) bad("moment coefficients must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) bad("weight_decay must be nonnegative");
  if (!(adam_eps > 0.0)) bad("adam_eps must be positive");
  if (!(grad_clip >= 0.0)) bad("grad_clip must be nonnegative");
  if (val_every == 0) bad("val_every must be positive");
}

double TrainConfig::lr_at(std::size_t step) const {
  if (lr_schedule == LrSchedule::kConstant || iterations == 0) return lr;
  const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(iterations));
  return lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

void AdamW::update(Model& model, const TrainConfig& cfg) {
  const double lr = cfg.lr_at(step);
  ++step;
  double scale = 1.0;
  if (cfg.grad_clip > 0.0) {
    double sq = 0.0;
    model.visit([&sq](const std::string&, Tensor& p) {
      for (double g : p.grad()) sq += g * g;
    });
    const double norm = std::sqrt(sq);
    if (norm > cfg.grad_clip) scale = cfg.grad_clip / norm;
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  model.visit([&](const std::string& name, Tensor& p) {
    auto& mv = m[name];
    auto& vv = v[name];
    if (mv.empty()) {
      mv.assign(p.numel(), 0.0);
      vv.assign(p.numel(), 0.0);
    }
    auto data = p.data();
    const auto grad = p.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i] * scale;
      mv[i] = cfg.beta1 * mv[i] + (1.0 - cfg.beta1) * g;
      vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * g * g;
      const double update = (mv[i] / bc1) / (std::sqrt(vv[i] / bc2) + cfg.adam_eps);
      data[i] -= lr * (update + cfg.weight_decay * data[i]);
    }
  });
}

TrainBatch draw_batch(const std::vector<Pair>& train, const TrainConfig& cfg, std::size_t step, int T) {
  if (train.empty()) throw std::invalid_argument("draw_batch: empty training set");
  Rng rng(derive_seed(cfg.seed, "train-batch", step));
  TrainBatch b;
  for (std::size_t i = 0; i < cfg.batch_size; ++i) {
    b.pairs.push_back(&train[uniform_index(rng, 0, train.size() - 1)]);
    b.ts.push_back(static_cast<int>(uniform_index(rng, 1, static_cast<std::size_t>(T))));
    b.eps.push_back(randn(b.pairs.back()->motion.frames.shape(), rng));
  }
  return b;
}

Var batch_loss(Tape& tape, Model& model, const TrainBatch& batch, const std::vector<unsigned char>& drop,
               const NoiseSchedule& sched) {
  const std::size_t n = batch.pairs.size();
  if (n == 0 || batch.ts.size() != n || batch.eps.size() != n || drop.size() != n)
    throw std::invalid_argument("batch_loss: inconsistent batch");
  const Shape one = batch.pairs[0]->motion.frames.shape();
  const std::size_t stride = shape_numel(one);
  Tensor x0({n, one[0], one[1]}), xt({n, one[0], one[1]});
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor& f = batch.pairs[i]->motion.frames;
    const Tensor noised = forward_noise(f, batch.ts[i], batch.eps[i], sched);
    std::copy(f.data().begin(), f.data().end(), x0.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
    std::copy(noised.data().begin(), noised.data().end(), xt.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  bool any_drop = false, all_drop = true;
  for (auto d : drop) {
    any_drop = any_drop || d;
    all_drop = all_drop && d;
  }
  ConditionBatch cond;
  if (all_drop) {
    cond = null_condition(tape, model.cond, n);
  } else {
    std::vector<const Prompt*> prompts;
    for (const auto* p : batch.pairs) prompts.push_back(&p->prompt);
    const TextBatch text = encode_prompts(tape, model.cond, prompts);
    cond = condition(tape, model.cond, text, batch.ts);
    if (any_drop) {
      const ConditionBatch null = null_condition(tape, model.cond, n);
      cond.tokens = batch_where(cond.tokens, null.tokens, drop);
      const std::size_t k = cond.mask.size() / n;
      for (std::size_t i = 0; i < n; ++i)
        if (drop[i]) std::fill_n(cond.mask.begin() + static_cast<std::ptrdiff_t>(i * k), k, 1);
    }
  }
  Var pred = denoise(tape, model.net, tape.constant(xt), batch.ts, cond);
  return mse(pred, tape.constant(x0));
}

double training_step(Model& model, AdamW& opt, const TrainBatch& batch, Rng& rng, const NoiseSchedule& sched,
                     const TrainConfig& cfg) {
  std::vector<unsigned char> drop(batch.pairs.size());
  for (auto& d : drop) d = uniform(rng) < cfg.cond_dropout ? 1 : 0;
  model.zero_grad();
  Tape tape;
  Var loss = batch_loss(tape, model, batch, drop, sched);
  const double value = loss.item();
  if (!std::isfinite(value))
    throw std::runtime_error("non-finite training loss at optimizer step " + std::to_string(opt.step));
  backward(tape, loss);
  opt.update(model, cfg);
  return value;
}

double validation_loss(Model& model, const std::vector<Pair>& val, const NoiseSchedule& sched, std::uint64_t seed) {
  if (val.empty()) throw std::invalid_argument("validation_loss: empty validation set");
  Rng rng(derive_seed(seed, "val-draws"));
  double total = 0.0;
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < val.size(); start += kChunk) {
    TrainBatch b;
    for (std::size_t i = start; i < std::min(val.size(), start + kChunk); ++i) {
      b.pairs.push_back(&val[i]);
      b.ts.push_back(static_cast<int>(uniform_index(rng, 1, static_cast<std::size_t>(sched.T))));
      b.eps.push_back(randn(val[i].motion.frames.shape(), rng));
    }
    Tape tape(false);
    total += batch_loss(tape, model, b, std::vector<unsigned char>(b.pairs.size(), 0), sched).item() *
             static_cast<double>(b.pairs.size());
  }
  return total / static_cast<double>(val.size());
}

void train(TrainState& state, const std::vector<Pair>& train_set, const std::vector<Pair>& val_set,
           const TrainConfig& cfg, std::size_t stop_at, const std::function<void(const TrainLogRow&)>& on_row) {
  cfg.validate();
  const NoiseSchedule sched = make_cosine_schedule(state.model.options.T);
  auto emit = [&](TrainLogRow row) {
    state.log.push_back(row);
    if (on_row) on_row(row);
  };
  if (state.opt.step == 0 && state.log.empty() && !val_set.empty())
    emit({0, std::numeric_limits<double>::quiet_NaN(), validation_loss(state.model, val_set, sched, cfg.seed), true});
  while (state.opt.step < stop_at) {
    const std::size_t step = state.opt.step;
    const TrainBatch batch = draw_batch(train_set, cfg, step, sched.T);
    Rng drop_rng(derive_seed(cfg.seed, "train-dropout", step));
    TrainLogRow row;
    row.loss = training_step(state.model, state.opt, batch, drop_rng, sched, cfg);
    row.step = state.opt.step;
    if (row.step % cfg.val_every == 0 && !val_set.empty()) {
      row.val_loss = validation_loss(state.model, val_set, sched, cfg.seed);
      row.has_val = true;
    }
    emit(row);
  }
}

std::string train_log_csv(const std::vector<TrainLogRow>& log) {
  CsvTable t({"step", "loss", "val_loss"});
  for (const auto& r : log)
    t.row({std::to_string(r.step), std::isfinite(r.loss) ? fmt_real(r.loss) : "", r.has_val ? fmt_real(r.val_loss) : ""});
  return t.str();
}

Checkpoint make_training_checkpoint(TrainState& state, const std::string& config_echo_json) {
  Checkpoint ckpt;
  store_model(state.model, ckpt);
  for (const auto& [name, mv] : state.opt.m) ckpt.tensors.insert_or_assign("adam.m." + name, Tensor({mv.size()}, mv));
  for (const auto& [name, vv] : state.opt.v) ckpt.tensors.insert_or_assign("adam.v." + name, Tensor({vv.size()}, vv));
  nlohmann::json manifest;
  manifest["architecture_hash"] = hash_hex(architecture_hash(state.model));
  manifest["step"] = state.opt.step;
  manifest["config"] = nlohmann::json::parse(config_echo_json);
  auto log = nlohmann::json::array();
  for (const auto& r : state.log)
    log.push_back({r.step, std::isfinite(r.loss) ? nlohmann::json(r.loss) : nlohmann::json(nullptr),
                   r.has_val ? nlohmann::json(r.val_loss) : nlohmann::json(nullptr)});
  manifest["log"] = std::move(log);
  ckpt.manifest_json = manifest.dump();
  return ckpt;
}

void resume_training(TrainState& state, const Checkpoint& ckpt) {
  const auto manifest = nlohmann::json::parse(ckpt.manifest_json);
  const std::string want = hash_hex(architecture_hash(state.model));
  const std::string have = manifest.value("architecture_hash", std::string());
  if (have != want)
    throw std::runtime_error("architecture hash mismatch: checkpoint " + have + ", model " + want);
  restore_model(state.model, ckpt);
  state.opt = AdamW{};
  state.opt.step = manifest.at("step").get<std::size_t>();
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind("adam.m.", 0) == 0) state.opt.m[name.substr(7)] = t.values();
    if (name.rfind("adam.v.", 0) == 0) state.opt.v[name.substr(7)] = t.values();
  }
  state.log.clear();
  for (const auto& r : manifest.at("log")) {
    TrainLogRow row;
    row.step = r.at(0).get<std::size_t>();
    row.loss = r.at(1).is_null() ? std::numeric_limits<double>::quiet_NaN() : r.at(1).get<double>();
    row.has_val = !r.at(2).is_null();
    row.val_loss = row.has_val ? r.at(2).get<double>() : 0.0;
    state.log.push_back(row);
  }
}

}  // namespace antlab
