// SPDX-License-Identifier: Apache-2.0
#include "antlab/sta.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace antlab {

namespace {
constexpr double kScaleEps = 1e-5;

TextFeatures unbatch(const Tensor& c, const std::vector<unsigned char>& mask) {
  std::size_t n = 0;
  while (n < mask.size() && mask[n]) ++n;
  TextFeatures out;
  out.c = Tensor({n, kCondWidth}, std::vector<double>(c.data().begin(), c.data().begin() + static_cast<std::ptrdiff_t>(n * kCondWidth)));
  out.mask.assign(n, 1);
  return out;
}

TextBatch rebatch(Tape& tape, const TextFeatures& text) {
  const std::size_t n = text.c.dim(0);
  if (text.c.rank() != 2 || text.c.dim(1) != kCondWidth || n == 0 || n > kMaxPromptTokens)
    throw ShapeError("text features must be [n <= " + std::to_string(kMaxPromptTokens) + ", " +
                     std::to_string(kCondWidth) + "], got " + shape_str(text.c.shape()));
  return {tape.constant(text.c.reshaped({1, n, kCondWidth})), std::vector<unsigned char>(n, 1)};
}
}  // namespace

std::size_t StaParams::condition_tokens() const {
  return options.kind == ConditionerKind::kSta ? kStaTokens : kMaxPromptTokens;
}

void StaParams::visit(const ParamVisitor& f) {
  f("text.embed", encoder.embed);
  f("text.pos", encoder.pos);
  encoder.norm_in.visit("text.norm_in", f);
  encoder.attn.visit("text.attn", f);
  encoder.norm_out.visit("text.norm_out", f);
  if (options.kind == ConditionerKind::kSta) {
    f("sta.tokens", tokens);
    time_proj.visit("sta.time_proj", f);
    alpha.visit("sta.alpha", f);
    f("sta.gamma", gamma);
    f("sta.beta", beta);
    if (options.sigma_mode == SigmaMode::kLearned) f("sta.log_sigma", log_sigma);
    cross.visit("sta.cross", f);
  }
  f("null.tokens", null_tokens);
}

StaParams make_sta_params(std::uint64_t seed, const ConditionerOptions& options) {
  if (options.horizon < 1) throw std::invalid_argument("conditioner horizon must be >= 1");
  Rng rng = make_rng(seed, "sta-init");
  const std::size_t d = kCondWidth;
  StaParams p;
  p.options = options;
  p.encoder.embed = randn({vocabulary().size(), d}, rng);
  p.encoder.embed.set_requires_grad(true);
  p.encoder.pos = randn({kMaxPromptTokens, d}, rng, 0.5);
  p.encoder.pos.set_requires_grad(true);
  p.encoder.norm_in = Norm::make(d);
  p.encoder.attn = Attention::make(d, rng);
  p.encoder.norm_out = Norm::make(d);
  p.tokens = randn({kStaTokens, d}, rng);
  p.tokens.set_requires_grad(true);
  p.time_proj = Linear::make(d, d, rng);
  p.alpha = Linear::make(d, d, rng);
  p.gamma = init_const({d}, 1.0);
  p.beta = init_const({d}, 0.0);
  p.log_sigma = init_const({d}, 0.0);
  p.cross = Attention::make(d, rng);
  p.null_tokens = randn({p.condition_tokens(), d}, rng);
  p.null_tokens.set_requires_grad(true);
  return p;
}

TextBatch encode_prompts(Tape& tape, StaParams& params, const std::vector<const Prompt*>& prompts) {
  if (prompts.empty()) throw std::invalid_argument("encode_prompts: empty batch");
  const std::size_t batch = prompts.size(), len = kMaxPromptTokens;
  std::vector<std::size_t> ids(batch * len, 0);
  std::vector<unsigned char> mask(batch * len, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    validate_prompt(*prompts[b]);
    const auto& toks = prompts[b]->tokens;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      ids[b * len + i] = token_id(toks[i]);
      mask[b * len + i] = 1;
    }
  }
  auto& enc = params.encoder;
  Var e = add(embedding(tape.leaf(enc.embed), ids, {batch, len}), expand_batch(tape.leaf(enc.pos), batch));
  Var normed = enc.norm_in(tape, e);
  Var h = add(e, enc.attn(tape, normed, normed, mask));
  return {enc.norm_out(tape, h), std::move(mask)};
}

TextFeatures encode_prompt(const Prompt& prompt, StaParams& params) {
  Tape tape(false);
  const TextBatch tb = encode_prompts(tape, params, {&prompt});
  return unbatch(tb.c.value(), tb.mask);
}

Var timestep_embed(Tape& tape, StaParams& params, const std::vector<int>& ts) {
  for (int t : ts)
    if (t < 0 || t > params.options.horizon)
      throw std::out_of_range("timestep " + std::to_string(t) + " outside [0, " +
                              std::to_string(params.options.horizon) + "]");
  const Tensor basis = sinusoidal_features(ts, kCondWidth, params.options.horizon);
  return params.time_proj(tape, tape.constant(basis));
}

Tensor timestep_embed(int t, StaParams& params) {
  Tape tape(false);
  return timestep_embed(tape, params, {t}).value().reshaped({kCondWidth});
}

StaOutput sta_forward(Tape& tape, StaParams& params, const TextBatch& text, const std::vector<int>& ts) {
  if (params.options.kind != ConditionerKind::kSta) throw std::logic_error("sta_forward on a static conditioner");
  const auto& cs = text.c.shape();
  if (cs.size() != 3 || cs[0] != ts.size() || cs[2] != kCondWidth)
    throw ShapeError("sta_forward: text " + shape_str(cs) + " does not match " + std::to_string(ts.size()) +
                     " timesteps of width " + std::to_string(kCondWidth));
  Var z = timestep_embed(tape, params, ts);
  Var lt = add_per_batch(tape.leaf(params.tokens), z);
  Var shifted = add_per_batch(lt, params.alpha(tape, z));
  Var lhat;
  if (params.options.sigma_mode == SigmaMode::kStatistic) {
    lhat = feature_std_scale(shifted, tape.leaf(params.gamma), tape.leaf(params.beta), kScaleEps);
  } else {
    Var sigma = add_scalar(exponential(tape.leaf(params.log_sigma)), kScaleEps);
    lhat = add_bias(div_lastaxis(mul_lastaxis(shifted, tape.leaf(params.gamma)), sigma), tape.leaf(params.beta));
  }
  StaOutput out;
  Var attended = params.cross(tape, lhat, text.c, text.mask, &out.weights);
  out.c_hat = add(lhat, attended);
  return out;
}

Tensor sta_forward(const TextFeatures& text, int t, StaParams& params) {
  Tape tape(false);
  const StaOutput out = sta_forward(tape, params, rebatch(tape, text), {t});
  return out.c_hat.value().reshaped({kStaTokens, kCondWidth});
}

Tensor attention_weights(const TextFeatures& text, int t, StaParams& params) {
  Tape tape(false);
  const StaOutput out = sta_forward(tape, params, rebatch(tape, text), {t});
  return out.weights.reshaped({kStaTokens, text.c.dim(0)});
}

ConditionBatch condition(Tape& tape, StaParams& params, const TextBatch& text, const std::vector<int>& ts) {
  if (params.options.kind == ConditionerKind::kStatic) return {text.c, text.mask};
  StaOutput out = sta_forward(tape, params, text, ts);
  return {out.c_hat, std::vector<unsigned char>(ts.size() * kStaTokens, 1)};
}

ConditionBatch null_condition(Tape& tape, StaParams& params, std::size_t batch) {
  return {expand_batch(tape.leaf(params.null_tokens), batch),
          std::vector<unsigned char>(batch * params.condition_tokens(), 1)};
}

Tensor null_condition(StaParams& params) { return params.null_tokens.detached(); }

}  // namespace antlab
