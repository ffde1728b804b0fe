// SPDX-License-Identifier: Apache-2.0
#include "antlab/denoiser.hpp"

#include <stdexcept>
#include <string>

namespace antlab {

void DenoiserParams::visit(const ParamVisitor& f) {
  in_proj.visit("den.in_proj", f);
  f("den.pos", pos);
  time_in.visit("den.time_in", f);
  time_out.visit("den.time_out", f);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string p = "den.block" + std::to_string(i);
    auto& b = blocks[i];
    b.norm_self.visit(p + ".norm_self", f);
    b.self_attn.visit(p + ".self", f);
    b.norm_cross.visit(p + ".norm_cross", f);
    b.cross_attn.visit(p + ".cross", f);
    b.norm_ff.visit(p + ".norm_ff", f);
    b.ff_in.visit(p + ".ff_in", f);
    b.ff_out.visit(p + ".ff_out", f);
  }
  out_norm.visit("den.out_norm", f);
  out_proj.visit("den.out_proj", f);
}

DenoiserParams make_denoiser_params(std::uint64_t seed, int horizon, std::size_t frames) {
  if (horizon < 1 || frames < 1) throw std::invalid_argument("denoiser needs horizon >= 1 and frames >= 1");
  Rng rng = make_rng(seed, "denoiser-init");
  DenoiserParams p;
  p.frames = frames;
  p.horizon = horizon;
  p.in_proj = Linear::make(kMotionDim, kWidth, rng);
  std::vector<int> positions(frames);
  for (std::size_t n = 0; n < frames; ++n) positions[n] = static_cast<int>(n);
  p.pos = sinusoidal_features(positions, kWidth, static_cast<double>(frames));
  p.pos.set_requires_grad(true);
  p.time_in = Linear::make(kWidth, kWidth, rng);
  p.time_out = Linear::make(kWidth, kWidth, rng);
  for (std::size_t i = 0; i < kBlocks; ++i) {
    DenoiserBlock b;
    b.norm_self = Norm::make(kWidth);
    b.self_attn = Attention::make(kWidth, rng, kSelfHeads);
    b.norm_cross = Norm::make(kWidth);
    b.cross_attn = Attention::make(kWidth, rng);
    b.norm_ff = Norm::make(kWidth);
    b.ff_in = Linear::make(kWidth, kFeedForward, rng);
    b.ff_out = Linear::make(kFeedForward, kWidth, rng);
    p.blocks.push_back(std::move(b));
  }
  p.out_norm = Norm::make(kWidth);
  p.out_proj = Linear::make(kWidth, kMotionDim, rng);
  // near-zero initial prediction, so the first loss is about E[x0^2]
  for (auto& w : p.out_proj.w.data()) w *= 1e-2;
  return p;
}

Var denoise(Tape& tape, DenoiserParams& params, Var x_t, const std::vector<int>& ts, const ConditionBatch& cond,
            std::vector<Tensor>* cross_weights) {
  const auto& xs = x_t.shape();
  if (xs.size() != 3 || xs[0] != ts.size() || xs[1] != params.frames || xs[2] != kMotionDim)
    throw ShapeError("denoise: x_t " + shape_str(xs) + " does not match " + std::to_string(ts.size()) + " x " +
                     std::to_string(params.frames) + " x " + std::to_string(kMotionDim));
  const auto& cs = cond.tokens.shape();
  if (cs.size() != 3 || cs[0] != ts.size() || cs[2] != kWidth)
    throw ShapeError("denoise: condition " + shape_str(cs) + " does not match the batch");
  for (int t : ts)
    if (t < 1 || t > params.horizon)
      throw std::out_of_range("denoise: timestep " + std::to_string(t) + " outside [1, " +
                              std::to_string(params.horizon) + "]");
  const std::size_t batch = ts.size();
  Var temb = params.time_out(tape, silu(params.time_in(tape, tape.constant(sinusoidal_features(ts, kWidth, params.horizon)))));
  Var h = add(params.in_proj(tape, x_t), expand_batch(tape.leaf(params.pos), batch));
  h = add_per_batch(h, temb);
  if (cross_weights) cross_weights->clear();
  for (auto& b : params.blocks) {
    Var n1 = b.norm_self(tape, h);
    h = add(h, b.self_attn(tape, n1, n1, {}));
    Tensor w;
    h = add(h, b.cross_attn(tape, b.norm_cross(tape, h), cond.tokens, cond.mask, cross_weights ? &w : nullptr));
    if (cross_weights) cross_weights->push_back(std::move(w));
    h = add(h, b.ff_out(tape, silu(b.ff_in(tape, b.norm_ff(tape, h)))));
  }
  return params.out_proj(tape, params.out_norm(tape, h));
}

void Model::visit(const ParamVisitor& f) {
  cond.visit(f);
  net.visit(f);
}

void Model::zero_grad() {
  visit([](const std::string&, Tensor& p) { p.zero_grad(); });
}

Model make_model(std::uint64_t seed, const ModelOptions& options) {
  ConditionerOptions co = options.conditioner;
  co.horizon = options.T;
  return Model{options, make_sta_params(seed, co), make_denoiser_params(seed, options.T, options.frames)};
}

EncodedText encode_batch(Model& model, const std::vector<const Prompt*>& prompts) {
  Tape tape(false);
  TextBatch tb = encode_prompts(tape, model.cond, prompts);
  return {tb.c.value(), std::move(tb.mask)};
}

Tensor predict_x0(Model& model, const Tensor& x_t, int t, const EncodedText* text, std::vector<Tensor>* cross_weights) {
  Tape tape(false);
  const std::size_t batch = x_t.dim(0);
  const std::vector<int> ts(batch, t);
  ConditionBatch cond;
  if (text) {
    if (text->c.dim(0) != batch) throw ShapeError("predict_x0: text batch does not match x_t");
    cond = condition(tape, model.cond, TextBatch{tape.constant(text->c), text->mask}, ts);
  } else {
    cond = null_condition(tape, model.cond, batch);
  }
  return denoise(tape, model.net, tape.constant(x_t), ts, cond, cross_weights).value();
}

}  // namespace antlab
