// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "antlab/layers.hpp"
#include "antlab/sta.hpp"

namespace antlab {

inline constexpr std::size_t kWidth = 32;
inline constexpr std::size_t kBlocks = 2;
inline constexpr std::size_t kFeedForward = 64;
inline constexpr std::size_t kSelfHeads = 4;

struct DenoiserBlock {
  Norm norm_self, norm_cross, norm_ff;
  Attention self_attn, cross_attn;
  Linear ff_in, ff_out;
};

/// Transformer-style x0-predictor over [N, d_m] motions: input projection plus
/// learned positions plus a timestep MLP, then blocks of self-attention,
/// cross-attention to the condition tokens and a SiLU feed-forward, each
/// pre-normed and residual.
struct DenoiserParams {
  std::size_t frames = kFrames;
  int horizon = 50;
  Linear in_proj;
  Tensor pos;  // [frames, width]
  Linear time_in, time_out;
  std::vector<DenoiserBlock> blocks;
  Norm out_norm;
  Linear out_proj;

  void visit(const ParamVisitor& f);
};

DenoiserParams make_denoiser_params(std::uint64_t seed, int horizon, std::size_t frames = kFrames);

/// x_t [B, N, d_m] -> x0_hat [B, N, d_m]. Throws std::out_of_range for t
/// outside [1, horizon]. `cross_weights`, when given, receives one
/// [B, N, n_cond] softmax matrix per block.
Var denoise(Tape& tape, DenoiserParams& params, Var x_t, const std::vector<int>& ts, const ConditionBatch& cond,
            std::vector<Tensor>* cross_weights = nullptr);

struct ModelOptions {
  ConditionerOptions conditioner;
  int T = 50;
  std::size_t frames = kFrames;
};

/// Conditioner and denoiser trained together.
struct Model {
  ModelOptions options;
  StaParams cond;
  DenoiserParams net;

  void visit(const ParamVisitor& f);
  void zero_grad();
};

Model make_model(std::uint64_t seed, const ModelOptions& options = {});

/// Text features of a prompt batch, computed once per trajectory.
struct EncodedText {
  Tensor c;  // [B, kMaxPromptTokens, d]
  std::vector<unsigned char> mask;
};

EncodedText encode_batch(Model& model, const std::vector<const Prompt*>& prompts);

/// Inference-time x0 prediction on a non-recording tape. A null `text`
/// selects the learned null condition.
Tensor predict_x0(Model& model, const Tensor& x_t, int t, const EncodedText* text,
                  std::vector<Tensor>* cross_weights = nullptr);

}  // namespace antlab
