// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "antlab/corpus.hpp"
#include "antlab/layers.hpp"

namespace antlab {

inline constexpr std::size_t kCondWidth = 32;
inline constexpr std::size_t kStaTokens = 8;

/// How the conditioner turns text into the tokens the denoiser attends to.
enum class ConditionerKind {
  kSta,     // time-dependent tokens from learnable queries fused with the timestep
  kStatic,  // the text features themselves, identical at every timestep
};

/// Normalizing statistic of the adaptive scaling step.
enum class SigmaMode {
  kStatistic,  // per-token standard deviation over the feature axis
  kLearned,    // learned positive per-feature scale exp(log_sigma)
};

struct ConditionerOptions {
  ConditionerKind kind = ConditionerKind::kSta;
  SigmaMode sigma_mode = SigmaMode::kStatistic;
  int horizon = 50;  // largest valid timestep
};

/// Token embedding, positional embedding and one pre-norm self-attention block.
struct TextEncoder {
  Tensor embed;  // [vocab, d]
  Tensor pos;    // [kMaxPromptTokens, d]
  Norm norm_in, norm_out;
  Attention attn;
};

struct StaParams {
  ConditionerOptions options;
  TextEncoder encoder;
  Tensor tokens;     // [K, d] learnable queries
  Linear time_proj;  // sinusoidal basis -> z_t
  Linear alpha;      // z_t -> additive shift before scaling
  Tensor gamma, beta;
  Tensor log_sigma;  // used only with SigmaMode::kLearned
  Attention cross;
  Tensor null_tokens;  // [condition_tokens(), d]

  std::size_t condition_tokens() const;
  /// Trainable tensors that take part in the configured computation.
  void visit(const ParamVisitor& f);
};

StaParams make_sta_params(std::uint64_t seed, const ConditionerOptions& options = {});

/// Single-prompt text features: c [n_tokens, d] and an all-ones mask.
struct TextFeatures {
  Tensor c;
  std::vector<unsigned char> mask;
};

/// Batched text features padded to kMaxPromptTokens; mask is [B * kMaxPromptTokens].
struct TextBatch {
  Var c;  // [B, kMaxPromptTokens, d]
  std::vector<unsigned char> mask;
};

/// Condition tokens handed to the denoiser.
struct ConditionBatch {
  Var tokens;  // [B, n, d]
  std::vector<unsigned char> mask;  // [B * n]
};

TextBatch encode_prompts(Tape& tape, StaParams& params, const std::vector<const Prompt*>& prompts);
/// Throws std::invalid_argument on unknown tokens.
TextFeatures encode_prompt(const Prompt& prompt, StaParams& params);

/// z_t for each timestep, [B, d]. Throws std::out_of_range outside [0, horizon].
Var timestep_embed(Tape& tape, StaParams& params, const std::vector<int>& ts);
Tensor timestep_embed(int t, StaParams& params);

struct StaOutput {
  Var c_hat;       // [B, K, d]
  Tensor weights;  // [B, K, kMaxPromptTokens], rows sum to 1
};

/// L_t = L + z_t; L_hat = gamma (L_t + alpha(z_t)) / (sigma + 1e-5) + beta;
/// c_hat = L_hat + CrossAttention(queries = L_hat, keys/values = text).
StaOutput sta_forward(Tape& tape, StaParams& params, const TextBatch& text, const std::vector<int>& ts);
/// Single-prompt forms on a non-recording tape.
Tensor sta_forward(const TextFeatures& text, int t, StaParams& params);
Tensor attention_weights(const TextFeatures& text, int t, StaParams& params);  // [K, n_tokens]

/// Condition for the denoiser: STA tokens, or the static text features.
ConditionBatch condition(Tape& tape, StaParams& params, const TextBatch& text, const std::vector<int>& ts);
/// The learned null tokens repeated over a batch, with an all-ones mask.
ConditionBatch null_condition(Tape& tape, StaParams& params, std::size_t batch);
Tensor null_condition(StaParams& params);

}  // namespace antlab
