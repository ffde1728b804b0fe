// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "antlab/tensor.hpp"

namespace antlab {

inline constexpr std::size_t kFrames = 64;
inline constexpr std::size_t kMotionDim = 2;
inline constexpr std::size_t kMaxPromptTokens = 6;

enum class TokenCategory { kShape, kDirection, kSpeed, kAmplitude, kModifier };

/// Fixed token vocabulary; a token's id is its index here.
const std::vector<std::string>& vocabulary();
/// Throws std::invalid_argument for tokens outside the vocabulary.
std::size_t token_id(std::string_view token);
TokenCategory token_category(std::string_view token);

struct Prompt {
  std::vector<std::string> tokens;
};

/// Throws std::invalid_argument on unknown tokens, a missing shape token,
/// repeated categories or more than kMaxPromptTokens tokens.
void validate_prompt(const Prompt& prompt);
std::string prompt_text(const Prompt& prompt);  // tokens joined by single spaces

/// Frame n is A * (cos(phase + dir * omega * n), sin(phase + dir * omega * n)).
struct MotionParams {
  double amplitude = 0.0;
  double omega = 0.0;  // radians per frame, >= 0
  double phase = 0.0;  // radians in (-pi, pi]
  double direction = 1.0;  // +1 or -1
};

struct Motion {
  Tensor frames;  // [kFrames, kMotionDim]
  MotionParams params;
};

struct Pair {
  Prompt prompt;
  Motion motion;
};

Tensor synthesize_frames(const MotionParams& params, std::size_t n_frames = kFrames);

/// Attribute values a prompt selects, with the defaults right/slow/small for
/// missing categories. The phase is left at 0.
MotionParams prompt_params(const Prompt& prompt);

/// Deterministic in `seed`. Without a prompt the attributes are drawn from the
/// seed as well; the phase is always a seeded uniform draw in (-pi, pi].
Pair generate_pair(std::uint64_t seed, const std::optional<Prompt>& prompt = std::nullopt);

struct FitResult {
  MotionParams params;
  bool degenerate = false;
};

/// Least-squares fit of the circular-motion model: the frequency maximizes the
/// periodogram of x + iy (coarse grid then Newton), amplitude and phase come
/// from the projection onto that frequency. Needs at least 8 frames.
FitResult fit_params(const Tensor& frames);

struct CorpusSplit {
  std::vector<Pair> train, val, test;
};

/// Pair i uses the seed derive_seed(master, "pair", i).
std::vector<Pair> generate_corpus(std::size_t size, std::uint64_t master_seed);
/// Contiguous index ranges with ratios 0.8 : 0.15 : 0.05.
CorpusSplit split_corpus(std::vector<Pair> corpus);

/// One JSON object per line: {"tokens": [...], "params": {...}, "frames": [[x, y], ...]}.
void write_corpus_jsonl(const std::vector<Pair>& corpus, std::ostream& os);
std::vector<Pair> read_corpus_jsonl(std::istream& is);

}  // namespace antlab
