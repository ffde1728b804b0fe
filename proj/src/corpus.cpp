// SPDX-License-Identifier: Apache-2.0
#include "antlab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "antlab/rng.hpp"

namespace antlab {

namespace {

struct TokenInfo {
  const char* name;
  TokenCategory category;
  double value;  // cycles per sequence, speed factor, amplitude, or amplitude factor
};

// direction values are the sign of rotation
constexpr TokenInfo kTokens[] = {
    {"sine", TokenCategory::kShape, 3.0},       {"ramp", TokenCategory::kShape, 1.25},
    {"arc", TokenCategory::kShape, 0.5},        {"left", TokenCategory::kDirection, -1.0},
    {"right", TokenCategory::kDirection, 1.0},  {"slow", TokenCategory::kSpeed, 1.0},
    {"fast", TokenCategory::kSpeed, 1.6},       {"small", TokenCategory::kAmplitude, 0.5},
    {"large", TokenCategory::kAmplitude, 1.5},  {"smooth", TokenCategory::kModifier, 0.75},
    {"jerky", TokenCategory::kModifier, 1.35},
};

const TokenInfo& info(std::string_view token) {
  for (const auto& t : kTokens)
    if (token == t.name) return t;
  throw std::invalid_argument("unknown token '" + std::string(token) + "'");
}

double wrap_phase(double p) {
  p = std::remainder(p, 2.0 * std::numbers::pi);
  return p <= -std::numbers::pi ? p + 2.0 * std::numbers::pi : p;
}

const char* pick(Rng& rng, TokenCategory cat) {
  std::vector<const char*> options;
  for (const auto& t : kTokens)
    if (t.category == cat) options.push_back(t.name);
  return options[uniform_index(rng, 0, options.size() - 1)];
}

}  // namespace

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v;
    for (const auto& t : kTokens) v.emplace_back(t.name);
    return v;
  }();
  return vocab;
}

std::size_t token_id(std::string_view token) {
  const auto& vocab = vocabulary();
  const auto it = std::find(vocab.begin(), vocab.end(), token);
  if (it == vocab.end()) throw std::invalid_argument("unknown token '" + std::string(token) + "'");
  return static_cast<std::size_t>(it - vocab.begin());
}

TokenCategory token_category(std::string_view token) { return info(token).category; }

void validate_prompt(const Prompt& prompt) {
  if (prompt.tokens.size() > kMaxPromptTokens)
    throw std::invalid_argument("prompt has " + std::to_string(prompt.tokens.size()) + " tokens, limit is " +
                                std::to_string(kMaxPromptTokens));
  bool seen[5] = {};
  for (const auto& tok : prompt.tokens) {
    const auto cat = static_cast<std::size_t>(info(tok).category);
    if (seen[cat]) throw std::invalid_argument("prompt repeats the category of token '" + tok + "'");
    seen[cat] = true;
  }
  if (!seen[static_cast<std::size_t>(TokenCategory::kShape)])
    throw std::invalid_argument("prompt has no shape token");
}

std::string prompt_text(const Prompt& prompt) {
  std::string s;
  for (const auto& tok : prompt.tokens) {
    if (!s.empty()) s += ' ';
    s += tok;
  }
  return s;
}

Tensor synthesize_frames(const MotionParams& p, std::size_t n_frames) {
  Tensor frames({n_frames, kMotionDim});
  for (std::size_t n = 0; n < n_frames; ++n) {
    const double angle = p.phase + p.direction * p.omega * static_cast<double>(n);
    frames[2 * n] = p.amplitude * std::cos(angle);
    frames[2 * n + 1] = p.amplitude * std::sin(angle);
  }
  return frames;
}

MotionParams prompt_params(const Prompt& prompt) {
  validate_prompt(prompt);
  double cycles = 0.0, speed = 1.0, amplitude = 0.5, modifier = 1.0, direction = 1.0;
  for (const auto& tok : prompt.tokens) {
    const auto& t = info(tok);
    switch (t.category) {
      case TokenCategory::kShape: cycles = t.value; break;
      case TokenCategory::kDirection: direction = t.value; break;
      case TokenCategory::kSpeed: speed = t.value; break;
      case TokenCategory::kAmplitude: amplitude = t.value; break;
      case TokenCategory::kModifier: modifier = t.value; break;
    }
  }
  MotionParams p;
  p.amplitude = amplitude * modifier;
  p.omega = 2.0 * std::numbers::pi * cycles * speed / static_cast<double>(kFrames);
  p.direction = direction;
  return p;
}

Pair generate_pair(std::uint64_t seed, const std::optional<Prompt>& prompt) {
  Rng rng = make_rng(seed, "pair");
  Pair pair;
  if (prompt) {
    pair.prompt = *prompt;
  } else {
    pair.prompt.tokens.emplace_back(pick(rng, TokenCategory::kShape));
    std::vector<std::string> rest = {pick(rng, TokenCategory::kDirection), pick(rng, TokenCategory::kSpeed),
                                     pick(rng, TokenCategory::kAmplitude)};
    if (uniform(rng) < 2.0 / 3.0) rest.emplace_back(pick(rng, TokenCategory::kModifier));
    for (std::size_t i = rest.size(); i > 1; --i) std::swap(rest[i - 1], rest[uniform_index(rng, 0, i - 1)]);
    pair.prompt.tokens.insert(pair.prompt.tokens.end(), rest.begin(), rest.end());
  }
  MotionParams p = prompt_params(pair.prompt);
  Rng phase_rng = make_rng(seed, "phase");
  p.phase = wrap_phase(std::numbers::pi * (2.0 * uniform(phase_rng) - 1.0));
  pair.motion.params = p;
  pair.motion.frames = synthesize_frames(p);
  return pair;
}

FitResult fit_params(const Tensor& frames) {
  if (frames.rank() != 2 || frames.dim(1) != kMotionDim)
    throw ShapeError("fit_params expects [N, 2] frames, got " + shape_str(frames.shape()));
  const std::size_t n_frames = frames.dim(0);
  if (n_frames < 8) throw std::invalid_argument("fit_params needs at least 8 frames");
  using cd = std::complex<double>;
  std::vector<cd> z(n_frames);
  bool all_zero = true;
  for (std::size_t n = 0; n < n_frames; ++n) {
    z[n] = cd(frames[2 * n], frames[2 * n + 1]);
    all_zero = all_zero && z[n] == cd(0.0, 0.0);
  }
  FitResult result;
  if (all_zero) {
    result.degenerate = true;
    result.params = MotionParams{0.0, 0.0, 0.0, 1.0};
    return result;
  }
  // S(nu) = sum_n z_n exp(-i nu n) and its first two derivatives in nu
  auto project = [&](double nu, cd* d1, cd* d2) {
    cd s(0.0), s1(0.0), s2(0.0);
    for (std::size_t n = 0; n < n_frames; ++n) {
      const double k = static_cast<double>(n);
      const cd term = z[n] * std::polar(1.0, -nu * k);
      s += term;
      s1 += cd(0.0, -k) * term;
      s2 += -k * k * term;
    }
    if (d1) *d1 = s1;
    if (d2) *d2 = s2;
    return s;
  };
  // grid spacing well under the main-lobe width 2 pi / N
  const std::size_t grid = 32 * n_frames;
  double best_nu = 0.0, best_power = -1.0;
  for (std::size_t g = 0; g < grid; ++g) {
    const double nu = -std::numbers::pi + 2.0 * std::numbers::pi * (static_cast<double>(g) + 0.5) / grid;
    const double power = std::norm(project(nu, nullptr, nullptr));
    if (power > best_power) {
      best_power = power;
      best_nu = nu;
    }
  }
  const double step_limit = 2.0 * std::numbers::pi / grid;
  double nu = best_nu;
  for (int it = 0; it < 50; ++it) {
    cd s1, s2;
    const cd s = project(nu, &s1, &s2);
    const double d1 = 2.0 * std::real(std::conj(s) * s1);
    const double d2 = 2.0 * (std::norm(s1) + std::real(std::conj(s) * s2));
    if (!(d2 < 0.0)) break;
    const double delta = std::clamp(-d1 / d2, -step_limit, step_limit);
    nu += delta;
    if (std::abs(delta) < 1e-15) break;
  }
  const cd c = project(nu, nullptr, nullptr) / static_cast<double>(n_frames);
  result.params.amplitude = std::abs(c);
  result.params.phase = wrap_phase(std::arg(c));
  result.params.omega = std::abs(nu);
  result.params.direction = nu < 0.0 ? -1.0 : 1.0;
  return result;
}

std::vector<Pair> generate_corpus(std::size_t size, std::uint64_t master_seed) {
  std::vector<Pair> corpus;
  corpus.reserve(size);
  for (std::size_t i = 0; i < size; ++i) corpus.push_back(generate_pair(derive_seed(master_seed, "pair", i)));
  return corpus;
}

CorpusSplit split_corpus(std::vector<Pair> corpus) {
  const std::size_t n = corpus.size();
  const std::size_t n_train = n * 80 / 100;
  const std::size_t n_val = n * 95 / 100 - n_train;
  CorpusSplit split;
  auto begin = std::make_move_iterator(corpus.begin());
  split.train.assign(begin, begin + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(begin + static_cast<std::ptrdiff_t>(n_train), begin + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(begin + static_cast<std::ptrdiff_t>(n_train + n_val), std::make_move_iterator(corpus.end()));
  return split;
}

void write_corpus_jsonl(const std::vector<Pair>& corpus, std::ostream& os) {
  for (const auto& pair : corpus) {
    nlohmann::json rec;
    rec["tokens"] = pair.prompt.tokens;
    const auto& p = pair.motion.params;
    rec["params"] = {{"amplitude", p.amplitude}, {"omega", p.omega}, {"phase", p.phase}, {"direction", p.direction}};
    auto frames = nlohmann::json::array();
    const Tensor& f = pair.motion.frames;
    for (std::size_t n = 0; n < f.dim(0); ++n) frames.push_back({f[2 * n], f[2 * n + 1]});
    rec["frames"] = std::move(frames);
    os << rec.dump() << '\n';
  }
}

std::vector<Pair> read_corpus_jsonl(std::istream& is) {
  std::vector<Pair> corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      Pair pair;
      pair.prompt.tokens = rec.at("tokens").get<std::vector<std::string>>();
      validate_prompt(pair.prompt);
      const auto& p = rec.at("params");
      pair.motion.params = {p.at("amplitude").get<double>(), p.at("omega").get<double>(), p.at("phase").get<double>(),
                            p.at("direction").get<double>()};
      const auto& frames = rec.at("frames");
      pair.motion.frames = Tensor({frames.size(), kMotionDim});
      for (std::size_t n = 0; n < frames.size(); ++n) {
        if (frames[n].size() != kMotionDim) throw std::invalid_argument("frame width is not 2");
        pair.motion.frames[2 * n] = frames[n][0].get<double>();
        pair.motion.frames[2 * n + 1] = frames[n][1].get<double>();
      }
      corpus.push_back(std::move(pair));
    } catch (const std::exception& e) {
      throw std::runtime_error("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

}  // namespace antlab
