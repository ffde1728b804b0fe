// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "antlab/corpus.hpp"

namespace antlab {

using Feature = std::vector<double>;

/// Raw motion descriptor from the parametric fit:
/// amplitude, omega, sin(phase), cos(phase), direction.
constexpr std::size_t kFeatureDim = 5;
Feature raw_features(const Tensor& frames);

/// Per-dimension z-scoring frozen from a reference corpus.
struct FeatureScaler {
  std::array<double, kFeatureDim> mean{};
  std::array<double, kFeatureDim> scale{1.0, 1.0, 1.0, 1.0, 1.0};

  Feature apply(const Feature& raw) const;
  Feature operator()(const Tensor& frames) const { return apply(raw_features(frames)); }
};

/// Sample mean and standard deviation of each raw feature over the corpus; a
/// dimension with zero spread keeps scale 1.
FeatureScaler fit_scaler(const std::vector<Pair>& corpus);

struct FrechetResult {
  double value = 0.0;
  bool ridged = false;  // a covariance was rank deficient and got 1e-6 I
};

/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)) of Gaussian fits with
/// unbiased covariances. The trace of the root is taken through the symmetric
/// product S_a^(1/2) S_b S_a^(1/2); eigenvalues down to -1e-10 (relative) are
/// clipped to zero, anything more negative throws std::runtime_error.
FrechetResult frechet_distance(const std::vector<Feature>& a, const std::vector<Feature>& b);

constexpr std::size_t kRPrecisionPool = 32;

struct Candidate {
  Feature feature;
  bool truth = false;
};

struct RankHits {
  bool top1 = false, top2 = false, top3 = false;
};

/// Ranks candidates by Euclidean distance to `generated`. Ties go to the
/// lower candidate index. Throws std::invalid_argument unless there are
/// exactly 32 candidates with one truth marker.
RankHits r_precision(const Feature& generated, const std::vector<Candidate>& candidates);

/// Mean Euclidean distance over `n_pairs` seeded uniform pairs of distinct
/// indices. Throws std::invalid_argument for fewer than 2 features.
double diversity(const std::vector<Feature>& features, std::size_t n_pairs, std::uint64_t seed);

constexpr std::size_t kMultimodalitySamples = 20;

/// Per prompt, the mean distance of the 10 disjoint pairs (0,1), (2,3), ...;
/// averaged over prompts. Throws std::invalid_argument unless every group
/// holds exactly 20 samples.
double multimodality(const std::vector<std::vector<Feature>>& groups);

/// The 72 prompts with pairwise distinct attribute values: shape x direction x
/// speed x amplitude x {no modifier, smooth, jerky}.
std::vector<Prompt> canonical_prompts();

/// Feature of the noiseless generator output for `prompt`, averaged over 16
/// equispaced phases so the phase coordinates sit at their expectation.
Feature prompt_prototype(const Prompt& prompt, const FeatureScaler& scaler);

/// Two-sided exact binomial sign test on the nonzero differences.
double sign_test_p(const std::vector<double>& differences);

}  // namespace antlab
