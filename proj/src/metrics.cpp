// SPDX-License-Identifier: Apache-2.0
#include "antlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "antlab/rng.hpp"

namespace antlab {

Feature raw_features(const Tensor& frames) {
  const MotionParams p = fit_params(frames).params;
  return {p.amplitude, p.omega, std::sin(p.phase), std::cos(p.phase), p.direction};
}

Feature FeatureScaler::apply(const Feature& raw) const {
  if (raw.size() != kFeatureDim) throw std::invalid_argument("feature scaler: wrong feature size");
  Feature out(kFeatureDim);
  for (std::size_t i = 0; i < kFeatureDim; ++i) out[i] = (raw[i] - mean[i]) / scale[i];
  return out;
}

FeatureScaler fit_scaler(const std::vector<Pair>& corpus) {
  if (corpus.size() < 2) throw std::invalid_argument("fit_scaler: need at least 2 motions");
  std::vector<Feature> raw;
  for (const auto& p : corpus) raw.push_back(raw_features(p.motion.frames));
  FeatureScaler s;
  const double n = static_cast<double>(raw.size());
  for (std::size_t i = 0; i < kFeatureDim; ++i) {
    double m = 0.0;
    for (const auto& f : raw) m += f[i];
    m /= n;
    double ss = 0.0;
    for (const auto& f : raw) ss += (f[i] - m) * (f[i] - m);
    const double sd = std::sqrt(ss / (n - 1.0));
    s.mean[i] = m;
    s.scale[i] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

namespace {

Eigen::MatrixXd to_matrix(const std::vector<Feature>& rows, std::size_t dim) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != dim) throw std::invalid_argument("frechet_distance: ragged feature set");
    for (std::size_t c = 0; c < dim; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

// Eigenvalues clipped at zero within a relative 1e-10 band.
Eigen::VectorXd clipped_eigenvalues(const Eigen::VectorXd& ev, const char* what) {
  const double tol = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  Eigen::VectorXd out = ev;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol) throw std::runtime_error(std::string("frechet_distance: ") + what + " is not positive semidefinite");
    out(i) = std::max(ev(i), 0.0);
  }
  return out;
}

}  // namespace

FrechetResult frechet_distance(const std::vector<Feature>& a, const std::vector<Feature>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("frechet_distance: empty feature set");
  const std::size_t dim = a[0].size();
  if (a.size() < dim + 1 || b.size() < dim + 1)
    throw std::invalid_argument("frechet_distance: each set needs at least dim + 1 = " + std::to_string(dim + 1) +
                                " samples");
  FrechetResult res;
  auto moments = [&](const std::vector<Feature>& rows, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    const Eigen::MatrixXd m = to_matrix(rows, dim);
    mu = m.colwise().mean().transpose();
    const Eigen::MatrixXd centered = m.rowwise() - mu.transpose();
    cov = centered.transpose() * centered / static_cast<double>(rows.size() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const double top = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() <= 1e-12 * top) {
      cov += 1e-6 * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
      res.ridged = true;
    }
  };
  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd cov_a, cov_b;
  moments(a, mu_a, cov_a);
  moments(b, mu_b, cov_b);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(cov_a);
  const Eigen::VectorXd la = clipped_eigenvalues(ea.eigenvalues(), "covariance");
  const Eigen::MatrixXd root_a = ea.eigenvectors() * la.cwiseSqrt().asDiagonal() * ea.eigenvectors().transpose();
  Eigen::MatrixXd inner = root_a * cov_b * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ei(inner, Eigen::EigenvaluesOnly);
  const double tr_root = clipped_eigenvalues(ei.eigenvalues(), "covariance product").cwiseSqrt().sum();

  const double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_root;
  res.value = std::max(value, 0.0);
  return res;
}

RankHits r_precision(const Feature& generated, const std::vector<Candidate>& candidates) {
  if (candidates.size() != kRPrecisionPool)
    throw std::invalid_argument("r_precision: need exactly 32 candidates, got " + std::to_string(candidates.size()));
  std::size_t truth = candidates.size(), markers = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i].truth) {
      truth = i;
      ++markers;
    }
  if (markers != 1)
    throw std::invalid_argument("r_precision: need exactly one ground-truth candidate, got " + std::to_string(markers));
  auto dist = [&](const Feature& f) {
    if (f.size() != generated.size()) throw std::invalid_argument("r_precision: feature size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += (f[i] - generated[i]) * (f[i] - generated[i]);
    return std::sqrt(s);
  };
  const double d_truth = dist(candidates[truth].feature);
  std::size_t rank = 0;  // candidates ranked ahead of the truth
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i == truth) continue;
    const double d = dist(candidates[i].feature);
    if (d < d_truth || (d == d_truth && i < truth)) ++rank;
  }
  return {rank < 1, rank < 2, rank < 3};
}

namespace {
double euclid(const Feature& a, const Feature& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}
}  // namespace

double diversity(const std::vector<Feature>& features, std::size_t n_pairs, std::uint64_t seed) {
  if (features.size() < 2) throw std::invalid_argument("diversity: need at least 2 motions");
  if (n_pairs == 0) throw std::invalid_argument("diversity: need at least one pair");
  Rng rng(derive_seed(seed, "diversity-pairs"));
  double total = 0.0;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const std::size_t i = uniform_index(rng, 0, features.size() - 1);
    std::size_t j = uniform_index(rng, 0, features.size() - 2);
    if (j >= i) ++j;  // uniform over indices other than i
    total += euclid(features[i], features[j]);
  }
  return total / static_cast<double>(n_pairs);
}

double multimodality(const std::vector<std::vector<Feature>>& groups) {
  if (groups.empty()) throw std::invalid_argument("multimodality: no prompts");
  double total = 0.0;
  for (const auto& g : groups) {
    if (g.size() != kMultimodalitySamples)
      throw std::invalid_argument("multimodality: need exactly 20 samples per prompt, got " + std::to_string(g.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); i += 2) s += euclid(g[i], g[i + 1]);
    total += s / static_cast<double>(g.size() / 2);
  }
  return total / static_cast<double>(groups.size());
}

std::vector<Prompt> canonical_prompts() {
  std::vector<Prompt> out;
  for (const char* shape : {"sine", "ramp", "arc"})
    for (const char* dir : {"left", "right"})
      for (const char* speed : {"slow", "fast"})
        for (const char* amp : {"small", "large"})
          for (const char* mod : {"", "smooth", "jerky"}) {
            Prompt p{{shape, dir, speed, amp}};
            if (*mod) p.tokens.emplace_back(mod);
            out.push_back(std::move(p));
          }
  return out;
}

Feature prompt_prototype(const Prompt& prompt, const FeatureScaler& scaler) {
  constexpr int kPhases = 16;
  Feature acc(kFeatureDim, 0.0);
  MotionParams p = prompt_params(prompt);
  for (int k = 0; k < kPhases; ++k) {
    p.phase = -std::numbers::pi + 2.0 * std::numbers::pi * (k + 0.5) / kPhases;
    const Feature f = scaler(synthesize_frames(p));
    for (std::size_t i = 0; i < kFeatureDim; ++i) acc[i] += f[i] / kPhases;
  }
  return acc;
}

double sign_test_p(const std::vector<double>& differences) {
  std::size_t pos = 0, n = 0;
  for (double d : differences) {
    if (d == 0.0) continue;
    ++n;
    pos += d > 0.0;
  }
  if (n == 0) return 1.0;
  const std::size_t k = std::min(pos, n - pos);
  // P(X <= k) for X ~ Bin(n, 1/2), summed in log space.
  double tail = 0.0;
  for (std::size_t i = 0; i <= k; ++i)
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  return std::min(1.0, 2.0 * tail);
}

}  // namespace antlab
