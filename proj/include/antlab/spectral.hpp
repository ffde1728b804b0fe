// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "antlab/tensor.hpp"

namespace antlab {

/// Unnormalized forward DFT X_k = sum_n x_n exp(-2 pi i k n / N); radix-2 FFT
/// for powers of two, direct sum otherwise.
std::vector<std::complex<double>> dft(const std::vector<std::complex<double>>& x);

/// power[k] = |X_k|^2 / N for k = 0..N-1, so sum(power) == sum(x^2) and white
/// noise of variance v has expected power v in every bin. `freq[k]` is the
/// signed bin index (cycles per sequence).
struct Spectrum {
  std::vector<double> freq;
  std::vector<double> power;
};

/// Throws std::invalid_argument for fewer than 2 samples.
Spectrum psd(const std::vector<double>& signal);

/// Disjoint bin ranges [low_lo, low_hi] and [high_lo, high_hi] with high_lo > low_hi.
struct BandSplit {
  std::size_t low_lo = 0, low_hi = 4;
  std::size_t high_lo = 8, high_hi = 31;

  void validate(std::size_t n) const;
};

/// Power-law spectrum K |w|^-alpha, constant diffusion coefficient sigma and
/// SNR threshold gamma.
struct SpectralLaw {
  double K = 1.0;
  double alpha = 2.0;
  double sigma = 1.0;
  double gamma = 1.0;

  void validate() const;
};

struct BinCheck {
  double freq = 0.0;
  double analytic = 0.0;
  double empirical = 0.0;
  double rel_err = 0.0;
};

struct CheckReport {
  std::string name;
  bool passed = false;
  bool inconclusive = false;
  std::string summary;
  std::vector<BinCheck> bins;

  /// bin,analytic,empirical,rel_err
  std::string csv() const;
  /// "PASS <name>: <summary>" or FAIL / INCONCLUSIVE.
  std::string line() const;
};

/// Monte-Carlo mean of psd(m0 + sigma sqrt(t) xi) against psd(m0) + sigma^2 t
/// bin by bin; passes when the worst relative deviation is below `tol`.
CheckReport verify_psd_theorem(const std::vector<double>& m0, double sigma, double t, std::size_t n_draws,
                               std::uint64_t seed, double tol = 0.05);

/// (K / (sigma^2 gamma)) |w|^-alpha. Throws std::domain_error for w == 0.
double crossing_time(double omega, const SpectralLaw& law);

/// Real length-N signal whose psd is exactly K |k|^-alpha at every nonzero
/// bin, with seeded random phases and zero mean.
std::vector<double> power_law_signal(std::size_t n, const SpectralLaw& law, std::uint64_t seed);

struct CrossingOptions {
  std::size_t n = 64;
  std::vector<std::size_t> bins;        // default: 1 .. n/2 - 1
  std::size_t mid_lo = 4, mid_hi = 16;  // bins held to `tol`
  // Geometric grid; 0 places the ends at half the earliest and twice the
  // latest analytic crossing among `bins`.
  double t_min = 0.0, t_max = 0.0;
  double grid_ratio = 1.02;
  double tol = 0.10;
};

/// Noises a power-law signal with Brownian increments along a geometric time
/// grid, measures the per-bin SNR |m0_k|^2 / (Monte-Carlo noise energy) and
/// records the first grid time with SNR <= gamma. Passes when mid-band bins
/// agree with crossing_time within `tol` and measured times never increase
/// with |w|. A crossing at the first grid point, or none by t_max, marks the
/// report inconclusive.
CheckReport verify_crossing_empirically(const SpectralLaw& law, const CrossingOptions& options, std::size_t n_draws,
                                        std::uint64_t seed);

struct DependencyReport {
  double lhs = 0.0;     // E[Var(high | noised, low)] estimate
  double rhs = 0.0;     // Var(high | noised) estimate
  double margin = 0.0;  // rhs - lhs
  double stderr_margin = 0.0;
  bool regularized = false;
};

/// Toy with scalar low- and high-band coefficients jointly Gaussian (unit
/// variances, correlation `rho`) observed through additive noise of variance
/// `noise_var`. Both conditional variances are residual variances of linear
/// regressions fit with 2-fold cross-fitting; the margin's standard error is
/// the per-draw spread over sqrt(n). A singular design gets a 1e-9 ridge and
/// sets `regularized`.
DependencyReport verify_low_high_dependency(std::size_t n_draws, double rho, double noise_var, std::uint64_t seed);

struct BandCurves {
  std::vector<double> low_rel_err, high_rel_err;  // one entry per sampling step
  std::size_t low_enter = 0, high_enter = 0;      // 1-based step where the band enters its tube for good
  std::size_t low_samples = 0, high_samples = 0;  // samples whose final band energy is nonzero
  bool low_flagged = false, high_flagged = false;  // some samples excluded for zero final energy

  std::string csv() const;  // step,low_rel_err,high_rel_err
};

/// Band energies of every x0 estimate [B, N, d_m] of a sampling run relative
/// to the final sample, averaged over samples (mean of per-sample relative
/// errors, each channel's one-sided psd summed over the band's bins).
BandCurves band_recovery_curves(const std::vector<Tensor>& x0_track, const Tensor& final_motions,
                                const BandSplit& split, double delta = 0.10);

}  // namespace antlab
