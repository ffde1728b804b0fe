// SPDX-License-Identifier: Apache-2.0
#include "antlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "antlab/io.hpp"
#include "antlab/rng.hpp"

namespace antlab {

namespace {

using cplx = std::complex<double>;

bool power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_inplace(std::vector<cplx>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const cplx wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cplx u = a[i + k], v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

double rel(double empirical, double analytic) {
  if (analytic == 0.0) return std::abs(empirical);
  return std::abs(empirical - analytic) / std::abs(analytic);
}

std::string fmt_pct(double v) {
  std::ostringstream os;
  os.precision(3);
  os << 100.0 * v << "%";
  return os.str();
}

}  // namespace

std::vector<cplx> dft(const std::vector<cplx>& x) {
  const std::size_t n = x.size();
  if (power_of_two(n)) {
    std::vector<cplx> a = x;
    fft_inplace(a);
    return a;
  }
  std::vector<cplx> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cplx s(0.0, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      // (k j) mod n keeps the angle argument small and exact.
      const double ang = -2.0 * std::numbers::pi * static_cast<double>((k * j) % n) / static_cast<double>(n);
      s += x[j] * cplx(std::cos(ang), std::sin(ang));
    }
    out[k] = s;
  }
  return out;
}

Spectrum psd(const std::vector<double>& signal) {
  const std::size_t n = signal.size();
  if (n < 2) throw std::invalid_argument("psd: need at least 2 samples, got " + std::to_string(n));
  const auto X = dft(std::vector<cplx>(signal.begin(), signal.end()));
  Spectrum s;
  s.freq.resize(n);
  s.power.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    s.freq[k] = k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
    s.power[k] = std::norm(X[k]) / static_cast<double>(n);
  }
  return s;
}

void BandSplit::validate(std::size_t n) const {
  if (low_lo > low_hi || high_lo > high_hi) throw std::invalid_argument("band split: empty band");
  if (high_lo <= low_hi) throw std::invalid_argument("band split: high band must start above the low band");
  if (high_hi > n / 2) throw std::invalid_argument("band split: high band exceeds the Nyquist bin");
}

void SpectralLaw::validate() const {
  if (!(K > 0.0 && alpha > 0.0 && sigma > 0.0 && gamma > 0.0))
    throw std::invalid_argument("spectral law: K, alpha, sigma and gamma must be positive");
}

std::string CheckReport::csv() const {
  CsvTable t({"bin", "analytic", "empirical", "rel_err"});
  for (const auto& b : bins) t.row({fmt_real(b.freq), fmt_real(b.analytic), fmt_real(b.empirical), fmt_real(b.rel_err)});
  return t.str();
}

std::string CheckReport::line() const {
  const char* tag = inconclusive ? "INCONCLUSIVE" : passed ? "PASS" : "FAIL";
  return std::string(tag) + " " + name + ": " + summary;
}

CheckReport verify_psd_theorem(const std::vector<double>& m0, double sigma, double t, std::size_t n_draws,
                               std::uint64_t seed, double tol) {
  if (n_draws < 100) throw std::invalid_argument("verify_psd_theorem: need at least 100 draws");
  if (!(sigma >= 0.0) || !(t >= 0.0)) throw std::invalid_argument("verify_psd_theorem: sigma and t must be >= 0");
  const std::size_t n = m0.size();
  const Spectrum clean = psd(m0);
  const double floor = sigma * sigma * t;
  const double scale = sigma * std::sqrt(t);
  std::vector<double> mean(n, 0.0);
  std::vector<double> noised(n);
  for (std::size_t d = 0; d < n_draws; ++d) {
    Rng rng(derive_seed(seed, "psd-draw", d));
    for (std::size_t i = 0; i < n; ++i) noised[i] = m0[i] + scale * normal(rng);
    const Spectrum s = psd(noised);
    for (std::size_t k = 0; k < n; ++k) mean[k] += s.power[k];
  }
  CheckReport rep;
  rep.name = "psd-under-noise";
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    BinCheck b{clean.freq[k], clean.power[k] + floor, mean[k] / static_cast<double>(n_draws), 0.0};
    b.rel_err = rel(b.empirical, b.analytic);
    worst = std::max(worst, b.rel_err);
    rep.bins.push_back(b);
  }
  rep.passed = worst < tol;
  rep.summary = "max relative deviation " + fmt_pct(worst) + " over " + std::to_string(n) + " bins (tolerance " +
                fmt_pct(tol) + ", " + std::to_string(n_draws) + " draws)";
  return rep;
}

double crossing_time(double omega, const SpectralLaw& law) {
  law.validate();
  if (omega == 0.0) throw std::domain_error("crossing_time: the power law is undefined at zero frequency");
  return law.K / (law.sigma * law.sigma * law.gamma) * std::pow(std::abs(omega), -law.alpha);
}

std::vector<double> power_law_signal(std::size_t n, const SpectralLaw& law, std::uint64_t seed) {
  law.validate();
  if (n < 2) throw std::invalid_argument("power_law_signal: need at least 2 samples");
  Rng rng(derive_seed(seed, "power-law-phase"));
  std::vector<cplx> X(n, cplx(0.0, 0.0));
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double mag = std::sqrt(static_cast<double>(n) * law.K * std::pow(static_cast<double>(k), -law.alpha));
    if (2 * k == n) {
      X[k] = uniform(rng) < 0.5 ? mag : -mag;  // Nyquist bin must be real
    } else {
      X[k] = std::polar(mag, 2.0 * std::numbers::pi * uniform(rng));
      X[n - k] = std::conj(X[k]);
    }
  }
  // Inverse DFT via the forward transform of the conjugate.
  for (auto& v : X) v = std::conj(v);
  const auto x = dft(X);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i].real() / static_cast<double>(n);
  return out;
}

CheckReport verify_crossing_empirically(const SpectralLaw& law, const CrossingOptions& options, std::size_t n_draws,
                                        std::uint64_t seed) {
  law.validate();
  const std::size_t n = options.n;
  if (n < 4) throw std::invalid_argument("verify_crossing_empirically: need n >= 4");
  if (n_draws < 100) throw std::invalid_argument("verify_crossing_empirically: need at least 100 draws");
  if (!(options.grid_ratio > 1.0)) throw std::invalid_argument("verify_crossing_empirically: grid_ratio must exceed 1");
  std::vector<std::size_t> bins = options.bins;
  if (bins.empty())
    for (std::size_t k = 1; k < n / 2; ++k) bins.push_back(k);
  std::sort(bins.begin(), bins.end());
  for (std::size_t k : bins)
    if (k == 0 || k >= n / 2)
      throw std::invalid_argument("verify_crossing_empirically: bin " + std::to_string(k) + " outside 1.." +
                                  std::to_string(n / 2 - 1));

  double t_min = options.t_min, t_max = options.t_max;
  if (t_min <= 0.0) t_min = 0.5 * crossing_time(static_cast<double>(bins.back()), law);
  if (t_max <= 0.0) t_max = 2.0 * crossing_time(static_cast<double>(bins.front()), law);
  if (!(t_max > t_min)) throw std::invalid_argument("verify_crossing_empirically: empty time grid");
  std::vector<double> grid;
  for (double t = t_min; t <= t_max * (1.0 + 1e-12); t *= options.grid_ratio) grid.push_back(t);

  const Spectrum clean = psd(power_law_signal(n, law, seed));

  // energy[j][k]: summed |DFT of accumulated noise|^2 / N at grid time j.
  std::vector<std::vector<double>> energy(grid.size(), std::vector<double>(n / 2, 0.0));
  std::vector<cplx> w(n), spec(n);
  for (std::size_t d = 0; d < n_draws; ++d) {
    Rng rng(derive_seed(seed, "crossing-draw", d));
    std::fill(w.begin(), w.end(), cplx(0.0, 0.0));
    double prev = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double step = law.sigma * std::sqrt(grid[j] - prev);
      prev = grid[j];
      for (auto& v : w) v += step * normal(rng);
      spec = w;
      fft_inplace(spec);
      for (std::size_t k = 0; k < n / 2; ++k) energy[j][k] += std::norm(spec[k]);
    }
  }
  const double norm = static_cast<double>(n_draws) * static_cast<double>(n);

  CheckReport rep;
  rep.name = "snr-crossing";
  bool mid_ok = true, monotone = true, edge = false;
  double worst_mid = 0.0, last = std::numeric_limits<double>::infinity();
  for (std::size_t k : bins) {
    std::size_t j = 0;
    while (j < grid.size() && clean.power[k] / (energy[j][k] / norm) > law.gamma) ++j;
    BinCheck b;
    b.freq = static_cast<double>(k);
    b.analytic = crossing_time(b.freq, law);
    if (j == 0 || j == grid.size()) {
      edge = true;
      b.empirical = j == 0 ? grid.front() : std::numeric_limits<double>::infinity();
    } else {
      b.empirical = grid[j];
    }
    b.rel_err = rel(b.empirical, b.analytic);
    if (k >= options.mid_lo && k <= options.mid_hi) {
      worst_mid = std::max(worst_mid, b.rel_err);
      mid_ok = mid_ok && b.rel_err <= options.tol;
    }
    monotone = monotone && b.empirical <= last;
    last = b.empirical;
    rep.bins.push_back(b);
  }
  rep.inconclusive = edge;
  rep.passed = !edge && mid_ok && monotone;
  rep.summary = "mid-band worst relative error " + fmt_pct(worst_mid) + " (tolerance " + fmt_pct(options.tol) +
                "), crossing times " + (monotone ? "non-increasing" : "NOT monotone") + " in |w|, grid of " +
                std::to_string(grid.size()) + " times" + (edge ? ", some crossing at a grid edge" : "");
  return rep;
}

namespace {

// Cross-fitted squared residuals of regressing y on [1, X]: coefficients from
// one half predict the other. Sets *ridged when the normal equations needed
// regularization.
std::vector<double> crossfit_sq_residuals(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, bool* ridged) {
  const Eigen::Index n = X.rows(), p = X.cols() + 1;
  Eigen::MatrixXd A(n, p);
  A.col(0).setOnes();
  A.rightCols(p - 1) = X;
  std::vector<double> out(static_cast<std::size_t>(n));
  const Eigen::Index half = n / 2;
  for (int fold = 0; fold < 2; ++fold) {
    const Eigen::Index fit_lo = fold == 0 ? 0 : half, fit_n = fold == 0 ? half : n - half;
    const Eigen::Index ev_lo = fold == 0 ? half : 0, ev_n = fold == 0 ? n - half : half;
    const Eigen::MatrixXd Af = A.middleRows(fit_lo, fit_n);
    Eigen::MatrixXd G = Af.transpose() * Af;
    const Eigen::VectorXd rhs = Af.transpose() * y.segment(fit_lo, fit_n);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
    lu.setThreshold(1e-10);
    if (lu.rank() < p) {
      *ridged = true;
      G += 1e-9 * static_cast<double>(fit_n) * Eigen::MatrixXd::Identity(p, p);
    }
    const Eigen::VectorXd beta = G.ldlt().solve(rhs);
    const Eigen::VectorXd r = y.segment(ev_lo, ev_n) - A.middleRows(ev_lo, ev_n) * beta;
    for (Eigen::Index i = 0; i < ev_n; ++i) out[static_cast<std::size_t>(ev_lo + i)] = r(i) * r(i);
  }
  return out;
}

}  // namespace

DependencyReport verify_low_high_dependency(std::size_t n_draws, double rho, double noise_var, std::uint64_t seed) {
  if (n_draws < 1000) throw std::invalid_argument("verify_low_high_dependency: need at least 1000 draws");
  if (!(rho > -1.0 && rho < 1.0)) throw std::invalid_argument("verify_low_high_dependency: rho must lie in (-1, 1)");
  if (!(noise_var >= 0.0)) throw std::invalid_argument("verify_low_high_dependency: noise_var must be >= 0");
  const auto n = static_cast<Eigen::Index>(n_draws);
  Eigen::VectorXd low(n), high(n), y_low(n), y_high(n);
  Rng rng(derive_seed(seed, "dependency-toy"));
  const double noise_sd = std::sqrt(noise_var), ortho = std::sqrt(1.0 - rho * rho);
  for (Eigen::Index i = 0; i < n; ++i) {
    low(i) = normal(rng);
    high(i) = rho * low(i) + ortho * normal(rng);
    y_low(i) = low(i) + noise_sd * normal(rng);
    y_high(i) = high(i) + noise_sd * normal(rng);
  }
  Eigen::MatrixXd noised(n, 2), with_low(n, 3);
  noised << y_low, y_high;
  with_low << y_low, y_high, low;

  DependencyReport rep;
  const auto r_noised = crossfit_sq_residuals(noised, high, &rep.regularized);
  const auto r_low = crossfit_sq_residuals(with_low, high, &rep.regularized);
  std::vector<double> diff(n_draws);
  for (std::size_t i = 0; i < n_draws; ++i) {
    rep.rhs += r_noised[i];
    rep.lhs += r_low[i];
    diff[i] = r_noised[i] - r_low[i];
  }
  const double nd = static_cast<double>(n_draws);
  rep.rhs /= nd;
  rep.lhs /= nd;
  rep.margin = rep.rhs - rep.lhs;
  double ss = 0.0;
  for (double d : diff) ss += (d - rep.margin) * (d - rep.margin);
  rep.stderr_margin = std::sqrt(ss / (nd - 1.0)) / std::sqrt(nd);
  return rep;
}

std::string BandCurves::csv() const {
  CsvTable t({"step", "low_rel_err", "high_rel_err"});
  for (std::size_t s = 0; s < low_rel_err.size(); ++s)
    t.row({std::to_string(s + 1), fmt_real(low_rel_err[s]), fmt_real(high_rel_err[s])});
  return t.str();
}

namespace {

// Band energy per sample of x [B, N, d]: one-sided psd of every channel
// summed over bins lo..hi.
std::vector<double> band_energy(const Tensor& x, std::size_t lo, std::size_t hi) {
  const std::size_t B = x.dim(0), N = x.dim(1), D = x.dim(2);
  std::vector<double> out(B, 0.0);
  std::vector<double> chan(N);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < D; ++c) {
      for (std::size_t i = 0; i < N; ++i) chan[i] = x[(b * N + i) * D + c];
      const Spectrum s = psd(chan);
      for (std::size_t k = lo; k <= hi; ++k) out[b] += s.power[k];
    }
  return out;
}

std::size_t enter_step(const std::vector<double>& err, double delta) {
  std::size_t enter = err.size() + 1;  // never converged
  for (std::size_t s = err.size(); s-- > 0;) {
    if (err[s] > delta) break;
    enter = s + 1;
  }
  return enter;
}

}  // namespace

BandCurves band_recovery_curves(const std::vector<Tensor>& x0_track, const Tensor& final_motions,
                                const BandSplit& split, double delta) {
  if (x0_track.empty()) throw std::invalid_argument("band_recovery_curves: empty trajectory");
  if (final_motions.rank() != 3) throw ShapeError("band_recovery_curves: motions must be [B, N, d]");
  split.validate(final_motions.dim(1));
  for (const auto& x : x0_track)
    if (x.shape() != final_motions.shape())
      throw ShapeError("band_recovery_curves: x0 estimate " + shape_str(x.shape()) + " vs final " +
                       shape_str(final_motions.shape()));
  const auto fin_low = band_energy(final_motions, split.low_lo, split.low_hi);
  const auto fin_high = band_energy(final_motions, split.high_lo, split.high_hi);
  BandCurves c;
  for (std::size_t b = 0; b < fin_low.size(); ++b) {
    c.low_samples += fin_low[b] > 0.0;
    c.high_samples += fin_high[b] > 0.0;
  }
  c.low_flagged = c.low_samples < fin_low.size();
  c.high_flagged = c.high_samples < fin_high.size();
  auto mean_rel = [](const std::vector<double>& e, const std::vector<double>& fin, std::size_t kept) {
    if (kept == 0) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (std::size_t b = 0; b < e.size(); ++b)
      if (fin[b] > 0.0) s += std::abs(e[b] - fin[b]) / fin[b];
    return s / static_cast<double>(kept);
  };
  for (const auto& x : x0_track) {
    c.low_rel_err.push_back(mean_rel(band_energy(x, split.low_lo, split.low_hi), fin_low, c.low_samples));
    c.high_rel_err.push_back(mean_rel(band_energy(x, split.high_lo, split.high_hi), fin_high, c.high_samples));
  }
  c.low_enter = enter_step(c.low_rel_err, delta);
  c.high_enter = enter_step(c.high_rel_err, delta);
  return c;
}

}  // namespace antlab
