#pragma once

// Time-domain equivalent source method. Virtual point sources on a sphere
// around the array radiate coefficient signals w_l(t) through free-field
// Green's functions; the coefficients are recovered with l1-regularized
// least squares (FISTA).
//
// The operator is applied matrix-free. Each (sensor, source) atom is a gain
// times a windowed-sinc delay, so A is a bank of short FIR filters; it is
// evaluated as a zero-padded circular convolution whose FFT length is large
// enough that no wrapped term lands inside the kept output window.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "sfr/error.hpp"
#include "sfr/field_core.hpp"
#include "sfr/fractional_delay.hpp"
#include "sfr/parallel.hpp"
#include "sfr/random.hpp"
#include "sfr/spectral.hpp"

namespace sfr {

inline std::vector<Vec3> fibonacci_sphere(std::size_t count, double radius, const Vec3& center) {
  if (count < 1) throw Error("need at least one point on the sphere");
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(count);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    out[i] = center + radius * Vec3(r * std::cos(phi), r * std::sin(phi), z);
  }
  return out;
}

struct EsmGeometry {
  std::size_t sources = 400;
  double radius = 0.72;
  int taps = 81;
  double c = kSpeedOfSound;
};

class EsmDictionary {
 public:
  /// coef_samples = 0 selects the signal length.
  EsmDictionary(std::vector<Vec3> sources, std::vector<Vec3> sensors, Eigen::Index samples, double fs,
                Eigen::Index coef_samples = 0, int taps = 81, double c = kSpeedOfSound, ExecPolicy exec = {})
      : sources_(std::move(sources)), sensors_(std::move(sensors)), samples_(samples),
        coef_samples_(coef_samples > 0 ? coef_samples : samples), fs_(fs), taps_(taps), c_(c), exec_(exec) {
    if (sources_.empty() || sensors_.empty()) throw Error("dictionary needs at least one source and one sensor");
    if (samples_ < 1) throw Error("dictionary needs a positive signal length");
    if (!(fs_ > 0.0) || !(c_ > 0.0)) throw Error("sample rate and speed of sound must be positive");
    build();
  }

  std::size_t source_count() const noexcept { return sources_.size(); }
  std::size_t sensor_count() const noexcept { return sensors_.size(); }
  Eigen::Index samples() const noexcept { return samples_; }
  Eigen::Index coef_samples() const noexcept { return coef_samples_; }
  double sample_rate() const noexcept { return fs_; }
  int taps() const noexcept { return taps_; }
  double c() const noexcept { return c_; }
  int fft_size() const noexcept { return fft_size_; }
  const std::vector<Vec3>& sources() const noexcept { return sources_; }
  const std::vector<Vec3>& sensors() const noexcept { return sensors_; }
  const ExecPolicy& exec() const noexcept { return exec_; }
  void set_exec(ExecPolicy e) noexcept { exec_ = e; }

  double gain(std::size_t sensor, std::size_t source) const {
    return 1.0 / (4.0 * std::numbers::pi * (sensors_[sensor] - sources_[source]).norm());
  }
  double delay(std::size_t sensor, std::size_t source) const {
    return (sensors_[sensor] - sources_[source]).norm() / c_ * fs_;
  }

  /// w: coef_samples x sources  ->  samples x sensors.
  Eigen::MatrixXd apply(const Eigen::Ref<const Eigen::MatrixXd>& w) const {
    if (w.rows() != coef_samples_ || w.cols() != static_cast<Eigen::Index>(sources_.size()))
      throw Error("coefficient matrix has the wrong shape");
    const Eigen::MatrixXcd wf = rfft_columns(w, fft_size_);
    Eigen::MatrixXcd pf(wf.rows(), static_cast<Eigen::Index>(sensors_.size()));
    parallel_chunks(transfer_.size(), exec_.threads, [&](std::size_t b, std::size_t) {
      const auto row = static_cast<Eigen::Index>(b);
      pf.row(row).noalias() = (transfer_[b] * wf.row(row).transpose()).transpose();
    });
    return irfft_columns(pf, fft_size_, samples_);
  }

  /// y: samples x sensors  ->  coef_samples x sources.
  Eigen::MatrixXd adjoint(const Eigen::Ref<const Eigen::MatrixXd>& y) const {
    if (y.rows() != samples_ || y.cols() != static_cast<Eigen::Index>(sensors_.size()))
      throw Error("residual matrix has the wrong shape");
    const Eigen::MatrixXcd yf = rfft_columns(y, fft_size_);
    Eigen::MatrixXcd gf(yf.rows(), static_cast<Eigen::Index>(sources_.size()));
    parallel_chunks(transfer_.size(), exec_.threads, [&](std::size_t b, std::size_t) {
      const auto row = static_cast<Eigen::Index>(b);
      gf.row(row).noalias() = (transfer_[b].adjoint() * yf.row(row).transpose()).transpose();
    });
    return irfft_columns(gf, fft_size_, coef_samples_);
  }

 private:
  void build() {
    std::ptrdiff_t kmin = 0, kmax = 0;
    bool first = true;
    for (std::size_t m = 0; m < sensors_.size(); ++m)
      for (std::size_t l = 0; l < sources_.size(); ++l) {
        const double d = (sensors_[m] - sources_[l]).norm();
        if (!(d > 1e-9))
          throw GeometryError("sensor " + std::to_string(m) + " coincides with equivalent source " + std::to_string(l));
        const auto f = windowed_sinc_delay(d / c_ * fs_, taps_);
        kmin = first ? f.first_lag : std::min(kmin, f.first_lag);
        kmax = first ? f.last_lag() : std::max(kmax, f.last_lag());
        first = false;
      }
    fft_size_ = next_pow2(std::max<Eigen::Index>({coef_samples_ + std::max<std::ptrdiff_t>(kmax, 0) + 1,
                                                  samples_ + std::max<std::ptrdiff_t>(-kmin, 0) + 1,
                                                  static_cast<Eigen::Index>(kmax - kmin + 2)}));
    const Eigen::Index bins = fft_size_ / 2 + 1;
    const auto ns = static_cast<Eigen::Index>(sources_.size()), nm = static_cast<Eigen::Index>(sensors_.size());
    transfer_.assign(static_cast<std::size_t>(bins), Eigen::MatrixXcd(nm, ns));
    parallel_chunks(sensors_.size(), exec_.threads, [&](std::size_t m, std::size_t) {
      Eigen::MatrixXd kernels = Eigen::MatrixXd::Zero(fft_size_, ns);
      for (std::size_t l = 0; l < sources_.size(); ++l) {
        const auto f = windowed_sinc_delay(delay(m, l), taps_);
        const double g = gain(m, l);
        for (std::size_t i = 0; i < f.taps.size(); ++i) {
          auto lag = f.first_lag + static_cast<std::ptrdiff_t>(i);
          if (lag < 0) lag += fft_size_;
          kernels(lag, static_cast<Eigen::Index>(l)) += g * f.taps[i];
        }
      }
      const Eigen::MatrixXcd spec = rfft_columns(kernels, fft_size_);
      for (Eigen::Index b = 0; b < bins; ++b) transfer_[static_cast<std::size_t>(b)].row(static_cast<Eigen::Index>(m)) = spec.row(b);
    });
  }

  std::vector<Vec3> sources_, sensors_;
  Eigen::Index samples_, coef_samples_;
  double fs_;
  int taps_;
  double c_;
  ExecPolicy exec_;
  int fft_size_ = 0;
  std::vector<Eigen::MatrixXcd> transfer_;  // per bin: sensors x sources
};

/// Sources on a sphere around the grid centroid.
inline EsmDictionary make_esm_dictionary(const SensorGrid& grid, Eigen::Index samples, double fs, const EsmGeometry& geo = {},
                                         Eigen::Index coef_samples = 0, ExecPolicy exec = {}) {
  grid.validate();
  return EsmDictionary(fibonacci_sphere(geo.sources, geo.radius, grid.centroid()), grid.positions, samples, fs,
                       coef_samples, geo.taps, geo.c, exec);
}

inline Eigen::MatrixXd esm_apply(const EsmDictionary& dict, const Eigen::Ref<const Eigen::MatrixXd>& w) { return dict.apply(w); }
inline Eigen::MatrixXd esm_adjoint(const EsmDictionary& dict, const Eigen::Ref<const Eigen::MatrixXd>& y) {
  return dict.adjoint(y);
}

/// Largest eigenvalue of A^T A by power iteration from a seeded random start.
inline double power_iteration(const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& normal_op, Eigen::Index rows,
                              Eigen::Index cols, int iterations, std::uint64_t seed = 0) {
  auto rng = rnd::stream({seed, 0x9e3779b9ULL});
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) x(i, j) = rnd::normal(rng);
  x /= x.norm();
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd y = normal_op(x);
    lambda = (x.array() * y.array()).sum();
    const double n = y.norm();
    if (!(n > 0.0)) return 0.0;
    x = y / n;
  }
  return lambda;
}

inline double soft_threshold(double x, double tau) {
  const double a = std::abs(x) - tau;
  return a > 0.0 ? std::copysign(a, x) : 0.0;
}

struct FistaConfig {
  std::optional<double> mu;    // unset: mu_relative * ||A^T p||_inf
  double mu_relative = 0.01;
  int max_iters = 500;
  int power_iters = 50;
  double power_margin = 1.02;  // power iteration underestimates the largest eigenvalue
  double tol = 1e-6;
  std::uint64_t seed = 0;

  void validate() const {
    if (mu && !(*mu > 0.0)) throw ConfigError("fista mu must be > 0");
    if (!(mu_relative > 0.0)) throw ConfigError("fista mu_relative must be > 0");
    if (max_iters < 1) throw ConfigError("fista max_iters must be >= 1");
    if (power_iters < 1) throw ConfigError("fista power_iters must be >= 1");
    if (!(power_margin >= 1.0)) throw ConfigError("fista power_margin must be >= 1");
    if (!(tol >= 0.0)) throw ConfigError("fista tol must be >= 0");
  }
};

struct FistaResult {
  Eigen::MatrixXd w;
  std::vector<double> objective;  // accepted iterates, starting with w = 0
  int iterations = 0;
  int restarts = 0;
  double lipschitz = 0.0;
  double mu = 0.0;
  bool converged = false;
};

inline double sparsity(const Eigen::MatrixXd& w) {
  const double peak = w.cwiseAbs().maxCoeff();
  if (peak == 0.0) return 1.0;
  return static_cast<double>((w.array().abs() < 1e-8 * peak).count()) / static_cast<double>(w.size());
}

/// Minimizes 0.5 ||A w - p||^2 + mu ||w||_1. A step that raises the objective
/// is rejected and momentum restarts from the last accepted iterate.
inline FistaResult fista(const EsmDictionary& dict, const Eigen::Ref<const Eigen::MatrixXd>& p, const FistaConfig& cfg = {}) {
  cfg.validate();
  if (p.rows() != dict.samples() || p.cols() != static_cast<Eigen::Index>(dict.sensor_count()))
    throw Error("observations do not match the dictionary shape");
  const Eigen::Index rows = dict.coef_samples(), cols = static_cast<Eigen::Index>(dict.source_count());
  FistaResult res;
  res.w = Eigen::MatrixXd::Zero(rows, cols);
  const double half_p2 = 0.5 * p.squaredNorm();
  res.objective.push_back(half_p2);
  const Eigen::MatrixXd atp = dict.adjoint(p);
  const double atp_inf = atp.cwiseAbs().maxCoeff();
  res.mu = cfg.mu ? *cfg.mu : cfg.mu_relative * atp_inf;
  if (atp_inf == 0.0) {
    res.converged = true;
    return res;
  }
  res.lipschitz = cfg.power_margin * power_iteration([&](const Eigen::MatrixXd& x) { return dict.adjoint(dict.apply(x)); },
                                                     rows, cols, cfg.power_iters, cfg.seed);
  if (!(res.lipschitz > 0.0)) throw NumericalError("operator norm estimate is not positive");
  const double step = 1.0 / res.lipschitz, tau = res.mu * step;

  Eigen::MatrixXd x = res.w, x_prev = res.w, y = res.w;
  Eigen::MatrixXd ax = Eigen::MatrixXd::Zero(p.rows(), p.cols()), ax_prev = ax, ay = ax;
  double t = 1.0, f_prev = half_p2;
  for (int it = 0; it < cfg.max_iters; ++it) {
    res.iterations = it + 1;
    const Eigen::MatrixXd grad = dict.adjoint(ay - p);
    Eigen::MatrixXd cand = (y - step * grad).unaryExpr([tau](double v) { return soft_threshold(v, tau); });
    Eigen::MatrixXd acand = dict.apply(cand);
    const double f = 0.5 * (acand - p).squaredNorm() + res.mu * cand.cwiseAbs().sum();
    if (!std::isfinite(f)) throw NumericalError("fista objective became non-finite at iteration " + std::to_string(it));
    if (f > f_prev) {
      ++res.restarts;
      t = 1.0;
      y = x;
      ay = ax;
      if (res.restarts > cfg.max_iters / 2 + 1) break;
      continue;
    }
    x_prev = std::move(x);
    ax_prev = std::move(ax);
    x = std::move(cand);
    ax = std::move(acand);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    t = t_next;
    y = x + beta * (x - x_prev);
    ay = ax + beta * (ax - ax_prev);
    res.objective.push_back(f);
    const double change = std::abs(f_prev - f) / std::max(f_prev, 1e-300);
    f_prev = f;
    if (change < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.w = std::move(x);
  return res;
}

inline FistaResult fista(const EsmDictionary& dict, const PressureField& obs, const FistaConfig& cfg = {}) {
  obs.validate();
  return fista(dict, obs.data, cfg);
}

/// Evaluates the atom sum at arbitrary positions with the dictionary's sources.
inline PressureField tesm_reconstruct(const EsmDictionary& dict, const Eigen::Ref<const Eigen::MatrixXd>& w,
                                      const SensorGrid& queries, double t0 = 0.0) {
  queries.validate();
  for (std::size_t q = 0; q < queries.count(); ++q)
    for (std::size_t l = 0; l < dict.source_count(); ++l)
      if (!((queries.positions[q] - dict.sources()[l]).norm() > 1e-9))
        throw GeometryError("query " + std::to_string(q) + " coincides with equivalent source " + std::to_string(l));
  const EsmDictionary at(dict.sources(), queries.positions, dict.samples(), dict.sample_rate(), dict.coef_samples(),
                         dict.taps(), dict.c(), dict.exec());
  PressureField f;
  f.grid = queries;
  f.sample_rate = dict.sample_rate();
  f.t0 = t0;
  f.data = at.apply(w);
  return f;
}

}  // namespace sfr
