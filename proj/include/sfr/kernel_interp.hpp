#pragma once

// Kernel ridge regression baseline. Each frequency bin is interpolated
// independently with the j0 kernel, then mapped back to the time domain.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "sfr/error.hpp"
#include "sfr/field_core.hpp"
#include "sfr/parallel.hpp"
#include "sfr/spectral.hpp"

namespace sfr {

/// Zero-order spherical Bessel function sin(x)/x.
inline double j0(double x) {
  if (x < 0.0) throw Error("j0 expects a non-negative argument");
  if (x < 1e-8) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

using SpectralField = Eigen::MatrixXcd;

inline SpectralField dft_forward(const Eigen::Ref<const Eigen::MatrixXd>& signals, int fft_size) {
  if (fft_size < signals.rows()) throw Error("fft size " + std::to_string(fft_size) + " is shorter than the signal");
  return rfft_columns(signals, fft_size);
}

/// fft_size is inferred as 2 * (bins - 1).
inline Eigen::MatrixXd dft_inverse(const SpectralField& spectra, Eigen::Index samples) {
  if (spectra.rows() < 2) throw Error("spectrum needs at least two bins");
  return irfft_columns(spectra, static_cast<int>(2 * (spectra.rows() - 1)), samples);
}

inline Eigen::MatrixXd gram_matrix(const std::vector<Vec3>& positions, double k) {
  if (k < 0.0) throw Error("wavenumber must be non-negative");
  const auto m = static_cast<Eigen::Index>(positions.size());
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    g(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = j0(k * (positions[static_cast<std::size_t>(i)] - positions[static_cast<std::size_t>(j)]).norm());
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

struct KernelModel {
  std::vector<Vec3> positions;
  Eigen::VectorXd k;       // per-bin wavenumber
  SpectralField alpha;     // bins x sensors
  double lambda = 1e-3;
  int fft_size = 2048;
  Eigen::Index samples = 0;
  double sample_rate = 16000.0;
  double t0 = 0.0;

  Eigen::Index bins() const noexcept { return fft_size / 2 + 1; }
};

inline constexpr double kMinUnregularizedRcond = 1e-12;

inline KernelModel kernel_fit(const PressureField& obs, double lambda, int fft_size = 2048, double c = kSpeedOfSound,
                              ExecPolicy exec = {}) {
  obs.validate();
  if (obs.sensors() < 1) throw Error("kernel fit needs at least one sensor");
  if (lambda < 0.0 || !std::isfinite(lambda)) throw Error("kernel regularization must be >= 0");
  if (!(c > 0.0)) throw Error("speed of sound must be positive");
  KernelModel model;
  model.positions = obs.grid.positions;
  model.lambda = lambda;
  model.fft_size = fft_size;
  model.samples = obs.samples();
  model.sample_rate = obs.sample_rate;
  model.t0 = obs.t0;
  const SpectralField p = dft_forward(obs.data, fft_size);
  const Eigen::Index bins = model.bins(), m = obs.sensors();
  model.k.resize(bins);
  for (Eigen::Index b = 0; b < bins; ++b)
    model.k(b) = 2.0 * std::numbers::pi * static_cast<double>(b) * obs.sample_rate / fft_size / c;
  model.alpha.resize(bins, m);

  parallel_chunks(static_cast<std::size_t>(bins), exec.threads, [&](std::size_t bin, std::size_t) {
    const auto b = static_cast<Eigen::Index>(bin);
    Eigen::MatrixXd a = gram_matrix(model.positions, model.k(b));
    a.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success)
      throw NumericalError("kernel system is not positive definite at bin " + std::to_string(b));
    if (lambda == 0.0 && llt.rcond() < kMinUnregularizedRcond)
      throw NumericalError("kernel system is ill-conditioned at bin " + std::to_string(b) + " (rcond " +
                           std::to_string(llt.rcond()) + "); use lambda > 0");
    Eigen::MatrixXd rhs(m, 2);
    rhs.col(0) = p.row(b).real().transpose();
    rhs.col(1) = p.row(b).imag().transpose();
    const Eigen::MatrixXd x = llt.solve(rhs);
    for (Eigen::Index j = 0; j < m; ++j) model.alpha(b, j) = {x(j, 0), x(j, 1)};
  });
  return model;
}

inline KernelModel kernel_fit(const PressureField& field, const SensorSubset& subset, double lambda, int fft_size = 2048,
                              double c = kSpeedOfSound, ExecPolicy exec = {}) {
  return kernel_fit(restrict_to(field, subset), lambda, fft_size, c, exec);
}

inline SpectralField kernel_spectrum(const KernelModel& model, const std::vector<Vec3>& queries, ExecPolicy exec = {}) {
  const Eigen::Index bins = model.bins(), q = static_cast<Eigen::Index>(queries.size());
  const auto m = static_cast<Eigen::Index>(model.positions.size());
  if (model.alpha.rows() != bins || model.alpha.cols() != m) throw Error("kernel model is not fitted");
  Eigen::MatrixXd dist(q, m);
  for (Eigen::Index i = 0; i < q; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      dist(i, j) = (queries[static_cast<std::size_t>(i)] - model.positions[static_cast<std::size_t>(j)]).norm();
  SpectralField out(bins, q);
  parallel_chunks(static_cast<std::size_t>(bins), exec.threads, [&](std::size_t bin, std::size_t) {
    const auto b = static_cast<Eigen::Index>(bin);
    for (Eigen::Index i = 0; i < q; ++i) {
      std::complex<double> acc = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) acc += j0(model.k(b) * dist(i, j)) * model.alpha(b, j);
      out(b, i) = acc;
    }
  });
  return out;
}

inline PressureField kernel_reconstruct(const KernelModel& model, const SensorGrid& queries, ExecPolicy exec = {}) {
  PressureField f;
  f.grid = queries;
  f.sample_rate = model.sample_rate;
  f.t0 = model.t0;
  f.data = dft_inverse(kernel_spectrum(model, queries.positions, exec), model.samples);
  return f;
}

}  // namespace sfr
