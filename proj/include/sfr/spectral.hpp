#pragma once

// One-sided real DFT helpers over the columns of a matrix (Eigen's FFT module,
// kissfft backend). Forward transforms are unscaled; inverses carry 1/n.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <complex>
#include <vector>

#include "sfr/error.hpp"

namespace sfr {

/// Column-wise one-sided DFT of zero-padded signals: (fft_size/2 + 1) x cols.
inline Eigen::MatrixXcd rfft_columns(const Eigen::Ref<const Eigen::MatrixXd>& signals, int fft_size) {
  if (fft_size < 1 || fft_size < signals.rows()) throw Error("fft size must be at least the signal length");
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  const Eigen::Index bins = fft_size / 2 + 1;
  Eigen::MatrixXcd out(bins, signals.cols());
  std::vector<double> buf(static_cast<std::size_t>(fft_size));
  std::vector<std::complex<double>> spec;
  for (Eigen::Index m = 0; m < signals.cols(); ++m) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (Eigen::Index n = 0; n < signals.rows(); ++n) buf[static_cast<std::size_t>(n)] = signals(n, m);
    fft.fwd(spec, buf);
    for (Eigen::Index k = 0; k < bins; ++k) out(k, m) = spec[static_cast<std::size_t>(k)];
  }
  return out;
}

/// Inverse of rfft_columns, truncated to the first `samples` rows.
inline Eigen::MatrixXd irfft_columns(const Eigen::Ref<const Eigen::MatrixXcd>& spectra, int fft_size, Eigen::Index samples) {
  if (spectra.rows() != fft_size / 2 + 1) throw Error("spectrum has the wrong number of bins for this fft size");
  if (samples > fft_size) throw Error("cannot return more samples than the fft size");
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  Eigen::MatrixXd out(samples, spectra.cols());
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(spectra.rows()));
  std::vector<double> buf;
  for (Eigen::Index m = 0; m < spectra.cols(); ++m) {
    for (Eigen::Index k = 0; k < spectra.rows(); ++k) spec[static_cast<std::size_t>(k)] = spectra(k, m);
    fft.inv(buf, spec, fft_size);
    for (Eigen::Index n = 0; n < samples; ++n) out(n, m) = buf[static_cast<std::size_t>(n)];
  }
  return out;
}

inline int next_pow2(Eigen::Index n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace sfr
