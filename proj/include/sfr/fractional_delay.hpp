#pragma once

// Hann-windowed sinc approximation of a (possibly non-integer) delay. Shared
// by the room simulator and the equivalent-source dictionary.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "sfr/error.hpp"

namespace sfr {

/// FIR taps applied at lags first_lag, first_lag + 1, ...
struct FractionalDelayFilter {
  std::ptrdiff_t first_lag = 0;
  std::vector<double> taps;

  std::ptrdiff_t last_lag() const noexcept { return first_lag + static_cast<std::ptrdiff_t>(taps.size()) - 1; }
};

inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

/// Windowed sinc centred on `delay` samples, lags round(delay) +- (taps-1)/2.
/// Lags may be negative; use frac_delay_filter when the filter must be causal.
inline FractionalDelayFilter windowed_sinc_delay(double delay, int taps) {
  if (taps < 1 || taps % 2 == 0) throw Error("fractional delay filter needs an odd number of taps");
  if (!std::isfinite(delay)) throw Error("fractional delay must be finite");
  const int half = (taps - 1) / 2;
  const auto centre = static_cast<std::ptrdiff_t>(std::llround(delay));
  FractionalDelayFilter f;
  f.first_lag = centre - half;
  f.taps.resize(static_cast<std::size_t>(taps));
  const double width = half + 1.0;
  for (int i = 0; i < taps; ++i) {
    const double x = static_cast<double>(f.first_lag + i) - delay;
    const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * x / width));
    f.taps[static_cast<std::size_t>(i)] = w * sinc(x);
  }
  return f;
}

/// Causal variant: rejects delays shorter than the half window.
inline FractionalDelayFilter frac_delay_filter(double delay, int taps) {
  if (taps < 1 || taps % 2 == 0) throw Error("fractional delay filter needs an odd number of taps");
  if (delay < 0.5 * (taps - 1))
    throw Error("delay of " + std::to_string(delay) + " samples is too small for a causal " + std::to_string(taps) +
                "-tap window");
  return windowed_sinc_delay(delay, taps);
}

}  // namespace sfr
