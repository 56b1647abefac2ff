#pragma once

// Ground-truth generator: image-source room impulse responses in a shoebox
// room (or the free-field direct path) convolved with a source signal.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "sfr/error.hpp"
#include "sfr/field_core.hpp"
#include "sfr/fractional_delay.hpp"
#include "sfr/random.hpp"
#include "sfr/spectral.hpp"

namespace sfr {

struct ShoeboxRoom {
  Vec3 dims{7.0, 6.4, 2.7};
  double absorption = 0.3;  // energy absorption coefficient, uniform over walls
  double c = kSpeedOfSound;
  int max_order = 20;

  void validate() const {
    if (!(dims.minCoeff() > 0.0)) throw GeometryError("room dimensions must be positive");
    if (!(absorption > 0.0 && absorption <= 1.0)) throw Error("absorption must lie in (0, 1]");
    if (!(c > 0.0)) throw Error("speed of sound must be positive");
    if (max_order < 0) throw Error("max_order must be >= 0");
  }

  bool contains(const Vec3& p) const { return (p.array() > 0.0).all() && (p.array() < dims.array()).all(); }
};

/// Sabine inversion: alpha = 0.161 V / (S T60).
inline double sabine_alpha(const Vec3& dims, double t60) {
  if (!(t60 > 0.0)) throw Error("T60 must be positive");
  if (!(dims.minCoeff() > 0.0)) throw GeometryError("room dimensions must be positive");
  const double volume = dims.prod();
  const double surface = 2.0 * (dims.x() * dims.y() + dims.x() * dims.z() + dims.y() * dims.z());
  const double alpha = 0.161 * volume / (surface * t60);
  if (alpha > 1.0)
    throw Error("room too small for T60 = " + std::to_string(t60) + " s (Sabine absorption " + std::to_string(alpha) + " > 1)");
  return alpha;
}

struct ImageSource {
  double distance = 0.0;
  int reflections = 0;
};

/// Images indexed by j in [-K, K] per axis: coordinate j*L + s for even j,
/// j*L + (L - s) for odd j, each with |j| wall reflections.
inline std::vector<ImageSource> image_source_expansion(const ShoeboxRoom& room, const Vec3& src, const Vec3& mic,
                                                       int max_order) {
  room.validate();
  if (!room.contains(src)) throw GeometryError("source lies outside the room");
  if (!room.contains(mic)) throw GeometryError("microphone lies outside the room");
  if (max_order < 0) throw Error("max_order must be >= 0");
  auto image_coord = [](int j, double len, double s) {
    return (j % 2 == 0) ? j * len + s : j * len + (len - s);
  };
  std::vector<ImageSource> out;
  const int span = 2 * max_order + 1;
  out.reserve(static_cast<std::size_t>(span) * span * span);
  for (int jx = -max_order; jx <= max_order; ++jx)
    for (int jy = -max_order; jy <= max_order; ++jy)
      for (int jz = -max_order; jz <= max_order; ++jz) {
        const Vec3 img(image_coord(jx, room.dims.x(), src.x()), image_coord(jy, room.dims.y(), src.y()),
                       image_coord(jz, room.dims.z(), src.z()));
        out.push_back({(img - mic).norm(), std::abs(jx) + std::abs(jy) + std::abs(jz)});
      }
  return out;
}

struct Rir {
  std::vector<double> taps;
  double sample_rate = 16000.0;
  int dropped_images = 0;  // images whose delay fell beyond the RIR length
};

/// Sum of (1 - alpha)^reflections / (4 pi d) * delta(t - d / c), each
/// delta rendered as a windowed-sinc fractional delay.
inline Rir synthesize_rir(const std::vector<ImageSource>& images, double alpha, double c, double fs, std::size_t length,
                          int taps = 81) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("absorption must lie in [0, 1]");
  if (!(c > 0.0) || !(fs > 0.0)) throw Error("speed of sound and sample rate must be positive");
  Rir rir;
  rir.sample_rate = fs;
  rir.taps.assign(length, 0.0);
  const double beta = 1.0 - alpha;
  for (const auto& im : images) {
    if (!(im.distance > 0.0)) throw GeometryError("image source coincides with the receiver");
    const double gain = std::pow(beta, im.reflections) / (4.0 * std::numbers::pi * im.distance);
    if (gain == 0.0) continue;
    const double delay = im.distance / c * fs;
    if (delay >= static_cast<double>(length)) {
      ++rir.dropped_images;
      continue;
    }
    const auto f = windowed_sinc_delay(delay, taps);
    for (std::size_t i = 0; i < f.taps.size(); ++i) {
      const auto n = f.first_lag + static_cast<std::ptrdiff_t>(i);
      if (n >= 0 && n < static_cast<std::ptrdiff_t>(length)) rir.taps[static_cast<std::size_t>(n)] += gain * f.taps[i];
    }
  }
  return rir;
}

/// First `samples` outputs of the linear convolution rir * s (FFT based).
inline std::vector<double> convolve(const Rir& rir, const std::vector<double>& s, std::size_t samples) {
  if (samples == 0 || s.empty() || rir.taps.empty()) return std::vector<double>(samples, 0.0);
  const std::size_t h_len = std::min(rir.taps.size(), samples), s_len = std::min(s.size(), samples);
  const int nfft = next_pow2(static_cast<Eigen::Index>(h_len + s_len));
  Eigen::MatrixXd both = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(std::max(h_len, s_len)), 2);
  for (std::size_t k = 0; k < h_len; ++k) both(static_cast<Eigen::Index>(k), 0) = rir.taps[k];
  for (std::size_t k = 0; k < s_len; ++k) both(static_cast<Eigen::Index>(k), 1) = s[k];
  const Eigen::MatrixXcd spec = rfft_columns(both, nfft);
  const Eigen::MatrixXcd prod = spec.col(0).cwiseProduct(spec.col(1));
  const auto y = irfft_columns(prod, nfft, static_cast<Eigen::Index>(std::min<std::size_t>(samples, static_cast<std::size_t>(nfft))));
  std::vector<double> out(samples, 0.0);
  for (Eigen::Index n = 0; n < y.rows(); ++n) out[static_cast<std::size_t>(n)] = y(n, 0);
  return out;
}

inline std::vector<double> convolve(const Rir& rir, const std::vector<double>& s) { return convolve(rir, s, s.size()); }

/// Acoustic environment: a shoebox room, or free field when `room` is empty.
struct Environment {
  std::optional<ShoeboxRoom> room;
  double c = kSpeedOfSound;
  int filter_taps = 81;

  static Environment free_field(double c = kSpeedOfSound) { return {std::nullopt, c, 81}; }
  static Environment shoebox(const ShoeboxRoom& r) { return {r, r.c, 81}; }
};

inline Rir environment_rir(const Environment& env, const Vec3& src, const Vec3& mic, double fs, std::size_t length) {
  if (env.room) {
    const auto images = image_source_expansion(*env.room, src, mic, env.room->max_order);
    return synthesize_rir(images, env.room->absorption, env.room->c, fs, length, env.filter_taps);
  }
  const double d = (src - mic).norm();
  if (!(d > 0.0)) throw GeometryError("source coincides with a microphone");
  return synthesize_rir({{d, 0}}, 0.0, env.c, fs, length, env.filter_taps);
}

/// Pressure at every grid sensor: per-sensor RIR convolved with the source signal.
inline PressureField simulate_dataset(const Environment& env, const Vec3& src, const SensorGrid& grid,
                                      const std::vector<double>& signal, std::size_t samples, double fs) {
  grid.validate();
  if (samples == 0) throw Error("requested zero samples");
  if (!(fs > 0.0)) throw Error("sample rate must be positive");
  PressureField f;
  f.grid = grid;
  f.sample_rate = fs;
  f.t0 = 0.0;
  f.data.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(grid.count()));
  for (std::size_t m = 0; m < grid.count(); ++m) {
    const auto rir = environment_rir(env, src, grid.positions[m], fs, samples);
    const auto y = convolve(rir, signal, samples);
    for (std::size_t n = 0; n < samples; ++n) f.data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) = y[n];
  }
  return f;
}

/// Gaussian noise band-limited to [f_lo, f_hi] by an FFT mask, unit RMS, with a
/// raised-cosine fade-in over the first `fade` samples.
inline std::vector<double> bandlimited_noise(std::size_t samples, double fs, double f_lo, double f_hi,
                                             std::uint64_t seed, std::size_t fade = 64) {
  if (!(f_lo >= 0.0 && f_hi > f_lo && f_hi <= fs / 2)) throw Error("invalid noise band");
  const int nfft = next_pow2(static_cast<Eigen::Index>(2 * samples));
  auto rng = rnd::stream({seed, 0x7015eULL});
  Eigen::MatrixXd x(nfft, 1);
  for (int n = 0; n < nfft; ++n) x(n, 0) = rnd::normal(rng);
  Eigen::MatrixXcd spec = rfft_columns(x, nfft);
  for (Eigen::Index k = 0; k < spec.rows(); ++k) {
    const double f = static_cast<double>(k) * fs / nfft;
    if (f < f_lo || f > f_hi) spec(k, 0) = 0.0;
  }
  const Eigen::MatrixXd y = irfft_columns(spec, nfft, static_cast<Eigen::Index>(samples));
  std::vector<double> out(samples);
  const double rms = std::sqrt(y.squaredNorm() / static_cast<double>(samples));
  for (std::size_t n = 0; n < samples; ++n) {
    double w = 1.0;
    if (n < fade) w = 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(n) / static_cast<double>(fade)));
    out[n] = w * y(static_cast<Eigen::Index>(n), 0) / rms;
  }
  return out;
}

/// Experiment geometry: 4x4x4 grid with 0.1 m spacing and a source 1 m from
/// the grid centre along +x.
struct DeskPreset {
  Environment env;
  SensorGrid grid;
  Vec3 source;
  std::size_t samples = 800;
  double fs = 16000.0;

  static DeskPreset free_field() {
    DeskPreset p;
    p.env = Environment::free_field();
    const Vec3 centre(0.0, 0.0, 0.0);
    p.grid = SensorGrid::cubic(centre);
    p.source = centre + Vec3(1.0, 0.0, 0.0);
    return p;
  }

  /// Shoebox 7 x 6.4 x 2.7 m, absorption from T60 = 0.38 s.
  static DeskPreset meshrir_like() {
    DeskPreset p;
    ShoeboxRoom room;
    room.dims = Vec3(7.0, 6.4, 2.7);
    room.absorption = sabine_alpha(room.dims, 0.38);
    room.c = kSpeedOfSound;
    room.max_order = 20;
    p.env = Environment::shoebox(room);
    const Vec3 centre(3.0, 2.9, 1.4);
    p.grid = SensorGrid::cubic(centre);
    p.source = centre + Vec3(1.0, 0.0, 0.0);
    return p;
  }
};

}  // namespace sfr
