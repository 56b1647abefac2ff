#pragma once

// Core domain types shared by every reconstruction method: sensor geometry,
// sampled pressure fields, the physical <-> network coordinate map and
// random sensor subsets.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "sfr/error.hpp"
#include "sfr/random.hpp"

namespace sfr {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;

/// Ordered set of sensor positions in meters.
struct SensorGrid {
  std::vector<Vec3> positions;

  std::size_t count() const noexcept { return positions.size(); }

  void validate() const {
    if (positions.empty()) throw GeometryError("sensor grid is empty");
    for (std::size_t i = 0; i < positions.size(); ++i)
      if (!positions[i].allFinite())
        throw GeometryError("sensor " + std::to_string(i) + " has a non-finite position");
  }

  /// Axis-aligned `per_axis`^3 lattice centred on `center`, x fastest.
  static SensorGrid cubic(const Vec3& center, int per_axis = 4, double spacing = 0.1) {
    SensorGrid g;
    const double half = 0.5 * spacing * (per_axis - 1);
    for (int k = 0; k < per_axis; ++k)
      for (int j = 0; j < per_axis; ++j)
        for (int i = 0; i < per_axis; ++i)
          g.positions.emplace_back(center + Vec3(i * spacing - half, j * spacing - half, k * spacing - half));
    return g;
  }

  Vec3 bbox_min() const {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    for (const auto& p : positions) lo = lo.cwiseMin(p);
    return lo;
  }

  Vec3 bbox_max() const {
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
    for (const auto& p : positions) hi = hi.cwiseMax(p);
    return hi;
  }

  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : positions) c += p;
    return c / static_cast<double>(positions.size());
  }
};

/// N x M matrix of pressure signals, column m sampled at grid.positions[m].
struct PressureField {
  Eigen::MatrixXd data;
  double sample_rate = 16000.0;
  SensorGrid grid;
  double t0 = 0.0;

  Eigen::Index samples() const noexcept { return data.rows(); }
  Eigen::Index sensors() const noexcept { return data.cols(); }
  double duration() const noexcept { return static_cast<double>(data.rows()) / sample_rate; }
  double time(Eigen::Index n) const noexcept { return t0 + static_cast<double>(n) / sample_rate; }

  void validate() const {
    grid.validate();
    if (data.rows() < 1) throw Error("pressure field has no samples");
    if (static_cast<std::size_t>(data.cols()) != grid.count())
      throw Error("pressure field has " + std::to_string(data.cols()) + " columns but the grid has " +
                  std::to_string(grid.count()) + " sensors");
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw Error("sample rate must be positive");
    if (!std::isfinite(t0)) throw Error("t0 must be finite");
    if (!data.allFinite()) throw NumericalError("pressure field contains non-finite samples");
  }
};

/// Affine map between physical (r [m], t [s]) and network coordinates
/// u = [u_t, u_x, u_y, u_z]. Space is scaled isotropically so the wave
/// equation keeps its form with the rescaled speed `c_scaled`.
struct DomainScaling {
  Vec3 center = Vec3::Zero();
  double space_scale = 1.0;  // network units per meter
  double time_scale = 1.0;   // network units per second
  double time_center = 0.0;  // seconds, maps to u_t = 0
  double c_phys = 346.8;
  double c_scaled = 346.8;

  Vec4 to_network(const Vec3& r, double t) const {
    Vec4 u;
    u[0] = (t - time_center) * time_scale;
    u.tail<3>() = (r - center) * space_scale;
    return u;
  }

  std::pair<Vec3, double> from_network(const Vec4& u) const {
    return {center + u.tail<3>() / space_scale, time_center + u[0] / time_scale};
  }
};

inline constexpr double kSpeedOfSound = 346.8;

/// Spatial bounding box onto [-1, 1] (longest axis), time window onto [-100, 100].
inline DomainScaling normalize_coords(const SensorGrid& grid, double duration, double t0 = 0.0,
                                      double c_phys = kSpeedOfSound) {
  grid.validate();
  if (!(duration > 0.0)) throw Error("duration must be positive");
  if (!(c_phys > 0.0)) throw Error("speed of sound must be positive");
  const Vec3 lo = grid.bbox_min(), hi = grid.bbox_max();
  const double extent = (hi - lo).maxCoeff();
  if (!(extent > 0.0)) throw GeometryError("degenerate geometry: sensor grid has zero spatial extent");

  DomainScaling s;
  s.center = 0.5 * (lo + hi);
  s.space_scale = 2.0 / extent;
  s.time_scale = 200.0 / duration;
  s.time_center = t0 + 0.5 * duration;
  s.c_phys = c_phys;
  s.c_scaled = c_phys * s.space_scale / s.time_scale;
  return s;
}

inline DomainScaling normalize_coords(const PressureField& field, double c_phys = kSpeedOfSound) {
  return normalize_coords(field.grid, field.duration(), field.t0, c_phys);
}

inline Vec4 to_network_coords(const DomainScaling& s, const Vec3& r, double t) { return s.to_network(r, t); }

/// Sorted, distinct sensor indices of the observed microphones.
struct SensorSubset {
  std::vector<std::size_t> indices;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return indices.size(); }

  bool contains(std::size_t m) const { return std::binary_search(indices.begin(), indices.end(), m); }

  /// Indices in [0, total) not in the subset.
  std::vector<std::size_t> complement(std::size_t total) const {
    std::vector<std::size_t> out;
    for (std::size_t m = 0; m < total; ++m)
      if (!contains(m)) out.push_back(m);
    return out;
  }

  static SensorSubset all(std::size_t total) {
    SensorSubset s;
    s.indices.resize(total);
    std::iota(s.indices.begin(), s.indices.end(), std::size_t{0});
    return s;
  }
};

/// Uniform sampling without replacement of round(fraction * M) sensors.
inline SensorSubset select_subset(std::size_t total, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("subset fraction must lie in (0, 1]");
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  if (count == 0) throw Error("subset fraction selects zero sensors");

  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto rng = rnd::stream({seed, 0x5e1ec7ULL});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rnd::index(rng, total - i);
    std::swap(perm[i], perm[j]);
  }
  SensorSubset s;
  s.seed = seed;
  s.indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(s.indices.begin(), s.indices.end());
  return s;
}

inline SensorSubset select_subset(const SensorGrid& grid, double fraction, std::uint64_t seed) {
  return select_subset(grid.count(), fraction, seed);
}

/// Columns of `field` listed in `subset`, with the matching grid.
inline PressureField restrict_to(const PressureField& field, const SensorSubset& subset) {
  PressureField out;
  out.sample_rate = field.sample_rate;
  out.t0 = field.t0;
  out.data.resize(field.samples(), static_cast<Eigen::Index>(subset.size()));
  for (std::size_t j = 0; j < subset.size(); ++j) {
    const auto m = subset.indices[j];
    if (m >= static_cast<std::size_t>(field.sensors()))
      throw Error("subset index " + std::to_string(m) + " out of range");
    out.data.col(static_cast<Eigen::Index>(j)) = field.data.col(static_cast<Eigen::Index>(m));
    out.grid.positions.push_back(field.grid.positions[m]);
  }
  return out;
}

}  // namespace sfr
