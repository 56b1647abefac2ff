#pragma once

// Particle velocity and intensity from a trained pressure network.
//
//   u(r, t) = -(1 / rho) * integral_{t0}^{t} grad p(r, tau) dtau,   u(r, t0) = 0
//   i(r, t) = u(r, t) * p(r, t)
//
// The network returns derivatives with respect to network coordinates, so the
// physical gradient is d p / d r = space_scale * d p / d u_{x,y,z}.

#include <Eigen/Dense>

#include <array>
#include <fstream>
#include <string>

#include "sfr/error.hpp"
#include "sfr/field_core.hpp"
#include "sfr/field_io.hpp"
#include "sfr/parallel.hpp"
#include "sfr/siren.hpp"
#include "sfr/taylor_jet.hpp"

namespace sfr {

inline constexpr double kAirDensity = 1.2;

/// Three N x M component matrices (x, y, z).
struct VectorField {
  std::array<Eigen::MatrixXd, 3> comp;
  SensorGrid grid;
  double sample_rate = 16000.0;
  double t0 = 0.0;

  Eigen::Index samples() const noexcept { return comp[0].rows(); }
  Eigen::Index sensors() const noexcept { return comp[0].cols(); }
};

struct VelocityField : VectorField {
  double rho = kAirDensity;
};

using IntensityField = VectorField;

/// Physical pressure gradient (Pa/m) at every (sample, sensor).
inline VectorField pressure_gradient(const SirenNetwork& net, const DomainScaling& scaling, const SensorGrid& grid,
                                     Eigen::Index samples, double sample_rate, double t0, const ExecPolicy& exec = {}) {
  grid.validate();
  if (samples < 1) throw Error("need at least one sample");
  VectorField g;
  g.grid = grid;
  g.sample_rate = sample_rate;
  g.t0 = t0;
  for (auto& c : g.comp) c.resize(samples, static_cast<Eigen::Index>(grid.count()));
  JetPlan plan;
  plan.directions = Eigen::Matrix<double, 4, Eigen::Dynamic>::Zero(4, 3);
  for (int a = 0; a < 3; ++a) plan.directions(1 + a, a) = 1.0;
  plan.curvature = Eigen::MatrixXd(0, 3);

  const auto total = static_cast<std::size_t>(samples) * grid.count();
  const std::size_t chunks = (total + exec.chunk - 1) / exec.chunk;
  parallel_chunks(chunks, exec.threads, [&](std::size_t c, std::size_t) {
    const std::size_t lo = c * exec.chunk, hi = std::min(total, lo + exec.chunk);
    Eigen::Matrix<double, 4, Eigen::Dynamic> u(4, static_cast<Eigen::Index>(hi - lo));
    for (std::size_t k = lo; k < hi; ++k) {
      const auto m = static_cast<Eigen::Index>(k) / samples, n = static_cast<Eigen::Index>(k) % samples;
      u.col(static_cast<Eigen::Index>(k - lo)) =
          scaling.to_network(grid.positions[static_cast<std::size_t>(m)], t0 + static_cast<double>(n) / sample_rate);
    }
    const JetTape tape(net, plan, u);
    for (int a = 0; a < 3; ++a) {
      const auto ch = tape.first(a);
      for (std::size_t k = lo; k < hi; ++k) g.comp[a].data()[k] = scaling.space_scale * ch[static_cast<Eigen::Index>(k - lo)];
    }
  });
  return g;
}

/// Cumulative trapezoid along each column, starting from zero.
inline Eigen::MatrixXd cumulative_trapezoid(const Eigen::MatrixXd& x, double dt) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  if (x.rows() == 0) return out;
  out.row(0).setZero();
  for (Eigen::Index n = 1; n < x.rows(); ++n) out.row(n) = out.row(n - 1) + 0.5 * dt * (x.row(n) + x.row(n - 1));
  return out;
}

inline VelocityField velocity_from_gradient(const VectorField& grad, double rho = kAirDensity) {
  if (!(rho > 0.0)) throw Error("fluid density must be positive");
  VelocityField v;
  v.grid = grad.grid;
  v.sample_rate = grad.sample_rate;
  v.t0 = grad.t0;
  v.rho = rho;
  const double dt = 1.0 / grad.sample_rate;
  for (int a = 0; a < 3; ++a) v.comp[a] = -cumulative_trapezoid(grad.comp[a], dt) / rho;
  return v;
}

inline VelocityField particle_velocity(const SirenNetwork& net, const DomainScaling& scaling, const SensorGrid& grid,
                                       Eigen::Index samples, double sample_rate, double t0, double rho = kAirDensity,
                                       const ExecPolicy& exec = {}) {
  if (!(rho > 0.0)) throw Error("fluid density must be positive");
  return velocity_from_gradient(pressure_gradient(net, scaling, grid, samples, sample_rate, t0, exec), rho);
}

inline IntensityField instantaneous_intensity(const PressureField& p, const VectorField& u) {
  for (int a = 0; a < 3; ++a)
    if (u.comp[a].rows() != p.data.rows() || u.comp[a].cols() != p.data.cols())
      throw Error("velocity component " + std::to_string(a) + " is " + std::to_string(u.comp[a].rows()) + "x" +
                  std::to_string(u.comp[a].cols()) + " but pressure is " + std::to_string(p.data.rows()) + "x" +
                  std::to_string(p.data.cols()));
  IntensityField i;
  i.grid = p.grid;
  i.sample_rate = p.sample_rate;
  i.t0 = p.t0;
  for (int a = 0; a < 3; ++a) i.comp[a] = u.comp[a].cwiseProduct(p.data);
  return i;
}

/// M x 3 mean over time.
inline Eigen::MatrixXd time_average(const VectorField& f) {
  Eigen::MatrixXd out(f.sensors(), 3);
  for (int a = 0; a < 3; ++a) out.col(a) = f.comp[a].colwise().mean().transpose();
  return out;
}

/// N x M x 3 tensor, component index fastest.
inline Tensor vector_field_to_tensor(const VectorField& f) {
  Tensor t;
  const auto n = static_cast<std::uint64_t>(f.samples()), m = static_cast<std::uint64_t>(f.sensors());
  t.dims = {n, m, 3};
  t.values.resize(n * m * 3);
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < m; ++j)
      for (int a = 0; a < 3; ++a)
        t.values[(i * m + j) * 3 + static_cast<std::uint64_t>(a)] =
            f.comp[a](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return t;
}

inline void write_intensity_csv(const std::filesystem::path& path, const SensorGrid& grid, const Eigen::MatrixXd& mean) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os.precision(17);
  os << "x,y,z,ix,iy,iz\n";
  for (std::size_t m = 0; m < grid.count(); ++m) {
    const auto& r = grid.positions[m];
    const auto row = static_cast<Eigen::Index>(m);
    os << r.x() << ',' << r.y() << ',' << r.z() << ',' << mean(row, 0) << ',' << mean(row, 1) << ',' << mean(row, 2)
       << '\n';
  }
  if (!os) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace sfr
