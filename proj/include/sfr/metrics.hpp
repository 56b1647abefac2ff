#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sfr/error.hpp"
#include "sfr/field_core.hpp"
#include "sfr/spectral.hpp"

namespace sfr {

inline constexpr double kNmseFloorDb = -200.0;

inline double to_db(double ratio) {
  if (!(ratio > 0.0)) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(ratio));
}

namespace detail {

inline void check_shapes(const PressureField& est, const PressureField& ref) {
  if (est.data.rows() != ref.data.rows() || est.data.cols() != ref.data.cols())
    throw Error("estimate is " + std::to_string(est.data.rows()) + "x" + std::to_string(est.data.cols()) +
                " but reference is " + std::to_string(ref.data.rows()) + "x" + std::to_string(ref.data.cols()));
}

/// ||est_m - ref_m||^2 / ||ref_m||^2
inline double column_ratio(const PressureField& est, const PressureField& ref, std::size_t m) {
  const auto col = static_cast<Eigen::Index>(m);
  const double den = ref.data.col(col).squaredNorm();
  if (!(den > 0.0)) throw NumericalError("reference signal at sensor " + std::to_string(m) + " has zero energy");
  return (est.data.col(col) - ref.data.col(col)).squaredNorm() / den;
}

inline double mean_ratio(const PressureField& est, const PressureField& ref, const std::vector<std::size_t>& cols) {
  double acc = 0.0;
  for (auto m : cols) {
    if (m >= static_cast<std::size_t>(ref.sensors())) throw Error("sensor index " + std::to_string(m) + " out of range");
    acc += column_ratio(est, ref, m);
  }
  return acc / static_cast<double>(cols.size());
}

}  // namespace detail

/// Per-sensor NMSE ratios (linear, not dB).
inline std::vector<double> nmse_ratios(const PressureField& est, const PressureField& ref) {
  detail::check_shapes(est, ref);
  std::vector<double> out(static_cast<std::size_t>(ref.sensors()));
  for (std::size_t m = 0; m < out.size(); ++m) out[m] = detail::column_ratio(est, ref, m);
  return out;
}

inline double nmse_total(const PressureField& est, const PressureField& ref) {
  detail::check_shapes(est, ref);
  if (ref.sensors() == 0) throw Error("cannot score an empty field");
  return to_db(detail::mean_ratio(est, ref, SensorSubset::all(static_cast<std::size_t>(ref.sensors())).indices));
}

inline double nmse_val(const PressureField& est, const PressureField& ref, const SensorSubset& subset) {
  detail::check_shapes(est, ref);
  const auto missing = subset.complement(static_cast<std::size_t>(ref.sensors()));
  if (missing.empty()) throw Error("validation NMSE needs at least one unobserved sensor");
  return to_db(detail::mean_ratio(est, ref, missing));
}

inline double nmse_sig(const PressureField& est, const PressureField& ref, const SensorSubset& subset) {
  detail::check_shapes(est, ref);
  if (subset.indices.empty()) throw Error("signal NMSE needs a non-empty subset");
  return to_db(detail::mean_ratio(est, ref, subset.indices));
}

struct NmseReport {
  double total = 0.0;
  std::optional<double> val;  // absent when every sensor was observed
  double sig = 0.0;
  std::vector<double> per_sensor_db;
  SensorSubset subset;
  std::string method;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["method"] = method;
    j["nmse_total_db"] = total;
    j["nmse_val_db"] = val ? nlohmann::json(*val) : nlohmann::json(nullptr);
    j["nmse_sig_db"] = sig;
    j["per_sensor_db"] = per_sensor_db;
    j["subset"] = subset.indices;
    j["subset_seed"] = subset.seed;
    return j;
  }

  static std::string csv_header() { return "method,observed,total_sensors,nmse_total_db,nmse_val_db,nmse_sig_db"; }

  std::string csv_row() const {
    std::ostringstream os;
    os.precision(17);
    os << method << ',' << subset.size() << ',' << per_sensor_db.size() << ',' << total << ',';
    if (val) os << *val;
    os << ',' << sig;
    return os.str();
  }
};

inline NmseReport nmse_report(const PressureField& est, const PressureField& ref, const SensorSubset& subset,
                              std::string method = {}) {
  NmseReport r;
  r.method = std::move(method);
  r.subset = subset;
  const auto ratios = nmse_ratios(est, ref);
  r.per_sensor_db.reserve(ratios.size());
  for (double x : ratios) r.per_sensor_db.push_back(to_db(x));
  r.total = nmse_total(est, ref);
  r.sig = nmse_sig(est, ref, subset);
  if (subset.size() < ratios.size()) r.val = nmse_val(est, ref, subset);
  return r;
}

/// One-sided 20 log10 |DFT| (floored at -200 dB).
inline Eigen::VectorXd magnitude_spectrum(const Eigen::Ref<const Eigen::VectorXd>& signal, int fft_size) {
  if (fft_size < signal.size()) throw Error("fft size is shorter than the signal");
  const Eigen::MatrixXcd spec = rfft_columns(signal, fft_size);
  Eigen::VectorXd out(spec.rows());
  for (Eigen::Index k = 0; k < spec.rows(); ++k) {
    const double mag = std::abs(spec(k, 0));
    out(k) = mag > 0.0 ? std::max(kNmseFloorDb, 20.0 * std::log10(mag)) : kNmseFloorDb;
  }
  return out;
}

}  // namespace sfr
