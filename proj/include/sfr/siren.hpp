#pragma once

// Sinusoidal multilayer perceptron mapping network coordinates
// u = [u_t, u_x, u_y, u_z] to a scalar pressure. Each hidden layer computes
// sin(omega0 * (W x + b)); the last layer is affine.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "sfr/error.hpp"
#include "sfr/field_io.hpp"
#include "sfr/random.hpp"

namespace sfr {

struct SirenLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
  double omega0 = 1.0;
  bool is_linear = false;

  Eigen::Index fan_in() const noexcept { return W.cols(); }
  Eigen::Index fan_out() const noexcept { return W.rows(); }
};

struct SirenNetwork {
  std::vector<SirenLayer> layers;

  Eigen::Index input_dim() const { return layers.front().W.cols(); }
  Eigen::Index output_dim() const { return layers.back().W.rows(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.W.size() + l.b.size());
    return n;
  }

  void validate() const {
    if (layers.empty()) throw Error("network has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.b.size() != l.W.rows())
        throw Error("layer " + std::to_string(i) + ": bias length does not match weight rows");
      if (i > 0 && l.W.cols() != layers[i - 1].W.rows())
        throw Error("layer " + std::to_string(i) + ": fan-in does not match previous layer width");
    }
  }
};

/// Shape and frequency settings. Defaults give the 5-layer, 512-wide network.
struct SirenArchitecture {
  int input_dim = 4;
  int hidden_width = 512;
  int sinusoidal_layers = 4;  // including the first layer
  double first_omega0 = 0.5;
  double hidden_omega0 = 30.0;
};

struct InitSpec {
  std::uint64_t seed = 0;
  SirenArchitecture arch;

  static double first_layer_bound(Eigen::Index fan_in) { return 1.0 / static_cast<double>(fan_in); }
  static double hidden_bound(Eigen::Index fan_in, double omega0) {
    return std::sqrt(6.0 / static_cast<double>(fan_in)) / omega0;
  }
};

/// Uniform weights within the SIREN bounds, zero biases, deterministic per seed.
inline SirenNetwork init_siren(const InitSpec& spec) {
  const auto& a = spec.arch;
  if (a.input_dim < 1 || a.hidden_width < 1 || a.sinusoidal_layers < 1)
    throw Error("network dimensions must be positive");
  auto rng = rnd::stream({spec.seed, 0x51feULL});
  SirenNetwork net;
  auto add_layer = [&](int in, int out, double omega0, bool linear, double bound) {
    SirenLayer l;
    l.W.resize(out, in);
    for (Eigen::Index i = 0; i < l.W.rows(); ++i)
      for (Eigen::Index j = 0; j < l.W.cols(); ++j) l.W(i, j) = rnd::uniform(rng, -bound, bound);
    l.b = Eigen::VectorXd::Zero(out);
    l.omega0 = omega0;
    l.is_linear = linear;
    net.layers.push_back(std::move(l));
  };
  add_layer(a.input_dim, a.hidden_width, a.first_omega0, false, InitSpec::first_layer_bound(a.input_dim));
  for (int k = 1; k < a.sinusoidal_layers; ++k)
    add_layer(a.hidden_width, a.hidden_width, a.hidden_omega0, false,
              InitSpec::hidden_bound(a.hidden_width, a.hidden_omega0));
  add_layer(a.hidden_width, 1, 1.0, true, InitSpec::hidden_bound(a.hidden_width, a.hidden_omega0));
  return net;
}

namespace detail {

inline double sin_scalar(double x) { return std::sin(x); }
inline double cos_scalar(double x) { return std::cos(x); }

}  // namespace detail

/// Plain evaluation of the network at one input point.
inline double forward(const SirenNetwork& net, const Vec4& u) {
  Eigen::VectorXd x = u;
  for (const auto& l : net.layers) {
    Eigen::VectorXd a = l.W * x + l.b;
    if (l.is_linear)
      x = std::move(a);
    else
      x = (l.omega0 * a).unaryExpr(&detail::sin_scalar);
  }
  return x[0];
}

/// Flattened parameters: per layer, W row-major then b.
inline std::vector<double> flatten_parameters(const SirenNetwork& net) {
  std::vector<double> flat;
  flat.reserve(net.parameter_count());
  for (const auto& l : net.layers) {
    for (Eigen::Index i = 0; i < l.W.rows(); ++i)
      for (Eigen::Index j = 0; j < l.W.cols(); ++j) flat.push_back(l.W(i, j));
    for (Eigen::Index i = 0; i < l.b.size(); ++i) flat.push_back(l.b[i]);
  }
  return flat;
}

inline nlohmann::json layer_manifest(const SirenNetwork& net) {
  auto arr = nlohmann::json::array();
  for (const auto& l : net.layers)
    arr.push_back({{"rows", l.W.rows()}, {"cols", l.W.cols()}, {"omega0", l.omega0}, {"linear", l.is_linear}});
  return arr;
}

/// Checkpoint = 1-D SFRD tensor of flattened parameters + layer manifest sidecar.
inline void save_checkpoint(const std::filesystem::path& path, const SirenNetwork& net,
                            const nlohmann::json& extra = nlohmann::json::object()) {
  net.validate();
  Tensor t;
  t.values = flatten_parameters(net);
  t.dims = {t.values.size()};
  write_tensor(path, t);
  nlohmann::json meta = extra;
  meta["layers"] = layer_manifest(net);
  detail::write_file(sidecar_path(path), meta.dump(2) + "\n");
}

struct Checkpoint {
  SirenNetwork net;
  nlohmann::json meta;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Tensor t = read_tensor(path);
  if (t.dims.size() != 1) throw ParseError("ndim", "checkpoint tensor must be 1-D");
  Checkpoint cp;
  try {
    cp.meta = nlohmann::json::parse(detail::read_file(sidecar_path(path)));
    std::size_t k = 0;
    for (const auto& lj : cp.meta.at("layers")) {
      SirenLayer l;
      const auto rows = lj.at("rows").get<Eigen::Index>(), cols = lj.at("cols").get<Eigen::Index>();
      if (k + static_cast<std::size_t>(rows * cols + rows) > t.values.size())
        throw ParseError("layers", "manifest describes more parameters than the tensor holds");
      l.W.resize(rows, cols);
      l.b.resize(rows);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) l.W(i, j) = t.values[k++];
      for (Eigen::Index i = 0; i < rows; ++i) l.b[i] = t.values[k++];
      l.omega0 = lj.at("omega0").get<double>();
      l.is_linear = lj.at("linear").get<bool>();
      cp.net.layers.push_back(std::move(l));
    }
    if (k != t.values.size()) throw ParseError("layers", "manifest describes fewer parameters than the tensor holds");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("layers", e.what());
  }
  cp.net.validate();
  return cp;
}

}  // namespace sfr
