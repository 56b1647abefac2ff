#pragma once

// Binary tensor container ("SFRD") and the pressure-field file pair:
//
//   offset  size       content
//   0       4          magic "SFRD"
//   4       4          u32 LE version (= 1)
//   8       4          u32 LE ndim
//   12      8*ndim     u64 LE dims
//   ...     8*prod     f64 LE values, row-major
//
// A pressure field is stored as a 2-D tensor [N, M] plus a sidecar
// "<stem>.meta.json" holding rate, t0, sensor positions and scaling.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "sfr/error.hpp"
#include "sfr/field_core.hpp"

namespace sfr {

inline constexpr char kTensorMagic[4] = {'S', 'F', 'R', 'D'};
inline constexpr std::uint32_t kTensorVersion = 1;

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> values;  // row-major

  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
bool get_le(const std::string& in, std::size_t& pos, T& v) {
  if (in.size() < pos || in.size() - pos < sizeof(T)) return false;
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  std::memcpy(&v, bytes, sizeof(T));
  pos += sizeof(T);
  return true;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to '" + path.string() + "'");
}

}  // namespace detail

inline std::string encode_tensor(const Tensor& t) {
  if (t.element_count() != t.values.size()) throw Error("tensor dims do not match value count");
  std::string out(kTensorMagic, 4);
  detail::put_le<std::uint32_t>(out, kTensorVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) detail::put_le<std::uint64_t>(out, d);
  out.reserve(out.size() + 8 * t.values.size());
  for (double v : t.values) detail::put_le<double>(out, v);
  return out;
}

inline Tensor decode_tensor(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kTensorMagic, 4) != 0)
    throw ParseError("magic", "expected \"SFRD\"");
  std::size_t pos = 4;
  std::uint32_t version = 0, ndim = 0;
  if (!detail::get_le(bytes, pos, version)) throw ParseError("version", "file truncated");
  if (version != kTensorVersion) throw ParseError("version", "unsupported version " + std::to_string(version));
  if (!detail::get_le(bytes, pos, ndim)) throw ParseError("ndim", "file truncated");
  if (ndim > 16) throw ParseError("ndim", "implausible rank " + std::to_string(ndim));
  Tensor t;
  t.dims.resize(ndim);
  for (std::uint32_t i = 0; i < ndim; ++i)
    if (!detail::get_le(bytes, pos, t.dims[i])) throw ParseError("dims", "file truncated in dims[" + std::to_string(i) + "]");
  // Guard the product against overflow before trusting it for allocation.
  std::uint64_t count = 1;
  for (auto d : t.dims) {
    if (d != 0 && count > (std::numeric_limits<std::uint64_t>::max() / 8) / d)
      throw ParseError("dims", "element count overflows");
    count *= d;
  }
  const std::size_t remaining = bytes.size() - pos;
  if (remaining != count * 8)
    throw ParseError("data", "expected " + std::to_string(count * 8) + " payload bytes, found " +
                                 std::to_string(remaining));
  t.values.resize(count);
  for (auto& v : t.values) detail::get_le(bytes, pos, v);
  return t;
}

inline void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  detail::write_file(path, encode_tensor(t));
}

inline Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(detail::read_file(path)); }

/// "<dir>/<stem>.meta.json" for "<dir>/<stem>.sfrd".
inline std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path) {
  auto p = tensor_path;
  p.replace_extension(".meta.json");
  return p;
}

inline Tensor matrix_to_tensor(const Eigen::MatrixXd& m) {
  Tensor t;
  t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.values.resize(static_cast<std::size_t>(m.size()));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.values[k++] = m(i, j);
  return t;
}

inline Eigen::MatrixXd tensor_to_matrix(const Tensor& t) {
  if (t.dims.size() != 2) throw ParseError("ndim", "expected a 2-D tensor, found rank " + std::to_string(t.dims.size()));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.dims[0]), static_cast<Eigen::Index>(t.dims[1]));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = t.values[k++];
  return m;
}

inline nlohmann::json grid_to_json(const SensorGrid& g) {
  auto arr = nlohmann::json::array();
  for (const auto& p : g.positions) arr.push_back({p.x(), p.y(), p.z()});
  return arr;
}

inline SensorGrid grid_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ParseError("grid", "expected an array of [x, y, z]");
  SensorGrid g;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 3) throw ParseError("grid", "each position needs three coordinates");
    g.positions.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
  }
  return g;
}

inline nlohmann::json scaling_to_json(const DomainScaling& s) {
  return {{"center", {s.center.x(), s.center.y(), s.center.z()}},
          {"space_scale", s.space_scale},
          {"time_scale", s.time_scale},
          {"time_center", s.time_center},
          {"c_phys", s.c_phys},
          {"c_scaled", s.c_scaled}};
}

inline DomainScaling scaling_from_json(const nlohmann::json& j) {
  try {
    DomainScaling s;
    const auto& c = j.at("center");
    s.center = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    s.space_scale = j.at("space_scale").get<double>();
    s.time_scale = j.at("time_scale").get<double>();
    s.time_center = j.at("time_center").get<double>();
    s.c_phys = j.at("c_phys").get<double>();
    s.c_scaled = j.at("c_scaled").get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("scaling", e.what());
  }
}

inline void write_field(const std::filesystem::path& path, const PressureField& field,
                        double c_phys = kSpeedOfSound) {
  field.validate();
  write_tensor(path, matrix_to_tensor(field.data));
  nlohmann::json meta = {{"sample_rate", field.sample_rate},
                         {"t0", field.t0},
                         {"grid", grid_to_json(field.grid)},
                         {"c_phys", c_phys}};
  // The scaling block only exists when the geometry admits one (a single
  // sensor has no spatial extent).
  try {
    meta["scaling"] = scaling_to_json(normalize_coords(field, c_phys));
  } catch (const GeometryError&) {
  }
  detail::write_file(sidecar_path(path), meta.dump(2) + "\n");
}

inline PressureField read_field(const std::filesystem::path& path) {
  PressureField f;
  f.data = tensor_to_matrix(read_tensor(path));
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(detail::read_file(sidecar_path(path)));
    f.sample_rate = meta.at("sample_rate").get<double>();
    f.t0 = meta.at("t0").get<double>();
    f.grid = grid_from_json(meta.at("grid"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("meta", e.what());
  }
  if (f.grid.count() != static_cast<std::size_t>(f.data.cols()))
    throw ParseError("dims", "tensor has " + std::to_string(f.data.cols()) + " columns, sidecar lists " +
                                 std::to_string(f.grid.count()) + " sensors");
  f.validate();
  return f;
}

}  // namespace sfr
