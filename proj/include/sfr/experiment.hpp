#pragma once

// Config-driven experiment runner behind the `sfr` command-line tool.
//
// A run resolves its configuration (defaults <- config file <- --set <- flags),
// validates it and loads every input before touching the output directory,
// then writes a manifest with status "running", does the work, and rewrites
// the manifest with output hashes and status "complete".

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sfr/acoustic_post.hpp"
#include "sfr/error.hpp"
#include "sfr/field_core.hpp"
#include "sfr/field_io.hpp"
#include "sfr/kernel_interp.hpp"
#include "sfr/metrics.hpp"
#include "sfr/pinn_train.hpp"
#include "sfr/room_sim.hpp"
#include "sfr/siren.hpp"
#include "sfr/tesm.hpp"
#include "sfr/wav.hpp"

namespace sfr::app {

using nlohmann::json;
namespace fs = std::filesystem;

inline const std::vector<std::string>& mode_names() {
  static const std::vector<std::string> names = {"simulate", "train-pinn", "fit-kernel",
                                                 "fit-tesm", "evaluate",   "intensity"};
  return names;
}

/// Every accepted key with its default. A null default accepts any scalar.
inline json default_config() {
  const TrainConfig t;
  const FistaConfig f;
  const EsmGeometry g;
  return {
      {"mode", nullptr},
      {"output_dir", "out"},
      {"seed", 0},
      {"threads", 1},
      {"c", kSpeedOfSound},
      {"dataset", nullptr},
      {"subset", {{"fraction", 0.25}, {"seed", nullptr}}},
      {"simulate",
       {{"preset", "free-field"}, {"source_wav", nullptr}, {"band_hz", {200.0, 2000.0}}, {"samples", 800}}},
      {"train",
       {{"lambda_pde", t.lambda_pde},
        {"iterations", t.iterations},
        {"lr", t.lr},
        {"adam_beta1", t.adam_beta1},
        {"adam_beta2", t.adam_beta2},
        {"adam_eps", t.adam_eps},
        {"data_batch", t.data_batch},
        {"collocation_count", t.collocation_count},
        {"hidden_width", t.arch.hidden_width},
        {"sinusoidal_layers", t.arch.sinusoidal_layers},
        {"first_omega0", t.arch.first_omega0},
        {"hidden_omega0", t.arch.hidden_omega0},
        {"checkpoint_every", t.checkpoint_every},
        {"log_every", 10}}},
      {"kernel", {{"lambda", 1e-3}, {"fft_size", 2048}}},
      {"tesm",
       {{"sources", g.sources},
        {"radius", g.radius},
        {"taps", g.taps},
        {"coef_samples", 0},
        {"mu", nullptr},
        {"mu_relative", f.mu_relative},
        {"max_iters", f.max_iters},
        {"power_iters", f.power_iters},
        {"tol", f.tol}}},
      {"evaluate", {{"estimate", nullptr}, {"reference", nullptr}, {"method", ""}}},
      {"intensity", {{"checkpoint", nullptr}, {"rho", kAirDensity}}},
  };
}

namespace detail {

inline bool compatible(const json& def, const json& v) {
  if (def.is_null()) return v.is_null() || v.is_primitive();
  if (def.is_number()) return v.is_number();
  if (def.is_array()) return v.is_array();
  return def.type() == v.type();
}

inline void merge_into(json& base, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw ConfigError("configuration " + (prefix.empty() ? "root" : "'" + prefix + "'") + " must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown configuration key '" + key + "'");
    auto& slot = base[it.key()];
    if (slot.is_object()) {
      merge_into(slot, it.value(), key);
    } else {
      if (!compatible(slot, it.value()) && !it.value().is_null())
        throw ConfigError("configuration key '" + key + "' has the wrong type");
      slot = it.value();
    }
  }
}

inline std::string hex(const unsigned char* p, std::size_t n) {
  std::ostringstream os;
  for (std::size_t i = 0; i < n; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(p[i]);
  return os.str();
}

}  // namespace detail

/// SHA-1 over "blob <size>\0" + bytes, as `git hash-object` computes it.
inline std::string git_blob_sha1(const std::string& bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + std::string(1, '\0');
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("cannot allocate a digest context");
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, md.data(), &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("SHA-1 digest failed");
  return detail::hex(md.data(), len);
}

inline std::string file_hash(const fs::path& p) { return git_blob_sha1(sfr::detail::read_file(p)); }

/// Overrides collected from the command line.
struct Overrides {
  std::optional<std::string> mode;
  std::vector<std::string> sets;  // "a.b=value"
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> preset;
};

/// Applies one "a.b.c=value" assignment. The value is parsed as JSON when
/// possible and taken as a plain string otherwise.
inline void apply_set(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects KEY=VALUE, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json patch = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1))
    parts.push_back(rest.substr(0, pos));
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  detail::merge_into(cfg, patch, "");
}

inline json resolve_config(const std::optional<fs::path>& config_path, const Overrides& ov) {
  json cfg = default_config();
  if (config_path) {
    json file;
    try {
      file = json::parse(sfr::detail::read_file(*config_path));
    } catch (const json::parse_error& e) {
      throw ConfigError("cannot parse " + config_path->string() + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    detail::merge_into(cfg, file, "");
  }
  for (const auto& s : ov.sets) apply_set(cfg, s);
  if (ov.mode) {
    if (!cfg["mode"].is_null() && cfg["mode"] != *ov.mode)
      throw ConfigError("command-line mode '" + *ov.mode + "' conflicts with configured mode '" +
                        cfg["mode"].get<std::string>() + "'");
    cfg["mode"] = *ov.mode;
  }
  if (ov.out) cfg["output_dir"] = *ov.out;
  if (ov.seed) cfg["seed"] = *ov.seed;
  if (ov.threads) cfg["threads"] = *ov.threads;
  if (ov.preset) cfg["simulate"]["preset"] = *ov.preset;
  return cfg;
}

/// Everything a mode needs, loaded and checked before any output is written.
struct Prepared {
  json config;
  std::string mode;
  fs::path out_dir;
  ExecPolicy exec;
  std::uint64_t seed = 0;
  double c = kSpeedOfSound;
  std::vector<fs::path> inputs;

  std::optional<PressureField> dataset;
  SensorSubset subset;
  std::optional<DeskPreset> preset;
  std::vector<double> source_signal;
  TrainConfig train;
  double kernel_lambda = 1e-3;
  int kernel_fft = 2048;
  EsmGeometry esm;
  Eigen::Index esm_coef = 0;
  FistaConfig fista;
  std::optional<PressureField> estimate, reference;
  std::string method;
  std::optional<Checkpoint> checkpoint;
  DomainScaling scaling;
  double rho = kAirDensity;
};

namespace detail {

template <class T>
T get(const json& cfg, const char* section, const char* key) {
  try {
    return cfg.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration key '") + section + "." + key + "': " + e.what());
  }
}

inline fs::path required_path(const json& cfg, const std::string& what, const json& v) {
  if (!v.is_string() || v.get<std::string>().empty()) throw ConfigError("mode '" + cfg["mode"].get<std::string>() + "' requires '" + what + "'");
  const fs::path p = v.get<std::string>();
  if (!fs::exists(p)) throw ConfigError("'" + what + "' points to missing file " + p.string());
  return p;
}

inline PressureField load_field(Prepared& p, const fs::path& path) {
  auto f = read_field(path);
  p.inputs.push_back(path);
  p.inputs.push_back(sidecar_path(path));
  return f;
}

inline SensorSubset make_subset(const json& cfg, std::size_t total, std::uint64_t seed) {
  const double frac = get<double>(cfg, "subset", "fraction");
  if (!(frac > 0.0 && frac <= 1.0)) throw ConfigError("subset.fraction must lie in (0, 1]");
  const auto& s = cfg["subset"]["seed"];
  if (!s.is_null() && (!s.is_number_integer() || s.get<std::int64_t>() < 0)) throw ConfigError("subset.seed must be a non-negative integer");
  return select_subset(total, frac, s.is_null() ? seed : s.get<std::uint64_t>());
}

}  // namespace detail

inline Prepared prepare(const json& cfg) {
  Prepared p;
  p.config = cfg;
  if (!cfg["mode"].is_string()) throw ConfigError("no mode given; choose one of simulate, train-pinn, fit-kernel, fit-tesm, evaluate, intensity");
  p.mode = cfg["mode"].get<std::string>();
  if (std::find(mode_names().begin(), mode_names().end(), p.mode) == mode_names().end())
    throw ConfigError("unknown mode '" + p.mode + "'");
  if (!cfg["output_dir"].is_string() || cfg["output_dir"].get<std::string>().empty())
    throw ConfigError("output_dir must be a non-empty path");
  p.out_dir = cfg["output_dir"].get<std::string>();
  if (!cfg["seed"].is_number_integer() || cfg["seed"].get<std::int64_t>() < 0) throw ConfigError("seed must be a non-negative integer");
  p.seed = cfg["seed"].get<std::uint64_t>();
  if (!cfg["threads"].is_number_integer() || cfg["threads"].get<int>() < 1) throw ConfigError("threads must be >= 1");
  p.exec.threads = cfg["threads"].get<int>();
  p.c = cfg["c"].get<double>();
  if (!(p.c > 0.0)) throw ConfigError("c must be positive");

  const auto& mode = p.mode;
  if (mode == "simulate") {
    const auto name = detail::get<std::string>(cfg, "simulate", "preset");
    if (name == "free-field")
      p.preset = DeskPreset::free_field();
    else if (name == "meshrir-like")
      p.preset = DeskPreset::meshrir_like();
    else
      throw ConfigError("unknown preset '" + name + "' (free-field or meshrir-like)");
    const auto samples = detail::get<long>(cfg, "simulate", "samples");
    if (samples < 1) throw ConfigError("simulate.samples must be >= 1");
    p.preset->samples = static_cast<std::size_t>(samples);
    p.preset->env.c = p.c;
    if (p.preset->env.room) p.preset->env.room->c = p.c;
    const auto& wav = cfg["simulate"]["source_wav"];
    if (!wav.is_null()) {
      const auto path = detail::required_path(cfg, "simulate.source_wav", wav);
      p.source_signal = read_wav(path, p.preset->fs).samples;
      p.source_signal.resize(p.preset->samples, 0.0);
      p.inputs.push_back(path);
    } else {
      const auto band = detail::get<std::vector<double>>(cfg, "simulate", "band_hz");
      if (band.size() != 2) throw ConfigError("simulate.band_hz must be [low, high]");
      p.source_signal = bandlimited_noise(p.preset->samples, p.preset->fs, band[0], band[1], p.seed);
    }
  } else if (mode == "train-pinn" || mode == "fit-kernel" || mode == "fit-tesm") {
    p.dataset = detail::load_field(p, detail::required_path(cfg, "dataset", cfg["dataset"]));
    p.subset = detail::make_subset(cfg, static_cast<std::size_t>(p.dataset->sensors()), p.seed);
    if (mode == "train-pinn") {
      auto& t = p.train;
      t.lambda_pde = detail::get<double>(cfg, "train", "lambda_pde");
      t.iterations = detail::get<int>(cfg, "train", "iterations");
      t.lr = detail::get<double>(cfg, "train", "lr");
      t.adam_beta1 = detail::get<double>(cfg, "train", "adam_beta1");
      t.adam_beta2 = detail::get<double>(cfg, "train", "adam_beta2");
      t.adam_eps = detail::get<double>(cfg, "train", "adam_eps");
      t.data_batch = detail::get<std::size_t>(cfg, "train", "data_batch");
      t.collocation_count = detail::get<std::size_t>(cfg, "train", "collocation_count");
      t.arch.hidden_width = detail::get<int>(cfg, "train", "hidden_width");
      t.arch.sinusoidal_layers = detail::get<int>(cfg, "train", "sinusoidal_layers");
      t.arch.first_omega0 = detail::get<double>(cfg, "train", "first_omega0");
      t.arch.hidden_omega0 = detail::get<double>(cfg, "train", "hidden_omega0");
      t.checkpoint_every = detail::get<int>(cfg, "train", "checkpoint_every");
      t.seed = p.seed;
      t.exec = p.exec;
      if (t.arch.hidden_width < 1 || t.arch.sinusoidal_layers < 1)
        throw ConfigError("train.hidden_width and train.sinusoidal_layers must be >= 1");
      if (detail::get<int>(cfg, "train", "log_every") < 0) throw ConfigError("train.log_every must be >= 0");
      t.validate();
    } else if (mode == "fit-kernel") {
      p.kernel_lambda = detail::get<double>(cfg, "kernel", "lambda");
      p.kernel_fft = detail::get<int>(cfg, "kernel", "fft_size");
      if (!(p.kernel_lambda >= 0.0)) throw ConfigError("kernel.lambda must be >= 0");
      if (p.kernel_fft < p.dataset->samples()) throw ConfigError("kernel.fft_size is shorter than the dataset");
    } else {
      p.esm.sources = detail::get<std::size_t>(cfg, "tesm", "sources");
      p.esm.radius = detail::get<double>(cfg, "tesm", "radius");
      p.esm.taps = detail::get<int>(cfg, "tesm", "taps");
      p.esm.c = p.c;
      p.esm_coef = detail::get<long>(cfg, "tesm", "coef_samples");
      if (p.esm.sources < 1 || !(p.esm.radius > 0.0) || p.esm.taps < 1 || p.esm_coef < 0)
        throw ConfigError("tesm geometry must have sources >= 1, radius > 0, taps >= 1, coef_samples >= 0");
      const auto& mu = cfg["tesm"]["mu"];
      if (!mu.is_null()) {
        if (!mu.is_number()) throw ConfigError("tesm.mu must be a number");
        p.fista.mu = mu.get<double>();
      }
      p.fista.mu_relative = detail::get<double>(cfg, "tesm", "mu_relative");
      p.fista.max_iters = detail::get<int>(cfg, "tesm", "max_iters");
      p.fista.power_iters = detail::get<int>(cfg, "tesm", "power_iters");
      p.fista.tol = detail::get<double>(cfg, "tesm", "tol");
      p.fista.seed = p.seed;
      p.fista.validate();
    }
  } else if (mode == "evaluate") {
    p.estimate = detail::load_field(p, detail::required_path(cfg, "evaluate.estimate", cfg["evaluate"]["estimate"]));
    const auto& ref = cfg["evaluate"]["reference"].is_null() ? cfg["dataset"] : cfg["evaluate"]["reference"];
    p.reference = detail::load_field(p, detail::required_path(cfg, "evaluate.reference", ref));
    if (p.estimate->data.rows() != p.reference->data.rows() || p.estimate->data.cols() != p.reference->data.cols())
      throw ConfigError("estimate and reference have different shapes");
    p.subset = detail::make_subset(cfg, static_cast<std::size_t>(p.reference->sensors()), p.seed);
    p.method = detail::get<std::string>(cfg, "evaluate", "method");
  } else if (mode == "intensity") {
    const auto ck = detail::required_path(cfg, "intensity.checkpoint", cfg["intensity"]["checkpoint"]);
    p.checkpoint = load_checkpoint(ck);
    p.inputs.push_back(ck);
    p.inputs.push_back(sidecar_path(ck));
    if (!p.checkpoint->meta.contains("scaling")) throw ConfigError("checkpoint " + ck.string() + " carries no coordinate scaling");
    p.scaling = scaling_from_json(p.checkpoint->meta.at("scaling"));
    p.dataset = detail::load_field(p, detail::required_path(cfg, "dataset", cfg["dataset"]));
    p.rho = detail::get<double>(cfg, "intensity", "rho");
    if (!(p.rho > 0.0)) throw ConfigError("intensity.rho must be positive");
  }
  return p;
}

struct RunResult {
  fs::path manifest;
  std::vector<fs::path> outputs;  // relative to the output directory
  nlohmann::json summary;
};

namespace detail {

inline void write_json(const fs::path& path, const json& j) { sfr::detail::write_file(path, j.dump(2) + "\n"); }

class Run {
 public:
  explicit Run(const Prepared& p) : p_(p) {
    fs::create_directories(p_.out_dir);
    write_json(p_.out_dir / "config.json", p_.config);
    manifest_ = {{"mode", p_.mode}, {"config", p_.config}, {"status", "running"}};
    manifest_["inputs"] = json::array();
    for (const auto& in : p_.inputs) manifest_["inputs"].push_back({{"path", in.string()}, {"sha1", file_hash(in)}});
    manifest_["outputs"] = json::array();
    write_json(manifest_path(), manifest_);
  }

  fs::path path(const std::string& name) const { return p_.out_dir / name; }

  void produced(const std::string& name) { outputs_.push_back(name); }

  void produced_tensor(const std::string& name) {
    produced(name);
    produced(sidecar_path(name).string());
  }

  RunResult finish(json summary) {
    for (const auto& o : outputs_) manifest_["outputs"].push_back({{"path", o}, {"sha1", file_hash(path(o))}});
    manifest_["summary"] = summary;
    manifest_["status"] = "complete";
    write_json(manifest_path(), manifest_);
    RunResult r;
    r.manifest = manifest_path();
    for (const auto& o : outputs_) r.outputs.emplace_back(o);
    r.summary = std::move(summary);
    return r;
  }

 private:
  fs::path manifest_path() const { return p_.out_dir / "manifest.json"; }

  const Prepared& p_;
  json manifest_;
  std::vector<std::string> outputs_;
};

inline void write_subset(Run& run, const SensorSubset& s) {
  write_json(run.path("subset.json"), {{"indices", s.indices}, {"seed", s.seed}});
  run.produced("subset.json");
}

}  // namespace detail

/// Executes a prepared experiment. Progress goes to `log`.
inline RunResult execute(const Prepared& p, std::ostream& log = std::clog) {
  detail::Run run(p);
  json summary = json::object();
  const auto& mode = p.mode;

  if (mode == "simulate") {
    const auto& pre = *p.preset;
    const auto field = simulate_dataset(pre.env, pre.source, pre.grid, p.source_signal, pre.samples, pre.fs);
    write_field(run.path("field.sfrd"), field, p.c);
    run.produced_tensor("field.sfrd");
    summary = {{"samples", field.samples()}, {"sensors", field.sensors()}, {"source", {pre.source.x(), pre.source.y(), pre.source.z()}}};
  } else if (mode == "train-pinn") {
    const auto& field = *p.dataset;
    auto cfg = p.train;
    cfg.checkpoint_path = run.path("checkpoint.sfrd");
    const int log_every = p.config["train"]["log_every"].get<int>();
    std::ofstream loss(run.path("loss.csv"));
    if (!loss) throw Error("cannot write " + run.path("loss.csv").string());
    loss.precision(17);
    loss << "iteration,data_term,pde_term,total\n";
    const auto res = train(field, p.subset, cfg, [&](const LossReport& r) {
      loss << r.iteration << ',' << r.data_term << ',' << r.pde_term << ',' << r.total << '\n';
      if (log_every > 0 && (r.iteration % log_every == 0 || r.iteration + 1 == cfg.iterations))
        log << "iteration " << r.iteration << " data " << r.data_term << " pde " << r.pde_term << std::endl;
    });
    const auto& fr = res.final_report;
    loss << cfg.iterations << ',' << fr.data_term << ',' << fr.pde_term << ',' << fr.total << '\n';
    loss.close();
    run.produced("loss.csv");
    save_checkpoint(cfg.checkpoint_path, res.net,
                    {{"iteration", cfg.iterations}, {"scaling", scaling_to_json(res.scaling)}});
    run.produced_tensor("checkpoint.sfrd");
    const auto est = pinn_reconstruct(res.net, res.scaling, field.grid, field.samples(), field.sample_rate, field.t0, p.exec);
    write_field(run.path("estimate.sfrd"), est, p.c);
    run.produced_tensor("estimate.sfrd");
    detail::write_subset(run, p.subset);
    summary = {{"final_data_term", fr.data_term}, {"final_pde_term", fr.pde_term}};
    if (!res.history.empty()) summary["initial_pde_term"] = res.history.front().pde_term;
  } else if (mode == "fit-kernel") {
    const auto& field = *p.dataset;
    const auto model = kernel_fit(field, p.subset, p.kernel_lambda, p.kernel_fft, p.c, p.exec);
    const auto est = kernel_reconstruct(model, field.grid, p.exec);
    write_field(run.path("estimate.sfrd"), est, p.c);
    run.produced_tensor("estimate.sfrd");
    detail::write_subset(run, p.subset);
    summary = {{"bins", model.bins()}};
  } else if (mode == "fit-tesm") {
    const auto& field = *p.dataset;
    const auto obs = restrict_to(field, p.subset);
    const auto dict = make_esm_dictionary(obs.grid, obs.samples(), obs.sample_rate, p.esm, p.esm_coef, p.exec);
    const auto res = fista(dict, obs, p.fista);
    const auto est = tesm_reconstruct(dict, res.w, field.grid, field.t0);
    write_field(run.path("estimate.sfrd"), est, p.c);
    run.produced_tensor("estimate.sfrd");
    write_tensor(run.path("coefficients.sfrd"), matrix_to_tensor(res.w));
    run.produced("coefficients.sfrd");
    std::ofstream os(run.path("objective.csv"));
    os.precision(17);
    os << "iteration,objective\n";
    for (std::size_t i = 0; i < res.objective.size(); ++i) os << i << ',' << res.objective[i] << '\n';
    os.close();
    run.produced("objective.csv");
    detail::write_subset(run, p.subset);
    summary = {{"iterations", res.iterations}, {"restarts", res.restarts}, {"mu", res.mu},
               {"lipschitz", res.lipschitz}, {"converged", res.converged}, {"sparsity", sparsity(res.w)}};
  } else if (mode == "evaluate") {
    const auto report = nmse_report(*p.estimate, *p.reference, p.subset, p.method);
    detail::write_json(run.path("report.json"), report.to_json());
    run.produced("report.json");
    sfr::detail::write_file(run.path("report.csv"), NmseReport::csv_header() + "\n" + report.csv_row() + "\n");
    run.produced("report.csv");
    summary = {{"nmse_total_db", report.total}, {"nmse_sig_db", report.sig},
               {"nmse_val_db", report.val ? json(*report.val) : json(nullptr)}};
  } else if (mode == "intensity") {
    const auto& field = *p.dataset;
    const auto& net = p.checkpoint->net;
    const auto u = particle_velocity(net, p.scaling, field.grid, field.samples(), field.sample_rate, field.t0, p.rho, p.exec);
    const auto pressure = pinn_reconstruct(net, p.scaling, field.grid, field.samples(), field.sample_rate, field.t0, p.exec);
    const auto inten = instantaneous_intensity(pressure, u);
    write_tensor(run.path("velocity.sfrd"), vector_field_to_tensor(u));
    run.produced("velocity.sfrd");
    write_tensor(run.path("intensity.sfrd"), vector_field_to_tensor(inten));
    run.produced("intensity.sfrd");
    write_intensity_csv(run.path("intensity.csv"), field.grid, time_average(inten));
    run.produced("intensity.csv");
    summary = {{"sensors", field.sensors()}, {"samples", field.samples()}};
  }
  return run.finish(summary);
}

inline RunResult run(const std::optional<fs::path>& config_path, const Overrides& ov, std::ostream& log = std::clog) {
  return execute(prepare(resolve_config(config_path, ov)), log);
}

}  // namespace sfr::app
