#pragma once

// Physics-informed training of the sinusoidal network. The loss is
//
//   L = mean_{(m,n) in batch} (p_hat(r_m, t_n) - p(r_m, t_n))^2
//     + lambda * mean_{q < Q} (lap p_hat(u_q) - p_hat_tt(u_q) / c_scaled^2)^2
//
// with the data batch drawn from the observed sensors and the Q collocation
// points drawn uniformly over the whole normalized box, so the wave equation
// is enforced away from the microphones as well.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sfr/error.hpp"
#include "sfr/field_core.hpp"
#include "sfr/parallel.hpp"
#include "sfr/random.hpp"
#include "sfr/siren.hpp"
#include "sfr/taylor_jet.hpp"

namespace sfr {

struct TrainConfig {
  double lambda_pde = 1e-5;
  int iterations = 3000;
  double lr = 5e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t data_batch = 4096;  // 0 = every observed (sensor, sample) pair
  std::size_t collocation_count = 8192;
  std::uint64_t seed = 0;
  SirenArchitecture arch;
  int checkpoint_every = 500;
  std::filesystem::path checkpoint_path;  // empty = no periodic checkpoints
  ExecPolicy exec;

  void validate() const {
    if (!(lambda_pde >= 0.0) || !std::isfinite(lambda_pde)) throw ConfigError("lambda_pde must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (iterations < 0) throw ConfigError("iterations must be >= 0");
    if (collocation_count < 1) throw ConfigError("collocation_count must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
    if (exec.threads < 1 || exec.chunk < 1) throw ConfigError("threads and chunk size must be >= 1");
  }
};

struct AdamState {
  NetworkGradient m, v;
  long step = 0;

  static AdamState zeros_like(const SirenNetwork& net) {
    return {NetworkGradient::zeros_like(net), NetworkGradient::zeros_like(net), 0};
  }
};

struct LossReport {
  double data_term = 0.0;
  double pde_term = 0.0;
  double total = 0.0;
  int iteration = 0;
};

/// lap(p) - p_tt / c^2 from per-axis jets in network coordinates.
inline double pde_residual(const JetBundle& jets, double c_scaled) {
  return jets.diag2[1] + jets.diag2[2] + jets.diag2[3] - jets.diag2[0] / (c_scaled * c_scaled);
}

/// Q points uniform over [-100, 100] x [-1, 1]^3, one stream per (seed, iteration).
inline std::vector<Vec4> sample_collocation(std::size_t count, std::uint64_t seed, std::uint64_t iteration) {
  if (count < 1) throw Error("collocation count must be >= 1");
  auto rng = rnd::stream({seed, iteration, 0xc011ULL});
  std::vector<Vec4> pts(count);
  for (auto& u : pts) {
    u[0] = rnd::uniform(rng, -100.0, 100.0);
    for (int i = 1; i < 4; ++i) u[i] = rnd::uniform(rng, -1.0, 1.0);
  }
  return pts;
}

/// Observed samples flattened to (network coordinate, pressure) pairs,
/// ordered sensor-major.
struct Observations {
  Eigen::Matrix<double, 4, Eigen::Dynamic> coords;
  Eigen::VectorXd values;

  Eigen::Index size() const noexcept { return values.size(); }

  static Observations from_field(const PressureField& field, const SensorSubset& subset, const DomainScaling& scaling) {
    if (subset.size() == 0) throw Error("observation subset is empty");
    Observations o;
    const Eigen::Index N = field.samples();
    const auto total = static_cast<Eigen::Index>(subset.size()) * N;
    o.coords.resize(4, total);
    o.values.resize(total);
    Eigen::Index k = 0;
    for (auto m : subset.indices) {
      if (m >= static_cast<std::size_t>(field.sensors())) throw Error("subset index out of range");
      for (Eigen::Index n = 0; n < N; ++n, ++k) {
        o.coords.col(k) = scaling.to_network(field.grid.positions[m], field.time(n));
        o.values[k] = field.data(n, static_cast<Eigen::Index>(m));
      }
    }
    return o;
  }
};

struct LossEvaluation {
  LossReport report;
  NetworkGradient grad;
};

namespace detail {

/// Sum over chunks of the squared-error data term and its weight gradient.
/// `scale` multiplies the loss (1/B for a mean).
inline void accumulate_data_term(const SirenNetwork& net, const Observations& obs, const std::vector<Eigen::Index>& batch,
                                 double scale, const ExecPolicy& exec, double& loss, NetworkGradient& grad) {
  const std::size_t chunks = (batch.size() + exec.chunk - 1) / exec.chunk;
  const std::size_t workers = worker_count(chunks, exec.threads);
  std::vector<double> part_loss(workers, 0.0);
  std::vector<NetworkGradient> part_grad(workers, NetworkGradient::zeros_like(net));
  parallel_chunks(chunks, exec.threads, [&](std::size_t c, std::size_t w) {
    const std::size_t lo = c * exec.chunk, hi = std::min(batch.size(), lo + exec.chunk);
    const auto P = static_cast<Eigen::Index>(hi - lo);
    Eigen::Matrix<double, 4, Eigen::Dynamic> u(4, P);
    Eigen::VectorXd y(P);
    for (Eigen::Index q = 0; q < P; ++q) {
      u.col(q) = obs.coords.col(batch[lo + static_cast<std::size_t>(q)]);
      y[q] = obs.values[batch[lo + static_cast<std::size_t>(q)]];
    }
    const JetTape tape(net, JetPlan::value_only(), u);
    const Eigen::RowVectorXd err = tape.value() - y.transpose();
    part_loss[w] += scale * err.squaredNorm();
    tape.backward(net, (2.0 * scale) * err, part_grad[w]);
  });
  for (std::size_t w = 0; w < workers; ++w) {
    loss += part_loss[w];
    grad += part_grad[w];
  }
}

/// Sum over chunks of scale * residual^2 with its weight gradient (wave-operator channel).
inline void accumulate_pde_term(const SirenNetwork& net, const std::vector<Vec4>& pts, double c_scaled, double scale,
                                double grad_scale, const ExecPolicy& exec, double& loss, NetworkGradient& grad) {
  const std::size_t chunks = (pts.size() + exec.chunk - 1) / exec.chunk;
  const std::size_t workers = worker_count(chunks, exec.threads);
  std::vector<double> part_loss(workers, 0.0);
  std::vector<NetworkGradient> part_grad(workers, NetworkGradient::zeros_like(net));
  const JetPlan plan = JetPlan::wave_operator(c_scaled);
  parallel_chunks(chunks, exec.threads, [&](std::size_t c, std::size_t w) {
    const std::size_t lo = c * exec.chunk, hi = std::min(pts.size(), lo + exec.chunk);
    const auto P = static_cast<Eigen::Index>(hi - lo);
    Eigen::Matrix<double, 4, Eigen::Dynamic> u(4, P);
    for (Eigen::Index q = 0; q < P; ++q) u.col(q) = pts[lo + static_cast<std::size_t>(q)];
    const JetTape tape(net, plan, u);
    const Eigen::RowVectorXd r = tape.second(0);
    part_loss[w] += scale * r.squaredNorm();
    if (grad_scale != 0.0) {
      Eigen::RowVectorXd adj = Eigen::RowVectorXd::Zero(plan.channels() * P);
      adj.segment((1 + plan.first_order()) * P, P) = (2.0 * grad_scale) * r;
      tape.backward(net, adj, part_grad[w]);
    }
  });
  for (std::size_t w = 0; w < workers; ++w) {
    loss += part_loss[w];
    grad += part_grad[w];
  }
}

}  // namespace detail

/// Data batch indices for one iteration: uniform with replacement, or every
/// observation when data_batch == 0.
inline std::vector<Eigen::Index> sample_data_batch(Eigen::Index available, std::size_t batch, std::uint64_t seed,
                                                   std::uint64_t iteration) {
  std::vector<Eigen::Index> idx;
  if (batch == 0) {
    idx.resize(static_cast<std::size_t>(available));
    for (Eigen::Index k = 0; k < available; ++k) idx[static_cast<std::size_t>(k)] = k;
    return idx;
  }
  auto rng = rnd::stream({seed, iteration, 0xda7aULL});
  idx.resize(batch);
  for (auto& k : idx) k = static_cast<Eigen::Index>(rnd::index(rng, static_cast<std::uint64_t>(available)));
  return idx;
}

/// Loss terms and the exact weight gradient of the total at one iteration.
inline LossEvaluation loss_eval(const SirenNetwork& net, const Observations& obs, const DomainScaling& scaling,
                                const TrainConfig& cfg, int iteration) {
  if (obs.size() == 0) throw Error("no observations");
  LossEvaluation out{{}, NetworkGradient::zeros_like(net)};
  const auto batch = sample_data_batch(obs.size(), cfg.data_batch, cfg.seed, static_cast<std::uint64_t>(iteration));
  detail::accumulate_data_term(net, obs, batch, 1.0 / static_cast<double>(batch.size()), cfg.exec, out.report.data_term,
                               out.grad);

  const auto colloc = sample_collocation(cfg.collocation_count, cfg.seed, static_cast<std::uint64_t>(iteration));
  const double inv_q = 1.0 / static_cast<double>(colloc.size());
  detail::accumulate_pde_term(net, colloc, scaling.c_scaled, inv_q, cfg.lambda_pde * inv_q, cfg.exec,
                              out.report.pde_term, out.grad);

  out.report.total = out.report.data_term + cfg.lambda_pde * out.report.pde_term;
  out.report.iteration = iteration;
  return out;
}

/// Bias-corrected Adam update in place.
inline void adam_step(SirenNetwork& net, const NetworkGradient& grad, AdamState& state, const TrainConfig& cfg) {
  if (grad.dW.size() != net.layers.size() || state.m.dW.size() != net.layers.size())
    throw Error("adam_step: gradient or state does not match the network");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (grad.dW[l].rows() != net.layers[l].W.rows() || grad.dW[l].cols() != net.layers[l].W.cols() ||
        grad.db[l].size() != net.layers[l].b.size())
      throw Error("adam_step: gradient shape mismatch in layer " + std::to_string(l));
    if (!grad.dW[l].allFinite() || !grad.db[l].allFinite())
      throw NumericalError("adam_step: non-finite gradient in layer " + std::to_string(l));
  }
  ++state.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.adam_eps);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    update(net.layers[l].W, grad.dW[l], state.m.dW[l], state.v.dW[l]);
    update(net.layers[l].b, grad.db[l], state.m.db[l], state.v.db[l]);
  }
}

class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(int iteration, const std::string& what)
      : NumericalError("training diverged at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

struct TrainResult {
  SirenNetwork net;
  DomainScaling scaling;
  std::vector<LossReport> history;  // loss at the weights used for each update
  LossReport final_report;          // loss of the returned network
};

using TrainCallback = std::function<void(const LossReport&)>;

/// Runs cfg.iterations of loss_eval + adam_step from a fresh initialization.
inline TrainResult train(const PressureField& field, const SensorSubset& subset, const TrainConfig& cfg,
                         const TrainCallback& on_iteration = {}) {
  cfg.validate();
  field.validate();
  TrainResult res;
  res.scaling = normalize_coords(field);
  const auto obs = Observations::from_field(field, subset, res.scaling);
  res.net = init_siren({cfg.seed, cfg.arch});
  auto state = AdamState::zeros_like(res.net);
  res.history.reserve(static_cast<std::size_t>(cfg.iterations));

  auto checkpoint = [&](int iteration) {
    if (cfg.checkpoint_path.empty()) return;
    save_checkpoint(cfg.checkpoint_path, res.net,
                    {{"iteration", iteration}, {"scaling", scaling_to_json(res.scaling)}});
  };

  for (int it = 0; it < cfg.iterations; ++it) {
    auto ev = loss_eval(res.net, obs, res.scaling, cfg, it);
    if (!std::isfinite(ev.report.total)) throw TrainingDiverged(it, "total loss is not finite");
    res.history.push_back(ev.report);
    if (on_iteration) on_iteration(ev.report);
    try {
      adam_step(res.net, ev.grad, state, cfg);
    } catch (const NumericalError& e) {
      throw TrainingDiverged(it, e.what());
    }
    if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0) checkpoint(it + 1);
  }
  res.final_report = loss_eval(res.net, obs, res.scaling, cfg, cfg.iterations).report;
  if (!std::isfinite(res.final_report.total)) throw TrainingDiverged(cfg.iterations, "total loss is not finite");
  return res;
}

/// Evaluates the network on every (sensor, sample) of a target grid.
inline PressureField pinn_reconstruct(const SirenNetwork& net, const DomainScaling& scaling, const SensorGrid& grid,
                                      Eigen::Index samples, double sample_rate, double t0, const ExecPolicy& exec = {}) {
  PressureField out;
  out.grid = grid;
  out.sample_rate = sample_rate;
  out.t0 = t0;
  out.data.resize(samples, static_cast<Eigen::Index>(grid.count()));
  const auto total = static_cast<std::size_t>(out.data.size());
  const std::size_t chunks = (total + exec.chunk - 1) / exec.chunk;
  parallel_chunks(chunks, exec.threads, [&](std::size_t c, std::size_t) {
    const std::size_t lo = c * exec.chunk, hi = std::min(total, lo + exec.chunk);
    Eigen::Matrix<double, 4, Eigen::Dynamic> u(4, static_cast<Eigen::Index>(hi - lo));
    for (std::size_t k = lo; k < hi; ++k) {
      const auto m = static_cast<Eigen::Index>(k) / samples, n = static_cast<Eigen::Index>(k) % samples;
      u.col(static_cast<Eigen::Index>(k - lo)) =
          scaling.to_network(grid.positions[static_cast<std::size_t>(m)], t0 + static_cast<double>(n) / sample_rate);
    }
    const JetTape tape(net, JetPlan::value_only(), u);
    for (std::size_t k = lo; k < hi; ++k) out.data.data()[k] = tape.value()[static_cast<Eigen::Index>(k - lo)];
  });
  return out;
}

}  // namespace sfr
