// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
// Criterion 5 trains the canonical network three times. When a timing probe
// projects that a single canonical run cannot finish within its 30 minute
// budget on this machine, the criterion is reported as failed with the
// projection and a reduced-size diagnostic is printed instead. Setting
// SFR_ACCEPT_FULL=1 forces the canonical runs regardless.

#include <chrono>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

#include "../support/oracles.hpp"
#include "sfr/acoustic_post.hpp"
#include "sfr/experiment.hpp"
#include "sfr/kernel_interp.hpp"
#include "sfr/metrics.hpp"
#include "sfr/pinn_train.hpp"
#include "sfr/room_sim.hpp"
#include "sfr/taylor_jet.hpp"
#include "sfr/tesm.hpp"

using namespace sfr;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  std::vector<std::string> notes;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string sci(double x, int prec = 3) {
  std::ostringstream os;
  os << std::setprecision(prec) << x;
  return os.str();
}

int hardware_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  auto rng = rnd::stream({seed});
  Eigen::MatrixXd x(r, c);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rnd::normal(rng);
  return x;
}

PressureField desk_dataset() {
  const auto preset = DeskPreset::free_field();
  const auto sig = bandlimited_noise(preset.samples, preset.fs, 200.0, 2000.0, 0);
  return simulate_dataset(preset.env, preset.source, preset.grid, sig, preset.samples, preset.fs);
}

// 1 ---------------------------------------------------------------------------

Outcome derivative_exactness() {
  const auto t0 = Clock::now();
  auto rng = rnd::stream({101});
  double worst1 = 0.0, worst2 = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto net = oracle::random_network(1000 + seed, 512, 4);
    const Vec4 u(rnd::uniform(rng, -100, 100), rnd::uniform(rng, -1, 1), rnd::uniform(rng, -1, 1),
                 rnd::uniform(rng, -1, 1));
    const auto j = network_jets(net, u);
    const auto fd = oracle::finite_difference_jets([&](const Vec4& v) { return forward(net, v); }, u, 1e-2);
    worst1 = std::max(worst1, oracle::relative_error(j.grad, fd.grad));
    worst2 = std::max(worst2, oracle::relative_error(j.diag2, fd.diag2));
  }
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = worst1 < 1e-6 && worst2 < 1e-6 && t < 10.0;
  o.detail = "20 nets 4x512: first-order rel err " + sci(worst1) + ", second-order " + sci(worst2) + ", " +
             sci(t) + " s";
  return o;
}

// 2 ---------------------------------------------------------------------------

Outcome weight_gradient_exactness() {
  const auto t0 = Clock::now();
  PressureField f;
  f.grid = SensorGrid::cubic(Vec3::Zero(), 2, 0.1);
  f.grid.positions.resize(4);
  f.data = 0.2 * random_matrix(6, 4, 3);
  const auto scaling = normalize_coords(f);
  const auto obs = Observations::from_field(f, SensorSubset::all(4), scaling);
  TrainConfig cfg;
  cfg.arch = {4, 8, 2, 0.5, 30.0};
  cfg.data_batch = 0;
  cfg.collocation_count = 4;
  double worst = 0.0, worst_norm = 0.0;
  for (double lambda : {1e-5, 1.0}) {
    cfg.lambda_pde = lambda;
    const auto net = oracle::random_network(6, 8, 2);
    const auto got = loss_eval(net, obs, scaling, cfg, 1).grad.flatten();
    const auto fd = oracle::finite_difference_weights(
        net, [&](const SirenNetwork& n) { return loss_eval(n, obs, scaling, cfg, 1).report.total; }, 1e-4);
    worst = std::max(worst, oracle::worst_weight_error(got, fd));
    Eigen::Map<const Eigen::VectorXd> g(got.data(), static_cast<Eigen::Index>(got.size())),
        r(fd.data(), static_cast<Eigen::Index>(fd.size()));
    worst_norm = std::max(worst_norm, oracle::relative_error(g, r));
  }
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = worst < 1e-4 && t < 60.0;
  o.detail = "3-layer width-8 net, 4 sensors, Q=4: worst per-weight rel err " + sci(worst) + " (norm-wise " +
             sci(worst_norm) + "), " + sci(t) + " s";
  return o;
}

// 3 ---------------------------------------------------------------------------

Outcome pde_residual_oracle() {
  const double c = 0.578;
  auto rng = rnd::stream({303});
  double worst = 0.0;
  for (double kappa : {1.0, 10.0, 50.0}) {
    SirenNetwork net;
    SirenLayer a;
    a.W = Eigen::MatrixXd(1, 4);
    a.W << -c * kappa, kappa, 0.0, 0.0;
    a.b = Eigen::VectorXd::Zero(1);
    SirenLayer out;
    out.W = Eigen::MatrixXd::Ones(1, 1);
    out.b = Eigen::VectorXd::Zero(1);
    out.is_linear = true;
    net.layers = {a, out};
    for (int k = 0; k < 200; ++k) {
      const Vec4 u(rnd::uniform(rng, -100, 100), rnd::uniform(rng, -1, 1), rnd::uniform(rng, -1, 1),
                   rnd::uniform(rng, -1, 1));
      worst = std::max(worst, std::abs(pde_residual(network_jets(net, u), c)) / (kappa * kappa));
      // Hand-computed jets of the same wave.
      const double p = std::sin(kappa * u[1] - c * kappa * u[0]);
      JetBundle j;
      j.p = p;
      j.diag2 = Vec4(-c * c * kappa * kappa * p, -kappa * kappa * p, 0.0, 0.0);
      worst = std::max(worst, std::abs(pde_residual(j, c)) / (kappa * kappa));
    }
  }
  Outcome o;
  o.pass = worst < 1e-10;
  o.detail = "max |residual| / kappa^2 over kappa in {1, 10, 50}: " + sci(worst);
  return o;
}

// 4 ---------------------------------------------------------------------------

Outcome scaled_c() {
  const auto preset = DeskPreset::free_field();
  const auto s = normalize_coords(preset.grid, static_cast<double>(preset.samples) / preset.fs, 0.0, 346.8);
  Outcome o;
  o.pass = std::abs(s.c_scaled - 0.578) <= 1e-3;
  o.detail = "c_scaled = " + sci(s.c_scaled, 6) + " (aperture " +
             sci((preset.grid.bbox_max() - preset.grid.bbox_min()).maxCoeff()) + " m)";
  return o;
}

// 5 ---------------------------------------------------------------------------

struct TrialResult {
  double fraction = 0.0;
  double val_db = 0.0;
  double pde_init = 0.0, pde_final = 0.0;
  double seconds = 0.0;
};

TrialResult train_trial(const PressureField& field, double fraction, const TrainConfig& cfg) {
  const auto t0 = Clock::now();
  const auto subset = select_subset(field.grid, fraction, 0);
  const auto res = train(field, subset, cfg);
  const auto est = pinn_reconstruct(res.net, res.scaling, field.grid, field.samples(), field.sample_rate, field.t0, cfg.exec);
  TrialResult r;
  r.fraction = fraction;
  r.val_db = nmse_val(est, field, subset);
  r.pde_init = res.history.empty() ? res.final_report.pde_term : res.history.front().pde_term;
  r.pde_final = res.final_report.pde_term;
  r.seconds = seconds_since(t0);
  return r;
}

std::string describe(const TrialResult& r) {
  return sci(100 * r.fraction) + "%: NMSE_VAL " + sci(r.val_db) + " dB, pde " + sci(r.pde_init) + " -> " +
         sci(r.pde_final) + ", " + sci(r.seconds) + " s";
}

Outcome desk_reconstruction() {
  Outcome o;
  const auto field = desk_dataset();
  TrainConfig canonical;
  canonical.exec.threads = hardware_threads();
  canonical.checkpoint_every = 0;

  // Timing probe: three canonical iterations; one full iteration lies between
  // the second and third callbacks.
  std::vector<Clock::time_point> stamps;
  TrainConfig probe = canonical;
  probe.iterations = 3;
  train(field, select_subset(field.grid, 0.25, 0), probe, [&](const LossReport&) { stamps.push_back(Clock::now()); });
  const double per_iter = std::chrono::duration<double>(stamps[2] - stamps[1]).count();
  const double projected = per_iter * canonical.iterations;
  const bool full = std::getenv("SFR_ACCEPT_FULL") && std::string(std::getenv("SFR_ACCEPT_FULL")) == "1";
  o.notes.push_back("canonical iteration " + sci(per_iter) + " s on " + std::to_string(canonical.exec.threads) +
                    " thread(s); projected " + sci(projected / 60.0) + " min per run");

  auto check = [&](const std::vector<TrialResult>& r, bool timed) {
    const auto& q = r[0];
    const bool nmse = q.val_db <= -10.0;
    const bool pde = q.pde_final <= q.pde_init / 10.0;
    const bool trend = r[2].val_db <= r[1].val_db && r[1].val_db <= r[0].val_db;
    const bool wall = !timed || q.seconds < 1800.0;
    return std::array<bool, 4>{nmse, pde, trend, wall};
  };

  if (!full && projected >= 1800.0) {
    o.pass = false;
    o.detail = "canonical training projected at " + sci(projected / 60.0) + " min per run, over the 30 min budget; "
               "canonical NMSE/PDE/trend checks not run (SFR_ACCEPT_FULL=1 forces them)";
    TrainConfig small = canonical;
    small.arch = {4, 64, 3, 0.5, 30.0};
    small.iterations = 1000;
    small.lr = 1e-3;
    small.collocation_count = 512;
    small.data_batch = 2048;
    std::vector<TrialResult> r;
    for (double frac : {0.25, 0.5, 0.75}) r.push_back(train_trial(field, frac, small));
    const auto c = check(r, false);
    o.notes.push_back("reduced diagnostic (3x64 net, 1000 iterations, lr 1e-3): NMSE_VAL<=-10 " +
                      std::string(c[0] ? "yes" : "no") + ", pde drop >=10x " + (c[1] ? "yes" : "no") +
                      ", subset trend " + (c[2] ? "yes" : "no"));
    for (const auto& t : r) o.notes.push_back("  " + describe(t));
    return o;
  }

  std::vector<TrialResult> r;
  for (double frac : {0.25, 0.5, 0.75}) r.push_back(train_trial(field, frac, canonical));
  const auto c = check(r, true);
  o.pass = c[0] && c[1] && c[2] && c[3];
  o.detail = "canonical: " + describe(r[0]) + "; trend " + sci(r[0].val_db) + " >= " + sci(r[1].val_db) + " >= " +
             sci(r[2].val_db);
  for (const auto& t : r) o.notes.push_back("  " + describe(t));
  return o;
}

// 6 ---------------------------------------------------------------------------

Eigen::Matrix3cd cofactor_inverse(const Eigen::Matrix3cd& a) {
  Eigen::Matrix3cd adj;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const int r0 = (j + 1) % 3, r1 = (j + 2) % 3, c0 = (i + 1) % 3, c1 = (i + 2) % 3;
      adj(i, j) = a(r0, c0) * a(r1, c1) - a(r0, c1) * a(r1, c0);
    }
  const std::complex<double> det = a(0, 0) * adj(0, 0) + a(0, 1) * adj(1, 0) + a(0, 2) * adj(2, 0);
  return adj / det;
}

Outcome kernel_baseline() {
  // Explicit inverse on three sensors, every bin.
  const std::vector<Vec3> pos{{0.0, 0.0, 0.0}, {0.1, 0.05, 0.0}, {-0.05, 0.1, 0.2}};
  PressureField f;
  f.grid.positions = pos;
  f.data = random_matrix(800, 3, 4);
  const double lambda = 1e-3;
  const auto model = kernel_fit(f, lambda, 2048);
  const auto p = dft_forward(f.data, 2048);
  double inv_err = 0.0;
  for (Eigen::Index b = 0; b < model.bins(); ++b) {
    const double k = model.k[b];
    Eigen::Matrix3cd a;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double x = k * (pos[i] - pos[j]).norm();
        a(i, j) = (x == 0.0 ? 1.0 : std::sin(x) / x) + (i == j ? lambda : 0.0);
      }
    const Eigen::Vector3cd want = cofactor_inverse(a) * p.row(b).transpose();
    inv_err = std::max(inv_err, (model.alpha.row(b).transpose() - want).norm() / (1.0 + want.norm()));
  }

  // Interpolation with negligible regularization.
  const std::vector<Vec3> spread{{0.0, 0.0, 0.0}, {1.0, 0.2, 0.0}, {0.3, 1.1, 0.4}, {-0.7, 0.5, 0.9}};
  PressureField g;
  g.grid.positions = spread;
  g.data = random_matrix(800, 4, 5);
  g.data.rowwise() -= g.data.colwise().mean();
  const auto interp = kernel_fit(g, 1e-12, 2048);
  const auto rec = kernel_spectrum(interp, spread);
  const auto pg = dft_forward(g.data, 2048);
  const double scale = pg.cwiseAbs().maxCoeff();
  double interp_err = 0.0;
  for (Eigen::Index b = 0; b < pg.rows(); ++b)
    for (Eigen::Index m = 0; m < 4; ++m) interp_err = std::max(interp_err, std::abs(rec(b, m) - pg(b, m)) / scale);

  // Desk dataset, 16 of 64 sensors.
  const auto field = desk_dataset();
  const auto subset = select_subset(field.grid, 0.25, 0);
  const auto est = kernel_reconstruct(kernel_fit(field, subset, 1e-3), field.grid, {hardware_threads(), 1});
  const double sig = nmse_sig(est, field, subset), val = nmse_val(est, field, subset);

  Outcome o;
  o.pass = inv_err < 1e-10 && interp_err < 1e-8 && sig <= -20.0;
  o.detail = "explicit-inverse err " + sci(inv_err) + ", interpolation err " + sci(interp_err) + ", desk NMSE_SIG " +
             sci(sig) + " dB";
  o.notes.push_back("desk NMSE_VAL " + sci(val) + " dB with 16 of 64 sensors");
  return o;
}

// 7 ---------------------------------------------------------------------------

Outcome tesm_correctness() {
  const auto grid = SensorGrid::cubic(Vec3::Zero(), 2, 0.2);
  EsmGeometry geo;
  geo.sources = 8;
  double adj_err = 0.0;
  for (Eigen::Index coef : {Eigen::Index{0}, Eigen::Index{96}}) {
    const auto d = make_esm_dictionary(grid, 128, 16000.0, geo, coef);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto w = random_matrix(d.coef_samples(), 8, 10 + seed), y = random_matrix(128, 8, 20 + seed);
      const double lhs = (d.apply(w).array() * y.array()).sum();
      const double rhs = (w.array() * d.adjoint(y).array()).sum();
      adj_err = std::max(adj_err, std::abs(lhs - rhs) / std::abs(lhs));
    }
  }

  const auto d = make_esm_dictionary(grid, 128, 16000.0, geo, 64);
  Eigen::MatrixXd w_true = Eigen::MatrixXd::Zero(64, 8);
  w_true(10, 0) = 1.0;
  w_true(25, 2) = -0.7;
  w_true(40, 3) = 0.5;
  w_true(5, 5) = 1.3;
  w_true(50, 7) = -0.9;
  FistaConfig cfg;
  cfg.mu = 1e-7;
  cfg.max_iters = 20000;
  cfg.tol = 1e-15;
  const auto res = fista(d, d.apply(w_true), cfg);
  const double rel = (res.w - w_true).norm() / w_true.norm();
  // Support: the five largest recovered magnitudes sit exactly on the true atoms.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(res.w.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::partial_sort(order.begin(), order.begin() + 5, order.end(),
                    [&](Eigen::Index a, Eigen::Index b) { return std::abs(res.w.data()[a]) > std::abs(res.w.data()[b]); });
  bool support = true;
  for (int i = 0; i < 5; ++i) support = support && w_true.data()[order[static_cast<std::size_t>(i)]] != 0.0;

  Outcome o;
  o.pass = adj_err < 1e-10 && rel < 1e-3 && support;
  o.detail = "adjoint identity err " + sci(adj_err) + ", 5-atom recovery rel err " + sci(rel) + ", support " +
             (support ? "correct" : "wrong") + " (" + std::to_string(res.iterations) + " iterations)";
  return o;
}

// 8 ---------------------------------------------------------------------------

Outcome metric_identities() {
  auto rng = rnd::stream({808});
  auto make = [](Eigen::Index n, std::size_t m, std::uint64_t seed) {
    PressureField f;
    f.grid.positions.resize(m);
    for (std::size_t i = 0; i < m; ++i) f.grid.positions[i] = Vec3(0.1 * static_cast<double>(i), 0, 0);
    f.data = random_matrix(n, static_cast<Eigen::Index>(m), seed);
    return f;
  };
  const auto ref = make(64, 16, 1);
  auto twice = ref;
  twice.data *= 2.0;
  const double db = nmse_total(twice, ref);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 4 + rnd::index(rng, 60);
    const auto r = make(32, m, 100 + static_cast<std::uint64_t>(trial));
    auto e = make(32, m, 5000 + static_cast<std::uint64_t>(trial));
    e.data = r.data + rnd::uniform(rng, 0.01, 2.0) * e.data;
    const std::size_t observed = 1 + rnd::index(rng, m - 1);
    const auto sub = select_subset(m, static_cast<double>(observed) / static_cast<double>(m),
                                   static_cast<std::uint64_t>(trial));
    const double mt = static_cast<double>(sub.size()), mm = static_cast<double>(m);
    const double lhs = mt * std::pow(10.0, nmse_sig(e, r, sub) / 10.0) +
                       (mm - mt) * std::pow(10.0, nmse_val(e, r, sub) / 10.0);
    const double rhs = mm * std::pow(10.0, nmse_total(e, r) / 10.0);
    worst = std::max(worst, std::abs(lhs - rhs) / rhs);
  }
  Outcome o;
  o.pass = std::abs(db) < 1e-12 && worst < 1e-10;
  o.detail = "est = 2 ref gives " + sci(db) + " dB; decomposition rel err " + sci(worst) + " over 100 fields";
  return o;
}

// 9 ---------------------------------------------------------------------------

Outcome intensity_sanity() {
  const auto t0 = Clock::now();
  const auto preset = DeskPreset::free_field();
  const auto field = desk_dataset();
  TrainConfig cfg;
  cfg.arch = {4, 64, 3, 0.5, 30.0};
  cfg.iterations = 300;
  cfg.lr = 1e-3;
  cfg.collocation_count = 512;
  cfg.data_batch = 2048;
  cfg.checkpoint_every = 0;
  cfg.exec.threads = hardware_threads();
  const auto res = train(field, SensorSubset::all(64), cfg);
  const auto u = particle_velocity(res.net, res.scaling, field.grid, field.samples(), field.sample_rate, field.t0,
                                   kAirDensity, cfg.exec);
  const auto p = pinn_reconstruct(res.net, res.scaling, field.grid, field.samples(), field.sample_rate, field.t0, cfg.exec);
  const auto mean = time_average(instantaneous_intensity(p, u));
  int aligned = 0;
  double worst = 1.0;
  for (Eigen::Index m = 0; m < mean.rows(); ++m) {
    const Vec3 radial = (field.grid.positions[static_cast<std::size_t>(m)] - preset.source).normalized();
    const Vec3 i = mean.row(m).transpose();
    const double cosine = i.norm() > 0.0 ? i.dot(radial) / i.norm() : -1.0;
    worst = std::min(worst, cosine);
    if (cosine > 0.9) ++aligned;
  }
  const double frac = aligned / static_cast<double>(mean.rows());
  Outcome o;
  o.pass = frac >= 0.8;
  o.detail = sci(100 * frac) + "% of grid points have cosine > 0.9 to the outward radial direction (min " +
             sci(worst) + "), " + sci(seconds_since(t0)) + " s";
  o.notes.push_back("3x64 network trained 300 iterations on all 64 sensors");
  return o;
}

// 10 --------------------------------------------------------------------------

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "sfr_acceptance_repro";
  std::ostringstream sink;
  auto pipeline = [&] {
    fs::remove_all(root);
    app::Overrides sim;
    sim.mode = "simulate";
    sim.out = (root / "sim").string();
    sim.threads = 1;
    app::run(std::nullopt, sim, sink);
    const auto field = (root / "sim" / "field.sfrd").string();
    app::Overrides tr;
    tr.mode = "train-pinn";
    tr.out = (root / "train").string();
    tr.threads = 1;
    tr.sets = {"dataset=" + field, "train.hidden_width=16", "train.iterations=25", "train.collocation_count=128",
               "train.data_batch=512", "train.checkpoint_every=10", "train.log_every=0"};
    app::run(std::nullopt, tr, sink);
    app::Overrides ev;
    ev.mode = "evaluate";
    ev.out = (root / "eval").string();
    ev.threads = 1;
    ev.sets = {"dataset=" + field, "evaluate.estimate=" + (root / "train" / "estimate.sfrd").string(),
               "evaluate.method=pinn"};
    app::run(std::nullopt, ev, sink);
    std::map<std::string, std::string> files;
    for (const char* rel : {"sim/manifest.json", "train/checkpoint.sfrd", "train/checkpoint.meta.json",
                            "train/manifest.json", "train/loss.csv", "eval/report.json", "eval/report.csv",
                            "eval/manifest.json"})
      files[rel] = sfr::detail::read_file(root / rel);
    return files;
  };
  const auto a = pipeline();
  const auto b = pipeline();
  fs::remove_all(root);
  int differing = 0;
  for (const auto& [name, bytes] : a)
    if (b.at(name) != bytes) ++differing;
  Outcome o;
  o.pass = differing == 0;
  o.detail = std::to_string(a.size() - static_cast<std::size_t>(differing)) + " of " + std::to_string(a.size()) +
             " checkpoint, report and manifest files bit-identical across two --threads 1 runs";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"derivative exactness", derivative_exactness},
      {"weight-gradient exactness", weight_gradient_exactness},
      {"PDE residual oracle", pde_residual_oracle},
      {"scaled speed of sound", scaled_c},
      {"desk-scale reconstruction", desk_reconstruction},
      {"kernel baseline", kernel_baseline},
      {"TESM correctness", tesm_correctness},
      {"metric identities", metric_identities},
      {"intensity sanity", intensity_sanity},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << (i + 1) << " (" << criteria[i].first
              << "): " << o.detail << std::endl;
    for (const auto& n : o.notes) std::cout << "      " << n << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << " of " << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
