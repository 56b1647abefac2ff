#pragma once

// Order-2 directional Taylor propagation through a sinusoidal MLP, and the
// exact reverse (adjoint) pass over that extended computation.
//
// For a layer a = W x + b followed by y = sin(w a), a curve x(s) with
// x'(0) = d1 and x''(0) = d2 maps to
//
//   y   = sin(w a)
//   y'  = w cos(w a) * (W d1)
//   y'' = w cos(w a) * (W d2) - w^2 sin(w a) * (W d1)^2
//
// Seeding d1 = e_i, d2 = 0 at the input gives the pure second derivative
// along axis i at the output. Because y'' is linear in d2, any fixed linear
// combination of pure second derivatives (the wave operator, a Laplacian)
// can be carried as a single channel instead of one per axis.

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "sfr/error.hpp"
#include "sfr/field_core.hpp"
#include "sfr/parallel.hpp"
#include "sfr/siren.hpp"

namespace sfr {

/// Activations of one layer together with first and second directional derivatives.
struct Jet2 {
  Eigen::VectorXd v, d1, d2;

  static Jet2 seed(const Eigen::VectorXd& x, const Eigen::VectorXd& direction) {
    return {x, direction, Eigen::VectorXd::Zero(x.size())};
  }
};

/// Network output with its input gradient and pure second derivatives,
/// both ordered (t, x, y, z) in network coordinates.
struct JetBundle {
  double p = 0.0;
  Vec4 grad = Vec4::Zero();
  Vec4 diag2 = Vec4::Zero();
};

inline Jet2 jet_layer(const Eigen::MatrixXd& W, const Eigen::VectorXd& b, double omega0, const Jet2& x,
                      bool is_linear) {
  if (W.cols() != x.v.size() || x.d1.size() != x.v.size() || x.d2.size() != x.v.size() || b.size() != W.rows())
    throw Error("jet_layer: dimension mismatch (W is " + std::to_string(W.rows()) + "x" +
                std::to_string(W.cols()) + ", input width " + std::to_string(x.v.size()) + ")");
  Eigen::VectorXd a = W * x.v + b;
  Eigen::VectorXd a1 = W * x.d1;
  Eigen::VectorXd a2 = W * x.d2;
  if (is_linear) return {std::move(a), std::move(a1), std::move(a2)};

  const Eigen::ArrayXd s = (omega0 * a).unaryExpr(&detail::sin_scalar).array();
  const Eigen::ArrayXd c = (omega0 * a).unaryExpr(&detail::cos_scalar).array();
  Jet2 y;
  y.v = s.matrix();
  y.d1 = (omega0 * c * a1.array()).matrix();
  y.d2 = (omega0 * c * a2.array() - omega0 * omega0 * s * a1.array().square()).matrix();
  return y;
}

inline Jet2 jet_layer(const SirenLayer& l, const Jet2& x) { return jet_layer(l.W, l.b, l.omega0, x, l.is_linear); }

/// One jet pass per input axis; the value is the same in every pass.
inline JetBundle network_jets(const SirenNetwork& net, const Vec4& u) {
  JetBundle out;
  for (int axis = 0; axis < 4; ++axis) {
    Jet2 x = Jet2::seed(u, Vec4::Unit(axis));
    for (const auto& l : net.layers) x = jet_layer(l, x);
    out.p = x.v[0];
    out.grad[axis] = x.d1[0];
    out.diag2[axis] = x.d2[0];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batched propagation with an adjoint tape.

/// Derivative channels carried through a batch: K first-order directions and
/// J second-order channels, channel j holding sum_i curvature(j, i) * d^2/ds_i^2.
struct JetPlan {
  Eigen::Matrix<double, 4, Eigen::Dynamic> directions;  // 4 x K
  Eigen::MatrixXd curvature;                            // J x K

  Eigen::Index first_order() const noexcept { return directions.cols(); }
  Eigen::Index second_order() const noexcept { return curvature.rows(); }
  Eigen::Index channels() const noexcept { return 1 + first_order() + second_order(); }

  static JetPlan value_only() {
    return {Eigen::Matrix<double, 4, Eigen::Dynamic>(4, 0), Eigen::MatrixXd(0, 0)};
  }

  /// Gradient along t, x, y, z; no second derivatives.
  static JetPlan gradient() {
    return {Eigen::Matrix<double, 4, 4>::Identity(), Eigen::MatrixXd(0, 4)};
  }

  /// Everything a JetBundle holds: gradient plus the four pure second derivatives.
  static JetPlan axes() {
    return {Eigen::Matrix<double, 4, 4>::Identity(), Eigen::MatrixXd::Identity(4, 4)};
  }

  /// Single second-order channel u_xx + u_yy + u_zz - u_tt / c^2.
  static JetPlan wave_operator(double c) {
    Eigen::MatrixXd w(1, 4);
    w << -1.0 / (c * c), 1.0, 1.0, 1.0;
    return {Eigen::Matrix<double, 4, 4>::Identity(), w};
  }
};

/// Parameter-shaped gradient container.
struct NetworkGradient {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;

  static NetworkGradient zeros_like(const SirenNetwork& net) {
    NetworkGradient g;
    for (const auto& l : net.layers) {
      g.dW.push_back(Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()));
      g.db.push_back(Eigen::VectorXd::Zero(l.b.size()));
    }
    return g;
  }

  NetworkGradient& operator+=(const NetworkGradient& o) {
    for (std::size_t i = 0; i < dW.size(); ++i) {
      dW[i] += o.dW[i];
      db[i] += o.db[i];
    }
    return *this;
  }

  NetworkGradient& operator*=(double s) {
    for (std::size_t i = 0; i < dW.size(); ++i) {
      dW[i] *= s;
      db[i] *= s;
    }
    return *this;
  }

  /// Same ordering as flatten_parameters.
  std::vector<double> flatten() const {
    std::vector<double> flat;
    for (std::size_t l = 0; l < dW.size(); ++l) {
      for (Eigen::Index i = 0; i < dW[l].rows(); ++i)
        for (Eigen::Index j = 0; j < dW[l].cols(); ++j) flat.push_back(dW[l](i, j));
      for (Eigen::Index i = 0; i < db[l].size(); ++i) flat.push_back(db[l][i]);
    }
    return flat;
  }

  double max_abs() const {
    double m = 0.0;
    for (std::size_t i = 0; i < dW.size(); ++i) {
      if (dW[i].size()) m = std::max(m, dW[i].cwiseAbs().maxCoeff());
      if (db[i].size()) m = std::max(m, db[i].cwiseAbs().maxCoeff());
    }
    return m;
  }
};

/// Forward jet pass over a batch of points, keeping what the reverse pass needs.
/// Columns of every stored matrix are grouped into `channels()` blocks of
/// `points()` columns: value, first-order directions, second-order channels.
class JetTape {
 public:
  JetTape(const SirenNetwork& net, JetPlan plan, const Eigen::Ref<const Eigen::Matrix<double, 4, Eigen::Dynamic>>& points)
      : plan_(std::move(plan)), points_(points.cols()) {
    net.validate();
    if (net.input_dim() != 4) throw Error("JetTape: network input must be 4-dimensional");
    if (plan_.curvature.rows() > 0 && plan_.curvature.cols() != plan_.first_order())
      throw Error("JetTape: curvature weights must have one column per direction");
    const Eigen::Index P = points_, K = plan_.first_order();

    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, plan_.channels() * P);
    x.leftCols(P) = points;
    for (Eigen::Index i = 0; i < K; ++i) x.middleCols((1 + i) * P, P).colwise() = plan_.directions.col(i);

    layers_.reserve(net.layers.size());
    for (const auto& l : net.layers) {
      Record r;
      r.input = std::move(x);
      r.pre.noalias() = l.W * r.input;
      r.pre.leftCols(P).colwise() += l.b;
      if (l.is_linear) {
        x = r.pre;
      } else {
        x = activate(l.omega0, r);
      }
      layers_.push_back(std::move(r));
    }
    output_ = std::move(x);
  }

  Eigen::Index points() const noexcept { return points_; }
  const JetPlan& plan() const noexcept { return plan_; }

  /// Output row of channel `ch` (0 = value, 1..K first order, K+1.. second order).
  auto channel(Eigen::Index ch) const { return output_.row(0).segment(ch * points_, points_); }
  auto value() const { return channel(0); }
  auto first(Eigen::Index i) const { return channel(1 + i); }
  auto second(Eigen::Index j) const { return channel(1 + plan_.first_order() + j); }

  JetBundle bundle(Eigen::Index q) const {
    if (plan_.first_order() != 4 || plan_.second_order() != 4) throw Error("JetTape: bundle needs the axes plan");
    JetBundle b;
    b.p = value()[q];
    for (int i = 0; i < 4; ++i) {
      b.grad[i] = first(i)[q];
      b.diag2[i] = second(i)[q];
    }
    return b;
  }

  /// Accumulates d(loss)/d(weights) into `acc` given `output_adjoint`, the
  /// loss gradient with respect to every output channel (1 x channels*points).
  void backward(const SirenNetwork& net, const Eigen::Ref<const Eigen::RowVectorXd>& output_adjoint,
                NetworkGradient& acc) const {
    if (net.layers.size() != layers_.size() || acc.dW.size() != layers_.size())
      throw Error("JetTape: tape, network and gradient disagree on layer count");
    if (output_adjoint.size() != output_.size()) throw Error("JetTape: output adjoint has the wrong length");
    const Eigen::Index P = points_;
    Eigen::MatrixXd g = output_adjoint;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const auto& l = net.layers[k];
      const auto& r = layers_[k];
      if (l.W.rows() != r.pre.rows() || l.W.cols() != r.input.rows() || acc.dW[k].rows() != l.W.rows() ||
          acc.dW[k].cols() != l.W.cols())
        throw Error("JetTape: weight shapes changed since the tape was recorded (layer " + std::to_string(k) + ")");
      Eigen::MatrixXd gpre = l.is_linear ? std::move(g) : activate_adjoint(l.omega0, r, g);
      acc.dW[k].noalias() += gpre * r.input.transpose();
      acc.db[k] += gpre.leftCols(P).rowwise().sum();
      if (k > 0) g.noalias() = l.W.transpose() * gpre;
    }
  }

 private:
  struct Record {
    Eigen::MatrixXd input;  // in x C*P
    Eigen::MatrixXd pre;    // out x C*P, pre-activation channels
    Eigen::ArrayXXd s, c;   // out x P, sin / cos of omega0 * a
  };

  Eigen::MatrixXd activate(double w, Record& r) const {
    const Eigen::Index P = points_, K = plan_.first_order(), J = plan_.second_order();
    const auto a = r.pre.leftCols(P);
    r.s = (w * a).unaryExpr(&detail::sin_scalar).array();
    r.c = (w * a).unaryExpr(&detail::cos_scalar).array();
    Eigen::MatrixXd y(r.pre.rows(), r.pre.cols());
    y.leftCols(P) = r.s.matrix();
    for (Eigen::Index i = 0; i < K; ++i)
      y.middleCols((1 + i) * P, P) = (w * r.c * r.pre.middleCols((1 + i) * P, P).array()).matrix();
    for (Eigen::Index j = 0; j < J; ++j) {
      Eigen::ArrayXXd q = Eigen::ArrayXXd::Zero(r.pre.rows(), P);
      for (Eigen::Index i = 0; i < K; ++i)
        if (plan_.curvature(j, i) != 0.0) q += plan_.curvature(j, i) * r.pre.middleCols((1 + i) * P, P).array().square();
      y.middleCols((1 + K + j) * P, P) =
          (w * r.c * r.pre.middleCols((1 + K + j) * P, P).array() - w * w * r.s * q).matrix();
    }
    return y;
  }

  Eigen::MatrixXd activate_adjoint(double w, const Record& r, const Eigen::MatrixXd& g) const {
    const Eigen::Index P = points_, K = plan_.first_order(), J = plan_.second_order();
    const double w2 = w * w, w3 = w2 * w;
    Eigen::MatrixXd gpre(g.rows(), g.cols());
    Eigen::ArrayXXd ga = w * r.c * g.leftCols(P).array();
    for (Eigen::Index i = 0; i < K; ++i) {
      const auto gd1 = g.middleCols((1 + i) * P, P).array();
      const auto a1 = r.pre.middleCols((1 + i) * P, P).array();
      ga -= w2 * r.s * a1 * gd1;
      gpre.middleCols((1 + i) * P, P) = (w * r.c * gd1).matrix();
    }
    for (Eigen::Index j = 0; j < J; ++j) {
      const auto gs = g.middleCols((1 + K + j) * P, P).array();
      const auto a2 = r.pre.middleCols((1 + K + j) * P, P).array();
      Eigen::ArrayXXd q = Eigen::ArrayXXd::Zero(r.pre.rows(), P);
      for (Eigen::Index i = 0; i < K; ++i) {
        const double cji = plan_.curvature(j, i);
        if (cji == 0.0) continue;
        const auto a1 = r.pre.middleCols((1 + i) * P, P).array();
        q += cji * a1.square();
        gpre.middleCols((1 + i) * P, P).array() -= (2.0 * w2 * cji) * r.s * a1 * gs;
      }
      ga -= (w2 * r.s * a2 + w3 * r.c * q) * gs;
      gpre.middleCols((1 + K + j) * P, P) = (w * r.c * gs).matrix();
    }
    gpre.leftCols(P) = ga.matrix();
    return gpre;
  }

  JetPlan plan_;
  Eigen::Index points_;
  std::vector<Record> layers_;
  Eigen::MatrixXd output_;  // 1 x C*P
};

/// Evaluates the axes plan on a batch and returns one JetBundle per point.
inline std::vector<JetBundle> batch_jets(const SirenNetwork& net, const std::vector<Vec4>& points,
                                         const ExecPolicy& exec = {}) {
  std::vector<JetBundle> out(points.size());
  const std::size_t chunks = (points.size() + exec.chunk - 1) / exec.chunk;
  parallel_chunks(chunks, exec.threads, [&](std::size_t c, std::size_t) {
    const std::size_t lo = c * exec.chunk, hi = std::min(points.size(), lo + exec.chunk);
    Eigen::Matrix<double, 4, Eigen::Dynamic> u(4, static_cast<Eigen::Index>(hi - lo));
    for (std::size_t q = lo; q < hi; ++q) u.col(static_cast<Eigen::Index>(q - lo)) = points[q];
    JetTape tape(net, JetPlan::axes(), u);
    for (std::size_t q = lo; q < hi; ++q) out[q] = tape.bundle(static_cast<Eigen::Index>(q - lo));
  });
  return out;
}

/// A scalar loss of one point's jets. Returns the loss and writes its
/// gradient with respect to every JetBundle entry into `adjoint`.
using LossHead = std::function<double(const JetBundle& jets, JetBundle& adjoint)>;

struct LossAndGradient {
  double loss = 0.0;
  NetworkGradient grad;
};

/// Exact gradient of sum_q head(jets(u_q)) with respect to every weight and bias.
inline LossAndGradient adjoint_grad(const SirenNetwork& net, const std::vector<Vec4>& points, const LossHead& head,
                                    const ExecPolicy& exec = {}) {
  const std::size_t chunks = (points.size() + exec.chunk - 1) / exec.chunk;
  const std::size_t workers = worker_count(chunks, exec.threads);
  std::vector<LossAndGradient> partial(workers);
  for (auto& p : partial) p.grad = NetworkGradient::zeros_like(net);

  parallel_chunks(chunks, exec.threads, [&](std::size_t c, std::size_t w) {
    const std::size_t lo = c * exec.chunk, hi = std::min(points.size(), lo + exec.chunk);
    const auto P = static_cast<Eigen::Index>(hi - lo);
    Eigen::Matrix<double, 4, Eigen::Dynamic> u(4, P);
    for (std::size_t q = lo; q < hi; ++q) u.col(static_cast<Eigen::Index>(q - lo)) = points[q];
    JetTape tape(net, JetPlan::axes(), u);
    Eigen::RowVectorXd adj = Eigen::RowVectorXd::Zero(tape.plan().channels() * P);
    for (Eigen::Index q = 0; q < P; ++q) {
      JetBundle a;
      partial[w].loss += head(tape.bundle(q), a);
      adj[q] = a.p;
      for (Eigen::Index i = 0; i < 4; ++i) {
        adj[(1 + i) * P + q] = a.grad[i];
        adj[(5 + i) * P + q] = a.diag2[i];
      }
    }
    tape.backward(net, adj, partial[w].grad);
  });

  LossAndGradient total{0.0, NetworkGradient::zeros_like(net)};
  for (const auto& p : partial) {
    total.loss += p.loss;
    total.grad += p.grad;
  }
  return total;
}

}  // namespace sfr
