#include "nondiss/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "nondiss/errors.hpp"

namespace nondiss {

namespace {

Matrix apply_act(Activation act, const Matrix& m) {
  return m.unaryExpr([act](double x) { return activate(act, x); });
}

Matrix apply_act_derivative(Activation act, const Matrix& m) {
  return m.unaryExpr([act](double x) { return activate_derivative(act, x); });
}

Matrix swan_preactivation(const SwanWeights& w, const SwanConfig& cfg, const Matrix& p, const Matrix& s,
                          const Matrix& x) {
  Matrix pre = x * w.w_hat + p * x * w.v_hat;
  if (cfg.beta != 0.0) pre += cfg.beta * (s * x * w.z_hat);
  pre.rowwise() += w.b;
  return pre;
}

// vec(a) = K vec(s) for a = s W + M s V.
Matrix half_linear_map(const Matrix& w, const Matrix& v, const Matrix& m) {
  return kron(w.transpose(), Matrix::Identity(m.rows(), m.rows())) + kron(v.transpose(), m);
}

Matrix half_hessian(const ParamStore& store, const GraphContext& ctx, AggregationKind agg, Activation act,
                    const std::string& side, const Matrix& s) {
  const Matrix& w = store.at("core.w" + side).value;
  const Matrix& v = store.at("core.v" + side).value;
  const Matrix& b = store.at("core.b" + side).value;
  const Matrix m = agg == AggregationKind::kGcn ? Matrix(*ctx.gcn) : Matrix(*ctx.adjacency);
  Matrix a = s * w + m * s * v;
  a.rowwise() += b.row(0);
  const Matrix k = half_linear_map(w, v, m);
  const Vector sd = vec(apply_act_derivative(act, a));
  return k.transpose() * sd.asDiagonal() * k;
}

}  // namespace

SwanWeights swan_weights(const ParamStore& store, const SwanConfig& cfg, bool include_gamma) {
  SwanWeights w;
  w.w_hat = antisymmetrize(store.at("core.w").value);
  if (include_gamma) w.w_hat.diagonal().array() -= cfg.gamma;
  const Matrix& v = store.at("core.v").value;
  w.v_hat = cfg.enforce_v_antisym ? antisymmetrize(v) : v;
  w.z_hat = symmetrize(store.at("core.z").value);
  w.b = store.at("core.b").value.row(0);
  return w;
}

Matrix swan_field(const SwanWeights& w, const SwanConfig& cfg, const Matrix& p, const Matrix& s,
                  const Matrix& x) {
  return apply_act(cfg.act, swan_preactivation(w, cfg, p, s, x));
}

SwanJacobian assemble_swan_jacobian(const SwanWeights& w, const SwanConfig& cfg, const Matrix& p,
                                    const Matrix& s, const Matrix& x) {
  const auto n = x.rows();
  require(p.rows() == n && p.cols() == n && s.rows() == n && s.cols() == n, ErrorKind::kShapeMismatch,
          "operators must be n x n for the state");
  require(x.cols() == w.w_hat.rows(), ErrorKind::kShapeMismatch, "state width does not match weights");
  SwanJacobian j;
  j.m2 = kron(w.w_hat.transpose(), Matrix::Identity(n, n)) + kron(w.v_hat.transpose(), p);
  if (cfg.beta != 0.0) j.m2 += cfg.beta * kron(w.z_hat.transpose(), s);
  j.m1 = vec(apply_act_derivative(cfg.act, swan_preactivation(w, cfg, p, s, x)));
  return j;
}

Matrix finite_difference_jacobian(const std::function<Matrix(const Matrix&)>& f, const Matrix& x, double h) {
  const Vector x0 = vec(x);
  const Vector f0 = vec(f(x));
  Matrix jac(f0.size(), x0.size());
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    Vector up = x0;
    Vector down = x0;
    up(i) += h;
    down(i) -= h;
    jac.col(i) = (vec(f(unvec(up, x.rows(), x.cols()))) - vec(f(unvec(down, x.rows(), x.cols())))) / (2.0 * h);
  }
  return jac;
}

Matrix gcn_layer_jacobian(const ParamStore& store, const GcnConfig& cfg, const Matrix& a_gcn, const Matrix& x,
                          int layer) {
  require(layer >= 0 && layer < cfg.layers, ErrorKind::kInvalidArgument, "GCN layer index out of range");
  const Matrix& w = store.at("core.w" + std::to_string(layer)).value;
  Matrix pre = a_gcn * x * w;
  pre.rowwise() += store.at("core.b" + std::to_string(layer)).value.row(0);
  const Vector m1 = vec(apply_act_derivative(cfg.act, pre));
  return m1.asDiagonal() * kron(w.transpose(), a_gcn);
}

Matrix node_sensitivity(Tape& tape, Var out, Var in, int v, int u) {
  const auto d_out = out.cols();
  Matrix block(d_out, in.cols());
  Matrix seed = Matrix::Zero(out.rows(), out.cols());
  for (Eigen::Index i = 0; i < d_out; ++i) {
    seed.setZero();
    seed(v, i) = 1.0;
    tape.backward(out, seed, RetainGraph::kYes);
    block.row(i) = tape.grad(in).row(u);
  }
  return block;
}

std::vector<double> bsm_trace(Tape& tape, const std::vector<Var>& states, int u) {
  require(!states.empty(), ErrorKind::kEmpty, "bsm_trace needs at least one state");
  const Var last = states.back();
  require(u >= 0 && u < last.rows(), ErrorKind::kInvalidArgument, "probe node out of range");
  const auto d = last.cols();
  std::vector<Matrix> blocks(states.size(), Matrix(d, d));
  Matrix seed = Matrix::Zero(last.rows(), d);
  for (Eigen::Index i = 0; i < d; ++i) {
    seed.setZero();
    seed(u, i) = 1.0;
    tape.backward(last, seed, RetainGraph::kYes);
    for (std::size_t l = 0; l < states.size(); ++l) blocks[l].row(i) = tape.grad(states[l]).row(u);
  }
  std::vector<double> norms;
  norms.reserve(states.size());
  for (const auto& b : blocks) norms.push_back(spectral_norm(b));
  return norms;
}

std::vector<std::pair<double, double>> propagation_rate(const Matrix& generator, double horizon, int steps) {
  require(steps >= 1 && horizon >= 0, ErrorKind::kInvalidArgument, "rate curve needs steps >= 1, T >= 0");
  std::vector<std::pair<double, double>> curve;
  curve.reserve(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    const double t = horizon * k / steps;
    curve.emplace_back(t, fro_norm(expm(generator, t)));
  }
  return curve;
}

Matrix heat_generator(const Graph& g, int d) {
  const Matrix lap = shift_operator(g, ShiftOperatorKind::kLaplacian);
  return -kron(Matrix::Identity(d, d), lap);
}

std::vector<double> jacobian_drift(const std::vector<Matrix>& jacobians) {
  std::vector<double> drift;
  for (std::size_t l = 1; l < jacobians.size(); ++l) {
    const double base = fro_norm(jacobians[l - 1]);
    require(base > 0, ErrorKind::kNumericFailure, "zero Jacobian in drift trace");
    drift.push_back(fro_norm(jacobians[l] - jacobians[l - 1]) / base);
  }
  return drift;
}

SensitivityBoundParams swan_sensitivity_params(const ParamStore& store, const SwanConfig& cfg, double c_sigma) {
  const SwanWeights w = swan_weights(store, cfg, true);
  SensitivityBoundParams b;
  b.c_sigma = c_sigma;
  b.w = std::max({w.w_hat.cwiseAbs().maxCoeff(), w.v_hat.cwiseAbs().maxCoeff(),
                  cfg.beta != 0.0 ? w.z_hat.cwiseAbs().maxCoeff() : 0.0});
  b.p = cfg.d;
  require(b.c_sigma * b.w * b.p > 0, ErrorKind::kDegenerateDegree, "sensitivity constants vanish");
  b.c_r = 1.0 / (b.c_sigma * b.w * b.p) + cfg.eps;
  b.c_a = cfg.eps;
  b.c_b = cfg.eps;
  return b;
}

double sensitivity_upper_bound(const SensitivityBoundParams& b, const Matrix& p, const Matrix& s, double beta,
                               int layers, int u, int v) {
  require(layers >= 1, ErrorKind::kInvalidArgument, "bound needs at least one layer");
  const auto n = p.rows();
  require(u >= 0 && u < n && v >= 0 && v < n, ErrorKind::kInvalidArgument, "node out of range");
  const Matrix step = b.c_r * Matrix::Identity(n, n) + b.c_a * p.cwiseAbs() +
                      std::abs(beta) * b.c_b * s.cwiseAbs();
  Matrix power = Matrix::Identity(n, n);
  for (int l = 0; l < layers; ++l) power = step * power;
  return std::pow(b.c_sigma * b.w * b.p, layers) * power(v, u);
}

Matrix hamiltonian_jacobian(const ParamStore& store, const PhdgnConfig& cfg, const GraphContext& ctx,
                            const Matrix& x) {
  const int h = cfg.d / 2;
  const Matrix hpp = half_hessian(store, ctx, cfg.agg_p, cfg.act, "p", x.leftCols(h));
  const Matrix hqq = half_hessian(store, ctx, cfg.agg_q, cfg.act, "q", x.rightCols(h));
  const auto m = hpp.rows();
  Matrix j = Matrix::Zero(2 * m, 2 * m);
  j.topRightCorner(m, m) = -hqq;
  j.bottomLeftCorner(m, m) = hpp;
  return j;
}

double hamiltonian_divergence(const ParamStore& store, const PhdgnConfig& cfg, const GraphContext& ctx,
                              const Matrix& x, double h) {
  double div = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      Matrix up = x;
      Matrix down = x;
      up(i, j) += h;
      down(i, j) -= h;
      div += (hamiltonian_field(store, cfg, ctx, up)(i, j) - hamiltonian_field(store, cfg, ctx, down)(i, j)) /
             (2.0 * h);
    }
  }
  return div;
}

double hamiltonian_upper_bound_rate(const ParamStore& store, const PhdgnConfig& cfg, const Graph& g) {
  const int h = cfg.d / 2;
  Matrix w = Matrix::Zero(cfg.d, cfg.d);
  Matrix v = Matrix::Zero(cfg.d, cfg.d);
  w.topLeftCorner(h, h) = store.at("core.wp").value;
  w.bottomRightCorner(h, h) = store.at("core.wq").value;
  v.topLeftCorner(h, h) = store.at("core.vp").value;
  v.bottomRightCorner(h, h) = store.at("core.vq").value;
  const auto deg = g.in_degree();
  const int max_deg = deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
  const double sw = spectral_norm(w);
  const double sv = spectral_norm(v);
  const double root_d = std::sqrt(static_cast<double>(cfg.d));
  return root_d * sw * sw + root_d * max_deg * sv * sv;
}

std::vector<std::pair<double, double>> energy_trace(ParamStore& store, const PhdgnConfig& cfg,
                                                    const GraphContext& ctx, const Matrix& x0) {
  std::vector<std::pair<double, double>> trace;
  trace.reserve(cfg.layers + 1);
  const double h0 = hamiltonian_energy(store, cfg, ctx, x0);
  trace.emplace_back(0.0, 0.0);
  Matrix x = x0;
  for (int l = 0; l < cfg.layers; ++l) {
    Tape tape;
    x = phdgn_step(tape, store, cfg, ctx, tape.constant(x), l).value();
    require(x.allFinite(), ErrorKind::kNumericOverflow, "non-finite state after layer " + std::to_string(l + 1));
    trace.emplace_back((l + 1) * cfg.eps, hamiltonian_energy(store, cfg, ctx, x) - h0);
  }
  return trace;
}

nlohmann::json to_json(const DiagnosticsReport& r) {
  nlohmann::json eig = nlohmann::json::array();
  for (const auto& z : r.eigenvalues) eig.push_back({z.real(), z.imag()});
  nlohmann::json bsm = nlohmann::json::array();
  for (const auto& [l, v] : r.bsm_per_layer) bsm.push_back({l, v});
  nlohmann::json energy = nlohmann::json::array();
  for (const auto& [t, v] : r.energy_trace) energy.push_back({t, v});
  nlohmann::json rate = nlohmann::json::array();
  for (const auto& [t, v] : r.rate_curve) rate.push_back({t, v});
  return {{"max_re_eig", r.max_re_eig},
          {"eigenvalues", eig},
          {"bsm_per_layer", bsm},
          {"energy_trace", energy},
          {"jacobian_drift", r.jacobian_drift},
          {"rate_curve", rate}};
}

}  // namespace nondiss
