#include <gtest/gtest.h>

#include <cmath>

#include "nondiss/diagnostics.hpp"
#include "test_util.hpp"

using namespace nondiss;
using testutil::random_matrix;

namespace {

ParamStore make_core(const CoreConfig& cfg, std::uint64_t seed) {
  ParamStore store;
  Rng rng(seed);
  init_core(store, cfg, rng);
  for (auto& [name, e] : store) {
    if (name.find(".b") != std::string::npos) e.value = random_matrix(e.value.rows(), e.value.cols(), rng, 0.3);
  }
  return store;
}

double max_rel(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(SwanJacobianTest, MatchesFiniteDifferencesFixedAndLearned) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Graph g = erdos_renyi(6 + static_cast<int>(seed), 0.4, seed);
    const GraphContext ctx = GraphContext::build(g);
    SwanConfig cfg;
    cfg.d = 3;
    cfg.beta = 0.8;
    cfg.mode = seed % 2 ? OperatorMode::kLearned : OperatorMode::kFixed;
    ParamStore store = make_core(cfg, seed);
    Rng rng(100 + seed);
    const Matrix x = random_matrix(g.num_nodes(), 3, rng);
    Tape t;
    const SwanOperators ops = cfg.mode == OperatorMode::kLearned
                                  ? swan_learn_operators(t, store, cfg, ctx, t.constant(x))
                                  : swan_fixed_operators(t, ctx);
    const Matrix p = ops.p_dense();
    const Matrix s = ops.s_dense();
    const SwanWeights w = swan_weights(store, cfg, true);
    const SwanJacobian jac = assemble_swan_jacobian(w, cfg, p, s, x);
    const Matrix fd = finite_difference_jacobian([&](const Matrix& y) { return swan_field(w, cfg, p, s, y); }, x);
    EXPECT_LT(max_rel(jac.jacobian(), fd), 1e-7) << "seed " << seed;

    const SwanJacobian structural = assemble_swan_jacobian(swan_weights(store, cfg, false), cfg, p, s, x);
    EXPECT_LT(max_abs_real(eig_general(structural.m2)), 1e-10);
    EXPECT_LT((structural.m2 + structural.m2.transpose()).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(SwanJacobianTest, FieldMatchesLayerIncrement) {
  const Graph g = ring_graph(6);
  const GraphContext ctx = GraphContext::build(g);
  SwanConfig cfg;
  cfg.d = 2;
  cfg.layers = 1;
  ParamStore store = make_core(cfg, 3);
  Rng rng(4);
  const Matrix x = random_matrix(6, 2, rng);
  Tape t;
  const auto ops = swan_fixed_operators(t, ctx);
  const Matrix next = swan_forward(t, store, cfg, ops, t.constant(x)).back().value();
  const Matrix f = swan_field(swan_weights(store, cfg, true), cfg, ops.p_dense(), ops.s_dense(), x);
  EXPECT_LT((next - (x + cfg.eps * f)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(GcnJacobian, MatchesFiniteDifferences) {
  const Graph g = barabasi_albert(8, 2, 1);
  GcnConfig cfg{3, 2, Activation::kTanh};
  ParamStore store = make_core(cfg, 5);
  const Matrix a = Matrix(gcn_normalized_adjacency(g));
  Rng rng(6);
  const Matrix x = random_matrix(8, 3, rng);
  for (int layer = 0; layer < 2; ++layer) {
    const std::string l = std::to_string(layer);
    const Matrix j = gcn_layer_jacobian(store, cfg, a, x, layer);
    const Matrix fd = finite_difference_jacobian(
        [&](const Matrix& y) {
          Matrix pre = a * y * store.at("core.w" + l).value;
          pre.rowwise() += store.at("core.b" + l).value.row(0);
          return Matrix(pre.array().tanh().matrix());
        },
        x);
    EXPECT_LT(max_rel(j, fd), 1e-8);
  }
  EXPECT_ERROR_KIND(gcn_layer_jacobian(store, cfg, a, x, 2), ErrorKind::kInvalidArgument);
}

TEST(NodeSensitivity, MatchesFiniteDifferences) {
  const Graph g = path_graph(5);
  const GraphContext ctx = GraphContext::build(g);
  ADgnConfig cfg{2, 3, 0.3, 0.1, AggregationKind::kSimpleSum, Activation::kTanh};
  ParamStore store = make_core(cfg, 7);
  Rng rng(8);
  const Matrix x0 = random_matrix(5, 2, rng);
  Tape t;
  Var in = t.variable(x0);
  const auto states = adgn_forward(t, store, cfg, ctx, in);
  const Matrix block = node_sensitivity(t, states.back(), in, 3, 1);
  const double h = 1e-6;
  for (int c = 0; c < 2; ++c) {
    Matrix up = x0;
    Matrix down = x0;
    up(1, c) += h;
    down(1, c) -= h;
    Tape tu;
    Tape td;
    const Matrix fu = adgn_forward(tu, store, cfg, ctx, tu.constant(up)).back().value();
    const Matrix fdn = adgn_forward(td, store, cfg, ctx, td.constant(down)).back().value();
    const Vector col = ((fu.row(3) - fdn.row(3)) / (2 * h)).transpose();
    EXPECT_LT((block.col(c) - col).cwiseAbs().maxCoeff(), 1e-8);
  }
  // Three hops away after three layers: reachable; four hops: exactly zero.
  EXPECT_GT(block.cwiseAbs().maxCoeff(), 0.0);
  Tape t2;
  Var in2 = t2.variable(x0);
  const auto s2 = adgn_forward(t2, store, cfg, ctx, in2);
  EXPECT_EQ(node_sensitivity(t2, s2.back(), in2, 4, 0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Bsm, LastEntryIsIdentityNorm) {
  const Graph g = ring_graph(6);
  const GraphContext ctx = GraphContext::build(g);
  SwanConfig cfg;
  cfg.d = 3;
  cfg.layers = 4;
  ParamStore store = make_core(cfg, 9);
  Rng rng(10);
  Tape t;
  const auto states = core_forward(t, store, cfg, ctx, t.variable(random_matrix(6, 3, rng)));
  const auto norms = bsm_trace(t, states, 2);
  ASSERT_EQ(norms.size(), 5u);
  EXPECT_NEAR(norms.back(), 1.0, 1e-14);
  for (double v : norms) EXPECT_TRUE(std::isfinite(v));
  EXPECT_ERROR_KIND(bsm_trace(t, states, 6), ErrorKind::kInvalidArgument);
}

TEST(PropagationRate, AntisymmetricIsConstantHeatDecays) {
  Rng rng(11);
  const Matrix gen = antisymmetrize(random_matrix(6, 6, rng));
  const auto curve = propagation_rate(gen, 10.0, 20);
  ASSERT_EQ(curve.size(), 21u);
  for (const auto& [t, v] : curve) EXPECT_NEAR(v, std::sqrt(6.0), 1e-9) << t;

  const Matrix heat = heat_generator(ring_graph(10), 1);
  EXPECT_EQ(heat, -shift_operator(ring_graph(10), ShiftOperatorKind::kLaplacian));
  const auto decay = propagation_rate(heat, 10.0, 10);
  EXPECT_NEAR(decay.front().second, std::sqrt(10.0), 1e-12);
  EXPECT_LT(decay.back().second, 0.5 * decay.front().second);
  for (std::size_t i = 1; i < decay.size(); ++i) EXPECT_LE(decay[i].second, decay[i - 1].second + 1e-12);
  EXPECT_EQ(heat_generator(ring_graph(4), 2).rows(), 8);
}

TEST(Drift, KnownValues) {
  const Matrix a = Matrix::Identity(2, 2);
  EXPECT_EQ(jacobian_drift({a, a, a}), (std::vector<double>{0.0, 0.0}));
  const auto d = jacobian_drift({a, 2.0 * a});
  ASSERT_EQ(d.size(), 1u);
  EXPECT_DOUBLE_EQ(d[0], 1.0);
  EXPECT_TRUE(jacobian_drift({a}).empty());
}

TEST(SensitivityBound, HoldsOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Graph g = erdos_renyi(7, 0.4, 40 + seed);
    const GraphContext ctx = GraphContext::build(g);
    SwanConfig cfg;
    cfg.d = 2;
    cfg.layers = 3;
    cfg.beta = 0.5;
    ParamStore store = make_core(cfg, seed);
    Rng rng(50 + seed);
    Tape t;
    Var in = t.variable(random_matrix(7, 2, rng));
    const auto ops = swan_fixed_operators(t, ctx);
    const auto states = swan_forward(t, store, cfg, ops, in);
    const auto params = swan_sensitivity_params(store, cfg);
    for (int u = 0; u < 7; ++u) {
      for (int v = 0; v < 7; ++v) {
        const double measured = induced_one_norm(node_sensitivity(t, states.back(), in, v, u));
        const double bound = sensitivity_upper_bound(params, ops.p_dense(), ops.s_dense(), cfg.beta, 3, u, v);
        EXPECT_LE(measured, bound * (1 + 1e-12)) << seed << " " << u << "->" << v;
      }
    }
  }
}

TEST(Hamiltonian, JacobianMatchesFieldDerivative) {
  const Graph g = erdos_renyi(6, 0.5, 2);
  const GraphContext ctx = GraphContext::build(g);
  for (auto agg : {AggregationKind::kSimpleSum, AggregationKind::kGcn}) {
    PhdgnConfig cfg;
    cfg.d = 4;
    cfg.agg_p = agg;
    cfg.agg_q = agg;
    ParamStore store = make_core(cfg, 12);
    Rng rng(13);
    const Matrix x = random_matrix(6, 4, rng);
    const Matrix j = hamiltonian_jacobian(store, cfg, ctx, x);
    const Matrix fd =
        finite_difference_jacobian([&](const Matrix& y) { return hamiltonian_field(store, cfg, ctx, y); }, x);
    EXPECT_LT(max_rel(j, fd), 1e-7);
    EXPECT_LT(max_abs_real(eig_general(j)), 1e-6);
    EXPECT_NEAR(hamiltonian_divergence(store, cfg, ctx, x), 0.0, 1e-7);
    EXPECT_GT(hamiltonian_upper_bound_rate(store, cfg, g), 0.0);
  }
}

TEST(Hamiltonian, EnergyTraceStaysSmallAndStartsAtZero) {
  const Graph g = ring_graph(8);
  const GraphContext ctx = GraphContext::build(g);
  PhdgnConfig cfg;
  cfg.d = 4;
  cfg.layers = 50;
  cfg.eps = 0.01;
  ParamStore store = make_core(cfg, 14);
  Rng rng(15);
  const Matrix x0 = random_matrix(8, 4, rng);
  const auto trace = energy_trace(store, cfg, ctx, x0);
  ASSERT_EQ(trace.size(), 51u);
  EXPECT_EQ(trace.front().second, 0.0);
  EXPECT_NEAR(trace.back().first, 0.5, 1e-12);
  const double h0 = std::abs(hamiltonian_energy(store, cfg, ctx, x0));
  for (const auto& [t, dh] : trace) EXPECT_LT(std::abs(dh), 1e-2 * std::max(1.0, h0)) << t;
}

TEST(Report, JsonLayout) {
  DiagnosticsReport r;
  r.max_re_eig = 1e-17;
  r.eigenvalues = {{0.0, 1.0}, {0.0, -1.0}};
  r.bsm_per_layer = {{0, 1.5}, {1, 1.0}};
  const auto j = to_json(r);
  for (const char* k : {"max_re_eig", "eigenvalues", "bsm_per_layer", "energy_trace", "jacobian_drift", "rate_curve"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_EQ(j["eigenvalues"][1][1], -1.0);
}
