#include "nondiss/layers.hpp"

#include <cmath>
#include <string>

#include "nondiss/errors.hpp"

namespace nondiss {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_finite(Var x, int layer) {
  if (!x.value().allFinite()) {
    fail(ErrorKind::kNumericOverflow, "non-finite state after layer " + std::to_string(layer));
  }
}

const std::shared_ptr<const SparseMatrix>& aggregation(const GraphContext& ctx, AggregationKind k) {
  return k == AggregationKind::kGcn ? ctx.gcn : ctx.adjacency;
}

const std::shared_ptr<const SparseMatrix>& aggregation_t(const GraphContext& ctx, AggregationKind k) {
  return k == AggregationKind::kGcn ? ctx.gcn_t : ctx.adjacency_t;
}

Var column_of(Tape& tape, const std::vector<double>& v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return tape.constant(std::move(m));
}

void add_square(ParamStore& store, const std::string& name, int d, Rng& rng) {
  store.add(name, uniform_init(d, d, d, rng));
}

// ∇ of Σ 1ᵀσ̃(s W + M s V + b) with respect to s: σ(a) Wᵀ + Mᵀ σ(a) Vᵀ.
Var hamiltonian_grad(Tape& tape, ParamStore& store, const GraphContext& ctx, AggregationKind agg,
                     Activation act, const std::string& side, Var s) {
  Var w = tape.param(store, "core.w" + side);
  Var v = tape.param(store, "core.v" + side);
  Var b = tape.param(store, "core.b" + side);
  Var a = ad::add_row(ad::add(ad::matmul(s, w), ad::matmul(ad::spmm(aggregation(ctx, agg), s), v)), b);
  Var sa = ad::activation(a, act);
  return ad::add(ad::matmul(sa, ad::transpose(w)),
                 ad::matmul(ad::spmm(aggregation_t(ctx, agg), sa), ad::transpose(v)));
}

Matrix half_preactivation(const ParamStore& store, const GraphContext& ctx, AggregationKind agg,
                          const std::string& side, const Matrix& s) {
  const Matrix& w = store.at("core.w" + side).value;
  const Matrix& v = store.at("core.v" + side).value;
  const Matrix& b = store.at("core.b" + side).value;
  Matrix a = s * w + (*aggregation(ctx, agg) * s) * v;
  a.rowwise() += b.row(0);
  return a;
}

Matrix half_grad(const ParamStore& store, const GraphContext& ctx, AggregationKind agg, Activation act,
                 const std::string& side, const Matrix& s) {
  Matrix sa = half_preactivation(store, ctx, agg, side, s).unaryExpr([act](double x) { return activate(act, x); });
  const Matrix& w = store.at("core.w" + side).value;
  const Matrix& v = store.at("core.v" + side).value;
  return sa * w.transpose() + (*aggregation_t(ctx, agg) * sa) * v.transpose();
}

void require_phdgn(const PhdgnConfig& cfg) {
  require(cfg.d >= 2 && cfg.d % 2 == 0, ErrorKind::kInvalidSize,
          "PH-DGN width must be even and positive, got " + std::to_string(cfg.d));
}

}  // namespace

const char* to_string(AggregationKind k) { return k == AggregationKind::kGcn ? "gcn" : "simple"; }

const char* to_string(Dampening k) {
  switch (k) {
    case Dampening::kNone: return "none";
    case Dampening::kParam: return "param";
    case Dampening::kParamPlus: return "param+";
    case Dampening::kMlp4Relu: return "mlp4-relu";
    case Dampening::kDgnRelu: return "dgn-relu";
  }
  return "?";
}

const char* to_string(Force k) {
  switch (k) {
    case Force::kNone: return "none";
    case Force::kMlp4Sin: return "mlp4-sin";
    case Force::kDgnTanh: return "dgn-tanh";
  }
  return "?";
}

const char* to_string(ReadoutInput k) {
  switch (k) {
    case ReadoutInput::kP: return "p";
    case ReadoutInput::kQ: return "q";
    case ReadoutInput::kPQ: return "pq";
  }
  return "?";
}

AggregationKind aggregation_from_string(const std::string& s) {
  if (s == "simple") return AggregationKind::kSimpleSum;
  if (s == "gcn") return AggregationKind::kGcn;
  fail(ErrorKind::kInvalidArgument, "unknown aggregation '" + s + "'");
}

Dampening dampening_from_string(const std::string& s) {
  for (auto k : {Dampening::kNone, Dampening::kParam, Dampening::kParamPlus, Dampening::kMlp4Relu,
                 Dampening::kDgnRelu}) {
    if (s == to_string(k)) return k;
  }
  fail(ErrorKind::kInvalidArgument, "unknown dampening '" + s + "'");
}

Force force_from_string(const std::string& s) {
  for (auto k : {Force::kNone, Force::kMlp4Sin, Force::kDgnTanh}) {
    if (s == to_string(k)) return k;
  }
  fail(ErrorKind::kInvalidArgument, "unknown force '" + s + "'");
}

ReadoutInput readout_input_from_string(const std::string& s) {
  for (auto k : {ReadoutInput::kP, ReadoutInput::kQ, ReadoutInput::kPQ}) {
    if (s == to_string(k)) return k;
  }
  fail(ErrorKind::kInvalidArgument, "unknown readout input '" + s + "'");
}

int core_width(const CoreConfig& cfg) {
  return std::visit([](const auto& c) { return c.d; }, cfg);
}

int core_layers(const CoreConfig& cfg) {
  return std::visit([](const auto& c) { return c.layers; }, cfg);
}

void validate(const CoreConfig& cfg) {
  std::visit(Overloaded{
                 [](const ADgnConfig& c) {
                   require(c.eps > 0 && c.gamma >= 0, ErrorKind::kInvalidArgument,
                           "A-DGN needs eps > 0 and gamma >= 0");
                 },
                 [](const SwanConfig& c) {
                   require(c.eps > 0 && c.gamma >= 0, ErrorKind::kInvalidArgument,
                           "SWAN needs eps > 0 and gamma >= 0");
                 },
                 [](const PhdgnConfig& c) {
                   require_phdgn(c);
                   require(c.eps > 0, ErrorKind::kInvalidArgument, "PH-DGN needs eps > 0");
                 },
                 [](const HeatConfig& c) {
                   require(c.eps >= 0, ErrorKind::kInvalidArgument, "heat needs eps >= 0");
                 },
                 [](const GcnConfig&) {},
             },
             cfg);
  std::visit(
      [](const auto& c) {
        require(c.d >= 1, ErrorKind::kInvalidSize, "width must be positive");
        require(c.layers >= 0, ErrorKind::kInvalidSize, "layer count must be non-negative");
      },
      cfg);
}

GraphContext GraphContext::build(const Graph& g) {
  GraphContext ctx;
  ctx.n = g.num_nodes();
  auto fwd = std::make_shared<EdgeIndex>();
  auto rev = std::make_shared<EdgeIndex>();
  fwd->num_nodes = rev->num_nodes = ctx.n;
  for (const auto& e : g.edges()) {
    fwd->src.push_back(e.src);
    fwd->dst.push_back(e.dst);
  }
  rev->src = fwd->dst;
  rev->dst = fwd->src;
  ctx.src = std::make_shared<const std::vector<int>>(fwd->src);
  ctx.dst = std::make_shared<const std::vector<int>>(fwd->dst);
  ctx.edges = fwd;
  ctx.reversed = rev;

  auto adj = std::make_shared<SparseMatrix>(sparse_shift_operator(g, ShiftOperatorKind::kAdjacency));
  ctx.adjacency_t = std::make_shared<SparseMatrix>(SparseMatrix(adj->transpose()));
  ctx.adjacency = adj;
  auto gcn = std::make_shared<SparseMatrix>(gcn_normalized_adjacency(g));
  ctx.gcn_t = std::make_shared<SparseMatrix>(SparseMatrix(gcn->transpose()));
  ctx.gcn = gcn;
  ctx.sym_laplacian =
      std::make_shared<SparseMatrix>(sparse_shift_operator(g, ShiftOperatorKind::kSymNormLaplacian));

  const auto deg = g.in_degree();
  for (const auto& e : g.edges()) {
    const double ds = deg[e.src] > 0 ? 1.0 / std::sqrt(static_cast<double>(deg[e.src])) : 0.0;
    const double dd = 1.0 / std::sqrt(static_cast<double>(deg[e.dst]));
    ctx.sym_adj_coef.push_back(ds * dd);
    ctx.rw_adj_coef.push_back(1.0 / deg[e.dst]);
  }
  return ctx;
}

Var EdgeOperator::apply(Var x) const { return ad::edge_aggregate(coef, x, apply_index); }

Var EdgeOperator::apply_transposed(Var x) const { return ad::edge_aggregate(coef, x, transpose_index); }

Matrix EdgeOperator::dense() const {
  Matrix m = Matrix::Zero(apply_index->num_nodes, apply_index->num_nodes);
  const Matrix& c = coef.value();
  for (std::size_t e = 0; e < apply_index->src.size(); ++e) {
    m(apply_index->dst[e], apply_index->src[e]) += c(static_cast<Eigen::Index>(e), 0);
  }
  return m;
}

Var SwanOperators::symmetric(Var x) const { return ad::add(a_hat.apply(x), a_hat.apply_transposed(x)); }

Var SwanOperators::antisymmetric(Var x) const {
  return ad::sub(a_tilde.apply(x), a_tilde.apply_transposed(x));
}

Matrix SwanOperators::p_dense() const {
  Matrix a = a_hat.dense();
  return a + a.transpose();
}

Matrix SwanOperators::s_dense() const {
  Matrix a = a_tilde.dense();
  return a - a.transpose();
}

void init_core(ParamStore& store, const CoreConfig& cfg, Rng& rng) {
  validate(cfg);
  std::visit(
      Overloaded{
          [&](const ADgnConfig& c) {
            add_square(store, "core.w", c.d, rng);
            add_square(store, "core.v", c.d, rng);
            store.add("core.b", uniform_init(1, c.d, c.d, rng));
          },
          [&](const SwanConfig& c) {
            add_square(store, "core.w", c.d, rng);
            add_square(store, "core.v", c.d, rng);
            add_square(store, "core.z", c.d, rng);
            store.add("core.b", uniform_init(1, c.d, c.d, rng));
            if (c.mode == OperatorMode::kLearned) {
              store.add("core.k1", uniform_init(2 * c.d, c.d, 2 * c.d, rng));
              store.add("core.k2", uniform_init(c.d, c.d, c.d, rng));
            }
          },
          [&](const PhdgnConfig& c) {
            const int h = c.d / 2;
            for (const char* side : {"p", "q"}) {
              add_square(store, std::string("core.w") + side, h, rng);
              add_square(store, std::string("core.v") + side, h, rng);
              store.add(std::string("core.b") + side, uniform_init(1, h, h, rng));
            }
            switch (c.dampening) {
              case Dampening::kNone: break;
              case Dampening::kParam:
              case Dampening::kParamPlus:
                store.add("core.damp.w", uniform_init(1, h, h, rng));
                break;
              case Dampening::kMlp4Relu:
                init_mlp(store, "core.damp", {{h, h, h, h, h}, Activation::kRelu, true}, rng);
                break;
              case Dampening::kDgnRelu:
                add_square(store, "core.damp.w", h, rng);
                add_square(store, "core.damp.v", h, rng);
                store.add("core.damp.b", uniform_init(1, h, h, rng));
                break;
            }
            switch (c.force) {
              case Force::kNone: break;
              case Force::kMlp4Sin:
                init_mlp(store, "core.force", {{h + 1, h + 1, h + 1, h + 1, h}, Activation::kSin, false},
                         rng);
                break;
              case Force::kDgnTanh:
                store.add("core.force.w", uniform_init(h + 1, h, h + 1, rng));
                store.add("core.force.v", uniform_init(h + 1, h, h + 1, rng));
                store.add("core.force.b", uniform_init(1, h, h + 1, rng));
                break;
            }
          },
          [&](const HeatConfig&) {},
          [&](const GcnConfig& c) {
            for (int l = 0; l < c.layers; ++l) {
              add_square(store, "core.w" + std::to_string(l), c.d, rng);
              store.add("core.b" + std::to_string(l), uniform_init(1, c.d, c.d, rng));
            }
          },
      },
      cfg);
}

SwanOperators swan_fixed_operators(Tape& tape, const GraphContext& ctx) {
  SwanOperators ops;
  ops.a_hat = {ctx.edges, ctx.reversed, column_of(tape, ctx.sym_adj_coef)};
  ops.a_tilde = {ctx.edges, ctx.reversed, column_of(tape, ctx.rw_adj_coef)};
  return ops;
}

SwanOperators swan_learn_operators(Tape& tape, ParamStore& store, const SwanConfig& cfg,
                                   const GraphContext& ctx, Var x0) {
  require(x0.cols() == cfg.d, ErrorKind::kShapeMismatch, "learned operators expect width d");
  Var f = ad::hcat(ad::gather_rows(x0, ctx.src), ad::gather_rows(x0, ctx.dst));
  Var h = ad::activation(ad::matmul(f, tape.param(store, "core.k1")), cfg.act);
  Var emb = ad::activation(ad::matmul(h, tape.param(store, "core.k2")), Activation::kRelu);
  Var w = ad::row_mean(emb);
  // F(src, dst) = w_e, so column sums of F collect weights at the destination.
  Var deg = ad::scatter_add_rows(w, ctx.dst, ctx.n);
  Var inv_sqrt = ad::safe_pow(deg, -0.5);
  Var inv = ad::safe_pow(deg, -1.0);
  Var c_hat = ad::hadamard(w, ad::hadamard(ad::gather_rows(inv_sqrt, ctx.src), ad::gather_rows(inv_sqrt, ctx.dst)));
  Var c_tilde = ad::hadamard(w, ad::gather_rows(inv, ctx.src));
  SwanOperators ops;
  // Row src, column dst: applying F reads x_dst into row src.
  ops.a_hat = {ctx.reversed, ctx.edges, c_hat};
  ops.a_tilde = {ctx.reversed, ctx.edges, c_tilde};
  return ops;
}

std::vector<Var> adgn_forward(Tape& tape, ParamStore& store, const ADgnConfig& cfg,
                              const GraphContext& ctx, Var x0) {
  require(x0.cols() == cfg.d, ErrorKind::kShapeMismatch, "A-DGN input width mismatch");
  std::vector<Var> states{x0};
  if (cfg.layers == 0) return states;
  Var w = ad::add_diag(ad::antisym(tape.param(store, "core.w")), -cfg.gamma);
  Var v = tape.param(store, "core.v");
  Var b = tape.param(store, "core.b");
  const auto& agg = aggregation(ctx, cfg.agg);
  Var x = x0;
  for (int l = 0; l < cfg.layers; ++l) {
    Var pre = ad::add_row(ad::add(ad::matmul(x, w), ad::matmul(ad::spmm(agg, x), v)), b);
    x = ad::add(x, ad::scale(ad::activation(pre, cfg.act), cfg.eps));
    check_finite(x, l + 1);
    states.push_back(x);
  }
  return states;
}

std::vector<Var> swan_forward(Tape& tape, ParamStore& store, const SwanConfig& cfg,
                              const SwanOperators& ops, Var x0) {
  require(x0.cols() == cfg.d, ErrorKind::kShapeMismatch, "SWAN input width mismatch");
  std::vector<Var> states{x0};
  if (cfg.layers == 0) return states;
  Var w = ad::add_diag(ad::antisym(tape.param(store, "core.w")), -cfg.gamma);
  Var v = tape.param(store, "core.v");
  if (cfg.enforce_v_antisym) v = ad::antisym(v);
  Var b = tape.param(store, "core.b");
  const bool spatial = cfg.beta != 0.0;
  Var z = spatial ? ad::scale(ad::symm(tape.param(store, "core.z")), cfg.beta) : Var{};
  Var x = x0;
  for (int l = 0; l < cfg.layers; ++l) {
    Var pre = ad::add(ad::matmul(x, w), ad::matmul(ops.symmetric(x), v));
    if (spatial) pre = ad::add(pre, ad::matmul(ops.antisymmetric(x), z));
    pre = ad::add_row(pre, b);
    x = ad::add(x, ad::scale(ad::activation(pre, cfg.act), cfg.eps));
    check_finite(x, l + 1);
    states.push_back(x);
  }
  return states;
}

Var phdgn_step(Tape& tape, ParamStore& store, const PhdgnConfig& cfg, const GraphContext& ctx, Var x,
               int step) {
  const int h = cfg.d / 2;
  Var p = ad::cols(x, 0, h);
  Var q = ad::cols(x, h, h);

  Var zp = hamiltonian_grad(tape, store, ctx, cfg.agg_q, cfg.act, "q", q);
  switch (cfg.dampening) {
    case Dampening::kNone: break;
    case Dampening::kParam: zp = ad::mul_row(zp, tape.param(store, "core.damp.w")); break;
    case Dampening::kParamPlus:
      zp = ad::mul_row(zp, ad::activation(tape.param(store, "core.damp.w"), Activation::kRelu));
      break;
    case Dampening::kMlp4Relu:
      zp = ad::hadamard(zp, mlp_forward(tape, store, "core.damp", {{h, h, h, h, h}, Activation::kRelu, true}, q));
      break;
    case Dampening::kDgnRelu: {
      Var a = ad::add(ad::matmul(q, tape.param(store, "core.damp.w")),
                      ad::matmul(ad::spmm(aggregation(ctx, cfg.agg_q), q), tape.param(store, "core.damp.v")));
      a = ad::add_row(a, tape.param(store, "core.damp.b"));
      zp = ad::hadamard(zp, ad::activation(a, Activation::kRelu));
      break;
    }
  }
  if (cfg.force != Force::kNone) {
    Var t = tape.constant(Matrix::Constant(ctx.n, 1, step * cfg.eps));
    Var qt = ad::hcat(q, t);
    Var f;
    if (cfg.force == Force::kMlp4Sin) {
      f = mlp_forward(tape, store, "core.force", {{h + 1, h + 1, h + 1, h + 1, h}, Activation::kSin, false}, qt);
    } else {
      Var a = ad::add(ad::matmul(qt, tape.param(store, "core.force.w")),
                      ad::matmul(ad::spmm(aggregation(ctx, cfg.agg_q), qt), tape.param(store, "core.force.v")));
      f = ad::activation(ad::add_row(a, tape.param(store, "core.force.b")), Activation::kTanh);
    }
    zp = ad::add(zp, f);
  }
  Var p1 = ad::sub(p, ad::scale(zp, cfg.eps));
  Var zq = hamiltonian_grad(tape, store, ctx, cfg.agg_p, cfg.act, "p", p1);
  Var q1 = ad::add(q, ad::scale(zq, cfg.eps));
  return ad::hcat(p1, q1);
}

std::vector<Var> phdgn_forward(Tape& tape, ParamStore& store, const PhdgnConfig& cfg,
                               const GraphContext& ctx, Var x0) {
  require_phdgn(cfg);
  require(x0.cols() == cfg.d, ErrorKind::kShapeMismatch, "PH-DGN input width mismatch");
  std::vector<Var> states{x0};
  Var x = x0;
  for (int l = 0; l < cfg.layers; ++l) {
    x = phdgn_step(tape, store, cfg, ctx, x, l);
    check_finite(x, l + 1);
    states.push_back(x);
  }
  return states;
}

std::vector<Var> heat_diffusion_forward(Tape&, const HeatConfig& cfg, const GraphContext& ctx, Var x0) {
  std::vector<Var> states{x0};
  Var x = x0;
  for (int l = 0; l < cfg.layers; ++l) {
    x = ad::sub(x, ad::scale(ad::spmm(ctx.sym_laplacian, x), cfg.eps));
    check_finite(x, l + 1);
    states.push_back(x);
  }
  return states;
}

std::vector<Var> gcn_forward(Tape& tape, ParamStore& store, const GcnConfig& cfg, const GraphContext& ctx,
                             Var x0) {
  require(x0.cols() == cfg.d, ErrorKind::kShapeMismatch, "GCN input width mismatch");
  std::vector<Var> states{x0};
  Var x = x0;
  for (int l = 0; l < cfg.layers; ++l) {
    Var w = tape.param(store, "core.w" + std::to_string(l));
    Var b = tape.param(store, "core.b" + std::to_string(l));
    x = ad::activation(ad::add_row(ad::matmul(ad::spmm(ctx.gcn, x), w), b), cfg.act);
    check_finite(x, l + 1);
    states.push_back(x);
  }
  return states;
}

std::vector<Var> core_forward(Tape& tape, ParamStore& store, const CoreConfig& cfg, const GraphContext& ctx,
                              Var x0) {
  return std::visit(
      Overloaded{
          [&](const ADgnConfig& c) { return adgn_forward(tape, store, c, ctx, x0); },
          [&](const SwanConfig& c) {
            SwanOperators ops = c.mode == OperatorMode::kLearned
                                    ? swan_learn_operators(tape, store, c, ctx, x0)
                                    : swan_fixed_operators(tape, ctx);
            return swan_forward(tape, store, c, ops, x0);
          },
          [&](const PhdgnConfig& c) { return phdgn_forward(tape, store, c, ctx, x0); },
          [&](const HeatConfig& c) { return heat_diffusion_forward(tape, c, ctx, x0); },
          [&](const GcnConfig& c) { return gcn_forward(tape, store, c, ctx, x0); },
      },
      cfg);
}

double hamiltonian_energy(const ParamStore& store, const PhdgnConfig& cfg, const GraphContext& ctx,
                          const Matrix& x) {
  require_phdgn(cfg);
  require(x.cols() == cfg.d && x.rows() == ctx.n, ErrorKind::kShapeMismatch, "energy state shape mismatch");
  const int h = cfg.d / 2;
  const Matrix ap = half_preactivation(store, ctx, cfg.agg_p, "p", x.leftCols(h));
  const Matrix aq = half_preactivation(store, ctx, cfg.agg_q, "q", x.rightCols(h));
  double e = 0.0;
  for (Eigen::Index i = 0; i < ap.size(); ++i) e += activate_antiderivative(cfg.act, ap.data()[i]);
  for (Eigen::Index i = 0; i < aq.size(); ++i) e += activate_antiderivative(cfg.act, aq.data()[i]);
  return e;
}

Matrix hamiltonian_field(const ParamStore& store, const PhdgnConfig& cfg, const GraphContext& ctx,
                         const Matrix& x) {
  require_phdgn(cfg);
  require(x.cols() == cfg.d && x.rows() == ctx.n, ErrorKind::kShapeMismatch, "field state shape mismatch");
  const int h = cfg.d / 2;
  Matrix out(x.rows(), x.cols());
  out.leftCols(h) = -half_grad(store, ctx, cfg.agg_q, cfg.act, "q", x.rightCols(h));
  out.rightCols(h) = half_grad(store, ctx, cfg.agg_p, cfg.act, "p", x.leftCols(h));
  return out;
}

}  // namespace nondiss
