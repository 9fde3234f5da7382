#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "nondiss/autodiff.hpp"
#include "nondiss/graph.hpp"
#include "nondiss/nn.hpp"

namespace nondiss {

enum class AggregationKind { kSimpleSum, kGcn };
enum class OperatorMode { kFixed, kLearned };
enum class Dampening { kNone, kParam, kParamPlus, kMlp4Relu, kDgnRelu };
enum class Force { kNone, kMlp4Sin, kDgnTanh };
enum class ReadoutInput { kP, kQ, kPQ };

const char* to_string(AggregationKind k);
const char* to_string(Dampening k);
const char* to_string(Force k);
const char* to_string(ReadoutInput k);
AggregationKind aggregation_from_string(const std::string& s);
Dampening dampening_from_string(const std::string& s);
Force force_from_string(const std::string& s);
ReadoutInput readout_input_from_string(const std::string& s);

struct ADgnConfig {
  int d = 10;
  int layers = 1;
  double eps = 0.1;
  double gamma = 0.1;
  AggregationKind agg = AggregationKind::kSimpleSum;
  Activation act = Activation::kTanh;
};

struct SwanConfig {
  int d = 10;
  int layers = 1;
  double eps = 0.1;
  double gamma = 0.1;
  double beta = 1.0;
  OperatorMode mode = OperatorMode::kFixed;
  bool enforce_v_antisym = true;
  Activation act = Activation::kTanh;
};

struct PhdgnConfig {
  int d = 10;  // full state width; p and q each take d/2
  int layers = 1;
  double eps = 0.1;
  AggregationKind agg_p = AggregationKind::kSimpleSum;
  AggregationKind agg_q = AggregationKind::kSimpleSum;
  Dampening dampening = Dampening::kNone;
  Force force = Force::kNone;
  ReadoutInput readout_input = ReadoutInput::kPQ;
  Activation act = Activation::kTanh;
};

/// X <- X - eps L_sym X.
struct HeatConfig {
  int d = 10;
  int layers = 1;
  double eps = 0.1;
};

/// X <- act(A_gcn X W_l + b_l), one weight pair per layer.
struct GcnConfig {
  int d = 10;
  int layers = 1;
  Activation act = Activation::kTanh;
};

using CoreConfig = std::variant<ADgnConfig, SwanConfig, PhdgnConfig, HeatConfig, GcnConfig>;

int core_width(const CoreConfig& cfg);
int core_layers(const CoreConfig& cfg);
void validate(const CoreConfig& cfg);

/// Sparse structure of one graph (or a disjoint union) shared by every
/// forward pass over it.
struct GraphContext {
  int n = 0;
  std::shared_ptr<const EdgeIndex> edges;
  std::shared_ptr<const EdgeIndex> reversed;
  std::shared_ptr<const std::vector<int>> src;
  std::shared_ptr<const std::vector<int>> dst;
  std::shared_ptr<const SparseMatrix> adjacency;
  std::shared_ptr<const SparseMatrix> adjacency_t;
  std::shared_ptr<const SparseMatrix> gcn;
  std::shared_ptr<const SparseMatrix> gcn_t;
  std::shared_ptr<const SparseMatrix> sym_laplacian;
  std::vector<double> sym_adj_coef;  // A_hat(dst, src) per edge
  std::vector<double> rw_adj_coef;   // A_tilde(dst, src) per edge

  static GraphContext build(const Graph& g);
};

/// Sparse n x n matrix M with M(row_e, col_e) = coef_e, one entry per edge.
struct EdgeOperator {
  std::shared_ptr<const EdgeIndex> apply_index;      // src = col, dst = row
  std::shared_ptr<const EdgeIndex> transpose_index;  // src = row, dst = col
  Var coef;

  Var apply(Var x) const;
  Var apply_transposed(Var x) const;
  Matrix dense() const;
};

/// Spatial operators of the SWAN field: Â (symmetric-type) and Ã (random-walk-type).
struct SwanOperators {
  EdgeOperator a_hat;
  EdgeOperator a_tilde;

  /// (Â + Âᵀ) X.
  Var symmetric(Var x) const;
  /// (Ã − Ãᵀ) X.
  Var antisymmetric(Var x) const;
  Matrix p_dense() const;
  Matrix s_dense() const;
};

/// Registers core.* parameters for the configured layer.
void init_core(ParamStore& store, const CoreConfig& cfg, Rng& rng);

/// Â = D^-1/2 A D^-1/2 and Ã = D^-1 A on the input graph.
SwanOperators swan_fixed_operators(Tape& tape, const GraphContext& ctx);

/// Edge weights from concat(x_src, x_dst) through ReLU(act(f K1) K2), mean
/// over features; F(src, dst) = weight; D_F = column sums of F;
/// Â_F = D_F^-1/2 F D_F^-1/2, Ã_F = D_F^-1 F with zero rows for zero degree.
SwanOperators swan_learn_operators(Tape& tape, ParamStore& store, const SwanConfig& cfg,
                                   const GraphContext& ctx, Var x0);

/// Every forward returns the states X^0 .. X^L.
std::vector<Var> adgn_forward(Tape& tape, ParamStore& store, const ADgnConfig& cfg,
                              const GraphContext& ctx, Var x0);
std::vector<Var> swan_forward(Tape& tape, ParamStore& store, const SwanConfig& cfg,
                              const SwanOperators& ops, Var x0);
std::vector<Var> phdgn_forward(Tape& tape, ParamStore& store, const PhdgnConfig& cfg,
                               const GraphContext& ctx, Var x0);
std::vector<Var> heat_diffusion_forward(Tape& tape, const HeatConfig& cfg, const GraphContext& ctx,
                                        Var x0);
std::vector<Var> gcn_forward(Tape& tape, ParamStore& store, const GcnConfig& cfg,
                             const GraphContext& ctx, Var x0);

/// One symplectic step of PH-DGN from X = [p | q] at layer index step.
Var phdgn_step(Tape& tape, ParamStore& store, const PhdgnConfig& cfg, const GraphContext& ctx,
               Var x, int step);

/// Dispatches on the config; learned SWAN operators are computed from x0.
std::vector<Var> core_forward(Tape& tape, ParamStore& store, const CoreConfig& cfg,
                              const GraphContext& ctx, Var x0);

/// Σ_u 1ᵀσ̃(p_u W_p + Φ_p + b_p) + 1ᵀσ̃(q_u W_q + Φ_q + b_q) for X = [p | q].
double hamiltonian_energy(const ParamStore& store, const PhdgnConfig& cfg, const GraphContext& ctx,
                          const Matrix& x);

/// Pure Hamiltonian field (−∇_q H, ∇_p H) laid out as [p | q].
Matrix hamiltonian_field(const ParamStore& store, const PhdgnConfig& cfg, const GraphContext& ctx,
                         const Matrix& x);

}  // namespace nondiss
