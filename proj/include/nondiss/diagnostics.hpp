#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nondiss/layers.hpp"
#include "nondiss/linalg.hpp"

namespace nondiss {

/// J = diag(m1) m2 over column-stacked vec(X).
struct SwanJacobian {
  Vector m1;
  Matrix m2;
  Matrix jacobian() const { return m1.asDiagonal() * m2; }
};

/// Weight matrices entering the SWAN field after the configured constraints:
/// w_hat = W − Wᵀ − γI (γ only when include_gamma), v_hat = V − Vᵀ or V,
/// z_hat = Z + Zᵀ.
struct SwanWeights {
  Matrix w_hat;
  Matrix v_hat;
  Matrix z_hat;
  RowVector b;
};
SwanWeights swan_weights(const ParamStore& store, const SwanConfig& cfg, bool include_gamma);

/// act(X Ŵ + P X V̂ + β S X Ẑ + b).
Matrix swan_field(const SwanWeights& w, const SwanConfig& cfg, const Matrix& p, const Matrix& s,
                  const Matrix& x);

/// M2 = Ŵᵀ⊗I + V̂ᵀ⊗P + β Ẑᵀ⊗S and M1 = vec σ′(pre-activation at X).
SwanJacobian assemble_swan_jacobian(const SwanWeights& w, const SwanConfig& cfg, const Matrix& p,
                                    const Matrix& s, const Matrix& x);

/// Central-difference Jacobian of f at vec(x), column-stacked.
Matrix finite_difference_jacobian(const std::function<Matrix(const Matrix&)>& f, const Matrix& x,
                                  double h = 1e-6);

/// Jacobian of GCN layer `layer` (0-based), act(Â X W_l + b_l), at X.
Matrix gcn_layer_jacobian(const ParamStore& store, const GcnConfig& cfg, const Matrix& a_gcn,
                          const Matrix& x, int layer);

/// ‖∂x_u^L/∂x_u^ℓ‖₂ for ℓ = 0..L, from d backward passes seeded at node u of
/// the last state. states must live on tape.
std::vector<double> bsm_trace(Tape& tape, const std::vector<Var>& states, int u);

/// Block ∂x_v^{out}/∂x_u^{in}: rows index coordinates of x_v, columns of x_u.
Matrix node_sensitivity(Tape& tape, Var out, Var in, int v, int u);

/// (t, ‖expm(t G)‖_F) on t = 0, T/steps, ..., T.
std::vector<std::pair<double, double>> propagation_rate(const Matrix& generator, double horizon, int steps);

/// −I_d ⊗ L with the unnormalized Laplacian.
Matrix heat_generator(const Graph& g, int d);

/// |J^ℓ − J^{ℓ−1}|_F / |J^{ℓ−1}|_F for ℓ = 2..L, with jacobians[0] = J^1.
std::vector<double> jacobian_drift(const std::vector<Matrix>& jacobians);

struct SensitivityBoundParams {
  double c_sigma = 1.0;
  double w = 0.0;
  double p = 0.0;
  double c_r = 0.0;
  double c_a = 0.0;
  double c_b = 0.0;
};

/// Constants under which one SWAN Euler step satisfies the bound with the
/// induced 1-norm: c_r = 1/(c_σ w p) + ε, c_a = c_b = ε, w = max |entry| of
/// Ŵ (with γ), V̂, Ẑ, p = d.
SensitivityBoundParams swan_sensitivity_params(const ParamStore& store, const SwanConfig& cfg,
                                               double c_sigma = 1.0);

/// (c_σ w p)^ℓ ((c_r I + c_a |P| + |β| c_b |S|)^ℓ)_{vu}.
double sensitivity_upper_bound(const SensitivityBoundParams& b, const Matrix& p, const Matrix& s,
                               double beta, int layers, int u, int v);

/// Jacobian of the Hamiltonian field at X = [p | q], over column-stacked vec
/// of the node-major (p, q) state: [[0, −H_qq], [H_pp, 0]].
Matrix hamiltonian_jacobian(const ParamStore& store, const PhdgnConfig& cfg, const GraphContext& ctx,
                            const Matrix& x);

/// Σ_i ∂f_i/∂x_i of the Hamiltonian field by central differences.
double hamiltonian_divergence(const ParamStore& store, const PhdgnConfig& cfg, const GraphContext& ctx,
                              const Matrix& x, double h = 1e-5);

/// √d·M‖W‖₂² + √d·M·max|N|·‖V‖₂² with W, V the block-diagonal weights, M = 1
/// for tanh. Reported only.
double hamiltonian_upper_bound_rate(const ParamStore& store, const PhdgnConfig& cfg, const Graph& g);

/// (ℓε, H(X^ℓ) − H(X^0)) along a forward run without recording gradients.
std::vector<std::pair<double, double>> energy_trace(ParamStore& store, const PhdgnConfig& cfg,
                                                    const GraphContext& ctx, const Matrix& x0);

struct DiagnosticsReport {
  double max_re_eig = 0.0;
  std::vector<Complex> eigenvalues;
  std::vector<std::pair<int, double>> bsm_per_layer;
  std::vector<std::pair<double, double>> energy_trace;
  std::vector<double> jacobian_drift;
  std::vector<std::pair<double, double>> rate_curve;
};

nlohmann::json to_json(const DiagnosticsReport& r);

}  // namespace nondiss
