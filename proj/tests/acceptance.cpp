// Acceptance runner: one PASS/FAIL line per criterion. Pass criterion ids as
// arguments to run a subset.
#include <sys/resource.h>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nondiss/datasets.hpp"
#include "nondiss/diagnostics.hpp"
#include "nondiss/runtime.hpp"
#include "nondiss/training.hpp"

using namespace nondiss;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// Process CPU seconds, including finished child processes.
double cpu_seconds() {
  double total = 0.0;
  for (int who : {RUSAGE_SELF, RUSAGE_CHILDREN}) {
    rusage r{};
    getrusage(who, &r);
    total += static_cast<double>(r.ru_utime.tv_sec + r.ru_stime.tv_sec) +
             1e-6 * static_cast<double>(r.ru_utime.tv_usec + r.ru_stime.tv_usec);
  }
  return total;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

// Biases start at zero; give them values so they take part in the checks.
void randomize_biases(ParamStore& store, Rng& rng) {
  for (auto& [name, e] : store) {
    if (name.find(".b") != std::string::npos) e.value = random_matrix(e.value.rows(), e.value.cols(), rng, 0.3);
  }
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Hop distances by Floyd-Warshall, independent of the BFS used by the generators.
std::vector<std::vector<int>> floyd_warshall(const Graph& g) {
  const int n = g.num_nodes();
  const int inf = 1 << 29;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (int u = 0; u < n; ++u) d[u][u] = 0;
  for (const auto& e : g.edges()) d[e.src][e.dst] = 1;
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    }
  }
  return d;
}

Outcome antisymmetry_spectrum() {
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    Rng rng(derive_seed(1, i));
    const int d = 1 + i % 32;
    worst = std::max(worst, max_abs_real(eig_general(antisymmetrize(random_matrix(d, d, rng)))));
  }
  return {worst < 1e-10, fmt("max |Re| = %.3g over 200 matrices", worst)};
}

Outcome swan_jacobian() {
  double worst_re = 0.0;
  double worst_fd = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int n = 3 + i % 10;
    const Graph g = erdos_renyi(n, 0.4, derive_seed(2, i));
    const GraphContext ctx = GraphContext::build(g);
    for (auto mode : {OperatorMode::kFixed, OperatorMode::kLearned}) {
      Rng rng(derive_seed(3, 2 * i + (mode == OperatorMode::kLearned)));
      SwanConfig cfg;
      cfg.d = 1 + i % 4;
      cfg.beta = rng.uniform(-1.0, 1.0);
      cfg.mode = mode;
      ParamStore store;
      init_core(store, cfg, rng);
      randomize_biases(store, rng);
      const Matrix x = random_matrix(n, cfg.d, rng);
      Tape t;
      const SwanOperators ops = mode == OperatorMode::kLearned
                                    ? swan_learn_operators(t, store, cfg, ctx, t.constant(x))
                                    : swan_fixed_operators(t, ctx);
      const Matrix p = ops.p_dense();
      const Matrix s = ops.s_dense();
      const SwanJacobian structural = assemble_swan_jacobian(swan_weights(store, cfg, false), cfg, p, s, x);
      worst_re = std::max(worst_re, max_abs_real(eig_general(structural.m2)));
      const SwanWeights w = swan_weights(store, cfg, true);
      const Matrix j = assemble_swan_jacobian(w, cfg, p, s, x).jacobian();
      const Matrix fd = finite_difference_jacobian([&](const Matrix& y) { return swan_field(w, cfg, p, s, y); }, x);
      const double rel = (j - fd).cwiseAbs().maxCoeff() / std::max(1e-12, fd.cwiseAbs().maxCoeff());
      worst_fd = std::max(worst_fd, rel);
    }
  }
  return {worst_re < 1e-8 && worst_fd < 1e-5,
          fmt("max |Re| of M2 = %.3g, max FD relative error = %.3g over 100 cases", worst_re, worst_fd)};
}

Outcome propagation() {
  const Graph g = ring_graph(10);
  const GraphContext ctx = GraphContext::build(g);
  SwanConfig cfg;
  cfg.d = 2;
  cfg.act = Activation::kIdentity;
  Rng rng(7);
  ParamStore store;
  init_core(store, cfg, rng);
  Tape t;
  const SwanOperators ops = swan_fixed_operators(t, ctx);
  const Matrix x = random_matrix(10, 2, rng);
  const Matrix j = assemble_swan_jacobian(swan_weights(store, cfg, false), cfg, ops.p_dense(), ops.s_dense(), x)
                       .jacobian();
  const auto curve = propagation_rate(j, 10.0, 100);
  double dev = 0.0;
  for (const auto& [time, v] : curve) dev = std::max(dev, std::abs(v / curve.front().second - 1.0));
  const auto heat = propagation_rate(heat_generator(g, 2), 10.0, 100);
  const double ratio = heat.back().second / heat.front().second;
  return {dev < 0.02 && ratio <= 0.5, fmt("SWAN max deviation %.3g%%, heat retains %.3g of its t=0 norm", 100 * dev, ratio)};
}

Outcome bsm_lower_bound() {
  const Graph g = ring_graph(20);
  const GraphContext ctx = GraphContext::build(g);
  PhdgnConfig cfg;
  cfg.d = 8;
  cfg.layers = 100;
  cfg.eps = 0.1;
  Rng rng(1);
  ParamStore store;
  init_core(store, cfg, rng);
  const Matrix x0 = random_matrix(20, cfg.d, rng);
  double worst = 1e300;
  for (int u = 0; u < 15; ++u) {
    Tape t;
    const auto states = phdgn_forward(t, store, cfg, ctx, t.variable(x0));
    for (double v : bsm_trace(t, states, u)) worst = std::min(worst, v);
  }
  return {worst >= 1.0 - 1e-6, fmt("min BSM norm %.6f over 15 nodes x 101 layers", worst)};
}

Outcome energy() {
  const Graph g = ring_graph(20);
  const GraphContext ctx = GraphContext::build(g);
  PhdgnConfig base;
  base.d = 8;
  Rng rng(2);
  ParamStore store;
  init_core(store, base, rng);
  randomize_biases(store, rng);
  const Matrix x0 = random_matrix(20, base.d, rng);
  std::vector<double> peaks;
  bool ok = true;
  std::string detail;
  for (double eps : {0.1, 0.01, 0.001}) {
    PhdgnConfig cfg = base;
    cfg.eps = eps;
    cfg.layers = static_cast<int>(std::lround(10.0 / eps));
    const auto trace = energy_trace(store, cfg, ctx, x0);
    double peak = 0.0;
    int changes = 0;
    int last_sign = 0;
    for (const auto& [time, dh] : trace) {
      peak = std::max(peak, std::abs(dh));
      const int sign = (dh > 0) - (dh < 0);
      if (sign != 0 && last_sign != 0 && sign != last_sign) ++changes;
      if (sign != 0) last_sign = sign;
    }
    ok = ok && std::isfinite(peak) && changes >= 1 && (peaks.empty() || peak < peaks.back());
    peaks.push_back(peak);
    detail += fmt("%seps %g: max %.3g, %d sign changes", detail.empty() ? "" : "; ", eps, peak, changes);
  }
  return {ok, detail};
}

Outcome gradients() {
  const std::vector<std::string> kinds = {"adgn", "swan", "swan-learn", "swan-ne", "swan-learn-ne", "hdgn", "phdgn"};
  double worst = 0.0;
  std::string worst_at;
  for (const auto& kind : kinds) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(derive_seed(6, seed));
      const int n = 5 + static_cast<int>(seed % 4);
      const Graph g = erdos_renyi(n, 0.4, derive_seed(7, seed));
      const GraphContext ctx = GraphContext::build(g);
      ModelConfig cfg = default_model_config(kind);
      cfg.d_in = 2;
      cfg.d_out = 2;
      cfg.d = 4;
      cfg.layers = 3;
      cfg.beta = 0.7;
      Model model(cfg, seed);
      randomize_biases(model.params(), rng);
      const Matrix x = random_matrix(n, 2, rng);
      const Matrix y = random_matrix(n, 2, rng);
      const auto report = grad_check(
          [&](Tape& t, ParamStore&) { return ad::mse(model.forward(t, ctx, x).prediction, y); }, model.params());
      if (report.max_rel_error >= worst) {
        worst = report.max_rel_error;
        worst_at = kind + " seed " + std::to_string(seed);
      }
    }
  }
  return {worst < 1e-4, fmt("max relative error %.3g (%s), 7 models x 5 seeds", worst, worst_at.c_str())};
}

Outcome property_oracle() {
  int checked = 0;
  int mismatches = 0;
  const std::vector<TaskKind> kinds = {TaskKind::kDiameter, TaskKind::kEccentricity, TaskKind::kSssp};
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    const int count = k == 0 ? 34 : 33;
    const Dataset ds = gen_graph_property(kinds[k], count, 0, 0, 100 + k, false);
    for (const Sample& s : ds.train) {
      ++checked;
      const int n = s.graph.num_nodes();
      const auto d = floyd_warshall(s.graph);
      std::vector<int> ecc(n, 0);
      for (int u = 0; u < n; ++u) {
        for (int v = 0; v < n; ++v) ecc[u] = std::max(ecc[u], d[u][v]);
      }
      bool same = true;
      if (kinds[k] == TaskKind::kDiameter) {
        same = s.target(0, 0) == *std::max_element(ecc.begin(), ecc.end());
      } else if (kinds[k] == TaskKind::kEccentricity) {
        for (int u = 0; u < n; ++u) same = same && s.target(u, 0) == ecc[u];
      } else {
        int source = -1;
        for (int u = 0; u < n; ++u) {
          if (s.graph.x()(u, 1) == 1.0) source = u;
        }
        same = source >= 0;
        for (int u = 0; same && u < n; ++u) same = s.target(u, 0) == d[source][u];
      }
      mismatches += !same;
    }
  }
  return {checked == 100 && mismatches == 0, fmt("%d graphs checked, %d mismatches", checked, mismatches)};
}

struct ModelRuns {
  std::vector<double> test_mse;
  int width = 0;
};

// Trains `kind` at the given width (or the width matching `budget`) on
// prepared splits, one run per seed.
ModelRuns transfer_runs(const std::string& kind, const Dataset& ds, const PreparedSplit& tr, const PreparedSplit& va,
                        const PreparedSplit& te, int layers, std::size_t budget, const TrainConfig& tc) {
  ModelConfig cfg = fit_to_dataset(default_model_config(kind), ds);
  cfg.layers = layers;
  cfg.d = width_for_budget(cfg, budget);
  ModelRuns out;
  out.width = cfg.d;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    out.test_mse.push_back(train_prepared(cfg, ds.task, tr, va, te, tc, seed).test_mse);
  }
  return out;
}

Outcome transfer() {
  TrainConfig tc;
  tc.lr = 0.003;
  tc.patience = 100;
  bool ok = true;
  std::string detail;
  for (int k : {3, 10}) {
    tc.max_epochs = k == 3 ? 500 : 800;
    const Dataset ds = gen_transfer(TaskKind::kTransferRing, k, 200, 50, 50, 0);
    const PreparedSplit tr = prepare_split(ds, ds.train);
    const PreparedSplit va = prepare_split(ds, ds.val);
    const PreparedSplit te = prepare_split(ds, ds.test);
    ModelConfig ref = fit_to_dataset(default_model_config("swan"), ds);
    ref.d = 32;
    ref.layers = k;
    const std::size_t budget = Model(ref, 0).num_parameters();
    std::map<std::string, double> mse;
    for (const char* kind : {"swan", "adgn", "gcn-baseline"}) {
      const ModelRuns runs = transfer_runs(kind, ds, tr, va, te, k, budget, tc);
      mse[kind] = mean(runs.test_mse);
      detail += fmt("%sk=%d %s(d=%d) %.3g", detail.empty() ? "" : ", ", k, kind, runs.width, mse[kind]);
    }
    if (k == 3) {
      for (const auto& [kind, v] : mse) ok = ok && v < 1e-2;
    } else {
      ok = ok && 10 * mse["swan"] <= mse["gcn-baseline"] && 10 * mse["adgn"] <= mse["gcn-baseline"];
    }
  }
  return {ok, "mean test MSE: " + detail};
}

Outcome diameter_task() {
  const Dataset ds = gen_graph_property(TaskKind::kDiameter, 512, 64, 128, 0);
  TrainConfig tc;
  tc.max_epochs = 600;
  tc.patience = 100;
  std::map<std::string, double> best;
  std::string detail;
  for (const char* kind : {"swan-learn", "gcn-baseline"}) {
    ModelConfig base = default_model_config(kind);
    base.d = 16;
    base.layers = 5;
    GridSpec spec;
    spec.base = base;
    spec.train = tc;
    spec.axes["lr"] = {0.003, 0.01};
    spec.seeds = {1, 2};
    const GridResult grid = run_grid(spec, ds);
    const GridCell& cell = grid.cells[grid.best];
    best[kind] = cell.test.mean;
    detail += fmt("%s%s %.3f (%s)", detail.empty() ? "" : ", ", kind, cell.test.mean, cell.overrides.dump().c_str());
  }
  const double gap = best["gcn-baseline"] - best["swan-learn"];
  return {gap >= 0.3, fmt("mean test log10 MSE %s; gap %.3f", detail.c_str(), gap)};
}

Outcome drift() {
  const Graph g = barabasi_albert(60, 2, 3);
  const GraphContext ctx = GraphContext::build(g);
  const int d = 16;
  const int layers = 10;
  Rng rng(11);
  const Matrix x0 = random_matrix(60, d, rng);

  SwanConfig sc;
  sc.d = d;
  sc.layers = layers;
  ParamStore ss;
  init_core(ss, sc, rng);
  Tape t;
  const SwanOperators ops = swan_fixed_operators(t, ctx);
  const auto states = swan_forward(t, ss, sc, ops, t.constant(x0));
  const SwanWeights w = swan_weights(ss, sc, true);
  const Matrix p = ops.p_dense();
  const Matrix s = ops.s_dense();
  std::vector<Matrix> sj;
  for (int l = 0; l < layers; ++l) sj.push_back(assemble_swan_jacobian(w, sc, p, s, states[l].value()).jacobian());
  const double swan_drift = mean(jacobian_drift(sj));

  GcnConfig gc{d, layers, Activation::kTanh};
  ParamStore gs;
  init_core(gs, gc, rng);
  Tape t2;
  const auto gstates = gcn_forward(t2, gs, gc, ctx, t2.constant(x0));
  const Matrix a = Matrix(gcn_normalized_adjacency(g));
  std::vector<Matrix> gj;
  for (int l = 0; l < layers; ++l) gj.push_back(gcn_layer_jacobian(gs, gc, a, gstates[l].value(), l));
  const double gcn_drift = mean(jacobian_drift(gj));

  // Heat diffusion is linear, so its layer Jacobian never changes.
  const Matrix heat = Matrix::Identity(60 * d, 60 * d) + 0.1 * heat_generator(g, d);
  const double heat_drift = mean(jacobian_drift(std::vector<Matrix>(layers, heat)));
  return {swan_drift < gcn_drift,
          fmt("mean drift SWAN %.4f, GCN %.4f, heat %.4f", swan_drift, gcn_drift, heat_drift)};
}

Outcome sensitivity() {
  double worst_ratio = 0.0;
  int pairs = 0;
  for (int i = 0; i < 20; ++i) {
    Rng rng(derive_seed(11, i));
    const int n = 4 + i % 5;
    const Graph g = erdos_renyi(n, 0.45, derive_seed(12, i));
    const GraphContext ctx = GraphContext::build(g);
    SwanConfig cfg;
    cfg.d = 1 + i % 3;
    cfg.layers = 1 + i % 4;
    cfg.beta = rng.uniform(-1.0, 1.0);
    ParamStore store;
    init_core(store, cfg, rng);
    randomize_biases(store, rng);
    Tape t;
    Var in = t.variable(random_matrix(n, cfg.d, rng));
    const SwanOperators ops = swan_fixed_operators(t, ctx);
    const auto states = swan_forward(t, store, cfg, ops, in);
    const auto params = swan_sensitivity_params(store, cfg);
    for (int u = 0; u < n; ++u) {
      for (int v = 0; v < n; ++v) {
        const double measured = induced_one_norm(node_sensitivity(t, states.back(), in, v, u));
        const double bound =
            sensitivity_upper_bound(params, ops.p_dense(), ops.s_dense(), cfg.beta, cfg.layers, u, v);
        ++pairs;
        if (bound > 0.0) {
          worst_ratio = std::max(worst_ratio, measured / bound);
        } else if (measured > 0.0) {
          worst_ratio = std::max(worst_ratio, HUGE_VAL);
        }
      }
    }
  }
  return {worst_ratio <= 1.0, fmt("max measured/bound %.3g over %d node pairs", worst_ratio, pairs)};
}

int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd =
      "cd '" + dir.string() + "' && '" + std::string(NONDISS_CLI_PATH) + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "nondiss_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "cfg.json") << R"({"d": 8, "layers": 3, "max_epochs": 40, "patience": 40})";
  int bad_exit = 0;
  for (const char* tag : {"a", "b"}) {
    const std::string t = tag;
    bad_exit += run_cli(dir, "gen-data --task transfer-ring --k 3 --counts 40,10,10 --seed 5 --out ring-" + t + ".jsonl") != 0;
    bad_exit += run_cli(dir, "gen-data --task sssp --counts 20,5,5 --seed 5 --out sssp-" + t + ".jsonl") != 0;
    bad_exit += run_cli(dir, "train --model swan --data ring-a.jsonl --config cfg.json --seeds 1,2 --out ring-run-" + t) != 0;
    bad_exit += run_cli(dir, "train --model hdgn --data sssp-a.jsonl --config cfg.json --seeds 3 --out sssp-run-" + t) != 0;
  }
  int differ = 0;
  for (const char* f : {"ring-%s.jsonl", "sssp-%s.jsonl", "ring-run-%s/aggregate.csv", "sssp-run-%s/aggregate.csv"}) {
    const std::string a = slurp(dir / fmt(f, "a"));
    differ += a.empty() || a != slurp(dir / fmt(f, "b"));
  }
  return {bad_exit == 0 && differ == 0, fmt("%d failed invocations, %d of 4 file pairs differ", bad_exit, differ)};
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();
  const std::vector<Criterion> criteria = {
      {1, "antisymmetry-spectrum", 10, antisymmetry_spectrum},
      {2, "swan-jacobian", 60, swan_jacobian},
      {3, "propagation-rate", 10, propagation},
      {4, "bsm-lower-bound", 120, bsm_lower_bound},
      {5, "energy-conservation", 60, energy},
      {6, "gradient-check", 120, gradients},
      {7, "property-oracle", 30, property_oracle},
      {8, "graph-transfer", 20 * 60, transfer},
      {9, "diameter", 45 * 60, diameter_task},
      {10, "jacobian-drift", 60, drift},
      {11, "sensitivity-bound", 60, sensitivity},
      {12, "determinism", 5 * 60, determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const double cpu0 = cpu_seconds();
    const auto wall0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double cpu = cpu_seconds() - cpu0;
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    const bool in_time = cpu < c.limit_seconds;
    if (!in_time) out.detail += fmt("; over the %.0f s limit", c.limit_seconds);
    const bool pass = out.pass && in_time;
    failures += !pass;
    std::printf("%s %2d %-22s %s (cpu %.1f s, wall %.1f s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                out.detail.c_str(), cpu, wall);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
