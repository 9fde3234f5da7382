// nondiss: data generation, training, grids, diagnostics and reports.
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "nondiss/datasets.hpp"
#include "nondiss/diagnostics.hpp"
#include "nondiss/errors.hpp"
#include "nondiss/model.hpp"
#include "nondiss/report.hpp"
#include "nondiss/runtime.hpp"
#include "nondiss/training.hpp"

namespace fs = std::filesystem;
using namespace nondiss;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("NONDISS_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw CLI::ValidationError("NONDISS_SEED", std::string("not an unsigned integer: ") + env);
    }
  }
  return 0;
}

nlohmann::json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  require(static_cast<bool>(in), ErrorKind::kInvalidArgument, "cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, p.string() + ": " + e.what());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kInvalidArgument, "cannot write " + p.string());
  out << text;
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  require(!ec, ErrorKind::kInvalidArgument, "cannot create " + p.string() + ": " + ec.message());
}

// ---- gen-data --------------------------------------------------------------

struct GenDataArgs {
  std::string task;
  int k = 5;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<int> sizes;
  std::vector<int> counts;
  bool no_standardize = false;
};

int run_gen_data(const GenDataArgs& a) {
  const TaskKind task = task_from_string(a.task);
  Dataset ds;
  if (is_transfer(task)) {
    std::vector<int> c = a.counts.empty() ? std::vector<int>{1000, 100, 100} : a.counts;
    ds = gen_transfer(task, a.k, c[0], c[1], c[2], a.seed);
  } else {
    std::vector<int> c = a.counts.empty() ? std::vector<int>{5120, 640, 1280} : a.counts;
    std::vector<int> s = a.sizes.empty() ? std::vector<int>{25, 35} : a.sizes;
    ds = gen_graph_property(task, c[0], c[1], c[2], a.seed, !a.no_standardize, s[0], s[1]);
  }
  save_dataset(ds, a.out);
  std::cout << "task " << to_string(ds.task) << ", " << ds.size() << " graphs (train " << ds.train.size()
            << ", val " << ds.val.size() << ", test " << ds.test.size() << ")\n";
  std::cout << "node sizes:";
  for (const auto& [n, count] : node_size_histogram(ds)) std::cout << ' ' << n << ':' << count;
  std::cout << '\n';
  if (ds.resamples > 0) std::cout << "resampled disconnected graphs: " << ds.resamples << '\n';
  return kExitOk;
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
  std::string model;
  std::string data;
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string out;
  long long budget = 0;
};

int run_train(const TrainArgs& a) {
  const Dataset ds = load_dataset(a.data);
  ModelConfig cfg = default_model_config(a.model);
  TrainConfig tc;
  if (!a.config.empty()) parse_run_config(read_json_file(a.config), cfg, tc);
  cfg.kind = a.model;
  cfg = fit_to_dataset(cfg, ds);
  if (a.budget > 0) cfg.d = width_for_budget(cfg, static_cast<std::size_t>(a.budget));
  core_config(cfg);
  ensure_dir(a.out);

  const PreparedSplit tr = prepare_split(ds, ds.train);
  const PreparedSplit va = prepare_split(ds, ds.val);
  const PreparedSplit te = prepare_split(ds, ds.test);
  std::vector<RunResult> runs;
  bool any_failed = false;
  for (auto seed : a.seeds) {
    Model best(cfg, seed);
    RunResult r = train_prepared(cfg, ds.task, tr, va, te, tc, seed, &best);
    const std::string stem = std::to_string(seed);
    write_text(fs::path(a.out) / ("run-" + stem + ".json"), to_json(r).dump(2) + "\n");
    if (!r.failed) save_checkpoint(best, fs::path(a.out) / ("ckpt-" + stem + ".json"));
    std::cout << a.model << " seed " << seed << ": "
              << (r.failed ? "FAILED (" + r.failure + ")"
                           : "val " + std::to_string(r.best_val) + ", test " + std::to_string(r.test))
              << ", epochs " << r.epochs_ran << '\n';
    any_failed = any_failed || r.failed;
    runs.push_back(std::move(r));
  }
  const auto rows = summarize(runs);
  write_text(fs::path(a.out) / "aggregate.csv", rows_to_csv(rows));
  write_text(fs::path(a.out) / "aggregate.json", rows_to_json(rows).dump(2) + "\n");
  return any_failed ? kExitNumeric : kExitOk;
}

// ---- grid --------------------------------------------------------------------

struct GridArgs {
  std::string model;
  std::string data;
  std::string grid;
  std::string out;
  int jobs = 1;
};

int run_grid_cmd(const GridArgs& a) {
  const Dataset ds = load_dataset(a.data);
  const GridSpec spec = grid_spec_from_json(read_json_file(a.grid), default_model_config(a.model), TrainConfig{});
  const GridResult res = run_grid(spec, ds, a.jobs);
  ensure_dir(a.out);
  std::vector<RunResult> all;
  bool any_failed = false;
  for (std::size_t i = 0; i < res.cells.size(); ++i) {
    for (const auto& r : res.cells[i].runs) {
      write_text(fs::path(a.out) / ("run-" + std::to_string(i) + "-" + std::to_string(r.seed) + ".json"),
                 to_json(r).dump(2) + "\n");
      any_failed = any_failed || r.failed;
      all.push_back(r);
    }
  }
  const auto rows = summarize(all);
  write_text(fs::path(a.out) / "aggregate.csv", rows_to_csv(rows));
  write_text(fs::path(a.out) / "aggregate.json", rows_to_json(rows).dump(2) + "\n");
  const auto& best = res.cells[res.best];
  nlohmann::json best_json = {{"cell", res.best},
                              {"overrides", best.overrides},
                              {"config", to_json(best.config)},
                              {"train", to_json(best.train)},
                              {"val_mean", best.val.mean},
                              {"test_mean", best.test.mean}};
  write_text(fs::path(a.out) / "best.json", best_json.dump(2) + "\n");
  std::cout << res.cells.size() << " cells; best cell " << res.best << " " << best.overrides.dump()
            << " val " << best.val.mean << " test " << best.test.mean << '\n';
  return any_failed ? kExitNumeric : kExitOk;
}

// ---- diagnose ----------------------------------------------------------------

struct DiagnoseArgs {
  std::string ckpt;
  std::string data;
  std::vector<std::string> probes;
  std::string out;
  int sample = 0;
  int node = 0;
  bool explicit_probes = false;
};

Matrix adgn_structure(const ParamStore& store, const ADgnConfig& c, const Matrix& agg, const Matrix& x, bool linear) {
  SwanWeights w;
  w.w_hat = antisymmetrize(store.at("core.w").value);
  w.v_hat = store.at("core.v").value;
  w.z_hat = Matrix::Zero(c.d, c.d);
  w.b = store.at("core.b").value.row(0);
  SwanConfig s;
  s.d = c.d;
  s.beta = 0.0;
  s.act = linear ? Activation::kIdentity : c.act;
  const Matrix zero = Matrix::Zero(agg.rows(), agg.cols());
  // Σ_v Φ over in-neighbours is A X V, which is the P-slot of the SWAN field.
  return assemble_swan_jacobian(w, s, agg, zero, x).jacobian();
}

int run_diagnose(const DiagnoseArgs& a) {
  if (!fs::exists(a.ckpt)) fail(ErrorKind::kInvalidArgument, "checkpoint not found: " + a.ckpt);
  Model model = load_checkpoint(a.ckpt);
  const Dataset ds = load_dataset(a.data);
  const auto& pool = !ds.test.empty() ? ds.test : ds.train;
  require(a.sample >= 0 && a.sample < static_cast<int>(pool.size()), ErrorKind::kInvalidArgument, "sample out of range");
  const Graph& g = pool[a.sample].graph;
  const GraphContext ctx = GraphContext::build(g);
  require(a.node >= 0 && a.node < g.num_nodes(), ErrorKind::kInvalidArgument, "node out of range");
  const std::string kind = model.config().kind;
  const CoreConfig& core = model.core();
  ParamStore& store = model.params();

  Matrix x0v;
  {
    Tape tape;
    x0v = model.forward(tape, ctx, g.x()).encoded.value();
  }
  const Matrix sym_heat = -kron(Matrix::Identity(core_width(core), core_width(core)), Matrix(*ctx.sym_laplacian));

  DiagnosticsReport report;
  ensure_dir(a.out);
  auto swan_ops_dense = [&](const SwanConfig& c, Matrix& p, Matrix& s) {
    Tape t;
    SwanOperators ops = c.mode == OperatorMode::kLearned ? swan_learn_operators(t, store, c, ctx, t.constant(x0v))
                                                         : swan_fixed_operators(t, ctx);
    p = ops.p_dense();
    s = ops.s_dense();
  };
  const Matrix agg_simple = Matrix(*ctx.adjacency);
  const Matrix agg_gcn = Matrix(*ctx.gcn);

  const bool hamiltonian = std::holds_alternative<PhdgnConfig>(core);
  const bool ode = !std::holds_alternative<GcnConfig>(core);
  for (const auto& probe : a.probes) {
    // The default probe set skips probes the model kind does not support.
    if (!a.explicit_probes && ((probe == "energy" && !hamiltonian) || (probe == "rate" && !ode))) continue;
    if (probe == "eig") {
      Matrix m;
      if (const auto* c = std::get_if<SwanConfig>(&core)) {
        Matrix p, s;
        swan_ops_dense(*c, p, s);
        m = assemble_swan_jacobian(swan_weights(store, *c, false), *c, p, s, x0v).m2;
      } else if (std::holds_alternative<ADgnConfig>(core)) {
        m = antisymmetrize(store.at("core.w").value);
      } else if (const auto* c = std::get_if<PhdgnConfig>(&core)) {
        m = hamiltonian_jacobian(store, *c, ctx, x0v);
      } else if (std::holds_alternative<HeatConfig>(core)) {
        m = sym_heat;
      } else {
        m = gcn_layer_jacobian(store, std::get<GcnConfig>(core), agg_gcn, x0v, 0);
      }
      report.eigenvalues = eig_general(m);
      report.max_re_eig = max_abs_real(report.eigenvalues);
      std::ostringstream csv;
      csv << "re,im\n";
      for (const auto& z : report.eigenvalues) csv << z.real() << ',' << z.imag() << '\n';
      write_text(fs::path(a.out) / "eig.csv", csv.str());
    } else if (probe == "bsm") {
      Tape t;
      Var xv = t.variable(x0v);
      const auto states = core_forward(t, store, core, ctx, xv);
      const auto norms = bsm_trace(t, states, a.node);
      std::ostringstream csv;
      csv << "layer,norm\n";
      for (std::size_t l = 0; l < norms.size(); ++l) {
        report.bsm_per_layer.emplace_back(static_cast<int>(l), norms[l]);
        csv << l << ',' << norms[l] << '\n';
      }
      write_text(fs::path(a.out) / "bsm.csv", csv.str());
    } else if (probe == "energy") {
      const auto* c = std::get_if<PhdgnConfig>(&core);
      require(c != nullptr, ErrorKind::kInvalidArgument, "energy probe needs an hdgn or phdgn checkpoint");
      report.energy_trace = energy_trace(store, *c, ctx, x0v);
      std::ostringstream csv;
      csv << "t,delta_h\n";
      for (const auto& [t, v] : report.energy_trace) csv << t << ',' << v << '\n';
      write_text(fs::path(a.out) / "energy.csv", csv.str());
    } else if (probe == "drift") {
      Tape t;
      const auto states = core_forward(t, store, core, ctx, t.constant(x0v));
      std::vector<Matrix> jac;
      for (std::size_t l = 0; l + 1 < states.size(); ++l) {
        const Matrix& x = states[l].value();
        if (const auto* c = std::get_if<SwanConfig>(&core)) {
          Matrix p, s;
          swan_ops_dense(*c, p, s);
          jac.push_back(assemble_swan_jacobian(swan_weights(store, *c, true), *c, p, s, x).jacobian());
        } else if (const auto* c = std::get_if<ADgnConfig>(&core)) {
          jac.push_back(adgn_structure(store, *c, c->agg == AggregationKind::kGcn ? agg_gcn : agg_simple, x, false));
        } else if (const auto* c = std::get_if<PhdgnConfig>(&core)) {
          jac.push_back(hamiltonian_jacobian(store, *c, ctx, x));
        } else if (std::holds_alternative<HeatConfig>(core)) {
          jac.push_back(sym_heat);
        } else {
          jac.push_back(gcn_layer_jacobian(store, std::get<GcnConfig>(core), agg_gcn, x, static_cast<int>(l)));
        }
      }
      report.jacobian_drift = jacobian_drift(jac);
      std::ostringstream csv;
      csv << "layer,drift\n";
      for (std::size_t l = 0; l < report.jacobian_drift.size(); ++l) csv << l + 2 << ',' << report.jacobian_drift[l] << '\n';
      write_text(fs::path(a.out) / "drift.csv", csv.str());
    } else if (probe == "rate") {
      Matrix gen;
      double eps = 0.1;
      if (const auto* c = std::get_if<SwanConfig>(&core)) {
        Matrix p, s;
        swan_ops_dense(*c, p, s);
        SwanConfig lin = *c;
        lin.act = Activation::kIdentity;
        gen = assemble_swan_jacobian(swan_weights(store, lin, false), lin, p, s, x0v).m2;
        eps = c->eps;
      } else if (const auto* c = std::get_if<ADgnConfig>(&core)) {
        gen = adgn_structure(store, *c, c->agg == AggregationKind::kGcn ? agg_gcn : agg_simple, x0v, true);
        eps = c->eps;
      } else if (const auto* c = std::get_if<PhdgnConfig>(&core)) {
        gen = hamiltonian_jacobian(store, *c, ctx, x0v);
        eps = c->eps;
      } else if (const auto* c = std::get_if<HeatConfig>(&core)) {
        gen = sym_heat;
        eps = c->eps;
      } else {
        fail(ErrorKind::kInvalidArgument, "rate probe is defined for ODE-based models only");
      }
      const int layers = std::max(1, core_layers(core));
      report.rate_curve = propagation_rate(gen, layers * eps, layers);
      std::ostringstream csv;
      csv << "t,frobenius\n";
      for (const auto& [t, v] : report.rate_curve) csv << t << ',' << v << '\n';
      write_text(fs::path(a.out) / "rate.csv", csv.str());
    } else {
      fail(ErrorKind::kInvalidArgument, "unknown probe '" + probe + "'");
    }
  }
  nlohmann::json j = to_json(report);
  j["model"] = kind;
  write_text(fs::path(a.out) / "report.json", j.dump(2) + "\n");
  std::cout << "diagnostics for " << kind << " written to " << a.out << '\n';
  return kExitOk;
}

// ---- report ------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string format = "csv";
  std::string out;
};

int run_report(const ReportArgs& a) {
  std::vector<fs::path> inputs(a.inputs.begin(), a.inputs.end());
  const auto rows = collect_report(inputs);
  const std::string text = a.format == "json" ? rows_to_json(rows).dump(2) + "\n" : rows_to_csv(rows);
  if (a.out.empty() || a.out == "-") {
    std::cout << text;
  } else {
    write_text(a.out, text);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"Non-dissipative graph ODE layers: data, training, diagnostics"};
  app.require_subcommand(1);
  std::uint64_t seed_default = 0;
  try {
    seed_default = default_seed();
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << '\n';
    return kExitUsage;
  }

  GenDataArgs gen;
  gen.seed = seed_default;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen_cmd->add_option("--task", gen.task, "transfer-line|transfer-ring|transfer-crossed-ring|diameter|sssp|eccentricity")
      ->required();
  gen_cmd->add_option("--k", gen.k, "source-target distance for transfer tasks")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "dataset seed (default $NONDISS_SEED or 0)");
  gen_cmd->add_option("--out", gen.out, "output JSON-lines file")->required();
  gen_cmd->add_option("--sizes", gen.sizes, "min,max node count for property tasks")->delimiter(',')->expected(2);
  gen_cmd->add_option("--counts", gen.counts, "train,val,test sample counts")->delimiter(',')->expected(3);
  gen_cmd->add_flag("--no-standardize", gen.no_standardize, "keep raw property targets");

  TrainArgs tr;
  tr.seeds = {seed_default};
  auto* train_cmd = app.add_subcommand("train", "train one model over several seeds");
  train_cmd->add_option("--model", tr.model, "model kind")->required();
  train_cmd->add_option("--data", tr.data, "dataset file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--config", tr.config, "run config JSON")->check(CLI::ExistingFile);
  train_cmd->add_option("--seeds", tr.seeds, "comma-separated seeds")->delimiter(',');
  train_cmd->add_option("--seed", tr.seeds, "single seed (alias of --seeds)");
  train_cmd->add_option("--out", tr.out, "output directory")->required();
  train_cmd->add_option("--budget", tr.budget, "pick the width whose parameter count is closest to this");

  GridArgs gr;
  auto* grid_cmd = app.add_subcommand("grid", "run a hyperparameter grid");
  grid_cmd->add_option("--model", gr.model, "model kind")->required();
  grid_cmd->add_option("--data", gr.data, "dataset file")->required()->check(CLI::ExistingFile);
  grid_cmd->add_option("--grid", gr.grid, "grid spec JSON")->required()->check(CLI::ExistingFile);
  grid_cmd->add_option("--out", gr.out, "output directory")->required();
  grid_cmd->add_option("--jobs", gr.jobs, "parallel grid cells")->check(CLI::PositiveNumber);

  DiagnoseArgs di;
  di.probes = {"eig", "bsm", "energy", "drift", "rate"};
  auto* diag_cmd = app.add_subcommand("diagnose", "theory probes on a trained checkpoint");
  diag_cmd->add_option("--model-ckpt", di.ckpt, "checkpoint JSON")->required();
  diag_cmd->add_option("--data", di.data, "dataset file (graph taken from it)")->required();
  auto* probes_opt = diag_cmd->add_option("--probes", di.probes, "eig,bsm,energy,drift,rate")->delimiter(',');
  diag_cmd->add_option("--out", di.out, "output directory")->required();
  diag_cmd->add_option("--sample", di.sample, "sample index in the test split");
  diag_cmd->add_option("--node", di.node, "probe node for bsm");

  ReportArgs rp;
  auto* report_cmd = app.add_subcommand("report", "merge run directories into one table");
  report_cmd->add_option("--in", rp.inputs, "run directories or report JSON files")->required();
  report_cmd->add_option("--format", rp.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  report_cmd->add_option("--out", rp.out, "output file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return run_gen_data(gen);
    if (train_cmd->parsed()) {
      if (!is_model_kind(tr.model)) fail(ErrorKind::kInvalidArgument, "unknown model '" + tr.model + "'");
      return run_train(tr);
    }
    if (grid_cmd->parsed()) {
      if (!is_model_kind(gr.model)) fail(ErrorKind::kInvalidArgument, "unknown model '" + gr.model + "'");
      return run_grid_cmd(gr);
    }
    if (diag_cmd->parsed()) {
      di.explicit_probes = probes_opt->count() > 0;
      return run_diagnose(di);
    }
    if (report_cmd->parsed()) return run_report(rp);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    const bool numeric = e.kind() == ErrorKind::kNumericFailure || e.kind() == ErrorKind::kNumericOverflow;
    return numeric ? kExitNumeric : kExitUsage;
  }
  return kExitUsage;
}
