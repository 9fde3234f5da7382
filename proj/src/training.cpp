#include "nondiss/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "nondiss/errors.hpp"

namespace nondiss {

namespace {

bool is_train_key(const std::string& key) {
  const auto& keys = train_config_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

bool is_model_key(const std::string& key) {
  const auto& keys = model_config_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

void apply_train_key(TrainConfig& tc, const std::string& key, const nlohmann::json& value) {
  try {
    if (key == "lr") {
      tc.lr = value.get<double>();
    } else if (key == "weight_decay") {
      tc.weight_decay = value.get<double>();
    } else if (key == "max_epochs") {
      tc.max_epochs = value.get<int>();
    } else if (key == "patience") {
      tc.patience = value.get<int>();
    } else if (key == "batch_size") {
      tc.batch_size = value.get<int>();
    } else if (key == "metric") {
      tc.metric = metric_from_string(value.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, "config key '" + key + "': " + e.what());
  }
}

void validate(const TrainConfig& tc) {
  require(tc.lr > 0, ErrorKind::kInvalidArgument, "learning rate must be positive");
  require(tc.max_epochs >= 1, ErrorKind::kInvalidArgument, "max_epochs must be >= 1");
  require(tc.patience >= 0 && tc.patience <= tc.max_epochs, ErrorKind::kInvalidArgument,
          "patience must lie in [0, max_epochs]");
  require(tc.weight_decay >= 0, ErrorKind::kInvalidArgument, "weight decay must be non-negative");
}

}  // namespace

const char* to_string(Metric m) { return m == Metric::kMse ? "mse" : "log10mse"; }

Metric metric_from_string(const std::string& s) {
  if (s == "mse") return Metric::kMse;
  if (s == "log10mse") return Metric::kLog10Mse;
  fail(ErrorKind::kInvalidArgument, "unknown metric '" + s + "'");
}

nlohmann::json to_json(const TrainConfig& tc) {
  return {{"lr", tc.lr},
          {"weight_decay", tc.weight_decay},
          {"max_epochs", tc.max_epochs},
          {"patience", tc.patience},
          {"batch_size", tc.batch_size},
          {"metric", to_string(tc.metric)}};
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys{"lr", "weight_decay", "max_epochs", "patience", "batch_size", "metric"};
  return keys;
}

void parse_run_config(const nlohmann::json& j, ModelConfig& model, TrainConfig& train) {
  require(j.is_object(), ErrorKind::kParse, "run config must be a JSON object");
  nlohmann::json model_part = nlohmann::json::object();
  for (const auto& [key, value] : j.items()) {
    if (is_train_key(key)) {
      apply_train_key(train, key, value);
    } else if (is_model_key(key)) {
      model_part[key] = value;
    } else {
      fail(ErrorKind::kParse, "unknown config key '" + key + "'");
    }
  }
  model = model_config_from_json(model_part, model);
  validate(train);
}

nlohmann::json to_json(const RunResult& r, bool include_wall_time) {
  nlohmann::json j = {{"task", r.task},
                      {"model", r.config.kind},
                      {"config", to_json(r.config)},
                      {"seed", r.seed},
                      {"metric", to_string(r.metric)},
                      {"best_val", r.best_val},
                      {"test", r.test},
                      {"val_mse", r.val_mse},
                      {"test_mse", r.test_mse},
                      {"epochs_ran", r.epochs_ran},
                      {"best_epoch", r.best_epoch},
                      {"failed", r.failed},
                      {"failure", r.failure}};
  if (include_wall_time) j["wall_time"] = r.wall_time;
  // Non-finite values are not representable in JSON.
  for (const char* key : {"best_val", "test", "val_mse", "test_mse"}) {
    if (!std::isfinite(j[key].get<double>())) j[key] = nullptr;
  }
  return j;
}

RunResult run_result_from_json(const nlohmann::json& j) {
  RunResult r;
  try {
    auto num = [&](const char* key) {
      return j.at(key).is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at(key).get<double>();
    };
    r.task = j.at("task").get<std::string>();
    r.config = model_config_from_json(j.at("config"), ModelConfig{});
    r.seed = j.at("seed").get<std::uint64_t>();
    r.metric = metric_from_string(j.at("metric").get<std::string>());
    r.best_val = num("best_val");
    r.test = num("test");
    r.val_mse = num("val_mse");
    r.test_mse = num("test_mse");
    r.epochs_ran = j.at("epochs_ran").get<int>();
    r.best_epoch = j.at("best_epoch").get<int>();
    r.failed = j.at("failed").get<bool>();
    r.failure = j.at("failure").get<std::string>();
    r.wall_time = j.value("wall_time", 0.0);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("run result: ") + e.what());
  }
  return r;
}

PreparedSplit prepare_split(const Dataset& ds, const std::vector<Sample>& samples) {
  require(!samples.empty(), ErrorKind::kEmpty, "empty split");
  std::vector<const Graph*> graphs;
  graphs.reserve(samples.size());
  for (const auto& s : samples) graphs.push_back(&s.graph);
  const Graph united = disjoint_union(graphs);
  PreparedSplit out;
  out.ctx = GraphContext::build(united);
  out.x = united.x();
  out.num_samples = samples.size();
  const bool graph_level = is_graph_level(ds.task);
  const Eigen::Index rows = graph_level ? static_cast<Eigen::Index>(samples.size()) : united.num_nodes();
  const Eigen::Index cols = samples.front().target.cols();
  out.y.resize(rows, cols);
  out.mask.resize(rows, cols);
  auto ids = std::make_shared<std::vector<int>>();
  ids->reserve(united.num_nodes());
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const Matrix y = ds.loss_target(s);
    out.y.middleRows(row, y.rows()) = y;
    out.mask.middleRows(row, y.rows()) = s.mask;
    row += y.rows();
    ids->insert(ids->end(), s.graph.num_nodes(), static_cast<int>(i));
  }
  require(row == rows, ErrorKind::kShapeMismatch, "targets do not match the task level");
  out.segments.ids = ids;
  out.segments.count = static_cast<int>(samples.size());
  return out;
}

double evaluate_mse(Model& model, const PreparedSplit& split) {
  Tape tape;
  const auto out = model.forward(tape, split.ctx, split.x, &split.segments);
  return ad::mse(out.prediction, split.y, &split.mask).value()(0, 0);
}

double metric_value(Metric m, double mse) { return m == Metric::kMse ? mse : std::log10(mse); }

ModelConfig fit_to_dataset(ModelConfig cfg, const Dataset& ds) {
  require(ds.size() > 0, ErrorKind::kEmpty, "dataset has no samples");
  const Sample& s = !ds.train.empty() ? ds.train.front() : (!ds.val.empty() ? ds.val.front() : ds.test.front());
  cfg.d_in = static_cast<int>(s.graph.x().cols());
  cfg.d_out = static_cast<int>(s.target.cols());
  cfg.graph_level = is_graph_level(ds.task);
  return cfg;
}

RunResult train(const ModelConfig& cfg, const Dataset& ds, const TrainConfig& tc, std::uint64_t seed, Model* best) {
  const PreparedSplit tr = prepare_split(ds, ds.train);
  const PreparedSplit va = prepare_split(ds, ds.val);
  const PreparedSplit te = prepare_split(ds, ds.test);
  return train_prepared(fit_to_dataset(cfg, ds), ds.task, tr, va, te, tc, seed, best);
}

RunResult train_prepared(const ModelConfig& cfg, TaskKind task, const PreparedSplit& train_split,
                         const PreparedSplit& val_split, const PreparedSplit& test_split, const TrainConfig& tc,
                         std::uint64_t seed, Model* best) {
  validate(tc);
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  r.task = to_string(task);
  r.config = cfg;
  r.seed = seed;
  r.metric = tc.metric;

  Model model(cfg, seed);
  Adam adam({tc.lr, 0.9, 0.999, 1e-8, tc.weight_decay});
  ParamStore best_params = model.params();
  double best_val = std::numeric_limits<double>::infinity();
  int since = 0;
  try {
    for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
      r.epochs_ran = epoch;
      model.params().zero_grads();
      Tape tape;
      const auto out = model.forward(tape, train_split.ctx, train_split.x, &train_split.segments);
      Var loss = ad::mse(out.prediction, train_split.y, &train_split.mask);
      if (!std::isfinite(loss.value()(0, 0))) {
        r.failed = true;
        r.failure = "non-finite training loss at epoch " + std::to_string(epoch);
        break;
      }
      tape.backward(loss);
      adam.step(model.params());
      const double val = evaluate_mse(model, val_split);
      if (!std::isfinite(val)) {
        r.failed = true;
        r.failure = "non-finite validation loss at epoch " + std::to_string(epoch);
        break;
      }
      if (val < best_val) {
        best_val = val;
        best_params = model.params();
        r.best_epoch = epoch;
        since = 0;
      } else if (++since > tc.patience) {
        break;
      }
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNumericOverflow && e.kind() != ErrorKind::kNumericFailure) throw;
    r.failed = true;
    r.failure = e.what();
  }

  if (r.best_epoch > 0) {
    model.params().assign_values(best_params);
    r.val_mse = best_val;
    r.test_mse = evaluate_mse(model, test_split);
  } else {
    r.failed = true;
    if (r.failure.empty()) r.failure = "no finite validation loss";
    r.val_mse = r.test_mse = std::numeric_limits<double>::quiet_NaN();
  }
  r.best_val = metric_value(tc.metric, r.val_mse);
  r.test = metric_value(tc.metric, r.test_mse);
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (best) *best = std::move(model);
  return r;
}

Aggregate aggregate(const std::vector<double>& values) {
  require(!values.empty(), ErrorKind::kEmpty, "aggregate of no values");
  Aggregate a;
  a.count = static_cast<int>(values.size());
  for (double v : values) a.mean += v;
  a.mean /= a.count;
  double sq = 0.0;
  for (double v : values) sq += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(sq / a.count);
  return a;
}

GridSpec grid_spec_from_json(const nlohmann::json& j, ModelConfig base, TrainConfig train) {
  require(j.is_object(), ErrorKind::kParse, "grid spec must be a JSON object");
  GridSpec spec;
  for (const auto& [key, value] : j.items()) {
    if (key == "base") {
      parse_run_config(value, base, train);
    } else if (key == "seeds") {
      try {
        spec.seeds = value.get<std::vector<std::uint64_t>>();
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::kParse, std::string("grid seeds: ") + e.what());
      }
    } else if (key == "axes") {
      require(value.is_object(), ErrorKind::kParse, "grid axes must be an object");
      for (const auto& [axis, values] : value.items()) {
        require(is_model_key(axis) || axis == "lr" || axis == "weight_decay", ErrorKind::kParse,
                "unknown grid axis '" + axis + "'");
        require(axis != "d_in" && axis != "d_out" && axis != "graph_level", ErrorKind::kParse,
                "axis '" + axis + "' is fixed by the dataset");
        require(values.is_array() && !values.empty(), ErrorKind::kParse,
                "grid axis '" + axis + "' needs a non-empty array");
        spec.axes[axis] = values.get<std::vector<nlohmann::json>>();
      }
    } else {
      fail(ErrorKind::kParse, "unknown grid key '" + key + "'");
    }
  }
  require(!spec.seeds.empty(), ErrorKind::kEmpty, "grid needs at least one seed");
  spec.base = base;
  spec.train = train;
  return spec;
}

GridResult run_grid(const GridSpec& spec, const Dataset& ds, int jobs) {
  require(!spec.seeds.empty(), ErrorKind::kEmpty, "grid needs at least one seed");
  GridResult result;
  // Expand the cartesian product in sorted axis order.
  std::vector<nlohmann::json> overrides{nlohmann::json::object()};
  for (const auto& [axis, values] : spec.axes) {
    std::vector<nlohmann::json> next;
    for (const auto& partial : overrides) {
      for (const auto& v : values) {
        nlohmann::json o = partial;
        o[axis] = v;
        next.push_back(std::move(o));
      }
    }
    overrides = std::move(next);
  }
  require(!overrides.empty(), ErrorKind::kEmpty, "empty grid");
  for (const auto& o : overrides) {
    GridCell cell;
    cell.overrides = o;
    cell.config = spec.base;
    cell.train = spec.train;
    parse_run_config(o, cell.config, cell.train);
    cell.config = fit_to_dataset(cell.config, ds);
    core_config(cell.config);
    result.cells.push_back(std::move(cell));
  }

  const PreparedSplit tr = prepare_split(ds, ds.train);
  const PreparedSplit va = prepare_split(ds, ds.val);
  const PreparedSplit te = prepare_split(ds, ds.test);

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(result.cells.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < result.cells.size(); i = next++) {
      try {
        auto& cell = result.cells[i];
        for (auto seed : spec.seeds) {
          cell.runs.push_back(train_prepared(cell.config, ds.task, tr, va, te, cell.train, seed));
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(result.cells.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  double best_mean = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    auto& cell = result.cells[i];
    std::vector<double> val;
    std::vector<double> test;
    for (const auto& r : cell.runs) {
      if (r.failed) continue;
      val.push_back(r.best_val);
      test.push_back(r.test);
    }
    if (val.empty()) continue;
    cell.val = aggregate(val);
    cell.test = aggregate(test);
    if (cell.val.mean < best_mean) {
      best_mean = cell.val.mean;
      result.best = i;
    }
  }
  return result;
}

}  // namespace nondiss
