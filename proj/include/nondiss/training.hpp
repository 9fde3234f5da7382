#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nondiss/datasets.hpp"
#include "nondiss/model.hpp"

namespace nondiss {

enum class Metric { kMse, kLog10Mse };

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;
  int max_epochs = 200;
  int patience = 50;
  int batch_size = 0;  // reserved; training is full-batch
  Metric metric = Metric::kLog10Mse;
};

const char* to_string(Metric m);
Metric metric_from_string(const std::string& s);

nlohmann::json to_json(const TrainConfig& tc);

/// Keys accepted in a run config file besides the model keys.
const std::vector<std::string>& train_config_keys();

/// Splits a strict run config object into model overrides and train settings.
/// Unknown keys are a parse error.
void parse_run_config(const nlohmann::json& j, ModelConfig& model, TrainConfig& train);

struct RunResult {
  std::string task;
  ModelConfig config;
  std::uint64_t seed = 0;
  double best_val = 0.0;  // in the configured metric
  double test = 0.0;      // in the configured metric, at the best-val checkpoint
  double val_mse = 0.0;
  double test_mse = 0.0;
  int epochs_ran = 0;
  int best_epoch = 0;
  double wall_time = 0.0;
  bool failed = false;
  std::string failure;
  Metric metric = Metric::kLog10Mse;
};

nlohmann::json to_json(const RunResult& r, bool include_wall_time = true);
RunResult run_result_from_json(const nlohmann::json& j);

/// One split flattened into a disjoint union.
struct PreparedSplit {
  GraphContext ctx;
  Matrix x;
  Matrix y;
  Matrix mask;
  Segments segments;
  std::size_t num_samples = 0;
};

PreparedSplit prepare_split(const Dataset& ds, const std::vector<Sample>& samples);

/// Masked MSE of the model on a prepared split.
double evaluate_mse(Model& model, const PreparedSplit& split);

double metric_value(Metric m, double mse);

/// Model input/output widths and pooling level implied by a dataset.
ModelConfig fit_to_dataset(ModelConfig cfg, const Dataset& ds);

/// Full-batch Adam with early stopping on validation MSE; the best-val
/// parameters are restored before the test evaluation. When best is given it
/// receives the restored model.
RunResult train(const ModelConfig& cfg, const Dataset& ds, const TrainConfig& tc, std::uint64_t seed,
                Model* best = nullptr);

/// Same as train() on splits that were already prepared.
RunResult train_prepared(const ModelConfig& cfg, TaskKind task, const PreparedSplit& train_split,
                         const PreparedSplit& val_split, const PreparedSplit& test_split, const TrainConfig& tc,
                         std::uint64_t seed, Model* best = nullptr);

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population
  int count = 0;
};

Aggregate aggregate(const std::vector<double>& values);

/// Cartesian product over axes; each axis value overlays the base model
/// config (model keys) or the train config (lr, weight_decay).
struct GridSpec {
  ModelConfig base;
  TrainConfig train;
  std::map<std::string, std::vector<nlohmann::json>> axes;
  std::vector<std::uint64_t> seeds{0};
};

GridSpec grid_spec_from_json(const nlohmann::json& j, ModelConfig base, TrainConfig train);

struct GridCell {
  ModelConfig config;
  TrainConfig train;
  nlohmann::json overrides;
  std::vector<RunResult> runs;
  Aggregate val;
  Aggregate test;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::size_t best = 0;
};

/// Runs every cell and seed; cells execute on up to jobs threads. The best
/// cell has the lowest mean validation metric over non-failed runs.
GridResult run_grid(const GridSpec& spec, const Dataset& ds, int jobs = 1);

}  // namespace nondiss
