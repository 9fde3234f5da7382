#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "nondiss/layers.hpp"

namespace nondiss {

// Flat model record: encoder MLP (d_in -> hidden -> d), core, readout MLP
// (d or d/2 -> hidden -> d_out). hidden <= 0 means hidden = d.
struct ModelConfig {
  std::string kind = "swan";
  int d_in = 1;
  int d_out = 1;
  bool graph_level = false;
  int d = 10;
  int hidden = 0;
  int layers = 4;
  double eps = 0.1;
  double gamma = 0.1;
  double beta = 1.0;
  AggregationKind agg = AggregationKind::kSimpleSum;
  AggregationKind agg_p = AggregationKind::kSimpleSum;
  AggregationKind agg_q = AggregationKind::kSimpleSum;
  Activation act = Activation::kTanh;
  Dampening dampening = Dampening::kNone;
  Force force = Force::kNone;
  ReadoutInput readout_input = ReadoutInput::kPQ;
};

const std::vector<std::string>& model_kinds();
bool is_model_kind(const std::string& kind);

/// Defaults for a model kind (phdgn gets param dampening and DGN-tanh force).
ModelConfig default_model_config(const std::string& kind);

CoreConfig core_config(const ModelConfig& cfg);

nlohmann::json to_json(const ModelConfig& cfg);
/// Overlays keys of j onto base; unknown keys are a parse error.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base);

/// Keys accepted by model_config_from_json.
const std::vector<std::string>& model_config_keys();

/// Per-node graph membership for graph-level pooling.
struct Segments {
  std::shared_ptr<const std::vector<int>> ids;
  int count = 0;
};

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);
  Model(ModelConfig cfg, ParamStore params);

  const ModelConfig& config() const { return cfg_; }
  const CoreConfig& core() const { return core_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::size_t num_parameters() const { return params_.num_scalars(); }

  struct Output {
    Var prediction;
    Var encoded;
    std::vector<Var> states;
  };

  /// Node predictions (n x d_out), or per-segment predictions when the model
  /// is graph-level and segments are given (a single graph otherwise).
  Output forward(Tape& tape, const GraphContext& ctx, const Matrix& x, const Segments* segments = nullptr);

 private:
  ModelConfig cfg_;
  CoreConfig core_;
  ParamStore params_;
};

/// Width whose parameter count is closest to budget (ties: smaller width).
int width_for_budget(ModelConfig cfg, std::size_t budget, int max_width = 256);

nlohmann::json checkpoint_to_json(const Model& model);
Model checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace nondiss
