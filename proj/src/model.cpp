#include "nondiss/model.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>

#include "nondiss/errors.hpp"

namespace nondiss {

namespace {

int hidden_width(const ModelConfig& cfg) { return cfg.hidden > 0 ? cfg.hidden : cfg.d; }

MlpSpec encoder_spec(const ModelConfig& cfg) {
  return {{cfg.d_in, hidden_width(cfg), cfg.d}, Activation::kTanh, false, true};
}

int readout_width(const ModelConfig& cfg) {
  if (cfg.kind == "hdgn" || cfg.kind == "phdgn") {
    return cfg.readout_input == ReadoutInput::kPQ ? cfg.d : cfg.d / 2;
  }
  return cfg.d;
}

MlpSpec readout_spec(const ModelConfig& cfg) {
  return {{readout_width(cfg), hidden_width(cfg), cfg.d_out}, Activation::kTanh, false, true};
}

template <class T>
T get_as(const nlohmann::json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, "config key '" + key + "': " + e.what());
  }
}

}  // namespace

const std::vector<std::string>& model_kinds() {
  static const std::vector<std::string> kinds{"adgn", "swan", "swan-learn", "swan-ne", "swan-learn-ne",
                                              "hdgn", "phdgn", "heat", "gcn-baseline"};
  return kinds;
}

bool is_model_kind(const std::string& kind) {
  const auto& k = model_kinds();
  return std::find(k.begin(), k.end(), kind) != k.end();
}

ModelConfig default_model_config(const std::string& kind) {
  require(is_model_kind(kind), ErrorKind::kInvalidArgument, "unknown model '" + kind + "'");
  ModelConfig cfg;
  cfg.kind = kind;
  if (kind == "phdgn") {
    cfg.dampening = Dampening::kParam;
    cfg.force = Force::kDgnTanh;
  }
  return cfg;
}

CoreConfig core_config(const ModelConfig& cfg) {
  require(is_model_kind(cfg.kind), ErrorKind::kInvalidArgument, "unknown model '" + cfg.kind + "'");
  CoreConfig core;
  if (cfg.kind == "adgn") {
    core = ADgnConfig{cfg.d, cfg.layers, cfg.eps, cfg.gamma, cfg.agg, cfg.act};
  } else if (cfg.kind.rfind("swan", 0) == 0) {
    SwanConfig s;
    s.d = cfg.d;
    s.layers = cfg.layers;
    s.eps = cfg.eps;
    s.gamma = cfg.gamma;
    s.beta = cfg.beta;
    s.mode = cfg.kind.find("learn") != std::string::npos ? OperatorMode::kLearned : OperatorMode::kFixed;
    s.enforce_v_antisym = cfg.kind.find("-ne") == std::string::npos;
    s.act = cfg.act;
    core = s;
  } else if (cfg.kind == "hdgn" || cfg.kind == "phdgn") {
    PhdgnConfig p;
    p.d = cfg.d;
    p.layers = cfg.layers;
    p.eps = cfg.eps;
    p.agg_p = cfg.agg_p;
    p.agg_q = cfg.agg_q;
    p.dampening = cfg.kind == "hdgn" ? Dampening::kNone : cfg.dampening;
    p.force = cfg.kind == "hdgn" ? Force::kNone : cfg.force;
    p.readout_input = cfg.readout_input;
    p.act = cfg.act;
    core = p;
  } else if (cfg.kind == "heat") {
    core = HeatConfig{cfg.d, cfg.layers, cfg.eps};
  } else {
    core = GcnConfig{cfg.d, cfg.layers, cfg.act};
  }
  validate(core);
  return core;
}

const std::vector<std::string>& model_config_keys() {
  static const std::vector<std::string> keys{
      "model", "d_in", "d_out", "graph_level", "d", "hidden", "layers", "eps", "gamma", "beta",
      "agg", "agg_p", "agg_q", "act", "dampening", "force", "readout_input"};
  return keys;
}

nlohmann::json to_json(const ModelConfig& cfg) {
  return {{"model", cfg.kind},
          {"d_in", cfg.d_in},
          {"d_out", cfg.d_out},
          {"graph_level", cfg.graph_level},
          {"d", cfg.d},
          {"hidden", cfg.hidden},
          {"layers", cfg.layers},
          {"eps", cfg.eps},
          {"gamma", cfg.gamma},
          {"beta", cfg.beta},
          {"agg", to_string(cfg.agg)},
          {"agg_p", to_string(cfg.agg_p)},
          {"agg_q", to_string(cfg.agg_q)},
          {"act", to_string(cfg.act)},
          {"dampening", to_string(cfg.dampening)},
          {"force", to_string(cfg.force)},
          {"readout_input", to_string(cfg.readout_input)}};
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig cfg) {
  require(j.is_object(), ErrorKind::kParse, "model config must be a JSON object");
  const auto& keys = model_config_keys();
  for (const auto& [key, value] : j.items()) {
    require(std::find(keys.begin(), keys.end(), key) != keys.end(), ErrorKind::kParse,
            "unknown config key '" + key + "'");
    if (key == "model") {
      cfg.kind = get_as<std::string>(value, key);
      require(is_model_kind(cfg.kind), ErrorKind::kParse, "unknown model '" + cfg.kind + "'");
    } else if (key == "d_in") {
      cfg.d_in = get_as<int>(value, key);
    } else if (key == "d_out") {
      cfg.d_out = get_as<int>(value, key);
    } else if (key == "graph_level") {
      cfg.graph_level = get_as<bool>(value, key);
    } else if (key == "d") {
      cfg.d = get_as<int>(value, key);
    } else if (key == "hidden") {
      cfg.hidden = get_as<int>(value, key);
    } else if (key == "layers") {
      cfg.layers = get_as<int>(value, key);
    } else if (key == "eps") {
      cfg.eps = get_as<double>(value, key);
    } else if (key == "gamma") {
      cfg.gamma = get_as<double>(value, key);
    } else if (key == "beta") {
      cfg.beta = get_as<double>(value, key);
    } else if (key == "agg") {
      // Shorthand that also sets both PH-DGN aggregations.
      cfg.agg = cfg.agg_p = cfg.agg_q = aggregation_from_string(get_as<std::string>(value, key));
    } else if (key == "agg_p") {
      cfg.agg_p = aggregation_from_string(get_as<std::string>(value, key));
    } else if (key == "agg_q") {
      cfg.agg_q = aggregation_from_string(get_as<std::string>(value, key));
    } else if (key == "act") {
      cfg.act = activation_from_string(get_as<std::string>(value, key));
    } else if (key == "dampening") {
      cfg.dampening = dampening_from_string(get_as<std::string>(value, key));
    } else if (key == "force") {
      cfg.force = force_from_string(get_as<std::string>(value, key));
    } else if (key == "readout_input") {
      cfg.readout_input = readout_input_from_string(get_as<std::string>(value, key));
    }
  }
  return cfg;
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), core_(core_config(cfg_)) {
  require(cfg_.d_in >= 1 && cfg_.d_out >= 1, ErrorKind::kInvalidSize, "model input/output widths must be positive");
  Rng rng(seed);
  init_mlp(params_, "encoder", encoder_spec(cfg_), rng);
  init_core(params_, core_, rng);
  init_mlp(params_, "readout", readout_spec(cfg_), rng);
}

Model::Model(ModelConfig cfg, ParamStore params)
    : cfg_(std::move(cfg)), core_(core_config(cfg_)), params_(std::move(params)) {
  Model reference(cfg_, 0);
  require(reference.params().names() == params_.names(), ErrorKind::kParse,
          "parameter names do not match the model config");
  for (const auto& [name, e] : reference.params()) {
    const auto& got = params_.at(name).value;
    require(got.rows() == e.value.rows() && got.cols() == e.value.cols(), ErrorKind::kShapeMismatch,
            "parameter '" + name + "' has the wrong shape");
  }
}

Model::Output Model::forward(Tape& tape, const GraphContext& ctx, const Matrix& x, const Segments* segments) {
  require(x.rows() == ctx.n && x.cols() == cfg_.d_in, ErrorKind::kShapeMismatch,
          "model input must be n x d_in");
  Output out;
  out.encoded = mlp_forward(tape, params_, "encoder", encoder_spec(cfg_), tape.constant(x));
  out.states = core_forward(tape, params_, core_, ctx, out.encoded);
  Var h = out.states.back();
  if (const auto* p = std::get_if<PhdgnConfig>(&core_)) {
    const int half = p->d / 2;
    if (p->readout_input == ReadoutInput::kP) h = ad::cols(h, 0, half);
    if (p->readout_input == ReadoutInput::kQ) h = ad::cols(h, half, half);
  }
  if (cfg_.graph_level) {
    Segments single;
    if (segments == nullptr) {
      single.ids = std::make_shared<const std::vector<int>>(ctx.n, 0);
      single.count = 1;
      segments = &single;
    }
    h = ad::segment_mean(h, segments->ids, segments->count);
  }
  out.prediction = mlp_forward(tape, params_, "readout", readout_spec(cfg_), h);
  return out;
}

int width_for_budget(ModelConfig cfg, std::size_t budget, int max_width) {
  const bool even = cfg.kind == "hdgn" || cfg.kind == "phdgn";
  int best = even ? 2 : 1;
  auto best_gap = std::numeric_limits<long long>::max();
  for (int d = even ? 2 : 1; d <= max_width; d += even ? 2 : 1) {
    cfg.d = d;
    const auto count = static_cast<long long>(Model(cfg, 0).num_parameters());
    const long long gap = std::llabs(count - static_cast<long long>(budget));
    if (gap < best_gap) {
      best_gap = gap;
      best = d;
    }
    if (count > static_cast<long long>(budget)) break;
  }
  return best;
}

}  // namespace nondiss
