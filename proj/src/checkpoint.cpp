#include <fstream>

#include "nondiss/errors.hpp"
#include "nondiss/model.hpp"

namespace nondiss {

nlohmann::json checkpoint_to_json(const Model& model) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, e] : model.params()) params[name] = matrix_to_json(e.value);
  return {{"config", to_json(model.config())}, {"params", params}};
}

Model checkpoint_from_json(const nlohmann::json& j) {
  require(j.is_object() && j.contains("config") && j.contains("params"), ErrorKind::kParse,
          "checkpoint needs 'config' and 'params'");
  ModelConfig cfg = model_config_from_json(j.at("config"), ModelConfig{});
  require(j.at("params").is_object(), ErrorKind::kParse, "checkpoint 'params' must be an object");
  ParamStore store;
  for (const auto& [name, value] : j.at("params").items()) store.add(name, matrix_from_json(value));
  return Model(std::move(cfg), std::move(store));
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::kInvalidArgument, "cannot write " + path.string());
  out << checkpoint_to_json(model).dump() << '\n';
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kInvalidArgument, "cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace nondiss
