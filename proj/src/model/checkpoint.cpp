#include <cmath>
#include <fstream>
#include <sstream>

#include "gcf/errors.hpp"
#include "gcf/model/model.hpp"

namespace gcf::model {

nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : ck.params) {
    params[name] = {{"shape", t.shape()}, {"values", std::vector<double>(t.data().begin(), t.data().end())}};
  }
  return {{"config", to_json(ck.config)}, {"seed", ck.config.seed}, {"steps", ck.steps}, {"params", params}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  Checkpoint ck;
  try {
    ck.config = config_from_json(j.at("config"));
    ck.steps = j.value("steps", 0);
    for (const auto& [name, entry] : j.at("params").items()) {
      auto shape = entry.at("shape").get<num::Shape>();
      auto values = entry.at("values").get<std::vector<double>>();
      if (num::shape_product(shape) != values.size()) {
        throw FormatError("parameter '" + name + "' value count does not match its shape");
      }
      for (double v : values)
        if (!std::isfinite(v)) throw FormatError("parameter '" + name + "' holds non-finite values");
      ck.params.emplace(name, Tensor(std::move(shape), std::move(values)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
  check_params(ck.params, ck.config.model, ck.config.horizons);
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << checkpoint_to_json(ck).dump() << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("checkpoint '" + path + "': " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace gcf::model
