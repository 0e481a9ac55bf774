#include "gcf/model/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "gcf/errors.hpp"

namespace gcf::model {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw ConfigError("unknown config key '" + where + (where.empty() ? "" : ".") + k + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  const std::string name = where + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(name + " must be a boolean");
    out = v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(name + " must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.get<std::int64_t>() < 0) throw ConfigError(name + " must be non-negative");
    }
    out = v.get<T>();
  } else {
    if (!v.is_number()) throw ConfigError(name + " must be a number");
    out = v.get<double>();
  }
}

const char* regression_name(Regression r) { return r == Regression::Absolute ? "absolute" : "anchor_offset"; }

}  // namespace

void validate(const RunConfig& c) {
  const auto& m = c.model;
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(c.horizons.t_obs >= 2, "horizons.t_obs must be at least 2");
  need(c.horizons.t_pre >= 1, "horizons.t_pre must be positive");
  (void)c.horizons.frame_stride();
  need(c.delta > 0, "masking.delta must be positive");
  need(c.split_ratio > 0 && c.split_ratio <= 1, "split.ratio must lie in (0, 1]");
  need(m.d_model > 0 && m.heads > 0 && m.d_model % m.heads == 0, "model.d_model must be divisible by model.heads");
  need(m.d_model >= 2, "model.d_model must be at least 2");
  need(m.mae_layers >= 1 && m.hid_layers >= 1 && m.ffn_factor >= 1, "layer counts and ffn_factor must be positive");
  need(m.k >= 1, "model.k must be positive");
  need(m.k_top >= 1 && m.k_top <= m.k, "model.k_top must satisfy 1 <= k_top <= k");
  need(m.lambda_min <= m.lambda_max, "model.lambda_bounds must satisfy min <= max");
  need(m.lambda_reg > 0 && m.lambda_cls >= 0, "model loss weights must be positive");
  need(m.input_scale > 0 && m.output_scale > 0, "model scales must be positive");
  need(m.input_quantum >= 0, "model.input_quantum must be non-negative");
  need(c.train.lr > 0, "training.lr must be positive");
  need(c.train.beta1 >= 0 && c.train.beta1 < 1 && c.train.beta2 >= 0 && c.train.beta2 < 1,
       "training Adam betas must lie in [0, 1)");
  need(c.train.epsilon > 0, "training.adam_epsilon must be positive");
  need(c.train.batch >= 1 && c.train.epochs >= 0 && c.train.max_steps >= 0, "training batch/epochs/max_steps");
  need(c.train.scale_jitter >= 0 && c.train.scale_jitter < 1, "training.scale_jitter must lie in [0, 1)");
  need(c.clustering.restarts >= 1 && c.clustering.max_iter >= 1 && c.clustering.tol >= 0, "clustering options");
  need(!c.eval.mr_thresholds.empty(), "evaluation.mr_thresholds must not be empty");
  for (double t : c.eval.mr_thresholds) need(t > 0, "evaluation.mr_thresholds must be positive");
  need(c.eval.cvar_tail > 0 && c.eval.cvar_tail <= 1, "evaluation.cvar_tail must lie in (0, 1]");
  need(c.eval.field_sigma > 0 && c.eval.field_cell > 0 && c.eval.field_margin >= 0, "evaluation field geometry");
  data::validate(c.generator);
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  check_keys(j, "", {"seed", "horizons", "masking", "split", "model", "training", "clustering", "evaluation",
                     "generator"});
  read(j, "seed", c.seed, "");
  if (j.contains("horizons")) {
    const auto& h = j.at("horizons");
    check_keys(h, "horizons", {"t_obs", "t_pre", "dt"});
    read(h, "t_obs", c.horizons.t_obs, "horizons");
    read(h, "t_pre", c.horizons.t_pre, "horizons");
    read(h, "dt", c.horizons.dt, "horizons");
  }
  if (j.contains("masking")) {
    check_keys(j.at("masking"), "masking", {"delta"});
    read(j.at("masking"), "delta", c.delta, "masking");
  }
  if (j.contains("split")) {
    check_keys(j.at("split"), "split", {"ratio"});
    read(j.at("split"), "ratio", c.split_ratio, "split");
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, "model", {"d_model", "heads", "mae_layers", "hid_layers", "ffn_factor", "k", "k_top",
                            "lambda_bounds", "lambda_reg", "lambda_cls", "squared_soft_labels", "regression",
                            "input_scale", "output_scale", "input_quantum"});
    read(m, "d_model", c.model.d_model, "model");
    read(m, "heads", c.model.heads, "model");
    read(m, "mae_layers", c.model.mae_layers, "model");
    read(m, "hid_layers", c.model.hid_layers, "model");
    read(m, "ffn_factor", c.model.ffn_factor, "model");
    read(m, "k", c.model.k, "model");
    read(m, "k_top", c.model.k_top, "model");
    if (m.contains("lambda_bounds")) {
      const auto& b = m.at("lambda_bounds");
      if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
        throw ConfigError("model.lambda_bounds must be a [min, max] pair");
      }
      c.model.lambda_min = b[0].get<double>();
      c.model.lambda_max = b[1].get<double>();
    }
    read(m, "lambda_reg", c.model.lambda_reg, "model");
    read(m, "lambda_cls", c.model.lambda_cls, "model");
    read(m, "squared_soft_labels", c.model.squared_soft_labels, "model");
    if (m.contains("regression")) {
      const auto& r = m.at("regression");
      if (r == "absolute") {
        c.model.regression = Regression::Absolute;
      } else if (r == "anchor_offset") {
        c.model.regression = Regression::AnchorOffset;
      } else {
        throw ConfigError("model.regression must be \"absolute\" or \"anchor_offset\"");
      }
    }
    read(m, "input_scale", c.model.input_scale, "model");
    read(m, "output_scale", c.model.output_scale, "model");
    read(m, "input_quantum", c.model.input_quantum, "model");
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    check_keys(t, "training", {"lr", "adam_beta1", "adam_beta2", "adam_epsilon", "batch", "epochs", "max_steps", "augment", "scale_jitter"});
    read(t, "lr", c.train.lr, "training");
    read(t, "adam_beta1", c.train.beta1, "training");
    read(t, "adam_beta2", c.train.beta2, "training");
    read(t, "adam_epsilon", c.train.epsilon, "training");
    read(t, "batch", c.train.batch, "training");
    read(t, "epochs", c.train.epochs, "training");
    read(t, "max_steps", c.train.max_steps, "training");
    read(t, "augment", c.train.augment, "training");
    read(t, "scale_jitter", c.train.scale_jitter, "training");
  }
  if (j.contains("clustering")) {
    const auto& k = j.at("clustering");
    check_keys(k, "clustering", {"restarts", "max_iter", "tol"});
    read(k, "restarts", c.clustering.restarts, "clustering");
    read(k, "max_iter", c.clustering.max_iter, "clustering");
    read(k, "tol", c.clustering.tol, "clustering");
  }
  if (j.contains("evaluation")) {
    const auto& e = j.at("evaluation");
    check_keys(e, "evaluation", {"mr_thresholds", "cvar_tail", "field_sigma", "field_cell", "field_margin"});
    if (e.contains("mr_thresholds")) {
      const auto& t = e.at("mr_thresholds");
      if (!t.is_array()) throw ConfigError("evaluation.mr_thresholds must be an array");
      c.eval.mr_thresholds.clear();
      for (const auto& v : t) {
        if (!v.is_number()) throw ConfigError("evaluation.mr_thresholds must hold numbers");
        c.eval.mr_thresholds.push_back(v.get<double>());
      }
    }
    read(e, "cvar_tail", c.eval.cvar_tail, "evaluation");
    read(e, "field_sigma", c.eval.field_sigma, "evaluation");
    read(e, "field_cell", c.eval.field_cell, "evaluation");
    read(e, "field_margin", c.eval.field_margin, "evaluation");
  }
  if (j.contains("generator")) c.generator = data::generator_config_from_json(j.at("generator"));
  validate(c);
  return c;
}

json to_json(const RunConfig& c) {
  const auto& m = c.model;
  return {
      {"seed", c.seed},
      {"horizons", {{"t_obs", c.horizons.t_obs}, {"t_pre", c.horizons.t_pre}, {"dt", c.horizons.dt}}},
      {"masking", {{"delta", c.delta}}},
      {"split", {{"ratio", c.split_ratio}}},
      {"model",
       {{"d_model", m.d_model},
        {"heads", m.heads},
        {"mae_layers", m.mae_layers},
        {"hid_layers", m.hid_layers},
        {"ffn_factor", m.ffn_factor},
        {"k", m.k},
        {"k_top", m.k_top},
        {"lambda_bounds", {m.lambda_min, m.lambda_max}},
        {"lambda_reg", m.lambda_reg},
        {"lambda_cls", m.lambda_cls},
        {"squared_soft_labels", m.squared_soft_labels},
        {"regression", regression_name(m.regression)},
        {"input_scale", m.input_scale},
        {"output_scale", m.output_scale},
        {"input_quantum", m.input_quantum}}},
      {"training",
       {{"lr", c.train.lr},
        {"adam_beta1", c.train.beta1},
        {"adam_beta2", c.train.beta2},
        {"adam_epsilon", c.train.epsilon},
        {"batch", c.train.batch},
        {"epochs", c.train.epochs},
        {"max_steps", c.train.max_steps},
        {"augment", c.train.augment},
        {"scale_jitter", c.train.scale_jitter}}},
      {"clustering",
       {{"restarts", c.clustering.restarts}, {"max_iter", c.clustering.max_iter}, {"tol", c.clustering.tol}}},
      {"evaluation",
       {{"mr_thresholds", c.eval.mr_thresholds},
        {"cvar_tail", c.eval.cvar_tail},
        {"field_sigma", c.eval.field_sigma},
        {"field_cell", c.eval.field_cell},
        {"field_margin", c.eval.field_margin}}},
      {"generator", data::to_json(c.generator)},
  };
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("empty segment in override key '" + path + "'");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override key '" + path + "' crosses a non-object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw ConfigError("override key '" + path + "' crosses a non-object");
  (*node)[parts.back()] = value;
}

}  // namespace gcf::model
