#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcf/data/scene.hpp"
#include "gcf/data/synthetic.hpp"
#include "gcf/modes/modes.hpp"
#include "json.hpp"

namespace gcf::model {

enum class Regression { Absolute, AnchorOffset };

struct ModelConfig {
  int d_model = 128;
  int heads = 4;
  int mae_layers = 2;
  int hid_layers = 1;
  int ffn_factor = 2;
  std::size_t k = 100;
  std::size_t k_top = 20;
  double lambda_min = 0.0;
  double lambda_max = 1.0;
  double lambda_reg = 1.0;
  double lambda_cls = 1.0;
  bool squared_soft_labels = false;
  Regression regression = Regression::Absolute;
  // Normalized coordinates are multiplied by this before embedding.
  double input_scale = 0.1;
  // Regression outputs are multiplied by this (meters per unit).
  double output_scale = 1.0;
  // Lattice (meters) that input coordinates are snapped to; 0 disables.
  double input_quantum = 1.0 / 65536.0;

  int d_k() const { return d_model / heads; }
};

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch = 32;
  int epochs = 20;
  int max_steps = 0;  // 0: no cap
  bool augment = true;
  double scale_jitter = 0.05;
};

struct EvalConfig {
  std::vector<double> mr_thresholds{2.0, 3.0};
  double cvar_tail = 0.2;
  double field_sigma = 5.0;  // meters
  double field_cell = 2.0;   // meters
  double field_margin = 10.0;
};

struct RunConfig {
  std::uint64_t seed = 0;
  data::Horizons horizons;
  double delta = 30.0;
  double split_ratio = 0.8;
  ModelConfig model;
  TrainConfig train;
  modes::KMeansOptions clustering;
  EvalConfig eval;
  data::GeneratorConfig generator;
};

// Unknown keys and out-of-range values raise ConfigError.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
void validate(const RunConfig& c);

RunConfig load_config(const std::string& path);

// Applies "a.b.c=value" to a JSON object; value is parsed as JSON when
// possible and kept as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace gcf::model
