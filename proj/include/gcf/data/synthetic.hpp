#pragma once

#include <cstdint>
#include <vector>

#include "gcf/data/records.hpp"
#include "json.hpp"

namespace gcf::data {

enum class Scenario { Straight, LaneChange, RampArc };

const char* scenario_name(Scenario s);

struct ScenarioMix {
  double straight = 1.0;
  double lane_change = 1.0;
  double ramp_arc = 1.0;
};

struct GeneratorConfig {
  ScenarioMix scenario_mix;
  int n_scenes = 200;
  int neighbor_min = 0;
  int neighbor_max = 6;
  double speed_min = 10.0;  // m/s
  double speed_max = 20.0;
  double noise_sigma = 0.02;  // m, per coordinate
  std::uint64_t seed = 0;
  // Optional keys; defaults cover the documented scenario family.
  double arc_radius_min = 40.0;
  double arc_radius_max = 120.0;
  double lane_width = 3.5;
  double lane_change_duration = 3.0;  // s, 5%..95% of the lateral sigmoid
};

// Reads a JSON object with keys scenario_mix, n_scenes, neighbor_range,
// speed_range, noise_sigma, seed (and the optional arc_radius_range,
// lane_width, lane_change_duration). Throws ConfigError on invalid values.
GeneratorConfig generator_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GeneratorConfig& c);
void validate(const GeneratorConfig& c);

// Ground-truth description of one generated scene.
struct SyntheticScene {
  Scenario kind = Scenario::Straight;
  std::int64_t target_id = 0;
  double start_time = 0.0;
  Point origin;
  double heading = 0.0;
  double speed = 0.0;
  int side = 0;          // lane-change side / arc turn direction, +1 = left
  double radius = 0.0;   // ramp_arc only
  Point arc_center;      // ramp_arc only
  double change_time = 0.0;  // lane_change sigmoid midpoint, seconds after start
  int n_neighbors = 0;
};

struct SyntheticData {
  std::vector<RawRecord> records;  // sorted by (vehicle_id, time)
  std::vector<SyntheticScene> scenes;
};

// Each scene occupies its own 8 s time slot on the 0.1 s grid. The target is
// tracked for exactly one 20-step window; neighbors for 16 steps, so they
// never form windows of their own.
SyntheticData generate_synthetic(const GeneratorConfig& config, std::uint64_t seed);

}  // namespace gcf::data
