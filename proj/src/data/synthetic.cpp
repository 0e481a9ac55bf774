#include "gcf/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "gcf/errors.hpp"

namespace gcf::data {

namespace {

constexpr int kTargetFrames = 77;    // 0.0 .. 7.6 s -> 20 steps at 0.4 s
constexpr int kNeighborFrames = 61;  // 0.0 .. 6.0 s -> 16 steps
constexpr std::int64_t kSlotFrames = 80;
constexpr std::int64_t kIdsPerScene = 100;

struct Vec {
  double x, y;
};

Vec rotate(Vec v, double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

double read_number(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(std::string("generator key '") + key + "' must be a number");
  return j.at(key).get<double>();
}

std::pair<double, double> read_range(const nlohmann::json& j, const char* key, std::pair<double, double> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& r = j.at(key);
  if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
    throw ConfigError(std::string("generator key '") + key + "' must be a [min, max] pair");
  }
  return {r[0].get<double>(), r[1].get<double>()};
}

}  // namespace

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Straight: return "straight";
    case Scenario::LaneChange: return "lane_change";
    case Scenario::RampArc: return "ramp_arc";
  }
  return "?";
}

void validate(const GeneratorConfig& c) {
  const auto& m = c.scenario_mix;
  if (m.straight < 0 || m.lane_change < 0 || m.ramp_arc < 0 || m.straight + m.lane_change + m.ramp_arc <= 0) {
    throw ConfigError("scenario_mix weights must be non-negative with a positive sum");
  }
  if (c.n_scenes <= 0) throw ConfigError("n_scenes must be positive");
  if (c.neighbor_min < 0 || c.neighbor_max < c.neighbor_min || c.neighbor_max >= kIdsPerScene) {
    throw ConfigError("neighbor_range must satisfy 0 <= min <= max < 100");
  }
  if (!(c.speed_min > 0) || c.speed_max < c.speed_min) throw ConfigError("speed_range must be positive, min <= max");
  if (!(c.noise_sigma >= 0) || c.noise_sigma > 0.05) throw ConfigError("noise_sigma must lie in [0, 0.05]");
  if (!(c.arc_radius_min > 2 * c.lane_width) || c.arc_radius_max < c.arc_radius_min) {
    throw ConfigError("arc_radius_range must exceed two lane widths, min <= max");
  }
  if (!(c.lane_width > 0) || !(c.lane_change_duration > 0)) throw ConfigError("lane geometry must be positive");
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("generator config must be a JSON object");
  GeneratorConfig c;
  if (j.contains("scenario_mix")) {
    const auto& m = j.at("scenario_mix");
    if (!m.is_object()) throw ConfigError("scenario_mix must be an object");
    for (const auto& [k, v] : m.items()) {
      if (k != "straight" && k != "lane_change" && k != "ramp_arc") {
        throw ConfigError("unknown scenario '" + k + "'");
      }
      if (!v.is_number()) throw ConfigError("scenario weight for '" + k + "' must be a number");
    }
    c.scenario_mix.straight = read_number(m, "straight", 0.0);
    c.scenario_mix.lane_change = read_number(m, "lane_change", 0.0);
    c.scenario_mix.ramp_arc = read_number(m, "ramp_arc", 0.0);
  }
  if (j.contains("n_scenes")) {
    if (!j.at("n_scenes").is_number_integer()) throw ConfigError("n_scenes must be an integer");
    c.n_scenes = j.at("n_scenes").get<int>();
  }
  const auto nr = read_range(j, "neighbor_range", {c.neighbor_min, c.neighbor_max});
  if (nr.first != std::floor(nr.first) || nr.second != std::floor(nr.second)) {
    throw ConfigError("neighbor_range must hold integers");
  }
  c.neighbor_min = static_cast<int>(nr.first);
  c.neighbor_max = static_cast<int>(nr.second);
  std::tie(c.speed_min, c.speed_max) = read_range(j, "speed_range", {c.speed_min, c.speed_max});
  std::tie(c.arc_radius_min, c.arc_radius_max) =
      read_range(j, "arc_radius_range", {c.arc_radius_min, c.arc_radius_max});
  c.noise_sigma = read_number(j, "noise_sigma", c.noise_sigma);
  c.lane_width = read_number(j, "lane_width", c.lane_width);
  c.lane_change_duration = read_number(j, "lane_change_duration", c.lane_change_duration);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer() || j.at("seed").get<std::int64_t>() < 0) {
      throw ConfigError("seed must be a non-negative integer");
    }
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  validate(c);
  return c;
}

nlohmann::json to_json(const GeneratorConfig& c) {
  return {
      {"scenario_mix",
       {{"straight", c.scenario_mix.straight},
        {"lane_change", c.scenario_mix.lane_change},
        {"ramp_arc", c.scenario_mix.ramp_arc}}},
      {"n_scenes", c.n_scenes},
      {"neighbor_range", {c.neighbor_min, c.neighbor_max}},
      {"speed_range", {c.speed_min, c.speed_max}},
      {"noise_sigma", c.noise_sigma},
      {"seed", c.seed},
      {"arc_radius_range", {c.arc_radius_min, c.arc_radius_max}},
      {"lane_width", c.lane_width},
      {"lane_change_duration", c.lane_change_duration},
  };
}

SyntheticData generate_synthetic(const GeneratorConfig& config, std::uint64_t seed) {
  validate(config);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::normal_distribution<double> noise(0.0, config.noise_sigma > 0 ? config.noise_sigma : 1.0);
  auto jitter = [&]() { return config.noise_sigma > 0 ? noise(rng) : 0.0; };

  const auto& mix = config.scenario_mix;
  const double total_w = mix.straight + mix.lane_change + mix.ramp_arc;
  // A logistic with scale tau rises from 5% to 95% over 2*ln(19)*tau.
  const double tau = config.lane_change_duration / (2.0 * std::log(19.0));
  const double W = config.lane_width;

  SyntheticData out;
  for (int i = 0; i < config.n_scenes; ++i) {
    SyntheticScene sc;
    const double pick = unit(rng) * total_w;
    sc.kind = pick < mix.straight                    ? Scenario::Straight
              : pick < mix.straight + mix.lane_change ? Scenario::LaneChange
                                                      : Scenario::RampArc;
    if (sc.kind == Scenario::Straight && mix.straight == 0) sc.kind = Scenario::LaneChange;
    if (sc.kind == Scenario::LaneChange && mix.lane_change == 0) sc.kind = Scenario::RampArc;
    sc.target_id = static_cast<std::int64_t>(i) * kIdsPerScene;
    const std::int64_t frame0 = static_cast<std::int64_t>(i) * kSlotFrames;
    sc.start_time = static_cast<double>(frame0) / 10.0;
    sc.origin = {uniform(-1000.0, 1000.0), uniform(-1000.0, 1000.0)};
    sc.heading = uniform(-std::numbers::pi, std::numbers::pi);
    sc.speed = uniform(config.speed_min, config.speed_max);
    sc.side = unit(rng) < 0.5 ? -1 : 1;
    if (sc.kind == Scenario::RampArc) sc.radius = uniform(config.arc_radius_min, config.arc_radius_max);
    if (sc.kind == Scenario::LaneChange) sc.change_time = uniform(1.5, 6.0);
    sc.n_neighbors = static_cast<int>(std::floor(uniform(config.neighbor_min, config.neighbor_max + 1.0)));
    sc.n_neighbors = std::min(sc.n_neighbors, config.neighbor_max);

    const Vec u{std::cos(sc.heading), std::sin(sc.heading)};
    const Vec n{-u.y, u.x};
    const Vec o{sc.origin.x, sc.origin.y};
    Vec center{o.x + sc.side * sc.radius * n.x, o.y + sc.side * sc.radius * n.y};
    if (sc.kind == Scenario::RampArc) sc.arc_center = {center.x, center.y};

    // Position of a vehicle at lateral offset `lat` (left positive), initial
    // longitudinal offset `lon`, speed `v`, at time t.
    auto position = [&](double lat, double lon, double v, double t, bool is_target) -> Vec {
      const double s = lon + v * t;
      if (sc.kind == Scenario::RampArc) {
        const Vec r0{(lat - sc.side * sc.radius) * n.x, (lat - sc.side * sc.radius) * n.y};
        const double rn = std::abs(lat - sc.side * sc.radius);
        const Vec r = rotate(r0, sc.side * s / rn);
        return {center.x + r.x, center.y + r.y};
      }
      double l = lat;
      if (is_target && sc.kind == Scenario::LaneChange) {
        l += sc.side * W / (1.0 + std::exp(-(t - sc.change_time) / tau));
      }
      return {o.x + s * u.x + l * n.x, o.y + s * u.y + l * n.y};
    };

    for (int f = 0; f < kTargetFrames; ++f) {
      const double t = f / 10.0;
      const Vec p = position(0.0, 0.0, sc.speed, t, true);
      out.records.push_back({static_cast<double>(frame0 + f) / 10.0, sc.target_id, p.x + jitter(), p.y + jitter()});
    }
    for (int j = 0; j < sc.n_neighbors; ++j) {
      static constexpr double kLanes[] = {-2.0, -1.0, 0.0, 1.0, 2.0};
      const double lat = kLanes[static_cast<int>(std::floor(uniform(0.0, 5.0))) % 5] * W;
      double lon = uniform(-20.0, 20.0);
      if (lat == 0.0 && std::abs(lon) < 8.0) lon = lon < 0 ? lon - 8.0 : lon + 8.0;
      const double v = uniform(config.speed_min, config.speed_max);
      const std::int64_t id = sc.target_id + j + 1;
      for (int f = 0; f < kNeighborFrames; ++f) {
        const Vec p = position(lat, lon, v, f / 10.0, false);
        out.records.push_back({static_cast<double>(frame0 + f) / 10.0, id, p.x + jitter(), p.y + jitter()});
      }
    }
    out.scenes.push_back(sc);
  }
  std::stable_sort(out.records.begin(), out.records.end(), [](const RawRecord& a, const RawRecord& b) {
    if (a.vehicle_id != b.vehicle_id) return a.vehicle_id < b.vehicle_id;
    return frame_of(a.time) < frame_of(b.time);
  });
  return out;
}

}  // namespace gcf::data
