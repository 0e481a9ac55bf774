#include "gcf/data/archive.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "gcf/errors.hpp"

namespace gcf::data {

namespace {

nlohmann::json traj_json(const Trajectory& tr) {
  auto a = nlohmann::json::array();
  for (const auto& p : tr) a.push_back({p.x, p.y});
  return a;
}

Trajectory traj_from(const nlohmann::json& a) {
  if (!a.is_array()) throw FormatError("trajectory must be an array of [x, y] pairs");
  Trajectory tr;
  tr.reserve(a.size());
  for (const auto& p : a) {
    if (!p.is_array() || p.size() != 2) throw FormatError("trajectory point must be [x, y]");
    tr.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return tr;
}

}  // namespace

nlohmann::json scene_to_json(const Scene& s) {
  nlohmann::json nbs = nlohmann::json::array();
  for (const auto& nb : s.neighbors_obs) nbs.push_back(traj_json(nb));
  nlohmann::json valid = nlohmann::json::array();
  for (auto v : s.neighbor_valid) valid.push_back(v != 0);
  return {
      {"start_time", s.start_time},
      {"target_id", s.target_id},
      {"target_obs", traj_json(s.target_obs)},
      {"target_future", traj_json(s.target_future)},
      {"neighbors_obs", nbs},
      {"neighbor_valid", valid},
      {"norm",
       {{"tx", s.norm.translation.x},
        {"ty", s.norm.translation.y},
        {"theta", s.norm.theta},
        {"degenerate", s.norm.degenerate}}},
  };
}

Scene scene_from_json(const nlohmann::json& j) {
  try {
    Scene s;
    s.start_time = j.at("start_time").get<double>();
    s.target_id = j.at("target_id").get<std::int64_t>();
    s.target_obs = traj_from(j.at("target_obs"));
    s.target_future = traj_from(j.at("target_future"));
    for (const auto& nb : j.at("neighbors_obs")) s.neighbors_obs.push_back(traj_from(nb));
    for (const auto& v : j.at("neighbor_valid")) s.neighbor_valid.push_back(v.get<bool>() ? 1 : 0);
    const auto& n = j.at("norm");
    s.norm.translation = {n.at("tx").get<double>(), n.at("ty").get<double>()};
    s.norm.theta = n.at("theta").get<double>();
    s.norm.degenerate = n.at("degenerate").get<bool>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed scene: ") + e.what());
  }
}

void write_archive(std::ostream& out, const std::vector<Scene>& scenes, const Horizons& h) {
  for (const auto& s : scenes) {
    validate_scene(s, h);
    out << scene_to_json(s).dump() << '\n';
  }
}

std::vector<Scene> read_archive(std::istream& in, const Horizons& h) {
  std::vector<Scene> scenes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError("archive line " + std::to_string(lineno) + ": " + e.what());
    }
    Scene s = scene_from_json(j);
    validate_scene(s, h);
    scenes.push_back(std::move(s));
  }
  return scenes;
}

void write_archive_file(const std::string& path, const std::vector<Scene>& scenes, const Horizons& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_archive(out, scenes, h);
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<Scene> read_archive_file(const std::string& path, const Horizons& h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_archive(in, h);
}

}  // namespace gcf::data
