#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gcf/data/scene.hpp"
#include "json.hpp"

namespace gcf::data {

nlohmann::json scene_to_json(const Scene& s);
Scene scene_from_json(const nlohmann::json& j);

// Line-delimited JSON, one Scene per line. Scenes are validated on write and
// on read.
void write_archive(std::ostream& out, const std::vector<Scene>& scenes, const Horizons& h);
std::vector<Scene> read_archive(std::istream& in, const Horizons& h);

void write_archive_file(const std::string& path, const std::vector<Scene>& scenes, const Horizons& h);
std::vector<Scene> read_archive_file(const std::string& path, const Horizons& h);

}  // namespace gcf::data
