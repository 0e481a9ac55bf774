#include "gcf/data/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "gcf/errors.hpp"

namespace gcf::data {

std::int64_t Horizons::frame_stride() const {
  const auto s = std::llround(dt * 10.0);
  if (s <= 0 || std::abs(dt * 10.0 - static_cast<double>(s)) > 1e-9) {
    throw ConfigError("dt must be a positive multiple of 0.1 s");
  }
  return s;
}

std::size_t Scene::n_valid() const {
  return static_cast<std::size_t>(std::count(neighbor_valid.begin(), neighbor_valid.end(), std::uint8_t{1}));
}

Point NormTransform::apply(Point world) const {
  const double dx = world.x - translation.x;
  const double dy = world.y - translation.y;
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * dx + s * dy, -s * dx + c * dy};
}

Point NormTransform::invert(Point p) const {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * p.x - s * p.y + translation.x, s * p.x + c * p.y + translation.y};
}

std::vector<Window> build_windows(const std::vector<RawRecord>& records, const Horizons& h) {
  const std::int64_t stride = h.frame_stride();
  // vehicle -> (frame -> point), decimated to the model grid
  std::map<std::int64_t, std::map<std::int64_t, Point>> tracks;
  std::map<std::int64_t, std::map<std::int64_t, Point>> by_frame;
  for (const auto& r : records) {
    const std::int64_t f = frame_of(r.time);
    if (f % stride != 0) continue;
    tracks[r.vehicle_id][f] = {r.x, r.y};
    by_frame[f][r.vehicle_id] = {r.x, r.y};
  }
  std::vector<Window> windows;
  const int total = h.total();
  for (const auto& [vid, frames] : tracks) {
    for (const auto& [f0, p0] : frames) {
      Trajectory target;
      target.reserve(static_cast<std::size_t>(total));
      for (int i = 0; i < total; ++i) {
        auto it = frames.find(f0 + i * stride);
        if (it == frames.end()) break;
        target.push_back(it->second);
      }
      if (static_cast<int>(target.size()) != total) continue;

      Window w;
      w.start_time = static_cast<double>(f0) / 10.0;
      w.target_id = vid;
      w.target = std::move(target);
      std::map<std::int64_t, NeighborTrack> candidates;
      for (int i = 0; i < h.t_obs; ++i) {
        auto fit = by_frame.find(f0 + i * stride);
        if (fit == by_frame.end()) continue;
        for (const auto& [nid, p] : fit->second) {
          if (nid == vid) continue;
          auto& track = candidates[nid];
          track.vehicle_id = nid;
          track.obs.resize(static_cast<std::size_t>(h.t_obs));
          track.obs[static_cast<std::size_t>(i)] = p;
        }
      }
      for (auto& [nid, track] : candidates) w.neighbors.push_back(std::move(track));
      windows.push_back(std::move(w));
    }
  }
  return windows;
}

NeighborSelection select_neighbors(const Window& window, int t_obs, double delta) {
  NeighborSelection sel;
  sel.window.start_time = window.start_time;
  sel.window.target_id = window.target_id;
  sel.window.target = window.target;
  const auto n_obs = static_cast<std::size_t>(t_obs);
  for (std::size_t i = 0; i < window.neighbors.size(); ++i) {
    const auto& nb = window.neighbors[i];
    double total = 0.0;
    std::size_t present = 0;
    for (std::size_t t = 0; t < n_obs && t < nb.obs.size(); ++t) {
      if (!nb.obs[t]) continue;
      total += std::hypot(nb.obs[t]->x - window.target[t].x, nb.obs[t]->y - window.target[t].y);
      ++present;
    }
    // Missing more than half of the observation steps: drop.
    if (n_obs - present > n_obs / 2 || present == 0) {
      sel.distances.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double d = total / static_cast<double>(present);
    sel.distances.push_back(d);
    if (!(d < delta)) continue;

    NeighborTrack filled;
    filled.vehicle_id = nb.vehicle_id;
    filled.obs.resize(n_obs);
    for (std::size_t t = 0; t < n_obs; ++t) {
      if (t < nb.obs.size() && nb.obs[t]) {
        filled.obs[t] = nb.obs[t];
        continue;
      }
      // Nearest observed step; earlier step wins ties.
      for (std::size_t off = 1; off < n_obs; ++off) {
        if (t >= off && nb.obs[t - off]) {
          filled.obs[t] = nb.obs[t - off];
          break;
        }
        if (t + off < nb.obs.size() && nb.obs[t + off]) {
          filled.obs[t] = nb.obs[t + off];
          break;
        }
      }
    }
    sel.window.neighbors.push_back(std::move(filled));
    sel.retained.push_back(i);
  }
  return sel;
}

std::vector<std::vector<std::uint8_t>> social_mask_matrix(std::size_t n_valid, std::size_t n_max) {
  if (n_valid > n_max) throw ContractError("n_valid exceeds N_max");
  std::vector<std::vector<std::uint8_t>> m(n_max, std::vector<std::uint8_t>(n_max, 0));
  for (std::size_t i = 0; i < n_valid; ++i)
    for (std::size_t k = 0; k < n_valid; ++k) m[i][k] = 1;
  return m;
}

Scene normalize_scene(const Window& window, int t_obs) {
  const auto n_obs = static_cast<std::size_t>(t_obs);
  if (window.target.size() < n_obs || n_obs < 2) throw DataError("window too short to normalize");
  Scene s;
  s.start_time = window.start_time;
  s.target_id = window.target_id;

  const Point last = window.target[n_obs - 1];
  const Point first = window.target[0];
  const double fx = first.x - last.x;
  const double fy = first.y - last.y;
  s.norm.translation = last;
  if (std::hypot(fx, fy) < 1e-12) {
    s.norm.theta = 0.0;
    s.norm.degenerate = true;
  } else {
    s.norm.theta = std::atan2(fy, fx);
  }

  s.target_obs.reserve(n_obs);
  for (std::size_t t = 0; t < n_obs; ++t) s.target_obs.push_back(s.norm.apply(window.target[t]));
  s.target_obs[n_obs - 1] = {0.0, 0.0};
  if (!s.norm.degenerate) s.target_obs[0] = {std::hypot(fx, fy), 0.0};
  for (std::size_t t = n_obs; t < window.target.size(); ++t) s.target_future.push_back(s.norm.apply(window.target[t]));

  for (const auto& nb : window.neighbors) {
    Trajectory tr;
    tr.reserve(n_obs);
    for (std::size_t t = 0; t < n_obs; ++t) {
      if (t >= nb.obs.size() || !nb.obs[t]) throw DataError("neighbor track has gaps; run select_neighbors first");
      tr.push_back(s.norm.apply(*nb.obs[t]));
    }
    s.neighbors_obs.push_back(std::move(tr));
    s.neighbor_valid.push_back(1);
  }
  return s;
}

Trajectory denormalize_prediction(const Trajectory& pred, const NormTransform& norm) {
  Trajectory out;
  out.reserve(pred.size());
  for (const auto& p : pred) out.push_back(norm.invert(p));
  return out;
}

std::size_t pad_batch(std::vector<Scene>& scenes) {
  std::size_t n_max = 0;
  for (const auto& s : scenes) n_max = std::max(n_max, s.n_valid());
  for (auto& s : scenes) {
    const std::size_t t_obs = s.target_obs.size();
    std::vector<Trajectory> nbs;
    std::vector<std::uint8_t> valid;
    for (std::size_t i = 0; i < s.neighbors_obs.size(); ++i) {
      if (!s.neighbor_valid[i]) continue;
      nbs.push_back(s.neighbors_obs[i]);
      valid.push_back(1);
    }
    while (nbs.size() < n_max) {
      nbs.emplace_back(t_obs, Point{});
      valid.push_back(0);
    }
    s.neighbors_obs = std::move(nbs);
    s.neighbor_valid = std::move(valid);
  }
  return n_max;
}

void validate_scene(const Scene& s, const Horizons& h) {
  auto fail = [&](const std::string& why) {
    throw DataError("scene (target " + std::to_string(s.target_id) + ", t=" + std::to_string(s.start_time) +
                    "): " + why);
  };
  auto finite = [](const Trajectory& tr) {
    return std::all_of(tr.begin(), tr.end(), [](const Point& p) { return std::isfinite(p.x) && std::isfinite(p.y); });
  };
  if (s.target_obs.size() != static_cast<std::size_t>(h.t_obs)) fail("target_obs length");
  if (s.has_future() && s.target_future.size() != static_cast<std::size_t>(h.t_pre)) fail("target_future length");
  if (!finite(s.target_obs) || !finite(s.target_future)) fail("non-finite coordinates");
  if (!(s.target_obs.back() == Point{0.0, 0.0})) fail("last observation is not the origin");
  if (!(std::abs(s.target_obs.front().y) < 1e-9) || s.target_obs.front().x < 0.0) {
    fail("first observation is not on the positive x-axis");
  }
  if (s.neighbor_valid.size() != s.neighbors_obs.size()) fail("validity flags do not match neighbor slots");
  for (std::size_t i = 0; i < s.neighbors_obs.size(); ++i) {
    const auto& tr = s.neighbors_obs[i];
    if (tr.size() != static_cast<std::size_t>(h.t_obs)) fail("neighbor history length");
    if (!finite(tr)) fail("non-finite neighbor coordinates");
    if (!s.neighbor_valid[i]) {
      for (const auto& p : tr)
        if (!(p == Point{})) fail("padded neighbor slot is not zero");
    }
  }
}

double split_boundary(const std::vector<Scene>& scenes, double ratio) {
  if (scenes.empty()) return 0.0;
  std::vector<double> times;
  times.reserve(scenes.size());
  for (const auto& s : scenes) times.push_back(s.start_time);
  std::sort(times.begin(), times.end());
  const double rank = std::ceil(ratio * static_cast<double>(times.size()) - 1e-9);
  const auto idx = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(times.size())));
  return times[idx - 1];
}

Split temporal_split(std::vector<Scene> scenes, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("split ratio must lie in (0, 1]");
  Split out;
  const double boundary = split_boundary(scenes, ratio);
  for (auto& s : scenes) {
    (s.start_time <= boundary ? out.train : out.test).push_back(std::move(s));
  }
  return out;
}

std::vector<Scene> scenes_from_records(const std::vector<RawRecord>& records, const Horizons& h, double delta) {
  std::vector<Scene> out;
  for (const auto& w : build_windows(records, h)) {
    out.push_back(normalize_scene(select_neighbors(w, h.t_obs, delta).window, h.t_obs));
  }
  return out;
}

Scene scale_scene(Scene scene, double factor) {
  auto scale = [factor](Trajectory& tr) {
    for (auto& p : tr) {
      p.x *= factor;
      p.y *= factor;
    }
  };
  scale(scene.target_obs);
  scale(scene.target_future);
  for (auto& nb : scene.neighbors_obs) scale(nb);
  return scene;
}

Scene scale_augment(const Scene& scene, std::mt19937_64& rng, double jitter) {
  std::uniform_real_distribution<double> dist(1.0 - jitter, 1.0 + jitter);
  return scale_scene(scene, dist(rng));
}

}  // namespace gcf::data
