#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "gcf/data/archive.hpp"
#include "gcf/data/scene.hpp"
#include "gcf/data/synthetic.hpp"
#include "gcf/errors.hpp"

using namespace gcf::data;

namespace {

std::vector<RawRecord> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_records(in);
}

std::vector<RawRecord> track(std::int64_t id, int steps, double x0, double y0, double vx, double vy, int first_step = 0) {
  std::vector<RawRecord> out;
  for (int i = 0; i < steps; ++i) {
    const int f = (first_step + i) * 4;
    out.push_back({f / 10.0, id, x0 + vx * i, y0 + vy * i});
  }
  return out;
}

Window random_window(std::mt19937_64& rng, int n_neighbors, double spread = 40.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Window w;
  w.target_id = 1;
  double x = 500 * u(rng), y = 500 * u(rng);
  const double vx = 5 * u(rng), vy = 5 * u(rng);
  for (int t = 0; t < 20; ++t) {
    w.target.push_back({x, y});
    x += vx + 0.3 * u(rng);
    y += vy + 0.3 * u(rng);
  }
  for (int j = 0; j < n_neighbors; ++j) {
    NeighborTrack nb;
    nb.vehicle_id = 10 + j;
    const double ox = spread * u(rng), oy = spread * u(rng);
    for (int t = 0; t < 8; ++t) nb.obs.push_back(Point{w.target[t].x + ox + u(rng), w.target[t].y + oy + u(rng)});
    w.neighbors.push_back(nb);
  }
  return w;
}

Point rigid(Point p, double a, Point shift) {
  return {std::cos(a) * p.x - std::sin(a) * p.y + shift.x, std::sin(a) * p.x + std::cos(a) * p.y + shift.y};
}

double max_diff(const Trajectory& a, const Trajectory& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max({m, std::abs(a[i].x - b[i].x), std::abs(a[i].y - b[i].y)});
  return m;
}

Scene scene_at(double t, int n_valid = 0) {
  Scene s;
  s.start_time = t;
  s.target_obs.assign(8, Point{});
  for (int i = 0; i < n_valid; ++i) {
    s.neighbors_obs.emplace_back(8, Point{1.0 + i, 2.0});
    s.neighbor_valid.push_back(1);
  }
  return s;
}

}  // namespace

TEST_CASE("parse_records basics") {
  CHECK(parse("").empty());
  CHECK(parse("t,id,x,y\n").empty());
  auto one = parse("t,id,x,y\n0.4,7,1.5,-2.25\n");
  REQUIRE(one.size() == 1);
  CHECK(one[0] == RawRecord{0.4, 7, 1.5, -2.25});
}

TEST_CASE("parse_records sorts like a comparison sort") {
  std::mt19937_64 rng(11);
  std::vector<RawRecord> recs;
  for (int id = 0; id < 10; ++id)
    for (int f = 0; f < 10; ++f) recs.push_back({f / 10.0, 100 - id * 7, id + f * 0.5, f - id * 0.25});
  std::shuffle(recs.begin(), recs.end(), rng);
  std::ostringstream out;
  write_records(out, recs);
  auto parsed = parse(out.str());

  auto oracle = recs;
  std::sort(oracle.begin(), oracle.end(), [](const RawRecord& a, const RawRecord& b) {
    return std::pair(a.vehicle_id, a.time) < std::pair(b.vehicle_id, b.time);
  });
  REQUIRE(parsed.size() == 100);
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    CHECK(parsed[i].vehicle_id == oracle[i].vehicle_id);
    CHECK(frame_of(parsed[i].time) == frame_of(oracle[i].time));
    CHECK(parsed[i].x == doctest::Approx(oracle[i].x).epsilon(1e-9));
  }
}

TEST_CASE("parse_records errors") {
  try {
    parse("t,id,x,y\n0.0,1,0,0\n0.1,1,abc,0\n");
    FAIL("expected ParseError");
  } catch (const gcf::ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse("t,id,x,y\n0.0,1,0\n"), gcf::ParseError);
  CHECK_THROWS_AS(parse("t,id,x,y\n-0.1,1,0,0\n"), gcf::ParseError);
  CHECK_THROWS_AS(parse("t,id,x,y\n0.05,1,0,0\n"), gcf::ParseError);
  CHECK_THROWS_AS(parse("t,id,x,y\n0.1,1,0,0\n0.1,1,2,2\n"), gcf::DataError);
}

TEST_CASE("build_windows counts") {
  CHECK(build_windows(track(1, 20, 0, 0, 1, 0)).size() == 1);
  CHECK(build_windows(track(1, 19, 0, 0, 1, 0)).empty());
  CHECK(build_windows(track(1, 25, 0, 0, 1, 0)).size() == 6);

  // a gap at step 10 leaves no 20-step run in 25 steps
  auto gappy = track(1, 25, 0, 0, 1, 0);
  gappy.erase(gappy.begin() + 10);
  CHECK(build_windows(gappy).empty());
}

TEST_CASE("build_windows decimates and collects neighbors") {
  std::vector<RawRecord> recs;
  for (int f = 0; f < 77; ++f) recs.push_back({f / 10.0, 1, f * 0.1, 0.0});
  // neighbor present only for the first 8 steps
  for (int f = 0; f < 29; ++f) recs.push_back({f / 10.0, 2, f * 0.1, 3.0});
  auto ws = build_windows(recs);
  REQUIRE(ws.size() == 1);
  const auto& w = ws[0];
  CHECK(w.target_id == 1);
  REQUIRE(w.target.size() == 20);
  CHECK(w.target[5].x == doctest::Approx(2.0));
  REQUIRE(w.neighbors.size() == 1);
  CHECK(w.neighbors[0].vehicle_id == 2);
  for (const auto& o : w.neighbors[0].obs) CHECK(o.has_value());
}

TEST_CASE("normalize_scene hand example") {
  Window w;
  w.target.assign(20, Point{});
  w.target[0] = {0, 1};
  w.target[7] = {0, 0};
  Scene s = normalize_scene(w, 8);
  CHECK(s.norm.theta == doctest::Approx(std::numbers::pi / 2));
  CHECK(s.target_obs[0].x == doctest::Approx(1.0));
  CHECK(std::abs(s.target_obs[0].y) < 1e-12);
  CHECK(s.target_obs[7] == Point{0, 0});
  CHECK_FALSE(s.norm.degenerate);
}

TEST_CASE("normalize_scene degenerate heading") {
  Window w;
  w.target.assign(20, Point{3, 4});
  w.target[3] = {5, 5};
  Scene s = normalize_scene(w, 8);
  CHECK(s.norm.degenerate);
  CHECK(s.norm.theta == 0.0);
  CHECK(s.target_obs[3] == Point{2, 1});
  validate_scene(s, {});
}

TEST_CASE("normalize_scene idempotence") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    Window w = random_window(rng, 3);
    Scene s = normalize_scene(w, 8);
    Window again;
    again.target = s.target_obs;
    again.target.insert(again.target.end(), s.target_future.begin(), s.target_future.end());
    for (const auto& nb : s.neighbors_obs) {
      NeighborTrack t;
      for (const auto& p : nb) t.obs.push_back(p);
      again.neighbors.push_back(t);
    }
    Scene s2 = normalize_scene(again, 8);
    CHECK(max_diff(s.target_obs, s2.target_obs) < 1e-12);
    CHECK(max_diff(s.target_future, s2.target_future) < 1e-12);
    for (std::size_t j = 0; j < s.neighbors_obs.size(); ++j) CHECK(max_diff(s.neighbors_obs[j], s2.neighbors_obs[j]) < 1e-12);
  }
}

TEST_CASE("normalize_scene is invariant to rigid motion") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    Window w = random_window(rng, 4);
    const double a = std::numbers::pi * u(rng);
    const Point shift{800 * u(rng), 800 * u(rng)};
    Window g = w;
    for (auto& p : g.target) p = rigid(p, a, shift);
    for (auto& nb : g.neighbors)
      for (auto& o : nb.obs) o = rigid(*o, a, shift);
    Scene s = normalize_scene(w, 8);
    Scene sg = normalize_scene(g, 8);
    CHECK(max_diff(s.target_obs, sg.target_obs) < 1e-9);
    CHECK(max_diff(s.target_future, sg.target_future) < 1e-9);
    for (std::size_t j = 0; j < s.neighbors_obs.size(); ++j) CHECK(max_diff(s.neighbors_obs[j], sg.neighbors_obs[j]) < 1e-9);
    validate_scene(s, {});
  }
}

TEST_CASE("denormalize round trip") {
  NormTransform id;
  Trajectory y{{1.5, -2}, {3, 4}};
  CHECK(denormalize_prediction(y, id) == y);

  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    Window w = random_window(rng, 0);
    Scene s = normalize_scene(w, 8);
    Trajectory future(w.target.begin() + 8, w.target.end());
    worst = std::max(worst, max_diff(denormalize_prediction(s.target_future, s.norm), future));
    Trajectory obs(w.target.begin(), w.target.begin() + 8);
    worst = std::max(worst, max_diff(denormalize_prediction(s.target_obs, s.norm), obs));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("select_neighbors threshold examples") {
  Window w;
  for (int t = 0; t < 20; ++t) w.target.push_back({t * 1.0, 0.0});
  NeighborTrack near, far;
  near.vehicle_id = 2;
  far.vehicle_id = 3;
  for (int t = 0; t < 8; ++t) {
    near.obs.push_back(Point{t * 1.0, 10.0});
    far.obs.push_back(Point{t * 1.0, -40.0});
  }
  w.neighbors = {near};
  auto one = select_neighbors(w, 8, 30.0);
  CHECK(one.distances[0] == doctest::Approx(10.0));
  CHECK(one.window.neighbors.size() == 1);

  w.neighbors = {near, far};
  auto two = select_neighbors(w, 8, 30.0);
  REQUIRE(two.window.neighbors.size() == 1);
  CHECK(two.window.neighbors[0].vehicle_id == 2);
  CHECK(two.retained == std::vector<std::size_t>{0});
}

TEST_CASE("select_neighbors partial tracks") {
  Window w;
  for (int t = 0; t < 20; ++t) w.target.push_back({t * 1.0, 0.0});
  NeighborTrack sparse, gappy;
  sparse.vehicle_id = 2;
  gappy.vehicle_id = 3;
  sparse.obs.resize(8);
  gappy.obs.resize(8);
  for (int t = 0; t < 3; ++t) sparse.obs[t] = Point{t * 1.0, 5.0};
  for (int t : {0, 1, 4, 5, 7}) gappy.obs[t] = Point{t * 1.0, 5.0};
  w.neighbors = {sparse, gappy};
  auto sel = select_neighbors(w, 8, 30.0);
  CHECK(std::isnan(sel.distances[0]));
  REQUIRE(sel.window.neighbors.size() == 1);
  const auto& filled = sel.window.neighbors[0].obs;
  CHECK(filled[2]->x == 1.0);
  CHECK(filled[3]->x == 4.0);
  CHECK(filled[6]->x == 5.0);  // tie between 5 and 7: earlier wins
}

TEST_CASE("select_neighbors agrees with brute force") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed + 1000);
    Window w = random_window(rng, 6, 50.0);
    auto sel = select_neighbors(w, 8, 30.0);
    std::vector<std::size_t> expect;
    for (std::size_t j = 0; j < w.neighbors.size(); ++j) {
      double d = 0.0;
      for (int t = 0; t < 8; ++t) {
        const double dx = w.neighbors[j].obs[t]->x - w.target[t].x;
        const double dy = w.neighbors[j].obs[t]->y - w.target[t].y;
        d += std::sqrt(dx * dx + dy * dy);
      }
      d /= 8.0;
      CHECK(sel.distances[j] == doctest::Approx(d).epsilon(1e-12));
      if (d < 30.0) expect.push_back(j);
    }
    CHECK(sel.retained == expect);
  }
}

TEST_CASE("social mask and padding") {
  auto m = social_mask_matrix(1, 3);
  int ones = 0;
  for (const auto& row : m)
    for (auto v : row) ones += v;
  CHECK(ones == 1);
  CHECK(m[0][0] == 1);

  auto z = social_mask_matrix(0, 2);
  for (const auto& row : z)
    for (auto v : row) CHECK(v == 0);
  CHECK_THROWS_AS(social_mask_matrix(3, 2), gcf::ContractError);

  std::vector<Scene> batch{scene_at(0, 1), scene_at(1, 3)};
  CHECK(pad_batch(batch) == 3);
  CHECK(batch[0].n_slots() == 3);
  CHECK(batch[0].neighbor_valid == std::vector<std::uint8_t>{1, 0, 0});
  for (const auto& p : batch[0].neighbors_obs[2]) CHECK(p == Point{});
  validate_scene(batch[0], {});
  validate_scene(batch[1], {});

  batch[0].neighbors_obs[1][0].x = 1.0;
  CHECK_THROWS_AS(validate_scene(batch[0], {}), gcf::DataError);
}

TEST_CASE("temporal split") {
  std::vector<Scene> ten;
  for (int i = 0; i < 10; ++i) ten.push_back(scene_at(9 - i));
  auto s = temporal_split(ten);
  CHECK(s.train.size() == 8);
  CHECK(s.test.size() == 2);
  CHECK(s.train.front().start_time == 7.0);  // input order kept
  for (const auto& t : s.test) CHECK(t.start_time >= 8.0);

  std::vector<Scene> same(7, scene_at(3.2));
  auto all = temporal_split(same);
  CHECK(all.train.size() == 7);
  CHECK(all.test.empty());

  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> frame(0, 5000);
  std::vector<Scene> many;
  std::vector<double> times;
  for (int i = 0; i < 1000; ++i) {
    many.push_back(scene_at(frame(rng) / 10.0));
    times.push_back(many.back().start_time);
  }
  std::sort(times.begin(), times.end());
  const double oracle = times[799];
  CHECK(split_boundary(many, 0.8) == oracle);
  auto sp = temporal_split(many);
  for (const auto& t : sp.train) CHECK(t.start_time <= oracle);
  for (const auto& t : sp.test) CHECK(t.start_time > oracle);
  CHECK(sp.train.size() + sp.test.size() == 1000);
}

TEST_CASE("scale augmentation") {
  Scene s = scene_at(0, 1);
  s.target_obs[0] = {2, 0};
  s.target_future.assign(12, Point{1, 1});
  CHECK(scale_scene(s, 1.0).target_obs == s.target_obs);
  Scene big = scale_scene(s, 1.05);
  CHECK(big.target_obs[0].x == doctest::Approx(2.1));
  CHECK(big.target_obs[0].y == 0.0);

  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    Scene a = scale_augment(s, rng);
    CHECK(a.target_obs.back() == Point{0, 0});
    const double f = a.target_obs[0].x / 2.0;
    CHECK(f >= 0.95);
    CHECK(f <= 1.05);
    CHECK(a.target_future[3].x == doctest::Approx(f));
    CHECK(a.neighbors_obs[0][0].y == doctest::Approx(2.0 * f));
  }
}

TEST_CASE("generator determinism") {
  GeneratorConfig c;
  c.n_scenes = 30;
  auto write = [&](std::uint64_t seed) {
    std::ostringstream out;
    write_records(out, generate_synthetic(c, seed).records);
    return out.str();
  };
  CHECK(write(4) == write(4));
  CHECK(write(4) != write(5));
}

TEST_CASE("generator targets admit exactly one window") {
  GeneratorConfig c;
  c.n_scenes = 40;
  auto data = generate_synthetic(c, 9);
  std::ostringstream out;
  write_records(out, data.records);
  std::istringstream in(out.str());
  auto ws = build_windows(parse_records(in));
  REQUIRE(ws.size() == 40);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    CHECK(ws[i].target_id == data.scenes[i].target_id);
    CHECK(ws[i].neighbors.size() == static_cast<std::size_t>(data.scenes[i].n_neighbors));
  }
}

TEST_CASE("generator straight scenes are collinear") {
  GeneratorConfig c;
  c.scenario_mix = {1.0, 0.0, 0.0};
  c.noise_sigma = 0.0;
  c.n_scenes = 10;
  auto data = generate_synthetic(c, 2);
  std::map<std::int64_t, std::vector<RawRecord>> by_id;
  for (const auto& r : data.records) by_id[r.vehicle_id].push_back(r);
  for (const auto& [id, rs] : by_id) {
    const double dx = rs.back().x - rs.front().x, dy = rs.back().y - rs.front().y;
    const double len = std::hypot(dx, dy);
    for (const auto& r : rs) {
      const double off = ((r.x - rs.front().x) * dy - (r.y - rs.front().y) * dx) / len;
      CHECK(std::abs(off) < 1e-9);
    }
  }
}

TEST_CASE("generator arc radius") {
  GeneratorConfig c;
  c.scenario_mix = {0.0, 0.0, 1.0};
  c.noise_sigma = 0.0;
  c.arc_radius_min = c.arc_radius_max = 50.0;
  c.neighbor_min = c.neighbor_max = 0;
  c.n_scenes = 10;
  auto data = generate_synthetic(c, 8);
  for (std::size_t i = 0; i < data.scenes.size(); ++i) {
    const auto& sc = data.scenes[i];
    CHECK(sc.kind == Scenario::RampArc);
    for (const auto& r : data.records) {
      if (r.vehicle_id != sc.target_id) continue;
      CHECK(std::abs(std::hypot(r.x - sc.arc_center.x, r.y - sc.arc_center.y) - 50.0) < 1e-6);
    }
  }
}

TEST_CASE("generator lane change moves one lane") {
  GeneratorConfig c;
  c.scenario_mix = {0.0, 1.0, 0.0};
  c.noise_sigma = 0.0;
  c.n_scenes = 5;
  auto data = generate_synthetic(c, 3);
  for (const auto& sc : data.scenes) {
    const Point n{-std::sin(sc.heading), std::cos(sc.heading)};
    double lo = 1e9, hi = -1e9;
    for (const auto& r : data.records) {
      if (r.vehicle_id != sc.target_id) continue;
      const double lat = (r.x - sc.origin.x) * n.x + (r.y - sc.origin.y) * n.y;
      lo = std::min(lo, lat * sc.side);
      hi = std::max(hi, lat * sc.side);
    }
    CHECK(lo >= -1e-9);
    CHECK(hi <= c.lane_width + 1e-9);
  }
}

TEST_CASE("generator config validation") {
  CHECK_THROWS_AS(generator_config_from_json(nlohmann::json::array()), gcf::ConfigError);
  CHECK_THROWS_AS(generator_config_from_json({{"noise_sigma", 0.5}}), gcf::ConfigError);
  CHECK_THROWS_AS(generator_config_from_json({{"scenario_mix", {{"spiral", 1.0}}}}), gcf::ConfigError);
  CHECK_THROWS_AS(generator_config_from_json({{"speed_range", {20.0, 10.0}}}), gcf::ConfigError);
  CHECK_THROWS_AS(generator_config_from_json({{"n_scenes", 0}}), gcf::ConfigError);
  auto c = generator_config_from_json({{"n_scenes", 7}, {"neighbor_range", {1, 2}}, {"seed", 3}});
  CHECK(c.n_scenes == 7);
  CHECK(c.neighbor_min == 1);
  CHECK(c.seed == 3);
  auto back = generator_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
}

TEST_CASE("scene archive round trip") {
  std::mt19937_64 rng(21);
  std::vector<Scene> scenes;
  for (int k = 0; k < 5; ++k) {
    auto sel = select_neighbors(random_window(rng, 3), 8);
    scenes.push_back(normalize_scene(sel.window, 8));
  }
  pad_batch(scenes);
  std::stringstream io;
  write_archive(io, scenes, {});
  auto back = read_archive(io, {});
  REQUIRE(back.size() == scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    CHECK(back[i].target_obs == scenes[i].target_obs);
    CHECK(back[i].target_future == scenes[i].target_future);
    CHECK(back[i].neighbors_obs == scenes[i].neighbors_obs);
    CHECK(back[i].neighbor_valid == scenes[i].neighbor_valid);
    CHECK(back[i].norm.theta == scenes[i].norm.theta);
  }
  std::istringstream bad("{\"start_time\": 1}\n");
  CHECK_THROWS_AS(read_archive(bad, {}), gcf::FormatError);
}
