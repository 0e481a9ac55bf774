#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "gcf/errors.hpp"
#include "gcf/eval/field.hpp"
#include "gcf/eval/metrics.hpp"
#include "gcf/eval/trace.hpp"
#include "gcf/numerics/kernels.hpp"

using namespace gcf;
using namespace gcf::eval;
using model::ModelConfig;
using num::Tensor;

namespace {

Trajectory random_traj(std::mt19937_64& rng, std::size_t n, double spread) {
  std::normal_distribution<double> d(0.0, spread);
  Trajectory t(n);
  for (auto& p : t) p = {d(rng), d(rng)};
  return t;
}

Trajectory shifted(const Trajectory& t, double dx, double dy) {
  Trajectory out(t);
  for (auto& p : out) p = {p.x + dx, p.y + dy};
  return out;
}

// Straightforward references written independently of the library.
double ref_min_ade(const std::vector<Trajectory>& preds, const Trajectory& gt) {
  double best = INFINITY;
  for (const auto& p : preds) {
    double s = 0.0;
    for (std::size_t t = 0; t < gt.size(); ++t) s += std::sqrt(std::pow(p[t].x - gt[t].x, 2) + std::pow(p[t].y - gt[t].y, 2));
    best = std::min(best, s / static_cast<double>(gt.size()));
  }
  return best;
}

double ref_min_fde(const std::vector<Trajectory>& preds, const Trajectory& gt) {
  double best = INFINITY;
  for (const auto& p : preds)
    best = std::min(best, std::sqrt(std::pow(p.back().x - gt.back().x, 2) + std::pow(p.back().y - gt.back().y, 2)));
  return best;
}

double ref_cvar_fifth(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = (v.size() + 4) / 5;  // ceil(N / 5)
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += v[v.size() - 1 - i];
  return s / static_cast<double>(n);
}

Scene scene_with(const Trajectory& obs, const Trajectory& future, std::size_t n_valid, std::size_t n_slots,
                 std::mt19937_64& rng) {
  Scene s;
  s.target_obs = obs;
  s.target_future = future;
  for (std::size_t i = 0; i < n_slots; ++i) {
    s.neighbors_obs.push_back(i < n_valid ? random_traj(rng, obs.size(), 5.0) : Trajectory(obs.size()));
    s.neighbor_valid.push_back(i < n_valid ? 1 : 0);
  }
  return s;
}

modes::MotionModeBank random_bank(std::size_t k, std::mt19937_64& rng) {
  modes::MotionModeBank b;
  b.k = k;
  b.t_pre = 12;
  for (std::size_t i = 0; i < k; ++i) b.modes.push_back(random_traj(rng, 12, 5.0));
  return b;
}

ModelConfig small_config() {
  ModelConfig m;
  m.d_model = 16;
  m.heads = 2;
  m.k = 6;
  m.k_top = 3;
  return m;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("gcf_eval_" + name)).string();
}

}  // namespace

TEST_CASE("min ADE and min FDE examples") {
  std::mt19937_64 rng(1);
  const Trajectory gt = random_traj(rng, 12, 3.0);
  CHECK(min_ade({random_traj(rng, 12, 3.0), gt}, gt) == 0.0);
  CHECK(min_ade({shifted(gt, 3.0, 0.0), shifted(gt, 0.0, 1.0)}, gt) == doctest::Approx(1.0).epsilon(1e-15));
  Trajectory end_exact = random_traj(rng, 12, 3.0);
  end_exact.back() = gt.back();
  CHECK(min_fde({random_traj(rng, 12, 3.0), end_exact}, gt) == 0.0);
  CHECK(min_fde({shifted(gt, 2.0, 0.0), shifted(gt, 0.0, -0.5)}, gt) == 0.5);

  // Candidate a is close everywhere but misses the end; b is far except at the end.
  Trajectory a = shifted(gt, 0.2, 0.0), b = shifted(gt, 3.0, 0.0);
  a.back() = {gt.back().x + 1.0, gt.back().y};
  b.back() = gt.back();
  const std::vector<Trajectory> ab{a, b};
  CHECK(min_ade(ab, gt) == doctest::Approx(ade(a, gt)));
  CHECK(min_fde(ab, gt) == 0.0);
  CHECK(ade(a, gt) < ade(b, gt));
  CHECK(fde(b, gt) < fde(a, gt));

  CHECK_THROWS_AS(min_ade({}, gt), ContractError);
  CHECK_THROWS_AS(min_fde({}, gt), ContractError);
  CHECK_THROWS_AS(min_ade({random_traj(rng, 11, 1.0)}, gt), ShapeError);
}

TEST_CASE("miss rate and CVaR examples") {
  CHECK(miss_rate({1.5, 2.5, 3.5}, 2.0) == 2.0 / 3.0);
  CHECK(miss_rate({0.5, 1.0, 1.9}, 2.0) == 0.0);
  CHECK(miss_rate({2.0}, 2.0) == 0.0);
  CHECK_THROWS_AS(miss_rate({}, 2.0), ContractError);
  CHECK_THROWS_AS(miss_rate({1.0}, 0.0), ContractError);

  std::vector<double> v;
  for (int i = 1; i <= 10; ++i) v.push_back(i);
  CHECK(cvar(v) == 9.5);
  CHECK(cvar({4.25, 4.25, 4.25}) == 4.25);
  CHECK(cvar({7.0}) == 7.0);
  CHECK_THROWS_AS(cvar({}), ContractError);
  CHECK_THROWS_AS(cvar({1.0}, 0.0), ContractError);
}

TEST_CASE("metrics match brute-force references on 1000 draws") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> nk(1, 20), ns(1, 40);
  for (int draw = 0; draw < 1000; ++draw) {
    const int n_samples = ns(rng);
    std::vector<double> fdes, ades;
    for (int s = 0; s < n_samples; ++s) {
      const Trajectory gt = random_traj(rng, 12, 10.0);
      std::vector<Trajectory> preds;
      const int k = nk(rng);
      for (int i = 0; i < k; ++i) preds.push_back(shifted(random_traj(rng, 12, 1.5), gt.back().x, gt.back().y));
      const double a = min_ade(preds, gt), f = min_fde(preds, gt);
      CHECK(std::abs(a - ref_min_ade(preds, gt)) < 1e-12);
      CHECK(std::abs(f - ref_min_fde(preds, gt)) < 1e-12);
      ades.push_back(a);
      fdes.push_back(f);
    }
    std::size_t m2 = 0, m3 = 0;
    double mean = 0.0;
    for (double f : fdes) {
      m2 += f > 2.0;
      m3 += f > 3.0;
      mean += f;
    }
    mean /= static_cast<double>(fdes.size());
    const double mr2 = miss_rate(fdes, 2.0), mr3 = miss_rate(fdes, 3.0);
    CHECK(std::abs(mr2 - static_cast<double>(m2) / n_samples) < 1e-12);
    CHECK(std::abs(mr3 - static_cast<double>(m3) / n_samples) < 1e-12);
    CHECK(mr2 >= mr3);
    const double c = cvar(fdes, 0.2);
    CHECK(std::abs(c - ref_cvar_fifth(fdes)) < 1e-12);
    CHECK(c >= mean - 1e-12);
    // a wider tail admits smaller values
    CHECK(cvar(fdes, 0.5) <= c + 1e-12);
    CHECK(cvar(fdes, 1.0) == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("evaluate on an oracle predictor and aggregation recomputation") {
  std::mt19937_64 rng(3);
  std::vector<Scene> scenes;
  std::vector<std::vector<Trajectory>> preds;
  for (int i = 0; i < 20; ++i) {
    scenes.push_back(scene_with(random_traj(rng, 8, 5.0), random_traj(rng, 12, 5.0), 0, 0, rng));
    scenes.back().norm = {{static_cast<double>(i), 2.0}, 0.3 * i, false};
    preds.push_back({random_traj(rng, 12, 5.0), scenes.back().target_future});
  }
  const model::EvalConfig cfg;
  const MetricsReport oracle = evaluate_predictions(preds, scenes, cfg);
  CHECK(oracle.min_ade == 0.0);
  CHECK(oracle.min_fde == 0.0);
  CHECK(oracle.cvar == 0.0);
  for (const auto& [t, v] : oracle.mr) CHECK(v == 0.0);
  CHECK(oracle.mr.size() == 2);

  for (auto& p : preds) p.pop_back();
  const MetricsReport r = evaluate_predictions(preds, scenes, cfg);
  REQUIRE(r.per_sample.size() == 20);
  double sa = 0.0, sf = 0.0;
  std::vector<double> f;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& s = r.per_sample[i];
    CHECK(s.scene == i);
    CHECK(std::abs(s.min_ade - ref_min_ade(preds[i], scenes[i].target_future)) < 1e-12);
    CHECK(s.obs_end == scenes[i].norm.translation);
    const Point g = scenes[i].norm.invert(scenes[i].target_future.back());
    CHECK(s.gt_end == g);
    sa += s.min_ade;
    sf += s.min_fde;
    f.push_back(s.min_fde);
  }
  CHECK(std::abs(r.min_ade - sa / 20) < 1e-12);
  CHECK(std::abs(r.min_fde - sf / 20) < 1e-12);
  CHECK(std::abs(r.cvar - ref_cvar_fifth(f)) < 1e-12);
  CHECK(r.mr.at(2.0) >= r.mr.at(3.0));

  const MetricsReport back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
  CHECK(back.min_ade == r.min_ade);
  CHECK(back.mr == r.mr);
  CHECK(back.per_sample.size() == 20);
  CHECK(back.per_sample[7].gt_end == r.per_sample[7].gt_end);
  CHECK(report_to_json(r).at("mr").contains("2.0"));

  CHECK_THROWS_AS(evaluate_predictions({}, scenes, cfg), ShapeError);
  scenes[3].target_future.clear();
  preds.resize(20);
  CHECK_THROWS_AS(evaluate_predictions(preds, scenes, cfg), DataError);
}

TEST_CASE("evaluate runs inference deterministically across thread counts") {
  const ModelConfig m = small_config();
  std::mt19937_64 rng(4);
  const auto params = model::init_params(m, {}, 9);
  const auto bank = random_bank(6, rng);
  std::vector<Scene> scenes;
  for (int i = 0; i < 9; ++i)
    scenes.push_back(scene_with(random_traj(rng, 8, 5.0), random_traj(rng, 12, 5.0), static_cast<std::size_t>(i % 3), 3, rng));
  const model::EvalConfig cfg;
  num::kernels::set_threads(1);
  const MetricsReport a = evaluate(params, m, scenes, bank, 3, cfg);
  num::kernels::set_threads(4);
  const MetricsReport b = evaluate(params, m, scenes, bank, 3, cfg);
  num::kernels::set_threads(1);
  CHECK(report_to_json(a).dump() == report_to_json(b).dump());
  const auto p = model::infer(params, m, scenes[5], bank, 3);
  CHECK(a.per_sample[5].min_ade == min_ade(p.normalized, scenes[5].target_future));
  CHECK_THROWS_AS(evaluate(params, m, {}, bank, 3, cfg), DataError);
  CHECK_THROWS_AS(evaluate(params, m, scenes, bank, 7, cfg), ConfigError);
}

TEST_CASE("spatial field single kernel and zero field") {
  GridSpec g{-5.0, -5.0, 1.0, 10, 10};
  const ErrorField one = spatial_error_field({1.0}, {{0.5, 0.5}}, g, 2.0);
  // Cell (5, 5) is centered on the anchor.
  REQUIRE(one.values[5 * 10 + 5].has_value());
  CHECK(*one.values[5 * 10 + 5] == 1.0);
  for (const auto& v : one.values)
    if (v) CHECK(std::abs(*v - 1.0) < 1e-15);

  const ErrorField zero = spatial_error_field({0.0, 0.0, 0.0}, {{0, 0}, {2, 1}, {-3, 3}}, g, 1.5);
  for (const auto& v : zero.values)
    if (v) CHECK(*v == 0.0);

  // Far cells have no anchor within 3 sigma.
  const ErrorField far = spatial_error_field({1.0}, {{0.5, 0.5}}, GridSpec{-50, -50, 1.0, 100, 100}, 1.0);
  CHECK_FALSE(far.values[0].has_value());
  CHECK(far.values[50 * 100 + 50].has_value());
  std::size_t non_null = 0;
  for (const auto& v : far.values) non_null += v.has_value();
  // centers within radius 3 of (0.5, 0.5): 29 lattice offsets with |d|^2 <= 9
  CHECK(non_null == 29);
}

TEST_CASE("spatial field matches a hand-evaluated kernel sum") {
  // 3 x 3 grid of unit cells centered on (0,0)..(2,2), sigma = 1.
  GridSpec g{-0.5, -0.5, 1.0, 3, 3};
  const std::vector<Point> anchors{{0.0, 0.0}, {2.0, 1.0}};
  const std::vector<double> d{1.0, 3.0};
  const ErrorField f = spatial_error_field(d, anchors, g, 1.0);
  for (std::size_t ix = 0; ix < 3; ++ix) {
    for (std::size_t iy = 0; iy < 3; ++iy) {
      const double x = static_cast<double>(ix), y = static_cast<double>(iy);
      const double w0 = std::exp(-(x * x + y * y) / 2.0);
      const double w1 = std::exp(-((x - 2) * (x - 2) + (y - 1) * (y - 1)) / 2.0);
      REQUIRE(f.values[ix * 3 + iy].has_value());
      CHECK(std::abs(*f.values[ix * 3 + iy] - (w0 * 1.0 + w1 * 3.0) / (w0 + w1)) < 1e-12);
    }
  }
  // cell (0,0): w0 = 1, w1 = e^{-2.5}
  CHECK(std::abs(*f.values[0] - (1.0 + 3.0 * std::exp(-2.5)) / (1.0 + std::exp(-2.5))) < 1e-12);

  const nlohmann::json j = field_to_json(f);
  CHECK(j.at("extent") == nlohmann::json({-0.5, 2.5, -0.5, 2.5}));
  CHECK(j.at("shape") == nlohmann::json({3, 3}));
  CHECK(j.at("sigma") == 1.0);
  CHECK(j.at("values").size() == 9);
  const ErrorField back = field_from_json(j);
  CHECK(back.values == f.values);
  CHECK(back.grid.cell == 1.0);

  CHECK_THROWS_AS(spatial_error_field({1.0}, {}, g, 1.0), ShapeError);
  CHECK_THROWS_AS(spatial_error_field({1.0}, {{0, 0}}, g, 0.0), ContractError);
  CHECK_THROWS_AS(field_from_json({{"extent", {0, 1, 0, 1}}, {"shape", {2, 2}}, {"sigma", 1.0}, {"values", {1.0}}}),
                  FormatError);
}

TEST_CASE("spatial field serial and parallel agree bitwise") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-40.0, 40.0), e(0.0, 5.0);
  std::vector<Point> anchors;
  std::vector<double> d;
  for (int i = 0; i < 300; ++i) {
    anchors.push_back({u(rng), u(rng)});
    d.push_back(e(rng));
  }
  const GridSpec g = grid_around(anchors, 2.0, 10.0);
  CHECK(g.x0 <= -50.0);
  CHECK(g.x0 + g.cell * static_cast<double>(g.nx) >= 50.0 - 1e-9);
  num::kernels::set_threads(4);
  const ErrorField par = spatial_error_field(d, anchors, g, 5.0);
  num::kernels::set_threads(1);
  const ErrorField ser = spatial_error_field_serial(d, anchors, g, 5.0);
  REQUIRE(par.values.size() == ser.values.size());
  for (std::size_t i = 0; i < par.values.size(); ++i) {
    REQUIRE(par.values[i].has_value() == ser.values[i].has_value());
    if (par.values[i]) CHECK(std::memcmp(&*par.values[i], &*ser.values[i], sizeof(double)) == 0);
  }
  CHECK_THROWS_AS(grid_around({}, 1.0, 0.0), ContractError);
}

TEST_CASE("attention trace export") {
  const ModelConfig m = small_config();
  std::mt19937_64 rng(6);
  auto params = model::init_params(m, {}, 10);
  const auto bank = random_bank(6, rng);

  Scene one = scene_with(random_traj(rng, 8, 5.0), {}, 1, 3, rng);
  const std::string path = temp_path("trace.json");
  export_attention_trace(params, m, one, bank, 3, path);
  std::ifstream in(path);
  const nlohmann::json j = nlohmann::json::parse(in);
  CHECK_NOTHROW(validate_attention_trace(j));
  CHECK(j.at("mode_count") == 6);
  CHECK(j.at("selected_modes").size() == 3);
  const auto& mae = j.at("mae").at("layers");
  CHECK(mae.size() == 2);
  for (const auto& layer : mae) {
    CHECK(layer.at("heads").size() == 2);
    CHECK(layer.at("heads")[0].at("alpha").size() == 6);
    // head average recomputed independently
    for (std::size_t k = 0; k < 6; ++k) {
      const double a0 = layer.at("heads")[0].at("alpha")[k], a1 = layer.at("heads")[1].at("alpha")[k];
      CHECK(std::abs(layer.at("mean").at("alpha")[k].get<double>() - (a0 + a1) / 2.0) < 1e-15);
    }
  }
  const auto& hid = j.at("hid").at("layers")[0];
  for (const auto& h : hid.at("heads")) {
    CHECK(h.at("beta") == nlohmann::json({1.0, 0.0, 0.0}));
    for (const auto& row : h.at("attn_std")) CHECK(row == nlohmann::json({1.0, 0.0, 0.0}));
  }
  CHECK(hid.at("gate").size() == 3);

  nlohmann::json bad = j;
  bad["mae"]["layers"][0]["mean"]["alpha"][0] = 0.9;
  CHECK_THROWS_AS(validate_attention_trace(bad), FormatError);
  bad = j;
  bad["hid"]["layers"][0]["heads"][0]["beta"][1] = 0.5;
  CHECK_THROWS_AS(validate_attention_trace(bad), FormatError);
  bad = j;
  bad["mae"]["layers"][1]["heads"][1]["weights"][2] = 2.0;
  CHECK_THROWS_AS(validate_attention_trace(bad), FormatError);

  Scene none = scene_with(random_traj(rng, 8, 5.0), {}, 0, 2, rng);
  export_attention_trace(params, m, none, bank, 2, path);
  std::ifstream in2(path);
  const nlohmann::json j2 = nlohmann::json::parse(in2);
  for (const auto& h : j2.at("hid").at("layers")[0].at("heads")) CHECK(h.at("beta") == nlohmann::json({0.0, 0.0}));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(export_attention_trace(params, m, one, bank, 3, "/nonexistent_dir/x.json"), IoError);
}
