#include "gcf/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "gcf/errors.hpp"
#include "gcf/numerics/kernels.hpp"

namespace gcf::eval {

namespace {

double dist(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

void check_pair(const Trajectory& pred, const Trajectory& gt) {
  if (gt.empty()) throw ContractError("empty ground truth");
  if (pred.size() != gt.size()) {
    throw ShapeError("prediction has " + std::to_string(pred.size()) + " steps, ground truth " +
                     std::to_string(gt.size()));
  }
}

template <class F>
double min_over(const std::vector<Trajectory>& preds, const Trajectory& gt, F f) {
  if (preds.empty()) throw ContractError("empty prediction set");
  double best = f(preds[0], gt);
  for (std::size_t i = 1; i < preds.size(); ++i) best = std::min(best, f(preds[i], gt));
  return best;
}

std::string threshold_key(double t) { return nlohmann::json(t).dump(); }

SampleRecord score_scene(const std::vector<Trajectory>& preds, const Scene& s, std::size_t index) {
  if (!s.has_future()) throw DataError("test scene " + std::to_string(index) + " has no future");
  SampleRecord r;
  r.scene = index;
  r.min_ade = min_ade(preds, s.target_future);
  r.min_fde = min_fde(preds, s.target_future);
  r.obs_end = s.norm.translation;
  r.gt_end = s.norm.invert(s.target_future.back());
  return r;
}

}  // namespace

double ade(const Trajectory& pred, const Trajectory& gt) {
  check_pair(pred, gt);
  double s = 0.0;
  for (std::size_t t = 0; t < gt.size(); ++t) s += dist(pred[t], gt[t]);
  return s / static_cast<double>(gt.size());
}

double fde(const Trajectory& pred, const Trajectory& gt) {
  check_pair(pred, gt);
  return dist(pred.back(), gt.back());
}

double min_ade(const std::vector<Trajectory>& preds, const Trajectory& gt) { return min_over(preds, gt, ade); }

double min_fde(const std::vector<Trajectory>& preds, const Trajectory& gt) { return min_over(preds, gt, fde); }

double miss_rate(const std::vector<double>& min_fde, double delta) {
  if (min_fde.empty()) throw ContractError("miss rate of an empty sample set");
  if (!(delta > 0)) throw ContractError("miss threshold must be positive");
  std::size_t miss = 0;
  for (double v : min_fde) miss += v > delta ? 1 : 0;
  return static_cast<double>(miss) / static_cast<double>(min_fde.size());
}

double cvar(const std::vector<double>& values, double tail) {
  if (values.empty()) throw ContractError("CVaR of an empty sample set");
  if (!(tail > 0 && tail <= 1)) throw ContractError("CVaR tail must lie in (0, 1]");
  std::vector<double> v(values);
  std::sort(v.begin(), v.end(), std::greater<>());
  const auto n = static_cast<std::size_t>(std::ceil(tail * static_cast<double>(v.size()) - 1e-12));
  const std::size_t take = std::clamp<std::size_t>(n, 1, v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < take; ++i) s += v[i];
  return s / static_cast<double>(take);
}

MetricsReport aggregate(std::vector<SampleRecord> samples, const std::vector<double>& thresholds, double tail) {
  if (samples.empty()) throw ContractError("no samples to aggregate");
  MetricsReport r;
  r.n_samples = samples.size();
  r.cvar_tail = tail;
  std::vector<double> fdes;
  for (const auto& s : samples) {
    r.min_ade += s.min_ade;
    r.min_fde += s.min_fde;
    fdes.push_back(s.min_fde);
  }
  r.min_ade /= static_cast<double>(samples.size());
  r.min_fde /= static_cast<double>(samples.size());
  for (double t : thresholds) r.mr[t] = miss_rate(fdes, t);
  r.cvar = cvar(fdes, tail);
  r.per_sample = std::move(samples);
  return r;
}

MetricsReport evaluate_predictions(const std::vector<std::vector<Trajectory>>& preds, const std::vector<Scene>& scenes,
                                   const model::EvalConfig& cfg) {
  if (preds.size() != scenes.size()) throw ShapeError("one prediction set per scene is required");
  std::vector<SampleRecord> samples;
  for (std::size_t i = 0; i < scenes.size(); ++i) samples.push_back(score_scene(preds[i], scenes[i], i));
  return aggregate(std::move(samples), cfg.mr_thresholds, cfg.cvar_tail);
}

MetricsReport evaluate(const num::ParamSet& params, const model::ModelConfig& m, const std::vector<Scene>& scenes,
                       const modes::MotionModeBank& bank, std::size_t k_top, const model::EvalConfig& cfg) {
  if (scenes.empty()) throw DataError("no test scenes");
  std::vector<SampleRecord> samples(scenes.size());
  std::vector<std::exception_ptr> errors(scenes.size());
  const auto n = static_cast<std::ptrdiff_t>(scenes.size());
#pragma omp parallel for schedule(dynamic) if (num::kernels::threads() > 1)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      const model::PredictionSet p = model::infer(params, m, scenes[i], bank, k_top);
      samples[i] = score_scene(p.normalized, scenes[i], i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return aggregate(std::move(samples), cfg.mr_thresholds, cfg.cvar_tail);
}

nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json mr = nlohmann::json::object();
  for (const auto& [t, v] : r.mr) mr[threshold_key(t)] = v;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& s : r.per_sample) {
    per.push_back({{"scene", s.scene},
                   {"min_ade", s.min_ade},
                   {"min_fde", s.min_fde},
                   {"obs_end", {s.obs_end.x, s.obs_end.y}},
                   {"gt_end", {s.gt_end.x, s.gt_end.y}}});
  }
  return {{"min_ade", r.min_ade}, {"min_fde", r.min_fde},     {"mr", mr},
          {"cvar", r.cvar},       {"cvar_tail", r.cvar_tail}, {"n_samples", r.n_samples},
          {"per_sample", per}};
}

MetricsReport report_from_json(const nlohmann::json& j) {
  try {
    MetricsReport r;
    r.min_ade = j.at("min_ade").get<double>();
    r.min_fde = j.at("min_fde").get<double>();
    for (const auto& [k, v] : j.at("mr").items()) r.mr[std::stod(k)] = v.get<double>();
    r.cvar = j.at("cvar").get<double>();
    r.cvar_tail = j.at("cvar_tail").get<double>();
    r.n_samples = j.at("n_samples").get<std::size_t>();
    for (const auto& s : j.at("per_sample")) {
      SampleRecord rec;
      rec.scene = s.at("scene").get<std::size_t>();
      rec.min_ade = s.at("min_ade").get<double>();
      rec.min_fde = s.at("min_fde").get<double>();
      rec.obs_end = {s.at("obs_end").at(0).get<double>(), s.at("obs_end").at(1).get<double>()};
      rec.gt_end = {s.at("gt_end").at(0).get<double>(), s.at("gt_end").at(1).get<double>()};
      r.per_sample.push_back(rec);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed metrics report: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw FormatError("malformed miss-rate threshold key");
  }
}

}  // namespace gcf::eval
