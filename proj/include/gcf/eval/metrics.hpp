#pragma once

#include <map>
#include <vector>

#include "gcf/model/model.hpp"
#include "json.hpp"

namespace gcf::eval {

using data::Point;
using data::Scene;
using data::Trajectory;

// Time-mean and final-step Euclidean error of one candidate.
double ade(const Trajectory& pred, const Trajectory& gt);
double fde(const Trajectory& pred, const Trajectory& gt);

// Minimum over candidates. Empty candidate sets raise ContractError, length
// mismatches ShapeError.
double min_ade(const std::vector<Trajectory>& preds, const Trajectory& gt);
double min_fde(const std::vector<Trajectory>& preds, const Trajectory& gt);

// Fraction of samples with minFDE > delta.
double miss_rate(const std::vector<double>& min_fde, double delta);
// Mean of the worst ceil(tail * N) values.
double cvar(const std::vector<double>& values, double tail = 0.2);

struct SampleRecord {
  std::size_t scene = 0;
  double min_ade = 0.0;
  double min_fde = 0.0;
  Point obs_end;  // world frame
  Point gt_end;   // world frame
};

struct MetricsReport {
  double min_ade = 0.0;
  double min_fde = 0.0;
  std::map<double, double> mr;
  double cvar = 0.0;
  double cvar_tail = 0.2;
  std::size_t n_samples = 0;
  std::vector<SampleRecord> per_sample;
};

// Aggregates per-sample records in order.
MetricsReport aggregate(std::vector<SampleRecord> samples, const std::vector<double>& thresholds, double tail);

// Scores given candidate sets (normalized frame, one set per scene).
MetricsReport evaluate_predictions(const std::vector<std::vector<Trajectory>>& preds, const std::vector<Scene>& scenes,
                                   const model::EvalConfig& cfg);

// Runs inference on every scene (in parallel, reduced in scene order).
MetricsReport evaluate(const num::ParamSet& params, const model::ModelConfig& m, const std::vector<Scene>& scenes,
                       const modes::MotionModeBank& bank, std::size_t k_top, const model::EvalConfig& cfg);

nlohmann::json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);

}  // namespace gcf::eval
