#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcf/data/scene.hpp"
#include "gcf/numerics/tensor.hpp"
#include "json.hpp"

namespace gcf::modes {

using data::Trajectory;
using num::Tensor;

struct MotionModeBank {
  std::size_t k = 0;
  int t_pre = 0;
  std::vector<Trajectory> modes;  // k trajectories of t_pre points
  std::uint64_t seed = 0;
  int iterations = 0;
  double objective = 0.0;
  double initial_objective = 0.0;

  // k x 2*t_pre, rows interleaved [x1, y1, x2, y2, ...].
  Tensor flat() const;
};

// [(x1,y1),(x2,y2),...] -> [x1,y1,x2,y2,...]. Throws ShapeError unless the
// trajectory has t_pre points.
std::vector<double> flatten_future(const Trajectory& traj, int t_pre);
Trajectory unflatten_future(const double* v, int t_pre);

struct KMeansOptions {
  int max_iter = 100;
  double tol = 1e-6;
  int restarts = 10;
};

struct KMeansResult {
  Tensor centroids;  // K x D
  std::vector<std::size_t> assignment;
  double objective = 0.0;
  double initial_objective = 0.0;
  int iterations = 0;
  std::size_t best_restart = 0;
  std::vector<double> restart_objectives;
  std::vector<double> history;  // objective after every half-step of the best restart
};

// Within-cluster sum of squared distances.
double kmeans_objective(const Tensor& features, const Tensor& centroids, const std::vector<std::size_t>& assignment);

// One Lloyd run from a k-means++ seeding drawn with `seed`. Throws
// NumericError if the objective ever increases.
KMeansResult kmeans_single(const Tensor& features, std::size_t k, std::uint64_t seed, const KMeansOptions& opts = {});

// Best of opts.restarts seeded runs (lowest objective, ties to the lowest
// restart index). Restarts run in parallel; the result does not depend on
// the thread count. Throws ConfigError if M < K.
KMeansResult kmeans_fit(const Tensor& features, std::size_t k, std::uint64_t seed, const KMeansOptions& opts = {});

// Clusters the normalized futures of `train`.
MotionModeBank modes_from_training(const std::vector<data::Scene>& train, std::size_t k, std::uint64_t seed,
                                   const KMeansOptions& opts = {});

nlohmann::json bank_to_json(const MotionModeBank& bank);
MotionModeBank bank_from_json(const nlohmann::json& j);
void validate_bank(const MotionModeBank& bank);
void save_bank(const MotionModeBank& bank, const std::string& path);
MotionModeBank load_bank(const std::string& path);

}  // namespace gcf::modes
