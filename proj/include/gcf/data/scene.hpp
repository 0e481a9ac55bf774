#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "gcf/data/records.hpp"

namespace gcf::data {

using Trajectory = std::vector<Point>;

struct Horizons {
  int t_obs = 8;
  int t_pre = 12;
  double dt = 0.4;  // seconds between model steps

  // Number of 0.1 s source frames per model step.
  std::int64_t frame_stride() const;
  int total() const { return t_obs + t_pre; }
};

struct NeighborTrack {
  std::int64_t vehicle_id = 0;
  // One entry per observation step; empty where the vehicle was not seen.
  std::vector<std::optional<Point>> obs;
};

// A raw (world-frame) prediction window cut from a record stream.
struct Window {
  double start_time = 0.0;
  std::int64_t target_id = 0;
  Trajectory target;  // t_obs + t_pre points
  std::vector<NeighborTrack> neighbors;
};

// Rigid transform that moves the last observed target point to the origin
// and the first observed point onto the positive x-axis.
struct NormTransform {
  Point translation;   // last observed target position, world frame
  double theta = 0.0;  // heading of the translated first observation
  bool degenerate = false;

  Point apply(Point world) const;
  Point invert(Point normalized) const;
};

// One normalized prediction instance. Neighbor slots beyond the valid ones
// are zero-filled padding.
struct Scene {
  double start_time = 0.0;
  std::int64_t target_id = 0;
  Trajectory target_obs;
  Trajectory target_future;  // empty at pure inference
  std::vector<Trajectory> neighbors_obs;
  std::vector<std::uint8_t> neighbor_valid;
  NormTransform norm;

  std::size_t n_valid() const;
  std::size_t n_slots() const { return neighbors_obs.size(); }
  bool has_future() const { return !target_future.empty(); }
};

// Cuts one window per vehicle per start frame with `total()` consecutive
// decimated frames. Candidate neighbors are all other vehicles seen at least
// once during the observation steps.
std::vector<Window> build_windows(const std::vector<RawRecord>& records, const Horizons& h = {});

struct NeighborSelection {
  Window window;                  // only retained neighbors, gaps filled
  std::vector<double> distances;  // mean distance per candidate; NaN when dropped for sparsity
  std::vector<std::size_t> retained;  // indices into the input candidate list
};

// Keeps neighbors whose mean distance to the target over co-present
// observation steps is below `delta`. Candidates present in fewer than half
// of the observation steps are dropped. Missing steps of retained neighbors
// take the position of the nearest observed step.
NeighborSelection select_neighbors(const Window& window, int t_obs, double delta = 30.0);

// Binary N_max x N_max mask with entry 1 iff both indices are below n_valid.
std::vector<std::vector<std::uint8_t>> social_mask_matrix(std::size_t n_valid, std::size_t n_max);

// Translates by the last observed target point and rotates by -theta.
// Neighbor tracks must be gap-free (see select_neighbors).
Scene normalize_scene(const Window& window, int t_obs);

Trajectory denormalize_prediction(const Trajectory& pred, const NormTransform& norm);

// Zero-pads every scene's neighbor slots to the largest valid count in the
// batch and returns that count.
std::size_t pad_batch(std::vector<Scene>& scenes);

// Throws DataError if a scene breaks its shape, normalization or padding
// invariants.
void validate_scene(const Scene& scene, const Horizons& h);

struct Split {
  std::vector<Scene> train;
  std::vector<Scene> test;
};

// Scenes starting at or before the nearest-rank `ratio` percentile of start
// times go to train, the rest to test. Input order is preserved.
Split temporal_split(std::vector<Scene> scenes, double ratio = 0.8);
double split_boundary(const std::vector<Scene>& scenes, double ratio);

// build_windows, select_neighbors and normalize_scene over a record stream.
// Scenes are unpadded and ordered like the windows.
std::vector<Scene> scenes_from_records(const std::vector<RawRecord>& records, const Horizons& h = {},
                                       double delta = 30.0);

// Multiplies every normalized coordinate by `factor`.
Scene scale_scene(Scene scene, double factor);
// Draws factor ~ U[1 - jitter, 1 + jitter] and applies scale_scene.
Scene scale_augment(const Scene& scene, std::mt19937_64& rng, double jitter = 0.05);

}  // namespace gcf::data
