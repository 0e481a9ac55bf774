#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gcf/data/scene.hpp"
#include "gcf/model/config.hpp"
#include "gcf/modes/modes.hpp"
#include "gcf/numerics/adam.hpp"
#include "gcf/numerics/ops.hpp"
#include "gcf/numerics/params.hpp"

namespace gcf::model {

using data::Scene;
using data::Trajectory;
using modes::MotionModeBank;
using num::GradMap;
using num::ParamBinding;
using num::ParamSet;
using num::Tape;
using num::Tensor;
using num::Var;

// ---- parameters -----------------------------------------------------------

std::map<std::string, num::Shape> param_shapes(const ModelConfig& m, const data::Horizons& h);
// Xavier-uniform weights, zero biases, unit layer-norm gains, lambda_raw = 0.
ParamSet init_params(const ModelConfig& m, const data::Horizons& h, std::uint64_t seed);
// Throws ConfigError if names or shapes differ from param_shapes.
void check_params(const ParamSet& params, const ModelConfig& m, const data::Horizons& h);

// ---- inputs ---------------------------------------------------------------

struct SceneInput {
  Tensor obs;        // 1 x 2*t_obs, snapped to the input lattice
  Tensor neighbors;  // n_valid x 2*t_obs (unused when n_valid == 0)
  std::vector<std::size_t> valid_slots;
  std::size_t n_slots = 0;
  std::size_t n_valid() const { return valid_slots.size(); }
};

SceneInput featurize(const Scene& scene, const ModelConfig& m);

// Row k is [obs ; mode k], both flattened as [x1, y1, x2, y2, ...].
Tensor build_mode_tokens(const Tensor& obs_flat, const Tensor& bank_flat);

// ---- attention building blocks (one head) ---------------------------------

struct GlobalContext {
  Var alpha;  // K x 1
  Var g;      // 1 x d_k
};
// score_k = sum_j tanh(qg_k + kg_k)_j / sqrt(d_k); alpha = softmax over K;
// G = sum_k alpha_k vg_k.
GlobalContext global_context(Var qg, Var kg, Var vg);

struct ContextTransform {
  Var c;  // K x d_k
  Var s;  // K x 1
  Var w;  // K x 1
};
// s_k = sum_j [tanh(q_k + G + k_k + G) * q_k]_j / sqrt(d_k);
// w = softmax over K; c_k = w_k (v_k + G).
ContextTransform context_transform(Var q, Var k, Var v, Var g);

struct CrossAttention {
  Var weights;  // M x N
  Var out;      // M x d_k
};
// Scaled dot-product attention of M queries over N keys.
CrossAttention cross_attention(Var q, Var k, Var v);

struct NeighborContext {
  Var beta;  // N x 1
  Var g;     // 1 x d_k
};
// Additive scores over neighbors, softmax over N, weighted sum of v.
NeighborContext neighbor_context(Var nq, Var nk, Var v);

// lo + (hi - lo) * sigmoid(raw)
Var fusion_lambda(Var raw, double lo, double hi);

// g * o_std + (1 - g) * o_enh, row-wise with g [M x 1].
Var gate_fuse(Var g, Var o_std, Var o_enh);

// ---- traces ---------------------------------------------------------------

struct MaeHeadTrace {
  Tensor alpha;    // K x 1
  Tensor score;    // K x 1, s^en
  Tensor weights;  // K x 1, softmax of s^en
};
struct MaeTrace {
  std::vector<std::vector<MaeHeadTrace>> layers;
};

struct HidHeadTrace {
  Tensor beta;      // n_slots x 1, zero on padded slots
  Tensor attn_std;  // M x n_slots
  Tensor attn_enh;  // M x n_slots
};
struct HidLayerTrace {
  std::vector<HidHeadTrace> heads;
  Tensor gate;   // M x 1
  Tensor o_std;  // M x d_model
  Tensor o_enh;  // M x d_model
  double lambda = 0.0;
};
struct HidTrace {
  std::vector<HidLayerTrace> layers;
};

// ---- encoder / decoder ----------------------------------------------------

Var mae_layer(ParamBinding& p, const ModelConfig& m, int layer, Var x, std::vector<MaeHeadTrace>* trace = nullptr);
// Embeds tokens (scaled by input_scale) and runs the stacked layers.
Var mae_forward(ParamBinding& p, const ModelConfig& m, Var tokens, MaeTrace* trace = nullptr);

Var embed_neighbors(ParamBinding& p, const ModelConfig& m, Var neighbors);
// `nb` holds embedded valid neighbors; ignored when input.n_valid() == 0.
Var hid_layer(ParamBinding& p, const ModelConfig& m, int layer, Var c_en, Var nb, const SceneInput& input,
              HidLayerTrace* trace = nullptr);
Var hid_forward(ParamBinding& p, const ModelConfig& m, Var c_sel, const SceneInput& input, HidTrace* trace = nullptr);

// ---- heads and losses -----------------------------------------------------

Var classify_modes(ParamBinding& p, Var c_en);
// Regression output for each row of c_dec; anchors are the flattened modes of
// those rows (used with anchor-offset regression).
Var regress(ParamBinding& p, const ModelConfig& m, Var c_dec, const Tensor& anchors);

// Distances from a flattened future to every mode (K x 1).
Tensor mode_distances(const std::vector<double>& y_flat, const Tensor& bank_flat, bool squared = false);
Tensor soft_labels(const std::vector<double>& y_flat, const Tensor& bank_flat, bool squared = false);
// argmin distance, ties to the lower index.
std::size_t closest_mode(const std::vector<double>& y_flat, const Tensor& bank_flat);
// -sum l_k log softmax(scores)_k
Var classification_loss(Var scores, const Tensor& labels);
// Mean smooth-L1 over coordinates.
Var regression_loss(Var pred, const Tensor& target);

struct SceneLoss {
  Var total;
  Var reg;
  Var cls;
};
SceneLoss scene_loss(ParamBinding& p, const ModelConfig& m, const Scene& scene, const Tensor& bank_flat);
// Mean of scene losses on a single tape (for gradient checks).
SceneLoss batch_loss(ParamBinding& p, const ModelConfig& m, const std::vector<Scene>& batch, const Tensor& bank_flat);

// ---- training -------------------------------------------------------------

struct StepLosses {
  double total = 0.0;
  double reg = 0.0;
  double cls = 0.0;
};

// Batch-mean loss and gradient. Scenes run in parallel on separate tapes and
// are reduced in batch order. Throws NumericError on non-finite values.
StepLosses batch_gradients(const ParamSet& params, const ModelConfig& m, const std::vector<Scene>& batch,
                           const Tensor& bank_flat, GradMap& grads);
StepLosses train_step(ParamSet& params, num::AdamState& adam, const ModelConfig& m, const std::vector<Scene>& batch,
                      const Tensor& bank_flat);

struct EpochLog {
  int epoch = 0;
  int steps = 0;  // cumulative
  StepLosses mean;
};

struct TrainResult {
  ParamSet params;
  std::vector<EpochLog> log;
  int steps = 0;
};

// Shuffled mini-batch epochs with optional scale augmentation, all driven by
// config.seed.
TrainResult train(const RunConfig& config, const std::vector<Scene>& train_scenes, const MotionModeBank& bank,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

// ---- inference ------------------------------------------------------------

struct PredictionSet {
  std::vector<Trajectory> normalized;
  std::vector<Trajectory> world;
  std::vector<double> probabilities;
  std::vector<std::size_t> mode_indices;
  std::vector<double> scores;  // classifier score of every mode
};

struct InferTrace {
  MaeTrace mae;
  HidTrace hid;
};

// Top-k_top modes by score (ties to the lower index), decoded together;
// probabilities are the softmax over the selected scores.
PredictionSet infer(const ParamSet& params, const ModelConfig& m, const Scene& scene, const MotionModeBank& bank,
                    std::size_t k_top, InferTrace* trace = nullptr);

// ---- checkpoints ----------------------------------------------------------

struct Checkpoint {
  RunConfig config;
  ParamSet params;
  int steps = 0;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gcf::model
