#include <algorithm>
#include <exception>
#include <cmath>
#include <numeric>
#include <random>

#include "gcf/errors.hpp"
#include "gcf/model/model.hpp"
#include "gcf/numerics/kernels.hpp"

namespace gcf::model {

using namespace num;

namespace {

Tensor rows_of(const Tensor& t, const std::vector<std::size_t>& idx) {
  Tensor out({idx.size(), t.cols()});
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) out(r, c) = t(idx[r], c);
  return out;
}

std::vector<double> flat_future(const Scene& s, const data::Horizons& h) {
  return modes::flatten_future(s.target_future, h.t_pre);
}

data::Horizons horizons_of(const Scene& s, const Tensor& bank_flat) {
  data::Horizons h;
  h.t_obs = static_cast<int>(s.target_obs.size());
  h.t_pre = static_cast<int>(bank_flat.cols() / 2);
  return h;
}

}  // namespace

Var classify_modes(ParamBinding& p, Var c_en) { return linear(c_en, p["head.cls.w"], p["head.cls.b"]); }

Var regress(ParamBinding& p, const ModelConfig& m, Var c_dec, const Tensor& anchors) {
  Var y = scale(linear(c_dec, p["head.reg.w"], p["head.reg.b"]), m.output_scale);
  if (m.regression == Regression::AnchorOffset) y = add(y, p.tape().constant(anchors));
  return y;
}

Tensor mode_distances(const std::vector<double>& y, const Tensor& bank, bool squared) {
  if (y.size() != bank.cols()) throw ShapeError("future length does not match the mode bank");
  Tensor d({bank.rows(), 1});
  for (std::size_t k = 0; k < bank.rows(); ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double e = y[j] - bank(k, j);
      acc += e * e;
    }
    d(k, 0) = squared ? acc : std::sqrt(acc);
  }
  return d;
}

Tensor soft_labels(const std::vector<double>& y, const Tensor& bank, bool squared) {
  Tape tape;
  Tensor d = mode_distances(y, bank, squared);
  for (double& v : d.data()) v = -v;
  return softmax(tape.constant(std::move(d)), 0).value();
}

std::size_t closest_mode(const std::vector<double>& y, const Tensor& bank) {
  const Tensor d = mode_distances(y, bank, true);
  std::size_t best = 0;
  for (std::size_t k = 1; k < d.rows(); ++k)
    if (d(k, 0) < d(best, 0)) best = k;
  return best;
}

Var classification_loss(Var scores, const Tensor& labels) {
  if (scores.value().shape() != labels.shape()) throw ShapeError("labels must match the score column");
  Tape& tape = *scores.tape();
  return scale(sum(mul(log_softmax(scores, 0), tape.constant(labels))), -1.0);
}

Var regression_loss(Var pred, const Tensor& target) {
  Tape& tape = *pred.tape();
  return mean(smooth_l1(sub(pred, tape.constant(target))));
}

SceneLoss scene_loss(ParamBinding& p, const ModelConfig& m, const Scene& scene, const Tensor& bank_flat) {
  if (!scene.has_future()) throw DataError("training scene without a future");
  Tape& tape = p.tape();
  const data::Horizons h = horizons_of(scene, bank_flat);
  const SceneInput in = featurize(scene, m);
  const std::vector<double> y = flat_future(scene, h);

  Var c_en = mae_forward(p, m, tape.constant(build_mode_tokens(in.obs, bank_flat)));
  Var scores = classify_modes(p, c_en);
  const std::size_t j = closest_mode(y, bank_flat);
  Var c_out = hid_forward(p, m, gather_rows(c_en, {j}), in);
  Var pred = regress(p, m, c_out, rows_of(bank_flat, {j}));

  Var reg = regression_loss(pred, Tensor({1, y.size()}, y));
  Var cls = classification_loss(scores, soft_labels(y, bank_flat, m.squared_soft_labels));
  Var total = add(scale(reg, m.lambda_reg), scale(cls, m.lambda_cls));
  return {total, reg, cls};
}

SceneLoss batch_loss(ParamBinding& p, const ModelConfig& m, const std::vector<Scene>& batch, const Tensor& bank_flat) {
  if (batch.empty()) throw ContractError("empty batch");
  SceneLoss acc;
  for (const auto& s : batch) {
    const SceneLoss l = scene_loss(p, m, s, bank_flat);
    if (!acc.total.valid()) {
      acc = l;
    } else {
      acc = {add(acc.total, l.total), add(acc.reg, l.reg), add(acc.cls, l.cls)};
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  return {scale(acc.total, inv), scale(acc.reg, inv), scale(acc.cls, inv)};
}

StepLosses batch_gradients(const ParamSet& params, const ModelConfig& m, const std::vector<Scene>& batch,
                           const Tensor& bank_flat, GradMap& grads) {
  if (batch.empty()) throw ContractError("empty batch");
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
  std::vector<GradMap> per_scene(batch.size());
  std::vector<StepLosses> losses(batch.size());
  std::vector<std::exception_ptr> errors(batch.size());
#pragma omp parallel for schedule(dynamic) if (kernels::threads() > 1)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      Tape tape;
      ParamBinding p(tape, params);
      const SceneLoss l = scene_loss(p, m, batch[i], bank_flat);
      losses[i] = {l.total.value().item(), l.reg.value().item(), l.cls.value().item()};
      tape.backward(l.total);
      per_scene[i] = p.gradients();
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  grads = std::move(per_scene[0]);
  StepLosses out = losses[0];
  for (std::size_t i = 1; i < batch.size(); ++i) {
    add_into(grads, per_scene[i]);
    out.total += losses[i].total;
    out.reg += losses[i].reg;
    out.cls += losses[i].cls;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  scale_grads(grads, inv);
  out.total *= inv;
  out.reg *= inv;
  out.cls *= inv;
  if (!std::isfinite(out.total) || !all_finite(grads)) throw NumericError("non-finite loss or gradient");
  return out;
}

StepLosses train_step(ParamSet& params, AdamState& adam, const ModelConfig& m, const std::vector<Scene>& batch,
                      const Tensor& bank_flat) {
  GradMap grads;
  const StepLosses l = batch_gradients(params, m, batch, bank_flat, grads);
  adam.step(params, grads);
  return l;
}

TrainResult train(const RunConfig& config, const std::vector<Scene>& scenes, const MotionModeBank& bank,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  if (scenes.empty()) throw DataError("no training scenes");
  if (bank.k != config.model.k) {
    throw ConfigError("mode bank has K = " + std::to_string(bank.k) + " but the config asks for K = " +
                      std::to_string(config.model.k));
  }
  if (bank.t_pre != config.horizons.t_pre) throw ConfigError("mode bank horizon does not match the config");
  const Tensor bank_flat = bank.flat();
  TrainResult r;
  r.params = init_params(config.model, config.horizons, config.seed);
  AdamState adam({config.train.lr, config.train.beta1, config.train.beta2, config.train.epsilon});
  std::mt19937_64 rng(config.seed ^ 0x5eedULL);
  std::vector<std::size_t> order(scenes.size());
  const auto batch = static_cast<std::size_t>(config.train.batch);
  for (int epoch = 0; epoch < config.train.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    StepLosses sum;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      if (config.train.max_steps > 0 && r.steps >= config.train.max_steps) break;
      std::vector<Scene> b;
      for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) {
        b.push_back(config.train.augment ? data::scale_augment(scenes[order[i]], rng, config.train.scale_jitter)
                                         : scenes[order[i]]);
      }
      StepLosses l;
      try {
        l = train_step(r.params, adam, config.model, b, bank_flat);
      } catch (const NumericError& e) {
        throw NumericError("training step " + std::to_string(r.steps + 1) + " (epoch " + std::to_string(epoch) +
                           "): " + e.what());
      }
      ++r.steps;
      ++batches;
      sum.total += l.total;
      sum.reg += l.reg;
      sum.cls += l.cls;
    }
    if (batches == 0) break;
    EpochLog log{epoch, r.steps, {sum.total / batches, sum.reg / batches, sum.cls / batches}};
    r.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return r;
}

PredictionSet infer(const ParamSet& params, const ModelConfig& m, const Scene& scene, const MotionModeBank& bank,
                    std::size_t k_top, InferTrace* trace) {
  if (k_top == 0 || k_top > bank.k) {
    throw ConfigError("k_top = " + std::to_string(k_top) + " must lie in [1, K = " + std::to_string(bank.k) + "]");
  }
  const Tensor bank_flat = bank.flat();
  Tape tape;
  ParamBinding p(tape, params, false);
  const SceneInput in = featurize(scene, m);
  Var c_en = mae_forward(p, m, tape.constant(build_mode_tokens(in.obs, bank_flat)), trace ? &trace->mae : nullptr);
  Var scores = classify_modes(p, c_en);

  PredictionSet out;
  out.scores.assign(scores.value().data().begin(), scores.value().data().end());
  std::vector<std::size_t> order(bank.k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return out.scores[a] > out.scores[b]; });
  out.mode_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_top));

  Var c_out = hid_forward(p, m, gather_rows(c_en, out.mode_indices), in, trace ? &trace->hid : nullptr);
  Var pred = regress(p, m, c_out, rows_of(bank_flat, out.mode_indices));
  Var probs = softmax(gather_rows(scores, out.mode_indices), 0);
  out.probabilities.assign(probs.value().data().begin(), probs.value().data().end());
  for (std::size_t r = 0; r < k_top; ++r) {
    Trajectory tr = modes::unflatten_future(pred.value().data().data() + r * pred.cols(), bank.t_pre);
    out.world.push_back(data::denormalize_prediction(tr, scene.norm));
    out.normalized.push_back(std::move(tr));
  }
  return out;
}

}  // namespace gcf::model
