#include "gcf/eval/trace.hpp"

#include <cmath>
#include <fstream>

#include "gcf/errors.hpp"

namespace gcf::eval {

namespace {

using nlohmann::json;
using num::Tensor;

json column(const Tensor& t) { return std::vector<double>(t.data().begin(), t.data().end()); }

json matrix(const Tensor& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    rows.push_back(std::vector<double>(t.data().begin() + static_cast<std::ptrdiff_t>(r * t.cols()),
                                       t.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * t.cols())));
  }
  return rows;
}

// Element-wise mean of equally shaped JSON number arrays (nested once at most).
json mean_of(const std::vector<json>& parts) {
  json out = parts.front();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].is_array()) {
      for (std::size_t j = 0; j < out[i].size(); ++j) {
        double s = 0.0;
        for (const auto& p : parts) s += p[i][j].get<double>();
        out[i][j] = s / static_cast<double>(parts.size());
      }
    } else {
      double s = 0.0;
      for (const auto& p : parts) s += p[i].get<double>();
      out[i] = s / static_cast<double>(parts.size());
    }
  }
  return out;
}

void fail(const std::string& what) { throw FormatError("attention trace: " + what); }

// Sums to one over `valid` entries and is zero elsewhere; all zero when no
// entry is valid.
void check_distribution(const json& row, const std::vector<bool>& valid, double tol, const std::string& where) {
  if (row.size() != valid.size()) fail(where + " has the wrong length");
  bool any = false;
  double s = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const double v = row[i].get<double>();
    if (!(v >= 0.0)) fail(where + " has a negative or non-finite entry");
    if (!valid[i] && v != 0.0) fail(where + " puts weight on an invalid slot");
    any = any || valid[i];
    s += v;
  }
  if (any ? std::abs(s - 1.0) > tol : s != 0.0) fail(where + " does not sum to one over its support");
}

void check_mean(const json& mean, const json& heads, const char* key, double tol, const std::string& where) {
  std::vector<json> parts;
  for (const auto& h : heads) parts.push_back(h.at(key));
  const json expect = mean_of(parts);
  const json flat_a = expect.flatten(), flat_b = mean.at(key).flatten();
  if (flat_a.size() != flat_b.size()) fail(where + " head average has the wrong shape");
  for (auto it = flat_a.begin(); it != flat_a.end(); ++it) {
    if (!flat_b.contains(it.key()) || std::abs(flat_b.at(it.key()).get<double>() - it.value().get<double>()) > tol)
      fail(where + " head average of " + key + " disagrees with its heads");
  }
}

}  // namespace

json attention_trace_json(const model::InferTrace& trace, const model::PredictionSet& pred, const data::Scene& scene) {
  json mae_layers = json::array();
  for (const auto& layer : trace.mae.layers) {
    std::vector<json> heads;
    for (const auto& h : layer) {
      heads.push_back({{"alpha", column(h.alpha)}, {"score", column(h.score)}, {"weights", column(h.weights)}});
    }
    json mean = json::object();
    for (const char* key : {"alpha", "score", "weights"}) {
      std::vector<json> parts;
      for (const auto& h : heads) parts.push_back(h.at(key));
      mean[key] = mean_of(parts);
    }
    mae_layers.push_back({{"heads", heads}, {"mean", mean}});
  }

  json hid_layers = json::array();
  for (const auto& layer : trace.hid.layers) {
    std::vector<json> heads;
    for (const auto& h : layer.heads) {
      heads.push_back({{"beta", column(h.beta)}, {"attn_std", matrix(h.attn_std)}, {"attn_enh", matrix(h.attn_enh)}});
    }
    json mean = json::object();
    for (const char* key : {"beta", "attn_std", "attn_enh"}) {
      std::vector<json> parts;
      for (const auto& h : heads) parts.push_back(h.at(key));
      mean[key] = mean_of(parts);
    }
    hid_layers.push_back({{"lambda", layer.lambda}, {"gate", column(layer.gate)}, {"heads", heads}, {"mean", mean}});
  }

  std::vector<int> valid;
  for (auto v : scene.neighbor_valid) valid.push_back(v ? 1 : 0);
  json j = {{"mode_count", pred.scores.size()},
            {"scores", pred.scores},
            {"selected_modes", pred.mode_indices},
            {"probabilities", pred.probabilities},
            {"neighbor_valid", valid},
            {"mae", {{"layers", mae_layers}}},
            {"hid", {{"layers", hid_layers}}}};
  validate_attention_trace(j);
  return j;
}

void validate_attention_trace(const json& j, double tol) {
  try {
    const std::size_t k = j.at("mode_count").get<std::size_t>();
    const std::vector<bool> all_modes(k, true);
    std::vector<bool> valid;
    for (const auto& v : j.at("neighbor_valid")) valid.push_back(v.get<int>() != 0);
    const std::size_t m = j.at("selected_modes").size();
    check_distribution(j.at("probabilities"), std::vector<bool>(m, true), tol, "probabilities");

    for (const auto& layer : j.at("mae").at("layers")) {
      const auto& heads = layer.at("heads");
      if (heads.empty()) fail("MAE layer without heads");
      for (const auto& h : heads) {
        check_distribution(h.at("alpha"), all_modes, tol, "MAE alpha");
        check_distribution(h.at("weights"), all_modes, tol, "MAE weights");
        if (h.at("score").size() != k) fail("MAE score has the wrong length");
      }
      for (const char* key : {"alpha", "score", "weights"}) check_mean(layer.at("mean"), heads, key, tol, "MAE");
    }
    for (const auto& layer : j.at("hid").at("layers")) {
      const auto& heads = layer.at("heads");
      if (heads.empty()) fail("HID layer without heads");
      if (layer.at("gate").size() != m) fail("gate count differs from the selected modes");
      for (const auto& g : layer.at("gate")) {
        const double v = g.get<double>();
        if (!(v >= 0.0 && v <= 1.0)) fail("gate value outside [0, 1]");
      }
      for (const auto& h : heads) {
        check_distribution(h.at("beta"), valid, tol, "HID beta");
        for (const char* key : {"attn_std", "attn_enh"}) {
          if (h.at(key).size() != m) fail(std::string(key) + " row count differs from the selected modes");
          for (const auto& row : h.at(key)) check_distribution(row, valid, tol, std::string("HID ") + key);
        }
      }
      for (const char* key : {"beta", "attn_std", "attn_enh"}) check_mean(layer.at("mean"), heads, key, tol, "HID");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  }
}

void export_attention_trace(const num::ParamSet& params, const model::ModelConfig& m, const data::Scene& scene,
                            const modes::MotionModeBank& bank, std::size_t k_top, const std::string& path) {
  model::InferTrace trace;
  const model::PredictionSet pred = model::infer(params, m, scene, bank, k_top, &trace);
  const json j = attention_trace_json(trace, pred, scene);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace gcf::eval
