#include <cmath>
#include <random>

#include "gcf/errors.hpp"
#include "gcf/model/model.hpp"

namespace gcf::model {

using namespace num;

namespace {

std::string head_name(const std::string& block, int layer, int head, const char* proj) {
  return block + "." + std::to_string(layer) + ".h" + std::to_string(head) + "." + proj;
}

std::string layer_name(const std::string& block, int layer, const char* part) {
  return block + "." + std::to_string(layer) + "." + part;
}

Var lin(ParamBinding& p, const std::string& name, Var x) { return linear(x, p[name + ".w"], p[name + ".b"]); }

Var norm(ParamBinding& p, const std::string& name, Var x) { return layer_norm(x, p[name + ".g"], p[name + ".b"]); }

// residual -> norm -> ffn(tanh) -> residual -> norm, shared by both blocks.
Var block_tail(ParamBinding& p, const std::string& prefix, Var update, Var residual) {
  Var h = norm(p, prefix + "ln1", add(update, residual));
  Var f = lin(p, prefix + "ffn2", num::tanh(lin(p, prefix + "ffn1", h)));
  return norm(p, prefix + "ln2", add(f, h));
}

double snap(double v, double quantum) { return quantum > 0 ? std::nearbyint(v / quantum) * quantum : v; }

}  // namespace

std::map<std::string, Shape> param_shapes(const ModelConfig& m, const data::Horizons& h) {
  const std::size_t d = static_cast<std::size_t>(m.d_model);
  const std::size_t dk = static_cast<std::size_t>(m.d_k());
  const std::size_t ff = d * static_cast<std::size_t>(m.ffn_factor);
  const std::size_t hd = dk * static_cast<std::size_t>(m.heads);
  std::map<std::string, Shape> s;
  auto linear_shape = [&](const std::string& name, std::size_t in, std::size_t out) {
    s[name + ".w"] = {in, out};
    s[name + ".b"] = {1, out};
  };
  auto norm_shape = [&](const std::string& name) {
    s[name + ".g"] = {1, d};
    s[name + ".b"] = {1, d};
  };
  auto tail = [&](const std::string& block, int l) {
    linear_shape(layer_name(block, l, "out"), hd, d);
    norm_shape(layer_name(block, l, "ln1"));
    linear_shape(layer_name(block, l, "ffn1"), d, ff);
    linear_shape(layer_name(block, l, "ffn2"), ff, d);
    norm_shape(layer_name(block, l, "ln2"));
  };
  linear_shape("mae.embed", static_cast<std::size_t>(2 * h.total()), d);
  for (int l = 0; l < m.mae_layers; ++l) {
    for (int hh = 0; hh < m.heads; ++hh)
      for (const char* proj : {"gq", "gk", "gv", "q", "k", "v"}) linear_shape(head_name("mae", l, hh, proj), d, dk);
    tail("mae", l);
  }
  linear_shape("hid.embed", static_cast<std::size_t>(2 * h.t_obs), d);
  for (int l = 0; l < m.hid_layers; ++l) {
    for (int hh = 0; hh < m.heads; ++hh)
      for (const char* proj : {"q", "k", "v", "nq", "nk"}) linear_shape(head_name("hid", l, hh, proj), d, dk);
    s[layer_name("hid", l, "lambda_raw")] = {1, 1};
    linear_shape(layer_name("hid", l, "gate"), d, 1);
    tail("hid", l);
  }
  linear_shape("head.cls", d, 1);
  linear_shape("head.reg", d, static_cast<std::size_t>(2 * h.t_pre));
  return s;
}

ParamSet init_params(const ModelConfig& m, const data::Horizons& h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamSet params;
  for (const auto& [name, shape] : param_shapes(m, h)) {
    const bool is_norm_gain = name.size() > 2 && name.ends_with(".g");
    if (name.ends_with(".w")) {
      params[name] = xavier_uniform(shape[0], shape[1], rng);
    } else if (is_norm_gain) {
      params[name] = Tensor(shape, 1.0);
    } else {
      params[name] = Tensor(shape, 0.0);
    }
  }
  return params;
}

void check_params(const ParamSet& params, const ModelConfig& m, const data::Horizons& h) {
  const auto expected = param_shapes(m, h);
  if (params.size() != expected.size()) {
    throw ConfigError("parameter count " + std::to_string(params.size()) + " does not match config (" +
                      std::to_string(expected.size()) + ")");
  }
  for (const auto& [name, shape] : expected) {
    auto it = params.find(name);
    if (it == params.end()) throw ConfigError("missing parameter '" + name + "'");
    if (it->second.shape() != shape) {
      throw ConfigError("parameter '" + name + "' has shape " + shape_str(it->second.shape()) + ", config implies " +
                        shape_str(shape));
    }
  }
}

SceneInput featurize(const Scene& scene, const ModelConfig& m) {
  SceneInput in;
  const std::size_t t_obs = scene.target_obs.size();
  in.obs = Tensor({1, 2 * t_obs});
  for (std::size_t t = 0; t < t_obs; ++t) {
    in.obs(0, 2 * t) = snap(scene.target_obs[t].x, m.input_quantum);
    in.obs(0, 2 * t + 1) = snap(scene.target_obs[t].y, m.input_quantum);
  }
  in.n_slots = scene.n_slots();
  for (std::size_t i = 0; i < scene.n_slots(); ++i)
    if (scene.neighbor_valid[i]) in.valid_slots.push_back(i);
  if (!in.valid_slots.empty()) {
    in.neighbors = Tensor({in.valid_slots.size(), 2 * t_obs});
    for (std::size_t r = 0; r < in.valid_slots.size(); ++r) {
      const auto& tr = scene.neighbors_obs[in.valid_slots[r]];
      if (tr.size() != t_obs) throw ShapeError("neighbor history length differs from target history");
      for (std::size_t t = 0; t < t_obs; ++t) {
        in.neighbors(r, 2 * t) = snap(tr[t].x, m.input_quantum);
        in.neighbors(r, 2 * t + 1) = snap(tr[t].y, m.input_quantum);
      }
    }
  }
  return in;
}

Tensor build_mode_tokens(const Tensor& obs, const Tensor& bank) {
  if (obs.rows() != 1) throw ShapeError("observation must be a single flattened row");
  const std::size_t k = bank.rows(), a = obs.cols(), b = bank.cols();
  Tensor t({k, a + b});
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < a; ++j) t(i, j) = obs(0, j);
    for (std::size_t j = 0; j < b; ++j) t(i, a + j) = bank(i, j);
  }
  return t;
}

GlobalContext global_context(Var qg, Var kg, Var vg) {
  if (qg.rows() == 0) throw ContractError("global context needs at least one mode");
  const double inv = 1.0 / std::sqrt(static_cast<double>(qg.cols()));
  Var score = scale(row_sum(num::tanh(add(qg, kg))), inv);
  Var alpha = softmax(score, 0);
  return {alpha, matmul(transpose(alpha), vg)};
}

ContextTransform context_transform(Var q, Var k, Var v, Var g) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Var qc = add(q, g);
  Var kc = add(k, g);
  Var s = scale(row_sum(mul(num::tanh(add(qc, kc)), q)), inv);
  Var w = softmax(s, 0);
  return {scale_rows(add(v, g), w), s, w};
}

CrossAttention cross_attention(Var q, Var k, Var v) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Var a = softmax(scale(matmul(q, transpose(k)), inv), 1);
  return {a, matmul(a, v)};
}

NeighborContext neighbor_context(Var nq, Var nk, Var v) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(nq.cols()));
  Var beta = softmax(scale(row_sum(num::tanh(add(nq, nk))), inv), 0);
  return {beta, matmul(transpose(beta), v)};
}

Var fusion_lambda(Var raw, double lo, double hi) { return add_scalar(scale(sigmoid(raw), hi - lo), lo); }

Var gate_fuse(Var g, Var o_std, Var o_enh) {
  Var one_minus = add_scalar(scale(g, -1.0), 1.0);
  return add(scale_rows(o_std, g), scale_rows(o_enh, one_minus));
}

Var mae_layer(ParamBinding& p, const ModelConfig& m, int layer, Var x, std::vector<MaeHeadTrace>* trace) {
  std::vector<Var> heads;
  for (int h = 0; h < m.heads; ++h) {
    auto proj = [&](const char* name) { return lin(p, head_name("mae", layer, h, name), x); };
    const GlobalContext gc = global_context(proj("gq"), proj("gk"), proj("gv"));
    const ContextTransform ct = context_transform(proj("q"), proj("k"), proj("v"), gc.g);
    heads.push_back(ct.c);
    if (trace) trace->push_back({gc.alpha.value(), ct.s.value(), ct.w.value()});
  }
  const std::string prefix = "mae." + std::to_string(layer) + ".";
  Var merged = lin(p, prefix + "out", concat_cols(heads));
  return block_tail(p, prefix, merged, x);
}

Var mae_forward(ParamBinding& p, const ModelConfig& m, Var tokens, MaeTrace* trace) {
  Var x = lin(p, "mae.embed", scale(tokens, m.input_scale));
  for (int l = 0; l < m.mae_layers; ++l) {
    std::vector<MaeHeadTrace>* layer_trace = nullptr;
    if (trace) layer_trace = &trace->layers.emplace_back();
    x = mae_layer(p, m, l, x, layer_trace);
  }
  return x;
}

Var embed_neighbors(ParamBinding& p, const ModelConfig& m, Var neighbors) {
  return lin(p, "hid.embed", scale(neighbors, m.input_scale));
}

Var hid_layer(ParamBinding& p, const ModelConfig& m, int layer, Var c_en, Var nb, const SceneInput& input,
              HidLayerTrace* trace) {
  Tape& tape = p.tape();
  const std::string prefix = "hid." + std::to_string(layer) + ".";
  const std::size_t rows = c_en.rows();
  const std::size_t d = static_cast<std::size_t>(m.d_model);
  Var lambda = fusion_lambda(p[prefix + "lambda_raw"], m.lambda_min, m.lambda_max);
  Var gate = sigmoid(lin(p, prefix + "gate", c_en));

  Var o_std, o_enh;
  if (input.n_valid() == 0) {
    // No social context: both pathways contribute nothing.
    o_std = tape.constant(Tensor::zeros(rows, d));
    o_enh = o_std;
    if (trace) {
      for (int h = 0; h < m.heads; ++h) {
        trace->heads.push_back({Tensor::zeros(input.n_slots, 1), Tensor::zeros(rows, input.n_slots),
                                Tensor::zeros(rows, input.n_slots)});
      }
    }
  } else {
    std::vector<Var> std_heads, enh_heads;
    for (int h = 0; h < m.heads; ++h) {
      Var q = lin(p, head_name("hid", layer, h, "q"), c_en);
      Var k = lin(p, head_name("hid", layer, h, "k"), nb);
      Var v = lin(p, head_name("hid", layer, h, "v"), nb);
      const NeighborContext nc =
          neighbor_context(lin(p, head_name("hid", layer, h, "nq"), nb), lin(p, head_name("hid", layer, h, "nk"), nb), v);
      const CrossAttention std_att = cross_attention(q, k, v);
      const CrossAttention enh_att = cross_attention(add(q, mul(nc.g, lambda)), k, v);
      std_heads.push_back(std_att.out);
      enh_heads.push_back(enh_att.out);
      if (trace) {
        HidHeadTrace ht{Tensor::zeros(input.n_slots, 1), Tensor::zeros(rows, input.n_slots),
                        Tensor::zeros(rows, input.n_slots)};
        for (std::size_t r = 0; r < input.n_valid(); ++r) {
          const std::size_t slot = input.valid_slots[r];
          ht.beta(slot, 0) = nc.beta.value()(r, 0);
          for (std::size_t i = 0; i < rows; ++i) {
            ht.attn_std(i, slot) = std_att.weights.value()(i, r);
            ht.attn_enh(i, slot) = enh_att.weights.value()(i, r);
          }
        }
        trace->heads.push_back(std::move(ht));
      }
    }
    o_std = lin(p, prefix + "out", concat_cols(std_heads));
    o_enh = lin(p, prefix + "out", concat_cols(enh_heads));
  }
  Var c_dec = gate_fuse(gate, o_std, o_enh);
  Var out = block_tail(p, prefix, c_dec, c_en);
  if (trace) {
    trace->gate = gate.value();
    trace->o_std = o_std.value();
    trace->o_enh = o_enh.value();
    trace->lambda = lambda.value().item();
  }
  return out;
}

Var hid_forward(ParamBinding& p, const ModelConfig& m, Var c_sel, const SceneInput& input, HidTrace* trace) {
  Var nb;
  if (input.n_valid() > 0) nb = embed_neighbors(p, m, p.tape().constant(input.neighbors));
  Var x = c_sel;
  for (int l = 0; l < m.hid_layers; ++l) {
    HidLayerTrace* lt = trace ? &trace->layers.emplace_back() : nullptr;
    x = hid_layer(p, m, l, x, nb, input, lt);
  }
  return x;
}

}  // namespace gcf::model
