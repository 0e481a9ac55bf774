#pragma once

#include <string>

#include "gcf/model/model.hpp"
#include "json.hpp"

namespace gcf::eval {

// Per-layer, per-head and head-averaged attention of one inference:
// MAE alpha, s^en and refinement weights over the K modes; HID beta over
// neighbor slots, gate values and both modes x neighbors cross-attention
// matrices. Rows are validated (see validate_attention_trace) before return.
nlohmann::json attention_trace_json(const model::InferTrace& trace, const model::PredictionSet& pred,
                                    const data::Scene& scene);

// Throws FormatError if a distribution does not sum to one over its support
// or a head average disagrees with its heads.
void validate_attention_trace(const nlohmann::json& j, double tol = 1e-9);

void export_attention_trace(const num::ParamSet& params, const model::ModelConfig& m, const data::Scene& scene,
                            const modes::MotionModeBank& bank, std::size_t k_top, const std::string& path);

}  // namespace gcf::eval
