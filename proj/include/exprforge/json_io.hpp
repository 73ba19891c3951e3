#pragma once

#include <nlohmann/json.hpp>

#include "exprforge/edit_pipeline.hpp"
#include "exprforge/prompting.hpp"
#include "exprforge/retrieval.hpp"

namespace exprforge {

// Field-wise JSON conversions shared by the service, the bench config and the CLI.
// Parsing overlays present fields on `base`; type errors raise
// ParamOutOfRange naming the field. Range checks are left to validate_*.

nlohmann::json to_json(const HyperParams& p);
HyperParams hyper_params_from_json(const nlohmann::json& j, HyperParams base = {});

nlohmann::json to_json(const LoRAConfig& l);
LoRAConfig lora_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ScoredTag& t, int rank);

}  // namespace exprforge
