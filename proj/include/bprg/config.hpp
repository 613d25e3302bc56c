#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "bprg/model.hpp"
#include "bprg/trajectory.hpp"

namespace bprg {

// JSON experiment description with sections data, model, optimizer, prune,
// regrow, eval and seed. Unknown keys are rejected; every error message
// starts with the offending key path (e.g. "prune.s_final: ...").
//
// Required: data.source, model.layers, prune.s_final, regrow.s_end.
// regrow.s_start defaults to prune.s_final; steps default to 1, interpolation
// to cubic, criterion to gradient, init to zero, fine-tune budgets to 3.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(std::string_view json_text);

// "dense(784,128)", "conv3x3(1,8)", "flatten", "relu"
LayerSpec parse_layer(std::string_view text);

}  // namespace bprg
