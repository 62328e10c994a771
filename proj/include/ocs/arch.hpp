// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ocs/graph.hpp"

namespace ocs {

/// Builds a graph from a declarative architecture description:
/// {"input": {"channels":C,"height":H,"width":W},
///  "nodes": [{"id":0,"kind":"input"},
///            {"id":1,"name":"conv1","kind":"conv2d","inputs":[0],
///             "out_channels":16,"kernel":3,"stride":1,"padding":1}, ...]}
ModelGraph build_model(const nlohmann::json& spec);

/// Serializes a graph back to the same document form (exact round-trip).
nlohmann::json arch_to_json(const ModelGraph& graph);

/// Resolves a built-in preset name or a path to a JSON architecture file.
ModelGraph load_arch(const std::string& name_or_path);

bool is_preset(const std::string& name);
std::vector<std::string> preset_names();
ModelGraph preset_arch(const std::string& name);

}  // namespace ocs
