// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "ocs/trainer.hpp"

namespace ocs {

/// Versioned binary snapshot of a whole run (config, both graphs, parameters,
/// buffers, momentum, stability and penalty state, metric rows). Loading one
/// and continuing reproduces the uninterrupted run bit-for-bit: raw scalar
/// bits are stored little-endian, and the per-epoch RNG streams need no
/// counter beyond the next epoch index.
template <typename Scalar>
void save_checkpoint(const std::string& path, const RunState<Scalar>& state);

template <typename Scalar>
RunState<Scalar> load_checkpoint(const std::string& path);

/// Pruned-model artifact: architecture plus little-endian 32-bit tensors
/// behind a JSON manifest. `extra` keys merge into the manifest.
template <typename Scalar>
void save_model(const std::string& path, const ModelGraph& graph,
                const ParamStore<Scalar>& params,
                const nlohmann::json& extra = {});

struct LoadedModel {
  ModelGraph graph;
  ParamStore<float> params;
  nlohmann::json manifest;
};

LoadedModel load_model(const std::string& path);

}  // namespace ocs
