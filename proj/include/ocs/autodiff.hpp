// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "ocs/graph.hpp"
#include "ocs/nn_ops.hpp"
#include "ocs/param_store.hpp"

namespace ocs {

/// Recording of one forward pass: per-node outputs in topological order plus
/// whatever each op saved for its backward (batch statistics, pool argmax).
/// The parameter version is captured so a backward against mutated weights
/// is rejected instead of silently producing wrong gradients.
template <typename Scalar>
struct Tape {
  const ModelGraph* graph = nullptr;
  bool training = false;
  std::uint64_t param_version = 0;
  std::map<int, Tensor<Scalar>> values;
  std::map<int, BnCache<Scalar>> bn_caches;
  std::map<int, std::vector<std::int32_t>> pool_argmax;

  const Tensor<Scalar>& value(int node_id) const {
    auto it = values.find(node_id);
    if (it == values.end())
      throw Error("tape holds no value for node " + std::to_string(node_id));
    return it->second;
  }
};

inline constexpr double kBnMomentum = 0.1;
inline constexpr double kBnEpsilon = 1e-5;

/// Runs the network on one batch. Training mode uses batch statistics in
/// batch-norm layers and updates the running estimates in `params`; eval
/// mode reads the running estimates and leaves them untouched.
template <typename Scalar>
Tensor<Scalar> forward(const ModelGraph& graph, ParamStore<Scalar>& params,
                       const Tensor<Scalar>& batch, bool training,
                       Tape<Scalar>* tape);

/// Reverse pass over a recorded tape. `output_grad` is d(loss)/d(logits).
/// Returns one gradient tensor per trained parameter.
template <typename Scalar>
GradMap<Scalar> backward(const Tape<Scalar>& tape,
                         const ParamStore<Scalar>& params,
                         const Tensor<Scalar>& output_grad);

}  // namespace ocs
