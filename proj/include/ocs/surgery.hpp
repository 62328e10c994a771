// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <vector>

#include "ocs/groups.hpp"
#include "ocs/param_store.hpp"
#include "ocs/saliency.hpp"

namespace ocs {

/// A structurally pruned copy of a model. `kept` maps each group id to the
/// surviving channel indices in the original index space, in order; new
/// channel k of a group corresponds to old channel kept[g][k].
template <typename Scalar>
struct PrunedModel {
  ModelGraph graph;
  ParamStore<Scalar> params;
  std::map<int, std::vector<int>> kept;
};

/// Removes the selected channels from every parameter, buffer and graph
/// attribute the groups tie to them. Selections must name prunable groups,
/// stay in range, repeat nothing and leave at least one channel per group.
/// `momentum` (optional) is sliced with the same index maps so an optimizer
/// can keep its state across the surgery.
template <typename Scalar>
PrunedModel<Scalar> apply_prune(const ModelGraph& graph, const GroupSet& groups,
                                const PruneSelection& selection,
                                const ParamStore<Scalar>& params,
                                GradMap<Scalar>* momentum = nullptr);

/// Gathers whole channel blocks along one axis: shape[axis] == C * block and
/// the output keeps keep.size() * block entries in `keep` order.
template <typename Scalar>
Tensor<Scalar> gather_channels(const Tensor<Scalar>& t, int axis, int block,
                               const std::vector<int>& keep);

}  // namespace ocs
