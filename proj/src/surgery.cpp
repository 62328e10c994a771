// SPDX-License-Identifier: Apache-2.0
#include "ocs/surgery.hpp"

#include <algorithm>
#include <cstring>

#include "ocs/error.hpp"

namespace ocs {
namespace {

/// Per-group kept indices for every group, identity where nothing is pruned.
std::map<int, std::vector<int>> kept_indices(const GroupSet& groups,
                                             const PruneSelection& selection) {
  std::map<int, std::vector<int>> kept;
  for (const PruningGroup& g : groups.groups) {
    std::vector<char> removed(static_cast<std::size_t>(g.channels), 0);
    auto it = selection.find(g.id);
    if (it != selection.end()) {
      if (!g.prunable)
        throw GroupingError("group " + std::to_string(g.id) +
                            " is not prunable");
      for (int c : it->second) {
        if (c < 0 || c >= g.channels)
          throw GroupingError("channel " + std::to_string(c) +
                              " out of range for group " +
                              std::to_string(g.id));
        if (removed[static_cast<std::size_t>(c)])
          throw GroupingError("channel " + std::to_string(c) +
                              " selected twice in group " +
                              std::to_string(g.id));
        removed[static_cast<std::size_t>(c)] = 1;
      }
    }
    std::vector<int>& keep = kept[g.id];
    for (int c = 0; c < g.channels; ++c)
      if (!removed[static_cast<std::size_t>(c)]) keep.push_back(c);
    if (keep.empty())
      throw GroupingError("selection empties group " + std::to_string(g.id));
  }
  return kept;
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> gather_channels(const Tensor<Scalar>& t, int axis, int block,
                               const std::vector<int>& keep) {
  const std::vector<int>& shape = t.shape();
  if (axis < 0 || axis >= t.rank())
    throw ShapeError("gather axis out of range");
  if (shape[static_cast<std::size_t>(axis)] % block != 0)
    throw ShapeError("gather axis not divisible by block");
  const int c_old = shape[static_cast<std::size_t>(axis)] / block;
  for (int c : keep)
    if (c < 0 || c >= c_old) throw ShapeError("gather index out of range");

  std::vector<int> out_shape = shape;
  out_shape[static_cast<std::size_t>(axis)] =
      static_cast<int>(keep.size()) * block;
  Tensor<Scalar> out(out_shape);

  std::size_t outer = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(shape[i]);
  std::size_t inner = 1;
  for (int i = axis + 1; i < t.rank(); ++i)
    inner *= static_cast<std::size_t>(shape[i]);
  const std::size_t chan = static_cast<std::size_t>(block) * inner;
  const std::size_t old_step = static_cast<std::size_t>(c_old) * chan;
  const std::size_t new_step = keep.size() * chan;

  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < keep.size(); ++k)
      std::memcpy(out.data() + o * new_step + k * chan,
                  t.data() + o * old_step +
                      static_cast<std::size_t>(keep[k]) * chan,
                  chan * sizeof(Scalar));
  return out;
}

template <typename Scalar>
PrunedModel<Scalar> apply_prune(const ModelGraph& graph, const GroupSet& groups,
                                const PruneSelection& selection,
                                const ParamStore<Scalar>& params,
                                GradMap<Scalar>* momentum) {
  const std::map<int, std::vector<int>> kept = kept_indices(groups, selection);
  auto keep_of_node = [&](int id) -> const std::vector<int>& {
    return kept.at(groups.group_of_node.at(id));
  };

  // Rebuild the graph with shrunken producer extents; depthwise convs track
  // their shared space on both the channel and group count.
  std::vector<LayerNode> nodes = graph.nodes();
  for (LayerNode& n : nodes) {
    const int k = static_cast<int>(keep_of_node(n.id).size());
    if (n.kind == LayerKind::kConv2d) {
      n.out_channels = k;
      if (n.groups > 1) n.groups = k;
    } else if (n.kind == LayerKind::kDense) {
      n.out_features = k;
    }
  }
  PrunedModel<Scalar> result{
      ModelGraph(std::move(nodes), graph.input_channels(),
                 graph.input_height(), graph.input_width()),
      ParamStore<Scalar>{}, kept};

  // Slice tensors axis by axis. A conv/dense weight can shrink on both its
  // output rows (own space) and input columns (predecessor space).
  auto slice_all = [&](const std::string& key,
                       const Tensor<Scalar>& t) -> Tensor<Scalar> {
    const auto [node_id, role] = graph.resolve_param_key(key);
    const LayerNode& n = graph.node(node_id);
    Tensor<Scalar> out = t;
    if (role == "w") {
      out = gather_channels(out, 0, 1, keep_of_node(node_id));
      if (n.kind == LayerKind::kConv2d && n.groups == 1)
        out = gather_channels(out, 1, 1, keep_of_node(n.inputs[0]));
      else if (n.kind == LayerKind::kDense)
        out = gather_channels(out, 1, graph.dense_input_block(node_id),
                              keep_of_node(n.inputs[0]));
    } else {
      // b / gamma / beta / running stats: one row per output channel.
      out = gather_channels(out, 0, 1, keep_of_node(node_id));
    }
    return out;
  };

  for (const auto& [key, t] : params.tensors())
    result.params.tensors()[key] = slice_all(key, t);
  for (const auto& [key, t] : params.buffers())
    result.params.buffers()[key] = slice_all(key, t);
  if (momentum) {
    GradMap<Scalar> sliced;
    for (const auto& [key, t] : *momentum) sliced[key] = slice_all(key, t);
    *momentum = std::move(sliced);
  }
  return result;
}

template Tensor<float> gather_channels(const Tensor<float>&, int, int,
                                       const std::vector<int>&);
template Tensor<double> gather_channels(const Tensor<double>&, int, int,
                                        const std::vector<int>&);
template PrunedModel<float> apply_prune(const ModelGraph&, const GroupSet&,
                                        const PruneSelection&,
                                        const ParamStore<float>&,
                                        GradMap<float>*);
template PrunedModel<double> apply_prune(const ModelGraph&, const GroupSet&,
                                         const PruneSelection&,
                                         const ParamStore<double>&,
                                         GradMap<double>*);

}  // namespace ocs
