// SPDX-License-Identifier: Apache-2.0
#include "ocs/groups.hpp"

#include <algorithm>

#include "ocs/error.hpp"

namespace ocs {
namespace {

bool is_depthwise(const ModelGraph& graph, const LayerNode& n) {
  if (n.kind != LayerKind::kConv2d || n.groups == 1) return false;
  const int in = graph.node_in_channels(n.id);
  if (n.groups == in && n.out_channels == in) return true;
  throw GroupingError("conv node " + n.name +
                      ": grouped convolutions other than depthwise "
                      "(groups == in == out) are unsupported");
}

struct UnionFind {
  std::map<int, int> parent;
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

const PruningGroup& GroupSet::group(int id) const {
  for (const auto& g : groups)
    if (g.id == id) return g;
  throw GroupingError("no group with id " + std::to_string(id));
}

int GroupSet::prunable_channels() const {
  int n = 0;
  for (const auto& g : groups)
    if (g.prunable) n += g.channels;
  return n;
}

GroupSet build_groups(const ModelGraph& graph) {
  UnionFind uf;
  for (const auto& n : graph.nodes()) uf.parent[n.id] = n.id;

  // Each node's output axis joins either a fresh space (conv, dense, input)
  // or the space of a predecessor.
  for (const auto& n : graph.nodes()) {
    switch (n.kind) {
      case LayerKind::kInput:
      case LayerKind::kDense:
        break;
      case LayerKind::kConv2d:
        if (is_depthwise(graph, n)) uf.unite(n.id, n.inputs[0]);
        break;
      case LayerKind::kAdd:
        uf.unite(n.id, n.inputs[0]);
        uf.unite(n.id, n.inputs[1]);
        break;
      default:
        uf.unite(n.id, n.inputs[0]);
        break;
    }
  }

  std::map<int, std::vector<int>> members;  // root -> node ids
  for (const auto& n : graph.nodes()) members[uf.find(n.id)].push_back(n.id);

  // Deterministic group ids: spaces ordered by their smallest member node.
  std::vector<std::pair<int, int>> order;  // (min member, root)
  for (const auto& [root, ids] : members)
    order.push_back({*std::min_element(ids.begin(), ids.end()), root});
  std::sort(order.begin(), order.end());

  GroupSet set;
  std::map<int, int> group_of_root;
  for (const auto& [min_id, root] : order) {
    PruningGroup g;
    g.id = static_cast<int>(set.groups.size());
    group_of_root[root] = g.id;
    set.groups.push_back(std::move(g));
  }
  for (const auto& n : graph.nodes())
    set.group_of_node[n.id] = group_of_root[uf.find(n.id)];

  const LayerNode& out = graph.node(graph.output_node());
  const bool head_pinned = out.kind == LayerKind::kDense ||
                           out.kind == LayerKind::kGlobalAvgPool ||
                           out.kind == LayerKind::kFlatten;

  for (const auto& n : graph.nodes()) {
    PruningGroup& g = set.groups[set.group_of_node[n.id]];
    const NodeShape& s = graph.shape(n.id);

    // Producer-side slices: the node's own parameters indexed by its output
    // channel axis.
    switch (n.kind) {
      case LayerKind::kInput:
        g.channels = s.channels;
        g.prunable = false;
        g.producer_nodes.push_back(n.id);
        break;
      case LayerKind::kConv2d:
      case LayerKind::kDense: {
        g.channels = s.spatial ? s.channels : s.features;
        g.producer_nodes.push_back(n.id);
        g.slices.push_back({graph.param_key(n.id, "w"), n.id, "w", 0, 1, true});
        if (n.bias)
          g.slices.push_back(
              {graph.param_key(n.id, "b"), n.id, "b", 0, 1, true});
        break;
      }
      case LayerKind::kBatchNorm2d:
        g.slices.push_back(
            {graph.param_key(n.id, "gamma"), n.id, "gamma", 0, 1, true});
        g.slices.push_back(
            {graph.param_key(n.id, "beta"), n.id, "beta", 0, 1, true});
        g.slices.push_back({graph.param_key(n.id, "running_mean"), n.id,
                            "running_mean", 0, 1, false});
        g.slices.push_back({graph.param_key(n.id, "running_var"), n.id,
                            "running_var", 0, 1, false});
        break;
      default:
        break;
    }

    // Consumer-side slices: input columns of convs and dense layers reading
    // the predecessor's space. Depthwise convs already share that space and
    // own no separate input axis.
    if (n.kind == LayerKind::kConv2d && n.groups == 1) {
      PruningGroup& src = set.groups[set.group_of_node[n.inputs[0]]];
      src.slices.push_back({graph.param_key(n.id, "w"), n.id, "w", 1, 1, true});
    } else if (n.kind == LayerKind::kDense) {
      PruningGroup& src = set.groups[set.group_of_node[n.inputs[0]]];
      src.slices.push_back({graph.param_key(n.id, "w"), n.id, "w", 1,
                            graph.dense_input_block(n.id), true});
    }
  }

  if (head_pinned) set.groups[set.group_of_node[out.id]].prunable = false;

  for (auto& g : set.groups) {
    if (g.channels <= 0)
      throw GroupingError("group " + std::to_string(g.id) +
                          " has no producing node");
    std::sort(g.producer_nodes.begin(), g.producer_nodes.end());
  }
  return set;
}

std::size_t slice_scalar_count(const ParamSlice& slice,
                               const std::vector<int>& shape) {
  std::size_t n = 0;
  for_each_slice_index(slice, shape, 0, [&](std::size_t) { ++n; });
  return n;
}

nlohmann::json groups_to_json(const ModelGraph& graph, const GroupSet& groups) {
  nlohmann::json out;
  out["prunable_channels"] = groups.prunable_channels();
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& g : groups.groups) {
    nlohmann::json jg;
    jg["id"] = g.id;
    jg["channels"] = g.channels;
    jg["prunable"] = g.prunable;
    nlohmann::json producers = nlohmann::json::array();
    for (int id : g.producer_nodes) producers.push_back(graph.node(id).name);
    jg["producers"] = std::move(producers);
    nlohmann::json slices = nlohmann::json::array();
    for (const auto& s : g.slices)
      slices.push_back({{"param", s.key},
                        {"axis", s.axis},
                        {"block", s.block},
                        {"trained", s.trained}});
    jg["slices"] = std::move(slices);
    arr.push_back(std::move(jg));
  }
  out["groups"] = std::move(arr);
  return out;
}

}  // namespace ocs
