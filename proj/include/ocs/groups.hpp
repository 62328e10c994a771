// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ocs/graph.hpp"

namespace ocs {

/// One parameter sub-tensor controlled by a single channel of a group:
/// `axis` 0 selects output rows, 1 selects input columns. `block` is the
/// number of consecutive scalars one channel owns along a flattened input
/// (H*W for dense-after-flatten, 1 otherwise). Non-trained slices reference
/// normalization running statistics; they move with the channel during
/// surgery but never enter saliency or penalties.
struct ParamSlice {
  std::string key;
  int node = -1;
  std::string role;
  int axis = 0;
  int block = 1;
  bool trained = true;
};

/// A set of channels that must be pruned together because dependency
/// propagation ties their parameter slices to one shared channel index.
struct PruningGroup {
  int id = -1;
  int channels = 0;
  bool prunable = true;
  std::vector<int> producer_nodes;  // nodes whose output axis lives here
  std::vector<ParamSlice> slices;
};

struct GroupSet {
  std::vector<PruningGroup> groups;
  std::map<int, int> group_of_node;  // node id -> group of its output axis

  const PruningGroup& group(int id) const;
  int prunable_channels() const;
};

/// Builds the channel dependency groups of a graph. Convolutions (groups=1),
/// dense layers and the input each open a channel space; normalization,
/// activations, pooling and flatten pass their producer's space through; add
/// merges the spaces of both branches; depthwise convolutions ride their
/// producer's space. Grouped convolutions other than full depthwise are
/// rejected. The input space is never prunable, nor is the output space when
/// the graph ends in a classifier head (dense, global pool or flatten).
GroupSet build_groups(const ModelGraph& graph);

/// Invokes fn(flat_index) for every scalar the slice owns at channel c,
/// given the full tensor shape of the sliced parameter.
template <typename Fn>
void for_each_slice_index(const ParamSlice& slice,
                          const std::vector<int>& shape, int c, Fn&& fn) {
  auto tail = [&](std::size_t from) {
    std::size_t p = 1;
    for (std::size_t i = from; i < shape.size(); ++i)
      p *= static_cast<std::size_t>(shape[i]);
    return p;
  };
  if (slice.axis == 0) {
    const std::size_t width = static_cast<std::size_t>(slice.block) * tail(1);
    const std::size_t base = static_cast<std::size_t>(c) * width;
    for (std::size_t i = 0; i < width; ++i) fn(base + i);
  } else {
    const std::size_t inner = static_cast<std::size_t>(slice.block) * tail(2);
    const std::size_t row = tail(1);
    for (int o = 0; o < shape[0]; ++o) {
      const std::size_t base =
          static_cast<std::size_t>(o) * row + static_cast<std::size_t>(c) * inner;
      for (std::size_t i = 0; i < inner; ++i) fn(base + i);
    }
  }
}

/// Scalar count of one channel's slice.
std::size_t slice_scalar_count(const ParamSlice& slice,
                               const std::vector<int>& shape);

/// Human- and machine-readable group table for the verification CLI.
nlohmann::json groups_to_json(const ModelGraph& graph, const GroupSet& groups);

}  // namespace ocs
