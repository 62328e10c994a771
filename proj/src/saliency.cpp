// SPDX-License-Identifier: Apache-2.0
#include "ocs/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "ocs/error.hpp"

namespace ocs {
namespace {

bool slice_in_bundle(const ParamSlice& s, const ScoreOptions& opts) {
  if (!s.trained) return false;
  if (opts.producer_only) return s.axis == 0 && s.role == "w";
  return true;
}

}  // namespace

template <typename Scalar>
double score_channel(const ModelGraph& graph, const GroupSet& groups,
                     int group_id, int channel,
                     const ParamStore<Scalar>& params,
                     const ScoreOptions& opts) {
  const PruningGroup& g = groups.group(group_id);
  if (channel < 0 || channel >= g.channels)
    throw GroupingError("channel index out of range for group " +
                        std::to_string(group_id));
  double sum = 0.0;
  int slices = 0;
  for (const ParamSlice& s : g.slices) {
    if (!slice_in_bundle(s, opts)) continue;
    const Tensor<Scalar>& t = params.tensor(s.key);
    double sq = 0.0;
    std::size_t n = 0;
    for_each_slice_index(s, t.shape(), channel, [&](std::size_t i) {
      const double v = static_cast<double>(t[static_cast<std::int64_t>(i)]);
      sq += v * v;
      ++n;
    });
    sum += std::sqrt(sq) / std::sqrt(static_cast<double>(n));
    ++slices;
  }
  if (slices == 0)
    throw GroupingError("group " + std::to_string(group_id) +
                        " has no trained slices to score");
  (void)graph;
  return sum / static_cast<double>(slices);
}

template <typename Scalar>
std::vector<std::vector<double>> score_groups(const ModelGraph& graph,
                                              const GroupSet& groups,
                                              const ParamStore<Scalar>& params,
                                              const ScoreOptions& opts) {
  std::vector<std::vector<double>> scores(groups.groups.size());
  for (const PruningGroup& g : groups.groups) {
    if (!g.prunable) continue;
    std::vector<double>& row = scores[static_cast<std::size_t>(g.id)];
    row.resize(static_cast<std::size_t>(g.channels));
    for (int c = 0; c < g.channels; ++c)
      row[static_cast<std::size_t>(c)] =
          score_channel(graph, groups, g.id, c, params, opts);
    if (opts.mode == ScoreMode::kGroupMean) {
      double mean = 0.0;
      for (double v : row) mean += v;
      mean /= static_cast<double>(g.channels);
      std::fill(row.begin(), row.end(), mean);
    }
  }
  return scores;
}

std::int64_t retained_macs_for_counts(const ModelGraph& graph,
                                      const GroupSet& groups,
                                      const std::map<int, int>& retained) {
  auto kept = [&](int node_id) {
    const int gid = groups.group_of_node.at(node_id);
    auto it = retained.find(gid);
    return it != retained.end() ? it->second : groups.group(gid).channels;
  };
  std::int64_t total = 0;
  for (const LayerNode& n : graph.nodes()) {
    if (n.kind == LayerKind::kConv2d) {
      const NodeShape& s = graph.shape(n.id);
      const std::int64_t out = kept(n.id);
      const std::int64_t in = n.groups == 1 ? kept(n.inputs[0]) : 1;
      total += out * in * n.kernel * n.kernel * s.height * s.width;
    } else if (n.kind == LayerKind::kDense) {
      total += static_cast<std::int64_t>(kept(n.id)) * kept(n.inputs[0]) *
               graph.dense_input_block(n.id);
    }
  }
  return total;
}

PartitionResult partition_by_flops(
    const ModelGraph& graph, const GroupSet& groups,
    const std::vector<std::vector<double>>& scores, double ratio_floor) {
  if (!(ratio_floor > 0.0) || ratio_floor > 1.0)
    throw PartitionError("retained-MAC ratio must lie in (0, 1]");

  struct Candidate {
    double score;
    int group;
    int channel;
  };
  std::vector<Candidate> ranked;
  for (const PruningGroup& g : groups.groups) {
    if (!g.prunable) continue;
    const auto& row = scores.at(static_cast<std::size_t>(g.id));
    if (static_cast<int>(row.size()) != g.channels)
      throw PartitionError("score row size mismatch for group " +
                           std::to_string(g.id));
    for (int c = 0; c < g.channels; ++c)
      ranked.push_back({row[static_cast<std::size_t>(c)], g.id, c});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Candidate& a,
                                             const Candidate& b) {
    return std::tie(a.score, a.group, a.channel) <
           std::tie(b.score, b.group, b.channel);
  });

  // The best-ranked channel of each group is pinned so no group empties out.
  std::map<int, int> last_of_group;
  for (std::size_t i = 0; i < ranked.size(); ++i)
    last_of_group[ranked[i].group] = static_cast<int>(i);
  std::vector<Candidate> pool;
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (last_of_group[ranked[i].group] != static_cast<int>(i))
      pool.push_back(ranked[i]);

  const std::int64_t baseline = count_flops(graph).total_macs;
  std::map<int, int> full;
  for (const PruningGroup& g : groups.groups) full[g.id] = g.channels;

  auto ratio_after = [&](std::size_t k) {
    std::map<int, int> counts = full;
    for (std::size_t i = 0; i < k; ++i) counts[pool[i].group] -= 1;
    return static_cast<double>(retained_macs_for_counts(graph, groups, counts)) /
           static_cast<double>(baseline);
  };

  if (ratio_after(pool.size()) > ratio_floor + kBudgetSlack)
    throw PartitionError(
        "budget unreachable: pruning every eligible channel still retains " +
        std::to_string(ratio_after(pool.size())) + " of baseline MACs");

  // ratio_after is nonincreasing in k, so the largest k with
  // ratio_after(k) >= ratio_floor is found by binary search.
  std::size_t lo = 0, hi = pool.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi + 1) / 2;
    if (ratio_after(mid) >= ratio_floor)
      lo = mid;
    else
      hi = mid - 1;
  }

  PartitionResult result;
  std::map<int, int> counts = full;
  for (std::size_t i = 0; i < lo; ++i) {
    result.selection[pool[i].group].push_back(pool[i].channel);
    counts[pool[i].group] -= 1;
  }
  for (auto& [gid, channels] : result.selection)
    std::sort(channels.begin(), channels.end());
  result.baseline_macs = baseline;
  result.retained_macs = retained_macs_for_counts(graph, groups, counts);
  result.achieved_ratio = static_cast<double>(result.retained_macs) /
                          static_cast<double>(baseline);
  result.removed_channels = static_cast<int>(lo);
  return result;
}

Signature signature_of(const GroupSet& groups, const PruneSelection& sel) {
  Signature sig;
  for (const PruningGroup& g : groups.groups) {
    if (!g.prunable) continue;
    std::vector<char> removed(static_cast<std::size_t>(g.channels), 0);
    auto it = sel.find(g.id);
    if (it != sel.end())
      for (int c : it->second) removed[static_cast<std::size_t>(c)] = 1;
    std::vector<int> retained;
    for (int c = 0; c < g.channels; ++c)
      if (!removed[static_cast<std::size_t>(c)]) retained.push_back(c);
    for (int node : g.producer_nodes) sig[node] = retained;
  }
  return sig;
}

template double score_channel<float>(const ModelGraph&, const GroupSet&, int,
                                     int, const ParamStore<float>&,
                                     const ScoreOptions&);
template double score_channel<double>(const ModelGraph&, const GroupSet&, int,
                                      int, const ParamStore<double>&,
                                      const ScoreOptions&);
template std::vector<std::vector<double>> score_groups<float>(
    const ModelGraph&, const GroupSet&, const ParamStore<float>&,
    const ScoreOptions&);
template std::vector<std::vector<double>> score_groups<double>(
    const ModelGraph&, const GroupSet&, const ParamStore<double>&,
    const ScoreOptions&);

}  // namespace ocs
