// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "ocs/groups.hpp"
#include "ocs/param_store.hpp"

namespace ocs {

/// Saliency variants. The default scores one channel as the mean, over every
/// trained slice its group ties to it, of l2(slice)/sqrt(len(slice)); the
/// per-slice normalization keeps wide consumers from drowning out the
/// producer filter. `kGroupMean` assigns every channel of a group the group's
/// mean channel score (whole-group ranking); `producer_only` restricts the
/// bundle to the producing filter rows, ignoring coupled consumers and
/// normalization parameters.
enum class ScoreMode { kPerChannel, kGroupMean };

struct ScoreOptions {
  ScoreMode mode = ScoreMode::kPerChannel;
  bool producer_only = false;
};

/// Scores are always accumulated in double, independent of the model scalar.
template <typename Scalar>
double score_channel(const ModelGraph& graph, const GroupSet& groups,
                     int group_id, int channel,
                     const ParamStore<Scalar>& params,
                     const ScoreOptions& opts = {});

/// scores[g][c] for every group (non-prunable groups get empty rows).
template <typename Scalar>
std::vector<std::vector<double>> score_groups(const ModelGraph& graph,
                                              const GroupSet& groups,
                                              const ParamStore<Scalar>& params,
                                              const ScoreOptions& opts = {});

/// Channels selected for removal, per group id, sorted ascending.
using PruneSelection = std::map<int, std::vector<int>>;

struct PartitionResult {
  PruneSelection selection;
  std::int64_t baseline_macs = 0;
  std::int64_t retained_macs = 0;
  double achieved_ratio = 1.0;
  int removed_channels = 0;
};

/// Largest tolerated overshoot of the retained-MAC ratio when even pruning
/// every eligible channel cannot reach the budget.
inline constexpr double kBudgetSlack = 0.01;

/// Ranks prunable channels by (score, group id, channel index) ascending and
/// removes the longest prefix whose retained-MAC ratio stays >= ratio_floor.
/// Every group keeps at least one channel (its best-ranked one is never
/// eligible). Throws PartitionError when the budget is unreachable beyond
/// kBudgetSlack.
PartitionResult partition_by_flops(const ModelGraph& graph,
                                   const GroupSet& groups,
                                   const std::vector<std::vector<double>>& scores,
                                   double ratio_floor);

/// Retained-MAC total for arbitrary per-group retained channel counts;
/// exposed for the exhaustive-sweep oracle in tests.
std::int64_t retained_macs_for_counts(const ModelGraph& graph,
                                      const GroupSet& groups,
                                      const std::map<int, int>& retained);

/// Retained-channel sets (original index space) per producer node of every
/// prunable group; the object the stability tracker compares across epochs.
/// Producers coupled through one group share the same set.
using Signature = std::map<int, std::vector<int>>;

Signature signature_of(const GroupSet& groups, const PruneSelection& sel);

}  // namespace ocs
