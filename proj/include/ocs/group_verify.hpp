// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "ocs/groups.hpp"

namespace ocs {

struct GroupVerifyResult {
  int group = -1;
  int channel = -1;
  double max_abs_diff = 0.0;
  bool ok = false;
};

/// Largest |logit| gap tolerated between the zeroed and the removed model.
inline constexpr double kVerifyTolerance = 1e-9;

/// Zero-vs-remove equivalence check for one channel: with all parameters and
/// running statistics randomized, zeroing every slice the group ties to the
/// channel must give the same eval-mode logits as structurally removing it
/// (restricted to surviving output channels when the output space itself is
/// pruned). Runs in double precision on a random batch.
GroupVerifyResult verify_group_channel(const ModelGraph& graph,
                                       const GroupSet& groups, int group_id,
                                       int channel, std::uint64_t seed,
                                       int batch_size = 4,
                                       double tolerance = kVerifyTolerance);

/// Checks every channel of every prunable group.
std::vector<GroupVerifyResult> verify_groups(const ModelGraph& graph,
                                             std::uint64_t seed,
                                             int batch_size = 4,
                                             double tolerance = kVerifyTolerance);

}  // namespace ocs
