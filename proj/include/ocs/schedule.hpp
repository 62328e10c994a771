// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace ocs {

enum class LrKind { kConstant, kMultiStep, kCosine };

LrKind lr_kind_from_name(const std::string& name);
const char* lr_kind_name(LrKind kind);

struct LrSchedule {
  LrKind kind = LrKind::kMultiStep;
  double base_lr = 0.1;
  std::vector<int> milestones = {90, 180, 240, 270};  // multistep
  double decay = 0.2;                                 // multistep factor
  int total_epochs = 300;                             // cosine horizon
  double min_lr = 0.0;                                // cosine floor
};

/// multistep: base * decay^(#milestones <= epoch);
/// cosine:    min + (base - min) * 0.5 * (1 + cos(pi * epoch / total)).
double lr_at(const LrSchedule& schedule, int epoch);

}  // namespace ocs
