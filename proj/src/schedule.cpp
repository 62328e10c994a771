// SPDX-License-Identifier: Apache-2.0
#include "ocs/schedule.hpp"

#include <cmath>
#include <numbers>

#include "ocs/error.hpp"

namespace ocs {

LrKind lr_kind_from_name(const std::string& name) {
  if (name == "constant") return LrKind::kConstant;
  if (name == "multistep") return LrKind::kMultiStep;
  if (name == "cosine") return LrKind::kCosine;
  throw Error("unknown learning-rate schedule: " + name);
}

const char* lr_kind_name(LrKind kind) {
  switch (kind) {
    case LrKind::kConstant: return "constant";
    case LrKind::kMultiStep: return "multistep";
    case LrKind::kCosine: return "cosine";
  }
  return "?";
}

double lr_at(const LrSchedule& schedule, int epoch) {
  if (epoch < 0) throw Error("negative epoch in lr schedule");
  switch (schedule.kind) {
    case LrKind::kConstant:
      return schedule.base_lr;
    case LrKind::kMultiStep: {
      double lr = schedule.base_lr;
      for (int m : schedule.milestones)
        if (m <= epoch) lr *= schedule.decay;
      return lr;
    }
    case LrKind::kCosine: {
      const double phase = std::numbers::pi * static_cast<double>(epoch) /
                           static_cast<double>(schedule.total_epochs);
      return schedule.min_lr +
             (schedule.base_lr - schedule.min_lr) * 0.5 *
                 (1.0 + std::cos(phase));
    }
  }
  throw Error("unhandled schedule kind");
}

}  // namespace ocs
