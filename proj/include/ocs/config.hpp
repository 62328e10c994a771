// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "ocs/dataset.hpp"
#include "ocs/regularizer.hpp"
#include "ocs/saliency.hpp"
#include "ocs/schedule.hpp"
#include "ocs/stability.hpp"

namespace ocs {

/// Full description of one training-and-pruning run. Shipped defaults follow
/// the reference CIFAR recipe: 300 epochs, batch 128, SGD momentum 0.9 with
/// weight decay 5e-4, multistep LR (90,180,240,270; 0.2), keep-ratio 0.5,
/// regularization from a fixed epoch 30, epsilon 1e-3, lambda0 = delta =
/// 1e-4 growing every epoch.
struct RunConfig {
  std::string arch = "res4-tiny";  // preset name or architecture JSON path

  std::string dataset = "synth";   // synth | mnist | cifar10
  std::string data_dir;
  SynthSpec synth;

  int total_epochs = 300;
  int batch_size = 128;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  LrSchedule lr;

  double alpha = 0.5;  // FLOPs keep-ratio target
  ScoreOptions score;

  StabilityConfig stability{.gap = 1,
                            .window = 5,
                            .tau = 1e-4,
                            .epsilon = 1e-3,
                            .fixed_sl_start = 30};
  PenaltyConfig penalty;

  bool loss_penalty = true;          // L2 group penalty in the loss
  bool shrink = true;                // direct multiplicative shrink
  bool shrink_per_iteration = false; // apply shrink each step instead of once
                                     // per epoch

  std::string init_weights = "random";  // "random" or a checkpoint path
  std::uint64_t seed = 0;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::string& path);

/// Field-level validation: 0 < alpha <= 1, positive extents, milestones
/// strictly increasing and below the epoch budget. Throws ocs::Error with
/// the offending field named.
void validate_config(const RunConfig& cfg);

}  // namespace ocs
