// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "ocs/trainer.hpp"

namespace ocs {

/// Per-epoch metric log. Columns: epoch, lr, train_loss, penalty_loss,
/// train_accuracy, eval_accuracy, j, j_avg, lambda, temp_ratio, event.
void write_metrics_csv(const std::string& path,
                       const std::vector<EpochRow>& rows);
std::vector<EpochRow> read_metrics_csv(const std::string& path);

/// Line-oriented JSON partition log: one meta line (detector settings), one
/// line per epoch with the retained sets, one trailing events line.
void write_partition_log(const std::string& path, const StabilityConfig& cfg,
                         const StabilityTracker& tracker);

struct ReplayResult {
  int epochs = 0;
  int sl_start_epoch = -1;
  int stable_epoch = -1;
  int recorded_sl_start = -1;
  int recorded_stable = -1;
  bool match = false;
};

/// Recomputes similarities and events from a partition log and compares them
/// against the recorded outcome.
ReplayResult replay_stability_log(const std::string& path);

void write_groupnorm_csv(const std::string& path,
                         const std::vector<GroupNormRow>& rows);

void write_summary_json(const std::string& path, const RunConfig& cfg,
                        const RunRecord& record);

/// Renders the logs in a run directory (metrics.csv + summary.json) as a
/// plain-text table; validates the CSV schema strictly.
std::string render_report(const std::string& out_dir);

}  // namespace ocs
