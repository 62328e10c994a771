// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ocs/config.hpp"
#include "ocs/dataset.hpp"
#include "ocs/groups.hpp"
#include "ocs/optimizer.hpp"
#include "ocs/regularizer.hpp"
#include "ocs/stability.hpp"
#include "ocs/surgery.hpp"

namespace ocs {

inline constexpr double kNoValue = std::numeric_limits<double>::quiet_NaN();

struct EpochRow {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;    // data term only
  double penalty_loss = 0.0;  // mean L2 group penalty per batch
  double train_accuracy = 0.0;
  double eval_accuracy = 0.0;
  double j = kNoValue;
  double j_avg = kNoValue;
  double lambda = 0.0;
  double temp_ratio = kNoValue;  // achieved keep-ratio of the epoch's
                                 // bookkeeping partition
  bool sl_start = false;  // regularization began this epoch
  bool stable = false;    // partition froze and surgery ran this epoch
};

/// Distribution of per-channel bundle norms, split into the epoch's prune
/// and keep candidates; bins are decade-spaced in [1e-4, 1e2).
struct GroupNormRow {
  int epoch = 0;
  bool prune_set = false;
  int count = 0;
  double mean_norm = 0.0;
  double min_norm = 0.0;
  double max_norm = 0.0;
  int bins[7] = {0, 0, 0, 0, 0, 0, 0};
};

struct RunRecord {
  std::vector<EpochRow> rows;
  int sl_start_epoch = -1;
  int stable_epoch = -1;
  bool pruned = false;
  double final_eval_accuracy = 0.0;
  std::int64_t baseline_macs = 0;
  std::int64_t final_macs = 0;
  double flops_ratio = 1.0;
  std::int64_t baseline_params = 0;
  std::int64_t final_params = 0;
  double params_ratio = 1.0;
  std::string diagnostic;  // non-empty when the run needs attention
};

/// Everything a run owns; checkpoints serialize this struct verbatim so a
/// resumed run continues the exact trajectory.
template <typename Scalar>
struct RunState {
  RunConfig config;
  ModelGraph original_graph;
  ModelGraph graph;
  ParamStore<Scalar> params;
  OptimizerState<Scalar> opt;
  StabilityTracker stability{StabilityConfig{}};
  PenaltyState penalty;
  int next_epoch = 0;
  bool pruned = false;
  std::map<int, std::vector<int>> kept;  // original indices kept at surgery
  PruneSelection final_selection;
  std::int64_t baseline_macs = 0;
  std::vector<EpochRow> rows;
  std::vector<GroupNormRow> norm_rows;
};

template <typename Scalar>
RunState<Scalar> make_run_state(const RunConfig& cfg);

DatasetHandle load_dataset(const RunConfig& cfg);

struct EpochStats {
  double loss = 0.0;
  double penalty = 0.0;
  double accuracy = 0.0;
};

/// Per-step regularization of the current prune candidates: optional loss
/// penalty gradient and optional per-iteration shrink.
template <typename Scalar>
struct PenaltyHook {
  const GroupSet* groups = nullptr;
  const PruneSelection* selection = nullptr;
  double lambda = 0.0;
  bool loss_penalty = false;
  bool shrink_each_step = false;
  double lr = 0.0;
};

/// One pass over the training split in seeded-shuffle mini-batches. Aborts
/// with epoch/batch coordinates on a non-finite loss.
template <typename Scalar>
EpochStats train_epoch(const ModelGraph& graph, ParamStore<Scalar>& params,
                       OptimizerState<Scalar>& opt, const DataSplit& split,
                       int batch_size, std::uint64_t seed, int epoch,
                       const PenaltyHook<Scalar>* hook = nullptr);

template <typename Scalar>
double evaluate(const ModelGraph& graph, ParamStore<Scalar>& params,
                const DataSplit& split, int batch_size);

struct RunPaths {
  std::string out_dir;       // empty: keep everything in memory
  int checkpoint_every = 0;  // additionally snapshot every N epochs
};

/// The full single-cycle pipeline: per-epoch grouping, scoring, bookkeeping
/// partition and stability update; plain training until regularization
/// starts; growing penalty plus shrink during the sparsity stage; one
/// permanent surgery at the stable epoch; pruned training to the budget.
/// Resumes from whatever epoch `state` is at.
template <typename Scalar>
RunRecord run_one_cycle(RunState<Scalar>& state, const DatasetHandle& data,
                        const RunPaths& paths = {});

/// Per-epoch shuffle stream; exposed so resume tests can predict batches.
std::uint64_t epoch_shuffle_seed(std::uint64_t seed, int epoch);

}  // namespace ocs
