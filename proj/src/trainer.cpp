// SPDX-License-Identifier: Apache-2.0
#include "ocs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <utility>

#include "ocs/arch.hpp"
#include "ocs/autodiff.hpp"
#include "ocs/checkpoint.hpp"
#include "ocs/report.hpp"
#include "ocs/rng.hpp"
#include "ocs/schedule.hpp"

namespace ocs {

namespace {

// High tag so the per-epoch streams cannot collide with the per-tensor
// init streams (small node-derived tags).
constexpr std::uint64_t kShuffleStream = 0x65706f63680000ULL;

/// The quantity the penalty and shrink act on: sum over a channel's trained
/// slices of the raw slice L2 norm.
template <typename Scalar>
double bundle_norm(const GroupSet& groups, int gid, int channel,
                   const ParamStore<Scalar>& params) {
  double total = 0.0;
  for (const ParamSlice& slice : groups.group(gid).slices) {
    if (!slice.trained) continue;
    const Tensor<Scalar>& t = params.tensor(slice.key);
    double sq = 0.0;
    for_each_slice_index(slice, t.shape(), channel, [&](std::size_t i) {
      const double v = static_cast<double>(t[static_cast<std::int64_t>(i)]);
      sq += v * v;
    });
    total += std::sqrt(sq);
  }
  return total;
}

GroupNormRow summarize_norms(int epoch, bool prune_set,
                             const std::vector<double>& norms) {
  GroupNormRow row;
  row.epoch = epoch;
  row.prune_set = prune_set;
  row.count = static_cast<int>(norms.size());
  if (norms.empty()) return row;
  double sum = 0.0;
  row.min_norm = norms.front();
  row.max_norm = norms.front();
  for (double v : norms) {
    sum += v;
    row.min_norm = std::min(row.min_norm, v);
    row.max_norm = std::max(row.max_norm, v);
    // Decade bins anchored at 1e-4; under/overflow clamps to the edges.
    const double safe = std::max(v, 1e-300);
    const int bin = std::clamp(
        static_cast<int>(std::floor(std::log10(safe))) + 4, 0, 6);
    ++row.bins[bin];
  }
  row.mean_norm = sum / static_cast<double>(norms.size());
  return row;
}

template <typename Scalar>
void append_norm_rows(std::vector<GroupNormRow>& out, int epoch,
                      const GroupSet& groups, const PruneSelection& selection,
                      const ParamStore<Scalar>& params) {
  std::vector<double> keep_norms, prune_norms;
  for (const PruningGroup& g : groups.groups) {
    if (!g.prunable) continue;
    const auto sel = selection.find(g.id);
    std::size_t cursor = 0;
    for (int c = 0; c < g.channels; ++c) {
      bool removed = false;
      if (sel != selection.end()) {
        while (cursor < sel->second.size() && sel->second[cursor] < c)
          ++cursor;
        removed = cursor < sel->second.size() && sel->second[cursor] == c;
      }
      (removed ? prune_norms : keep_norms)
          .push_back(bundle_norm(groups, g.id, c, params));
    }
  }
  out.push_back(summarize_norms(epoch, false, keep_norms));
  out.push_back(summarize_norms(epoch, true, prune_norms));
}

std::string epoch_checkpoint_name(int next_epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "checkpoint-%04d.bin", next_epoch);
  return buf;
}

}  // namespace

std::uint64_t epoch_shuffle_seed(std::uint64_t seed, int epoch) {
  return derive_seed(seed, kShuffleStream + static_cast<std::uint64_t>(epoch));
}

template <typename Scalar>
RunState<Scalar> make_run_state(const RunConfig& cfg) {
  validate_config(cfg);
  RunState<Scalar> state;
  state.config = cfg;
  state.original_graph = load_arch(cfg.arch);
  state.graph = state.original_graph;
  state.stability = StabilityTracker(cfg.stability);
  if (cfg.init_weights == "random") {
    state.params = init_params<Scalar>(state.graph, cfg.seed);
  } else {
    RunState<Scalar> donor = load_checkpoint<Scalar>(cfg.init_weights);
    if (arch_to_json(donor.graph) != arch_to_json(state.graph))
      throw Error("init_weights checkpoint holds a different architecture "
                  "than \"" + cfg.arch + "\"");
    state.params = std::move(donor.params);
  }
  state.opt = make_optimizer_state(state.params, cfg.momentum,
                                   cfg.weight_decay, lr_at(cfg.lr, 0));
  state.baseline_macs = count_flops(state.original_graph).total_macs;
  return state;
}

DatasetHandle load_dataset(const RunConfig& cfg) {
  if (cfg.dataset == "synth") return synth_dataset(cfg.synth);
  if (cfg.dataset == "mnist") return load_mnist(cfg.data_dir);
  if (cfg.dataset == "cifar10") return load_cifar10(cfg.data_dir);
  throw Error("unknown dataset kind: " + cfg.dataset);
}

template <typename Scalar>
EpochStats train_epoch(const ModelGraph& graph, ParamStore<Scalar>& params,
                       OptimizerState<Scalar>& opt, const DataSplit& split,
                       int batch_size, std::uint64_t seed, int epoch,
                       const PenaltyHook<Scalar>* hook) {
  const int n = split.count();
  if (n == 0) throw Error("train_epoch: empty training split");
  if (batch_size <= 0) throw Error("train_epoch: batch size must be positive");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(epoch_shuffle_seed(seed, epoch));
  rng.shuffle(order);

  double loss_sum = 0.0;
  double penalty_sum = 0.0;
  int correct = 0;
  int batches = 0;
  for (int from = 0; from < n; from += batch_size) {
    const int count = std::min(batch_size, n - from);
    const DataSplit batch =
        take_batch(split, order, static_cast<std::size_t>(from),
                   static_cast<std::size_t>(count));
    const Tensor<Scalar> x = batch.images.template cast<Scalar>();
    const std::vector<int> labels(batch.labels.begin(), batch.labels.end());

    if (hook && hook->shrink_each_step && hook->lambda > 0.0)
      direct_shrink(*hook->groups, *hook->selection, params, hook->lambda,
                    hook->lr);

    Tape<Scalar> tape;
    const Tensor<Scalar> logits = forward(graph, params, x, true, &tape);
    const auto xent = softmax_cross_entropy(logits, labels);
    if (!std::isfinite(static_cast<double>(xent.loss)))
      throw NumericError("non-finite training loss at epoch " +
                         std::to_string(epoch) + ", batch " +
                         std::to_string(batches));

    GradMap<Scalar> grads = backward(tape, params, xent.dlogits);
    double pen = 0.0;
    if (hook && hook->loss_penalty && hook->lambda > 0.0)
      pen = penalty_loss_and_grads(*hook->groups, *hook->selection, params,
                                   hook->lambda, grads);
    sgd_step(params, grads, opt);

    loss_sum += static_cast<double>(xent.loss) * count;
    penalty_sum += pen;
    correct += xent.correct;
    ++batches;
  }

  EpochStats stats;
  stats.loss = loss_sum / n;
  stats.penalty = batches > 0 ? penalty_sum / batches : 0.0;
  stats.accuracy = static_cast<double>(correct) / n;
  return stats;
}

template <typename Scalar>
double evaluate(const ModelGraph& graph, ParamStore<Scalar>& params,
                const DataSplit& split, int batch_size) {
  const int n = split.count();
  if (n == 0) return 0.0;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  int correct = 0;
  for (int from = 0; from < n; from += batch_size) {
    const int count = std::min(batch_size, n - from);
    const DataSplit batch =
        take_batch(split, order, static_cast<std::size_t>(from),
                   static_cast<std::size_t>(count));
    const Tensor<Scalar> x = batch.images.template cast<Scalar>();
    const Tensor<Scalar> logits =
        forward(graph, params, x, false, static_cast<Tape<Scalar>*>(nullptr));
    const int classes = logits.dim(1);
    for (int i = 0; i < count; ++i) {
      const Scalar* z = logits.data() + static_cast<std::int64_t>(i) * classes;
      int arg = 0;
      for (int c = 1; c < classes; ++c)
        if (z[c] > z[arg]) arg = c;
      if (arg == batch.labels[static_cast<std::size_t>(i)]) ++correct;
    }
  }
  return static_cast<double>(correct) / n;
}

template <typename Scalar>
RunRecord run_one_cycle(RunState<Scalar>& state, const DatasetHandle& data,
                        const RunPaths& paths) {
  const RunConfig& cfg = state.config;
  validate_config(cfg);

  if (data.channels != state.original_graph.input_channels() ||
      data.height != state.original_graph.input_height() ||
      data.width != state.original_graph.input_width())
    throw ShapeError(
        "dataset samples are " + std::to_string(data.channels) + "x" +
        std::to_string(data.height) + "x" + std::to_string(data.width) +
        " but the model expects " +
        std::to_string(state.original_graph.input_channels()) + "x" +
        std::to_string(state.original_graph.input_height()) + "x" +
        std::to_string(state.original_graph.input_width()));
  if (data.classes != state.original_graph.num_classes())
    throw ShapeError("dataset has " + std::to_string(data.classes) +
                     " classes but the model head emits " +
                     std::to_string(state.original_graph.num_classes()));

  const bool to_disk = !paths.out_dir.empty();
  if (to_disk) std::filesystem::create_directories(paths.out_dir);

  for (int epoch = state.next_epoch; epoch < cfg.total_epochs; ++epoch) {
    const double lr = lr_at(cfg.lr, epoch);
    state.opt.learning_rate = lr;

    EpochRow row;
    row.epoch = epoch;
    row.lr = lr;

    EpochStats stats;
    if (!state.pruned) {
      // Bookkeeping partition of the current weights.
      const GroupSet groups = build_groups(state.graph);
      const auto scores =
          score_groups(state.graph, groups, state.params, cfg.score);
      const PartitionResult part =
          partition_by_flops(state.graph, groups, scores, cfg.alpha);
      row.temp_ratio = part.achieved_ratio;
      append_norm_rows(state.norm_rows, epoch, groups, part.selection,
                       state.params);

      const StabilityEvents ev =
          state.stability.observe(epoch, signature_of(groups, part.selection));
      row.j = ev.j ? *ev.j : kNoValue;
      row.j_avg = ev.j_avg ? *ev.j_avg : kNoValue;
      row.sl_start = ev.sl_start_fired;
      row.stable = ev.stable_fired;

      if (ev.stable_fired) {
        // The partition froze: permanent surgery, then this epoch already
        // trains the pruned network.
        PrunedModel<Scalar> pruned =
            apply_prune(state.graph, groups, part.selection, state.params,
                        &state.opt.momentum_buffers);
        state.graph = std::move(pruned.graph);
        state.params = std::move(pruned.params);
        state.kept = std::move(pruned.kept);
        state.final_selection = part.selection;
        state.pruned = true;
        stats = train_epoch<Scalar>(state.graph, state.params, state.opt,
                                    data.train, cfg.batch_size, cfg.seed,
                                    epoch, nullptr);
      } else if (state.stability.sl_start_epoch() >= 0) {
        // Sparsity stage: grow the coefficient, shrink the candidates, train
        // with the group penalty.
        if (ev.sl_start_fired)
          state.penalty.begin(cfg.penalty, epoch);
        else
          state.penalty.advance(cfg.penalty, epoch);
        row.lambda = state.penalty.lambda;
        if (cfg.shrink && !cfg.shrink_per_iteration)
          direct_shrink(groups, part.selection, state.params,
                        state.penalty.lambda, lr);
        PenaltyHook<Scalar> hook;
        hook.groups = &groups;
        hook.selection = &part.selection;
        hook.lambda = state.penalty.lambda;
        hook.loss_penalty = cfg.loss_penalty;
        hook.shrink_each_step = cfg.shrink && cfg.shrink_per_iteration;
        hook.lr = lr;
        stats = train_epoch(state.graph, state.params, state.opt, data.train,
                            cfg.batch_size, cfg.seed, epoch, &hook);
      } else {
        stats = train_epoch<Scalar>(state.graph, state.params, state.opt,
                                    data.train, cfg.batch_size, cfg.seed,
                                    epoch, nullptr);
      }
    } else {
      stats = train_epoch<Scalar>(state.graph, state.params, state.opt,
                                  data.train, cfg.batch_size, cfg.seed, epoch,
                                  nullptr);
    }

    row.train_loss = stats.loss;
    row.penalty_loss = stats.penalty;
    row.train_accuracy = stats.accuracy;
    row.eval_accuracy =
        evaluate(state.graph, state.params, data.eval, cfg.batch_size);
    state.rows.push_back(row);
    state.next_epoch = epoch + 1;

    if (to_disk && paths.checkpoint_every > 0 &&
        state.next_epoch % paths.checkpoint_every == 0 &&
        state.next_epoch < cfg.total_epochs)
      save_checkpoint(paths.out_dir + "/" +
                          epoch_checkpoint_name(state.next_epoch),
                      state);
  }

  RunRecord record;
  record.rows = state.rows;
  record.sl_start_epoch = state.stability.sl_start_epoch();
  record.stable_epoch = state.stability.stable_epoch();
  record.pruned = state.pruned;
  record.final_eval_accuracy =
      state.rows.empty() ? 0.0 : state.rows.back().eval_accuracy;
  record.baseline_macs = state.baseline_macs;
  record.final_macs = count_flops(state.graph).total_macs;
  record.flops_ratio =
      record.baseline_macs > 0
          ? static_cast<double>(record.final_macs) / record.baseline_macs
          : 1.0;
  record.baseline_params = count_params(state.original_graph);
  record.final_params = count_params(state.graph);
  record.params_ratio =
      record.baseline_params > 0
          ? static_cast<double>(record.final_params) / record.baseline_params
          : 1.0;
  if (!state.pruned)
    record.diagnostic =
        "completed unpruned: the partition never stabilized within " +
        std::to_string(cfg.total_epochs) + " epochs (sl_start=" +
        std::to_string(record.sl_start_epoch) +
        "); extend the budget or loosen epsilon";

  if (to_disk) {
    write_metrics_csv(paths.out_dir + "/metrics.csv", state.rows);
    write_partition_log(paths.out_dir + "/partitions.jsonl", cfg.stability,
                        state.stability);
    write_groupnorm_csv(paths.out_dir + "/groupnorm.csv", state.norm_rows);
    write_summary_json(paths.out_dir + "/summary.json", cfg, record);
    nlohmann::json extra;
    extra["pruned"] = record.pruned;
    extra["flops_ratio"] = record.flops_ratio;
    extra["final_eval_accuracy"] = record.final_eval_accuracy;
    save_model(paths.out_dir + "/model.bin", state.graph, state.params, extra);
    save_checkpoint(paths.out_dir + "/checkpoint.bin", state);
  }
  return record;
}

template RunState<float> make_run_state<float>(const RunConfig&);
template RunState<double> make_run_state<double>(const RunConfig&);
template EpochStats train_epoch<float>(const ModelGraph&, ParamStore<float>&,
                                       OptimizerState<float>&,
                                       const DataSplit&, int, std::uint64_t,
                                       int, const PenaltyHook<float>*);
template EpochStats train_epoch<double>(const ModelGraph&,
                                        ParamStore<double>&,
                                        OptimizerState<double>&,
                                        const DataSplit&, int, std::uint64_t,
                                        int, const PenaltyHook<double>*);
template double evaluate<float>(const ModelGraph&, ParamStore<float>&,
                                const DataSplit&, int);
template double evaluate<double>(const ModelGraph&, ParamStore<double>&,
                                 const DataSplit&, int);
template RunRecord run_one_cycle<float>(RunState<float>&,
                                        const DatasetHandle&,
                                        const RunPaths&);
template RunRecord run_one_cycle<double>(RunState<double>&,
                                         const DatasetHandle&,
                                         const RunPaths&);

}  // namespace ocs
