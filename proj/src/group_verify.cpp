// SPDX-License-Identifier: Apache-2.0
#include "ocs/group_verify.hpp"

#include <algorithm>
#include <cmath>

#include "ocs/autodiff.hpp"
#include "ocs/rng.hpp"
#include "ocs/surgery.hpp"

namespace ocs {
namespace {

/// Fully randomized model state: biases, normalization affine parameters and
/// running statistics all move away from their neutral init so a slice
/// accidentally left out of a bundle breaks the equivalence instead of
/// hiding behind zeros and ones.
ParamStore<double> randomized_params(const ModelGraph& graph,
                                     std::uint64_t seed) {
  ParamStore<double> params = make_param_store<double>(graph);
  for (auto& [key, t] : params.tensors()) {
    Rng rng(derive_seed(seed, std::hash<std::string>{}(key)));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  }
  for (auto& [key, t] : params.buffers()) {
    Rng rng(derive_seed(seed, std::hash<std::string>{}(key) ^ 0x9e37));
    const bool is_var = key.size() >= 3 && key.rfind("var") == key.size() - 3;
    for (std::int64_t i = 0; i < t.size(); ++i)
      t[i] = is_var ? rng.uniform(0.5, 1.5) : rng.uniform(-0.5, 0.5);
  }
  return params;
}

Tensor<double> random_batch(const ModelGraph& graph, int batch_size,
                            std::uint64_t seed) {
  Tensor<double> batch({batch_size, graph.input_channels(),
                        graph.input_height(), graph.input_width()});
  Rng rng(derive_seed(seed, 0x6261746368));
  for (std::int64_t i = 0; i < batch.size(); ++i)
    batch[i] = rng.uniform(-1.0, 1.0);
  return batch;
}

}  // namespace

GroupVerifyResult verify_group_channel(const ModelGraph& graph,
                                       const GroupSet& groups, int group_id,
                                       int channel, std::uint64_t seed,
                                       int batch_size, double tolerance) {
  const ParamStore<double> params = randomized_params(graph, seed);
  const Tensor<double> batch = random_batch(graph, batch_size, seed);

  ParamStore<double> zeroed = params;
  const PruningGroup& g = groups.group(group_id);
  for (const ParamSlice& s : g.slices) {
    Tensor<double>& t =
        s.trained ? zeroed.mutate(s.key) : zeroed.mutate_buffer(s.key);
    for_each_slice_index(s, t.shape(), channel, [&](std::size_t i) {
      t[static_cast<std::int64_t>(i)] = 0.0;
    });
  }
  ParamStore<double> zeroed_run = zeroed;
  const Tensor<double> logits_zeroed =
      forward(graph, zeroed_run, batch, /*training=*/false,
              static_cast<Tape<double>*>(nullptr));

  ParamStore<double> full = params;
  PrunedModel<double> pruned =
      apply_prune<double>(graph, groups, {{group_id, {channel}}}, full);
  const Tensor<double> logits_removed = forward(
      pruned.graph, pruned.params, batch, /*training=*/false,
      static_cast<Tape<double>*>(nullptr));

  // Map the zeroed model's outputs onto the pruned model's output extent.
  const int out_group = groups.group_of_node.at(graph.output_node());
  const std::vector<int>& out_keep = pruned.kept.at(out_group);
  Tensor<double> reference = logits_zeroed;
  if (static_cast<std::int64_t>(out_keep.size()) <
      static_cast<std::int64_t>(groups.group(out_group).channels)) {
    const NodeShape& s = graph.shape(graph.output_node());
    if (!s.spatial)
      throw GroupingError("pruned flat output space is unsupported");
    reference = gather_channels(logits_zeroed, 1, 1, out_keep);
  }

  GroupVerifyResult result{group_id, channel, 0.0, false};
  if (!reference.same_shape(logits_removed))
    throw ShapeError("verify: output shapes diverge after surgery");
  for (std::int64_t i = 0; i < reference.size(); ++i)
    result.max_abs_diff = std::max(
        result.max_abs_diff, std::abs(reference[i] - logits_removed[i]));
  result.ok = result.max_abs_diff <= tolerance;
  return result;
}

std::vector<GroupVerifyResult> verify_groups(const ModelGraph& graph,
                                             std::uint64_t seed,
                                             int batch_size,
                                             double tolerance) {
  const GroupSet groups = build_groups(graph);
  std::vector<GroupVerifyResult> results;
  for (const PruningGroup& g : groups.groups) {
    if (!g.prunable || g.channels < 2) continue;
    for (int c = 0; c < g.channels; ++c)
      results.push_back(verify_group_channel(graph, groups, g.id, c,
                                             derive_seed(seed, g.id),
                                             batch_size, tolerance));
  }
  return results;
}

}  // namespace ocs
