// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ocs/error.hpp"

namespace ocs {

enum class LayerKind {
  kInput,
  kConv2d,
  kBatchNorm2d,
  kRelu,
  kMaxPool2d,
  kGlobalAvgPool,
  kAdd,
  kFlatten,
  kDense,
};

const char* kind_name(LayerKind kind);
LayerKind kind_from_name(const std::string& name);

/// Output extent of one node: spatial feature map [C,H,W] or a flat feature
/// vector after flatten / global pooling / dense.
struct NodeShape {
  bool spatial = false;
  int channels = 0;  // spatial only
  int height = 0;
  int width = 0;
  int features = 0;  // flat only
  std::int64_t count() const {
    return spatial ? static_cast<std::int64_t>(channels) * height * width
                   : features;
  }
  bool operator==(const NodeShape&) const = default;
};

struct LayerNode {
  int id = -1;
  std::string name;
  LayerKind kind = LayerKind::kInput;
  std::vector<int> inputs;  // predecessor node ids

  // conv2d
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  int groups = 1;
  bool bias = false;  // conv2d / dense

  // dense
  int out_features = 0;
};

/// Per-node multiply-accumulate counts for one input resolution.
struct FlopsReport {
  std::map<int, std::int64_t> node_macs;
  std::int64_t total_macs = 0;
  double ratio_to_baseline = 1.0;
};

/// Architecture IR: a DAG of layer nodes in topological order with inferred
/// output shapes. Parameter tensors are stored separately (ParamStore); the
/// graph only knows their shapes.
class ModelGraph {
 public:
  ModelGraph() = default;

  /// Validates the node list, sorts topologically and infers shapes.
  /// Node 0 must be the unique kInput node.
  ModelGraph(std::vector<LayerNode> nodes, int in_channels, int in_height,
             int in_width);

  const std::vector<LayerNode>& nodes() const { return nodes_; }
  const LayerNode& node(int id) const;
  int output_node() const { return output_node_; }
  int input_channels() const { return in_channels_; }
  int input_height() const { return in_height_; }
  int input_width() const { return in_width_; }
  int num_classes() const;

  const NodeShape& shape(int id) const;
  /// Re-runs shape inference at a different input resolution; throws on
  /// conflicts. Returns per-node shapes without touching the graph.
  std::vector<NodeShape> infer_shapes(int height, int width) const;

  /// Input channel count actually consumed by a conv/dense node.
  int node_in_channels(int id) const;
  /// Spatial positions folded into each channel at a dense input
  /// (H*W of the flattened producer, 1 otherwise).
  int dense_input_block(int id) const;

  /// Shapes of the trainable parameters of one node, keyed by short role
  /// ("w", "b", "gamma", "beta"). Empty for parameter-free kinds.
  std::map<std::string, std::vector<int>> param_shapes(int id) const;
  /// Shapes of non-trained buffers ("running_mean", "running_var").
  std::map<std::string, std::vector<int>> buffer_shapes(int id) const;

  /// Canonical parameter key, e.g. "conv1.w".
  std::string param_key(int id, const std::string& role) const;
  /// Inverse of param_key; throws if the key names no parameter.
  std::pair<int, std::string> resolve_param_key(const std::string& key) const;

  bool operator==(const ModelGraph& other) const;

 private:
  void validate_and_sort(std::vector<LayerNode> nodes);
  std::vector<LayerNode> nodes_;
  std::vector<NodeShape> shapes_;
  int in_channels_ = 0;
  int in_height_ = 0;
  int in_width_ = 0;
  int output_node_ = -1;
};

/// MAC counts at the graph's native input resolution: conv contributes
/// C_out*C_in/groups*K^2*H_out*W_out, dense contributes out*in, everything
/// else counts as zero.
FlopsReport count_flops(const ModelGraph& graph);
FlopsReport count_flops(const ModelGraph& graph, int height, int width,
                        std::int64_t baseline_macs = 0);

std::int64_t count_params(const ModelGraph& graph);

}  // namespace ocs
