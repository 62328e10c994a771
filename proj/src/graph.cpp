// SPDX-License-Identifier: Apache-2.0
#include "ocs/graph.hpp"

#include <algorithm>
#include <set>

namespace ocs {

const char* kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kInput: return "input";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kBatchNorm2d: return "batchnorm2d";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool2d: return "maxpool2d";
    case LayerKind::kGlobalAvgPool: return "globalavgpool";
    case LayerKind::kAdd: return "add";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kDense: return "dense";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& name) {
  static const std::map<std::string, LayerKind> table = {
      {"input", LayerKind::kInput},
      {"conv2d", LayerKind::kConv2d},
      {"batchnorm2d", LayerKind::kBatchNorm2d},
      {"relu", LayerKind::kRelu},
      {"maxpool2d", LayerKind::kMaxPool2d},
      {"globalavgpool", LayerKind::kGlobalAvgPool},
      {"add", LayerKind::kAdd},
      {"flatten", LayerKind::kFlatten},
      {"dense", LayerKind::kDense},
  };
  auto it = table.find(name);
  if (it == table.end()) throw GraphError("unknown layer kind: " + name);
  return it->second;
}

ModelGraph::ModelGraph(std::vector<LayerNode> nodes, int in_channels,
                       int in_height, int in_width)
    : in_channels_(in_channels), in_height_(in_height), in_width_(in_width) {
  if (in_channels <= 0 || in_height <= 0 || in_width <= 0)
    throw GraphError("input extents must be positive");
  validate_and_sort(std::move(nodes));
  shapes_ = infer_shapes(in_height_, in_width_);
}

void ModelGraph::validate_and_sort(std::vector<LayerNode> nodes) {
  if (nodes.empty()) throw GraphError("empty node list");
  std::map<int, std::size_t> by_id;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id < 0) throw GraphError("negative node id");
    if (!by_id.emplace(nodes[i].id, i).second)
      throw GraphError("duplicate node id " + std::to_string(nodes[i].id));
    if (nodes[i].name.empty())
      nodes[i].name = std::string(kind_name(nodes[i].kind)) + "_" +
                      std::to_string(nodes[i].id);
  }
  std::set<std::string> names;
  for (const auto& n : nodes)
    if (!names.insert(n.name).second)
      throw GraphError("duplicate node name " + n.name);

  // Kahn topological sort; detects cycles and dangling references.
  std::map<int, int> indegree;
  std::map<int, std::vector<int>> consumers;
  int input_count = 0;
  for (const auto& n : nodes) {
    if (n.kind == LayerKind::kInput) {
      ++input_count;
      if (!n.inputs.empty()) throw GraphError("input node has predecessors");
    } else if (n.inputs.empty()) {
      throw GraphError("node " + n.name + " has no predecessors");
    }
    if (n.kind == LayerKind::kAdd && n.inputs.size() != 2)
      throw GraphError("add node " + n.name + " needs exactly 2 predecessors");
    if (n.kind != LayerKind::kAdd && n.inputs.size() > 1)
      throw GraphError("node " + n.name + " has more than one predecessor");
    indegree[n.id] = static_cast<int>(n.inputs.size());
    for (int p : n.inputs) {
      if (!by_id.count(p))
        throw GraphError("node " + n.name + " references unknown node " +
                         std::to_string(p));
      consumers[p].push_back(n.id);
    }
  }
  if (input_count != 1) throw GraphError("graph needs exactly one input node");

  // Min-heap on node id keeps the topological order deterministic.
  std::vector<int> ready;
  for (const auto& [id, deg] : indegree)
    if (deg == 0) ready.push_back(id);
  std::make_heap(ready.begin(), ready.end(), std::greater<int>());

  std::vector<LayerNode> sorted;
  sorted.reserve(nodes.size());
  while (!ready.empty()) {
    std::pop_heap(ready.begin(), ready.end(), std::greater<int>());
    int id = ready.back();
    ready.pop_back();
    sorted.push_back(nodes[by_id[id]]);
    // find(), not operator[]: an insert here would make every node look
    // consumed and hide the terminal below.
    if (auto it = consumers.find(id); it != consumers.end()) {
      for (int c : it->second) {
        if (--indegree[c] == 0) {
          ready.push_back(c);
          std::push_heap(ready.begin(), ready.end(), std::greater<int>());
        }
      }
    }
  }
  if (sorted.size() != nodes.size()) throw GraphError("graph contains a cycle");

  // Terminal node = the unique node nobody consumes.
  std::vector<int> terminals;
  for (const auto& n : sorted)
    if (consumers.find(n.id) == consumers.end()) terminals.push_back(n.id);
  if (terminals.size() != 1)
    throw GraphError("graph must have exactly one output node");
  output_node_ = terminals[0];

  nodes_ = std::move(sorted);
}

const LayerNode& ModelGraph::node(int id) const {
  for (const auto& n : nodes_)
    if (n.id == id) return n;
  throw GraphError("no node with id " + std::to_string(id));
}

const NodeShape& ModelGraph::shape(int id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].id == id) return shapes_[i];
  throw GraphError("no node with id " + std::to_string(id));
}

std::vector<NodeShape> ModelGraph::infer_shapes(int height, int width) const {
  std::map<int, NodeShape> out;
  std::vector<NodeShape> result;
  result.reserve(nodes_.size());
  for (const auto& n : nodes_) {
    NodeShape s;
    auto in = [&](std::size_t i) -> const NodeShape& {
      return out.at(n.inputs[i]);
    };
    switch (n.kind) {
      case LayerKind::kInput:
        s = {true, in_channels_, height, width, 0};
        break;
      case LayerKind::kConv2d: {
        const NodeShape& x = in(0);
        if (!x.spatial)
          throw ShapeError("conv node " + n.name + " needs a spatial input");
        if (n.out_channels <= 0 || n.kernel <= 0 || n.stride <= 0 ||
            n.padding < 0 || n.groups <= 0)
          throw GraphError("conv node " + n.name + " has invalid attributes");
        if (x.channels % n.groups != 0 || n.out_channels % n.groups != 0)
          throw ShapeError("conv node " + n.name +
                           ": channels not divisible by groups");
        const int eh = x.height + 2 * n.padding - n.kernel;
        const int ew = x.width + 2 * n.padding - n.kernel;
        if (eh < 0 || ew < 0)
          throw ShapeError("conv node " + n.name + ": kernel exceeds input " +
                           std::to_string(x.height) + "x" +
                           std::to_string(x.width));
        s = {true, n.out_channels, eh / n.stride + 1, ew / n.stride + 1, 0};
        break;
      }
      case LayerKind::kBatchNorm2d:
      case LayerKind::kRelu: {
        const NodeShape& x = in(0);
        if (n.kind == LayerKind::kBatchNorm2d && !x.spatial)
          throw ShapeError("batchnorm node " + n.name +
                           " needs a spatial input");
        s = x;
        break;
      }
      case LayerKind::kMaxPool2d: {
        const NodeShape& x = in(0);
        if (!x.spatial)
          throw ShapeError("pool node " + n.name + " needs a spatial input");
        const int eh = x.height + 2 * n.padding - n.kernel;
        const int ew = x.width + 2 * n.padding - n.kernel;
        if (n.kernel <= 0 || n.stride <= 0 || eh < 0 || ew < 0)
          throw ShapeError("pool node " + n.name + ": window exceeds input");
        s = {true, x.channels, eh / n.stride + 1, ew / n.stride + 1, 0};
        break;
      }
      case LayerKind::kGlobalAvgPool: {
        const NodeShape& x = in(0);
        if (!x.spatial)
          throw ShapeError("pool node " + n.name + " needs a spatial input");
        s = {false, 0, 0, 0, x.channels};
        break;
      }
      case LayerKind::kAdd: {
        const NodeShape& a = in(0);
        const NodeShape& b = in(1);
        if (!(a == b))
          throw ShapeError("add node " + n.name + ": branch shapes differ");
        s = a;
        break;
      }
      case LayerKind::kFlatten: {
        const NodeShape& x = in(0);
        if (!x.spatial)
          throw ShapeError("flatten node " + n.name +
                           " needs a spatial input");
        s = {false, 0, 0, 0, x.channels * x.height * x.width};
        break;
      }
      case LayerKind::kDense: {
        const NodeShape& x = in(0);
        if (x.spatial)
          throw ShapeError("dense node " + n.name +
                           " needs a flat input (flatten or global pool)");
        if (n.out_features <= 0)
          throw GraphError("dense node " + n.name + " has invalid attributes");
        s = {false, 0, 0, 0, n.out_features};
        break;
      }
    }
    out[n.id] = s;
    result.push_back(s);
  }
  return result;
}

int ModelGraph::node_in_channels(int id) const {
  const LayerNode& n = node(id);
  const NodeShape& x = shape(n.inputs.at(0));
  return x.spatial ? x.channels : x.features;
}

int ModelGraph::dense_input_block(int id) const {
  const LayerNode& n = node(id);
  if (n.kind != LayerKind::kDense) return 1;
  const LayerNode& p = node(n.inputs.at(0));
  if (p.kind != LayerKind::kFlatten) return 1;
  const NodeShape& before = shape(p.inputs.at(0));
  return before.height * before.width;
}

std::map<std::string, std::vector<int>> ModelGraph::param_shapes(int id) const {
  const LayerNode& n = node(id);
  std::map<std::string, std::vector<int>> shapes;
  switch (n.kind) {
    case LayerKind::kConv2d: {
      const int in_per_group = node_in_channels(id) / n.groups;
      shapes["w"] = {n.out_channels, in_per_group, n.kernel, n.kernel};
      if (n.bias) shapes["b"] = {n.out_channels};
      break;
    }
    case LayerKind::kBatchNorm2d: {
      const int c = shape(id).channels;
      shapes["gamma"] = {c};
      shapes["beta"] = {c};
      break;
    }
    case LayerKind::kDense: {
      shapes["w"] = {n.out_features, node_in_channels(id)};
      if (n.bias) shapes["b"] = {n.out_features};
      break;
    }
    default:
      break;
  }
  return shapes;
}

std::map<std::string, std::vector<int>> ModelGraph::buffer_shapes(
    int id) const {
  const LayerNode& n = node(id);
  std::map<std::string, std::vector<int>> shapes;
  if (n.kind == LayerKind::kBatchNorm2d) {
    const int c = shape(id).channels;
    shapes["running_mean"] = {c};
    shapes["running_var"] = {c};
  }
  return shapes;
}

std::string ModelGraph::param_key(int id, const std::string& role) const {
  return node(id).name + "." + role;
}

std::pair<int, std::string> ModelGraph::resolve_param_key(
    const std::string& key) const {
  const auto dot = key.rfind('.');
  if (dot == std::string::npos) throw GraphError("malformed param key " + key);
  const std::string name = key.substr(0, dot);
  const std::string role = key.substr(dot + 1);
  for (const auto& n : nodes_)
    if (n.name == name) return {n.id, role};
  throw GraphError("param key names unknown node: " + key);
}

int ModelGraph::num_classes() const {
  const NodeShape& s = shape(output_node_);
  return s.spatial ? s.channels : s.features;
}

bool ModelGraph::operator==(const ModelGraph& other) const {
  if (in_channels_ != other.in_channels_ || in_height_ != other.in_height_ ||
      in_width_ != other.in_width_ || nodes_.size() != other.nodes_.size())
    return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const LayerNode& a = nodes_[i];
    const LayerNode& b = other.nodes_[i];
    if (a.id != b.id || a.name != b.name || a.kind != b.kind ||
        a.inputs != b.inputs || a.out_channels != b.out_channels ||
        a.kernel != b.kernel || a.stride != b.stride ||
        a.padding != b.padding || a.groups != b.groups || a.bias != b.bias ||
        a.out_features != b.out_features)
      return false;
  }
  return true;
}

FlopsReport count_flops(const ModelGraph& graph) {
  return count_flops(graph, graph.input_height(), graph.input_width());
}

FlopsReport count_flops(const ModelGraph& graph, int height, int width,
                        std::int64_t baseline_macs) {
  const std::vector<NodeShape> shapes = graph.infer_shapes(height, width);
  FlopsReport report;
  for (std::size_t i = 0; i < graph.nodes().size(); ++i) {
    const LayerNode& n = graph.nodes()[i];
    std::int64_t macs = 0;
    if (n.kind == LayerKind::kConv2d) {
      const std::int64_t in_per_group = graph.node_in_channels(n.id) / n.groups;
      macs = static_cast<std::int64_t>(n.out_channels) * in_per_group *
             n.kernel * n.kernel * shapes[i].height * shapes[i].width;
    } else if (n.kind == LayerKind::kDense) {
      macs = static_cast<std::int64_t>(n.out_features) *
             graph.node_in_channels(n.id);
    }
    report.node_macs[n.id] = macs;
    report.total_macs += macs;
  }
  report.ratio_to_baseline =
      baseline_macs > 0 ? static_cast<double>(report.total_macs) /
                              static_cast<double>(baseline_macs)
                        : 1.0;
  return report;
}

std::int64_t count_params(const ModelGraph& graph) {
  std::int64_t total = 0;
  for (const auto& n : graph.nodes())
    for (const auto& [role, shape] : graph.param_shapes(n.id)) {
      std::int64_t c = 1;
      for (int d : shape) c *= d;
      total += c;
    }
  return total;
}

}  // namespace ocs
