// SPDX-License-Identifier: Apache-2.0
#include "ocs/arch.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

#include "ocs/error.hpp"

namespace ocs {
namespace {

using nlohmann::json;

int require_int(const json& node, const char* field, const std::string& name) {
  if (!node.contains(field) || !node[field].is_number_integer())
    throw GraphError("node " + name + " needs integer field '" + field + "'");
  return node[field].get<int>();
}

/// Incremental graph assembly for the built-in presets. Methods return the
/// new node id so stages can be chained and branched.
struct Builder {
  std::vector<LayerNode> nodes;
  int next_id = 0;

  int add_node(LayerNode n) {
    n.id = next_id++;
    nodes.push_back(std::move(n));
    return nodes.back().id;
  }
  int input() { return add_node({.name = "input", .kind = LayerKind::kInput}); }
  int conv(const std::string& name, int from, int out_ch, int k, int stride = 1,
           int padding = 0, int groups = 1, bool bias = false) {
    return add_node({.name = name,
                     .kind = LayerKind::kConv2d,
                     .inputs = {from},
                     .out_channels = out_ch,
                     .kernel = k,
                     .stride = stride,
                     .padding = padding,
                     .groups = groups,
                     .bias = bias});
  }
  int bn(const std::string& name, int from) {
    return add_node(
        {.name = name, .kind = LayerKind::kBatchNorm2d, .inputs = {from}});
  }
  int relu(const std::string& name, int from) {
    return add_node({.name = name, .kind = LayerKind::kRelu, .inputs = {from}});
  }
  int maxpool(const std::string& name, int from, int k, int stride) {
    return add_node({.name = name,
                     .kind = LayerKind::kMaxPool2d,
                     .inputs = {from},
                     .kernel = k,
                     .stride = stride});
  }
  int gap(const std::string& name, int from) {
    return add_node(
        {.name = name, .kind = LayerKind::kGlobalAvgPool, .inputs = {from}});
  }
  int add(const std::string& name, int a, int b) {
    return add_node({.name = name, .kind = LayerKind::kAdd, .inputs = {a, b}});
  }
  int flatten(const std::string& name, int from) {
    return add_node(
        {.name = name, .kind = LayerKind::kFlatten, .inputs = {from}});
  }
  int dense(const std::string& name, int from, int out, bool bias = true) {
    return add_node({.name = name,
                     .kind = LayerKind::kDense,
                     .inputs = {from},
                     .bias = bias,
                     .out_features = out});
  }
  /// conv -> bn -> relu; returns the relu id.
  int cbr(const std::string& stem, int from, int out_ch, int k, int stride = 1,
          int padding = 0, int groups = 1) {
    int c = conv("conv" + stem, from, out_ch, k, stride, padding, groups);
    return relu("relu" + stem, bn("bn" + stem, c));
  }
};

/// Bare two-conv chain used by the grouping walkthroughs.
ModelGraph make_toy2conv() {
  Builder b;
  int x = b.input();
  x = b.relu("relu1", b.bn("bn1", b.conv("conv1", x, 8, 3, 1, 1)));
  x = b.conv("conv2", x, 4, 3, 1, 1);
  return ModelGraph(std::move(b.nodes), 3, 8, 8);
}

/// Plain conv stack with one pooling stage and a dense classifier.
ModelGraph make_vggtiny() {
  Builder b;
  int x = b.input();
  x = b.cbr("1", x, 16, 3, 1, 1);
  x = b.cbr("2", x, 16, 3, 1, 1);
  x = b.maxpool("pool1", x, 2, 2);
  x = b.cbr("3", x, 32, 3, 1, 1);
  x = b.dense("fc", b.flatten("flat", x), 10);
  return ModelGraph(std::move(b.nodes), 1, 12, 12);
}

/// Two residual blocks: identity shortcut, then a strided projection block.
ModelGraph make_restiny() {
  Builder b;
  int x = b.input();
  int stem = b.cbr("0", x, 16, 3, 1, 1);
  int y = b.cbr("1a", stem, 16, 3, 1, 1);
  y = b.bn("bn1b", b.conv("conv1b", y, 16, 3, 1, 1));
  int r1 = b.relu("relu1", b.add("add1", y, stem));
  y = b.cbr("2a", r1, 32, 3, 2, 1);
  y = b.bn("bn2b", b.conv("conv2b", y, 32, 3, 1, 1));
  int proj = b.bn("bn2s", b.conv("conv2s", r1, 32, 1, 2, 0));
  int r2 = b.relu("relu2", b.add("add2", y, proj));
  b.dense("fc", b.gap("gap", r2), 10);
  return ModelGraph(std::move(b.nodes), 1, 12, 12);
}

/// Depthwise-separable stage between two standard convs.
ModelGraph make_mobiletiny() {
  Builder b;
  int x = b.input();
  x = b.cbr("1", x, 16, 3, 1, 1);
  x = b.cbr("dw", x, 16, 3, 1, 1, /*groups=*/16);
  x = b.cbr("pw", x, 32, 1, 1, 0);
  x = b.dense("fc", b.gap("gap", x), 10);
  return ModelGraph(std::move(b.nodes), 1, 12, 12);
}

/// Four-conv residual net with a 1x1 projection shortcut; channel widths are
/// chosen so one channel never moves the MAC total by more than ~0.8%.
ModelGraph make_res4() {
  Builder b;
  int x = b.input();
  int stem = b.cbr("1", x, 96, 3, 1, 1);
  int y = b.cbr("2", stem, 128, 3, 1, 1);
  y = b.bn("bn3", b.conv("conv3", y, 96, 3, 1, 1));
  int proj = b.bn("bns", b.conv("convs", stem, 96, 1, 1, 0));
  int r = b.relu("relu3", b.add("add3", y, proj));
  b.dense("fc", b.gap("gap", r), 3);
  return ModelGraph(std::move(b.nodes), 1, 8, 8);
}

/// Uniform-width chain for partition accuracy checks.
ModelGraph make_chain96() {
  Builder b;
  int x = b.input();
  x = b.cbr("1", x, 96, 3, 1, 1);
  x = b.cbr("2", x, 96, 3, 1, 1);
  x = b.cbr("3", x, 96, 3, 1, 1);
  x = b.cbr("4", x, 96, 3, 1, 1);
  b.dense("fc", b.gap("gap", x), 10);
  return ModelGraph(std::move(b.nodes), 3, 8, 8);
}

/// Mixed-width chain with a pooling stage and a hidden dense layer.
ModelGraph make_mixed96() {
  Builder b;
  int x = b.input();
  x = b.cbr("1", x, 64, 3, 1, 1);
  x = b.cbr("2", x, 128, 3, 1, 1);
  x = b.maxpool("pool1", x, 2, 2);
  x = b.cbr("3", x, 96, 3, 1, 1);
  int h = b.dense("fc1", b.flatten("flat", x), 96);
  b.dense("fc2", b.relu("relufc", h), 10);
  return ModelGraph(std::move(b.nodes), 3, 8, 8);
}

/// Small classifier for dataset calibration and fast end-to-end tests.
ModelGraph make_tinycnn() {
  Builder b;
  int x = b.input();
  x = b.cbr("1", x, 12, 3, 1, 1);
  x = b.maxpool("pool1", x, 2, 2);
  x = b.cbr("2", x, 24, 3, 1, 1);
  x = b.dense("fc", b.gap("gap", x), 3);
  return ModelGraph(std::move(b.nodes), 1, 8, 8);
}

const std::map<std::string, std::function<ModelGraph()>>& preset_table() {
  static const std::map<std::string, std::function<ModelGraph()>> table = {
      {"toy2conv", make_toy2conv},     {"vgg-tiny", make_vggtiny},
      {"resnet-tiny", make_restiny},   {"mobile-tiny", make_mobiletiny},
      {"res4-tiny", make_res4},        {"chain-96", make_chain96},
      {"mixed-96", make_mixed96},      {"tiny-cnn", make_tinycnn},
  };
  return table;
}

}  // namespace

ModelGraph build_model(const json& spec) {
  if (!spec.is_object() || !spec.contains("input") || !spec.contains("nodes"))
    throw GraphError("architecture spec needs 'input' and 'nodes'");
  const json& in = spec["input"];
  const int c = require_int(in, "channels", "input");
  const int h = require_int(in, "height", "input");
  const int w = require_int(in, "width", "input");

  std::vector<LayerNode> nodes;
  for (const json& jn : spec["nodes"]) {
    LayerNode n;
    n.id = require_int(jn, "id", jn.value("name", "?"));
    n.name = jn.value("name", "");
    n.kind = kind_from_name(jn.value("kind", ""));
    if (jn.contains("inputs"))
      for (const json& p : jn["inputs"]) n.inputs.push_back(p.get<int>());
    switch (n.kind) {
      case LayerKind::kConv2d:
        n.out_channels = require_int(jn, "out_channels", n.name);
        n.kernel = require_int(jn, "kernel", n.name);
        n.stride = jn.value("stride", 1);
        n.padding = jn.value("padding", 0);
        n.groups = jn.value("groups", 1);
        n.bias = jn.value("bias", false);
        break;
      case LayerKind::kMaxPool2d:
        n.kernel = require_int(jn, "kernel", n.name);
        n.stride = jn.value("stride", n.kernel);
        n.padding = jn.value("padding", 0);
        break;
      case LayerKind::kDense:
        n.out_features = require_int(jn, "out_features", n.name);
        n.bias = jn.value("bias", true);
        break;
      default:
        break;
    }
    nodes.push_back(std::move(n));
  }
  return ModelGraph(std::move(nodes), c, h, w);
}

json arch_to_json(const ModelGraph& graph) {
  json spec;
  spec["input"] = {{"channels", graph.input_channels()},
                   {"height", graph.input_height()},
                   {"width", graph.input_width()}};
  json nodes = json::array();
  for (const LayerNode& n : graph.nodes()) {
    json jn;
    jn["id"] = n.id;
    jn["name"] = n.name;
    jn["kind"] = kind_name(n.kind);
    if (!n.inputs.empty()) jn["inputs"] = n.inputs;
    switch (n.kind) {
      case LayerKind::kConv2d:
        jn["out_channels"] = n.out_channels;
        jn["kernel"] = n.kernel;
        jn["stride"] = n.stride;
        jn["padding"] = n.padding;
        jn["groups"] = n.groups;
        jn["bias"] = n.bias;
        break;
      case LayerKind::kMaxPool2d:
        jn["kernel"] = n.kernel;
        jn["stride"] = n.stride;
        jn["padding"] = n.padding;
        break;
      case LayerKind::kDense:
        jn["out_features"] = n.out_features;
        jn["bias"] = n.bias;
        break;
      default:
        break;
    }
    nodes.push_back(std::move(jn));
  }
  spec["nodes"] = std::move(nodes);
  return spec;
}

bool is_preset(const std::string& name) {
  return preset_table().count(name) > 0;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, make] : preset_table()) names.push_back(name);
  return names;
}

ModelGraph preset_arch(const std::string& name) {
  auto it = preset_table().find(name);
  if (it == preset_table().end())
    throw GraphError("unknown preset architecture: " + name);
  return it->second();
}

ModelGraph load_arch(const std::string& name_or_path) {
  if (is_preset(name_or_path)) return preset_arch(name_or_path);
  std::ifstream in(name_or_path);
  if (!in)
    throw IoError("cannot open architecture file or unknown preset: " +
                  name_or_path);
  json spec;
  try {
    in >> spec;
  } catch (const json::exception& e) {
    throw IoError("malformed architecture JSON " + name_or_path + ": " +
                  e.what());
  }
  return build_model(spec);
}

}  // namespace ocs
