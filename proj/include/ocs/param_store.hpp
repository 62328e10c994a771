// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ocs/graph.hpp"
#include "ocs/tensor.hpp"

namespace ocs {

/// Trained parameters plus non-trained buffers (batch-norm running
/// statistics) of one model. The version counter increments on every
/// mutation of trained tensors; a tape records it at forward time so that
/// backward can refuse to replay against mutated parameters.
template <typename Scalar>
class ParamStore {
 public:
  std::map<std::string, Tensor<Scalar>>& tensors() { return tensors_; }
  const std::map<std::string, Tensor<Scalar>>& tensors() const {
    return tensors_;
  }
  std::map<std::string, Tensor<Scalar>>& buffers() { return buffers_; }
  const std::map<std::string, Tensor<Scalar>>& buffers() const {
    return buffers_;
  }

  const Tensor<Scalar>& tensor(const std::string& key) const {
    auto it = tensors_.find(key);
    if (it == tensors_.end()) throw Error("missing parameter " + key);
    return it->second;
  }
  const Tensor<Scalar>& buffer(const std::string& key) const {
    auto it = buffers_.find(key);
    if (it == buffers_.end()) throw Error("missing buffer " + key);
    return it->second;
  }

  /// Mutable access to a trained tensor; bumps the version.
  Tensor<Scalar>& mutate(const std::string& key) {
    auto it = tensors_.find(key);
    if (it == tensors_.end()) throw Error("missing parameter " + key);
    ++version_;
    return it->second;
  }
  Tensor<Scalar>& mutate_buffer(const std::string& key) {
    auto it = buffers_.find(key);
    if (it == buffers_.end()) throw Error("missing buffer " + key);
    return it->second;
  }

  void bump_version() { ++version_; }
  std::uint64_t version() const { return version_; }

 private:
  std::map<std::string, Tensor<Scalar>> tensors_;
  std::map<std::string, Tensor<Scalar>> buffers_;
  std::uint64_t version_ = 0;
};

/// Gradient per trained parameter, same keys and shapes as the store.
template <typename Scalar>
using GradMap = std::map<std::string, Tensor<Scalar>>;

/// Allocates zero tensors/buffers for every parameter the graph declares.
template <typename Scalar>
ParamStore<Scalar> make_param_store(const ModelGraph& graph) {
  ParamStore<Scalar> store;
  for (const auto& n : graph.nodes()) {
    for (const auto& [role, shape] : graph.param_shapes(n.id))
      store.tensors()[graph.param_key(n.id, role)] = Tensor<Scalar>(shape);
    for (const auto& [role, shape] : graph.buffer_shapes(n.id))
      store.buffers()[graph.param_key(n.id, role)] = Tensor<Scalar>(shape);
  }
  return store;
}

/// Kaiming-uniform fan-in init for conv/dense weights, zero biases,
/// batch-norm scale 1 / shift 0, running stats (0, 1). Each tensor draws
/// from its own seed stream so the result only depends on (graph, seed).
template <typename Scalar>
ParamStore<Scalar> init_params(const ModelGraph& graph, std::uint64_t seed);

}  // namespace ocs
