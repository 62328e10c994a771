// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ocs/param_store.hpp"

namespace ocs {

/// SGD with classic momentum and coupled weight decay:
///   v <- momentum*v + g + weight_decay*w
///   w <- w - lr*v
template <typename Scalar>
struct OptimizerState {
  std::map<std::string, Tensor<Scalar>> momentum_buffers;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double learning_rate = 0.1;
};

template <typename Scalar>
OptimizerState<Scalar> make_optimizer_state(const ParamStore<Scalar>& params,
                                            double momentum,
                                            double weight_decay,
                                            double learning_rate) {
  OptimizerState<Scalar> state;
  state.momentum = momentum;
  state.weight_decay = weight_decay;
  state.learning_rate = learning_rate;
  for (const auto& [key, tensor] : params.tensors())
    state.momentum_buffers[key] = Tensor<Scalar>(tensor.shape());
  return state;
}

template <typename Scalar>
void sgd_step(ParamStore<Scalar>& params, const GradMap<Scalar>& grads,
              OptimizerState<Scalar>& state) {
  const Scalar momentum = static_cast<Scalar>(state.momentum);
  const Scalar weight_decay = static_cast<Scalar>(state.weight_decay);
  const Scalar lr = static_cast<Scalar>(state.learning_rate);
  for (const auto& [key, grad] : grads) {
    Tensor<Scalar>& w = params.mutate(key);
    if (!w.same_shape(grad))
      throw ShapeError("sgd_step: gradient shape mismatch for " + key);
    if (!grad.all_finite())
      throw NumericError("sgd_step: non-finite gradient for " + key);
    auto vit = state.momentum_buffers.find(key);
    if (vit == state.momentum_buffers.end())
      throw Error("sgd_step: no momentum buffer for " + key);
    Tensor<Scalar>& v = vit->second;
    for (std::int64_t i = 0; i < w.size(); ++i) {
      v[i] = momentum * v[i] + grad[i] + weight_decay * w[i];
      w[i] -= lr * v[i];
    }
  }
}

}  // namespace ocs
