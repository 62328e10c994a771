// SPDX-License-Identifier: Apache-2.0
#include "ocs/autodiff.hpp"

#include "ocs/rng.hpp"

namespace ocs {

template <typename Scalar>
Tensor<Scalar> forward(const ModelGraph& graph, ParamStore<Scalar>& params,
                       const Tensor<Scalar>& batch, bool training,
                       Tape<Scalar>* tape) {
  if (batch.rank() != 4 || batch.dim(1) != graph.input_channels() ||
      batch.dim(2) != graph.input_height() ||
      batch.dim(3) != graph.input_width())
    throw ShapeError("input: batch " + shape_str(batch.shape()) +
                     " does not match graph input [" +
                     std::to_string(graph.input_channels()) + "," +
                     std::to_string(graph.input_height()) + "," +
                     std::to_string(graph.input_width()) + "]");

  Tape<Scalar> local;
  Tape<Scalar>& t = tape ? *tape : local;
  t.graph = &graph;
  t.training = training;
  t.param_version = params.version();
  t.values.clear();
  t.bn_caches.clear();
  t.pool_argmax.clear();

  const int batch_size = batch.dim(0);
  for (const auto& n : graph.nodes()) {
    Tensor<Scalar> out;
    switch (n.kind) {
      case LayerKind::kInput:
        out = batch;
        break;
      case LayerKind::kConv2d: {
        const Tensor<Scalar>& x = t.value(n.inputs[0]);
        const Tensor<Scalar>& w = params.tensor(graph.param_key(n.id, "w"));
        const Tensor<Scalar>* b =
            n.bias ? &params.tensor(graph.param_key(n.id, "b")) : nullptr;
        out = conv2d_forward(x, w, b, {n.stride, n.padding, n.groups});
        break;
      }
      case LayerKind::kBatchNorm2d: {
        const Tensor<Scalar>& x = t.value(n.inputs[0]);
        const Tensor<Scalar>& gamma =
            params.tensor(graph.param_key(n.id, "gamma"));
        const Tensor<Scalar>& beta =
            params.tensor(graph.param_key(n.id, "beta"));
        if (training) {
          BnCache<Scalar> cache;
          out = batchnorm2d_forward_train(
              x, gamma, beta,
              params.mutate_buffer(graph.param_key(n.id, "running_mean")),
              params.mutate_buffer(graph.param_key(n.id, "running_var")),
              static_cast<Scalar>(kBnMomentum),
              static_cast<Scalar>(kBnEpsilon), &cache);
          t.bn_caches[n.id] = std::move(cache);
        } else {
          out = batchnorm2d_forward_eval(
              x, gamma, beta,
              params.buffer(graph.param_key(n.id, "running_mean")),
              params.buffer(graph.param_key(n.id, "running_var")),
              static_cast<Scalar>(kBnEpsilon));
        }
        break;
      }
      case LayerKind::kRelu:
        out = relu_forward(t.value(n.inputs[0]));
        break;
      case LayerKind::kMaxPool2d: {
        std::vector<std::int32_t> argmax;
        out = maxpool2d_forward(t.value(n.inputs[0]), n.kernel, n.stride,
                                n.padding, &argmax);
        t.pool_argmax[n.id] = std::move(argmax);
        break;
      }
      case LayerKind::kGlobalAvgPool:
        out = global_avg_pool_forward(t.value(n.inputs[0]));
        break;
      case LayerKind::kAdd:
        out = add_forward(t.value(n.inputs[0]), t.value(n.inputs[1]));
        break;
      case LayerKind::kFlatten: {
        const Tensor<Scalar>& x = t.value(n.inputs[0]);
        out = Tensor<Scalar>({batch_size, static_cast<int>(x.size() /
                                                           batch_size)},
                             x.storage());
        break;
      }
      case LayerKind::kDense: {
        const Tensor<Scalar>& x = t.value(n.inputs[0]);
        const Tensor<Scalar>& w = params.tensor(graph.param_key(n.id, "w"));
        const Tensor<Scalar>* b =
            n.bias ? &params.tensor(graph.param_key(n.id, "b")) : nullptr;
        out = dense_forward(x, w, b);
        break;
      }
    }
    t.values[n.id] = std::move(out);
  }
  return t.value(graph.output_node());
}

template <typename Scalar>
GradMap<Scalar> backward(const Tape<Scalar>& tape,
                         const ParamStore<Scalar>& params,
                         const Tensor<Scalar>& output_grad) {
  if (!tape.graph) throw Error("backward: empty tape");
  if (tape.param_version != params.version())
    throw Error("backward: parameters were mutated after forward; rerun "
                "forward before replaying the tape");
  const ModelGraph& graph = *tape.graph;

  std::map<int, Tensor<Scalar>> value_grads;
  auto accumulate = [&](int node_id, Tensor<Scalar>&& grad) {
    auto it = value_grads.find(node_id);
    if (it == value_grads.end())
      value_grads.emplace(node_id, std::move(grad));
    else
      it->second.vec() += grad.vec();
  };

  if (!output_grad.same_shape(tape.value(graph.output_node())))
    throw ShapeError("backward: output grad shape mismatch");
  value_grads[graph.output_node()] = output_grad;

  GradMap<Scalar> param_grads;
  const auto& nodes = graph.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    const LayerNode& n = *it;
    auto gi = value_grads.find(n.id);
    if (gi == value_grads.end()) continue;  // node does not reach the output
    const Tensor<Scalar>& dy = gi->second;
    switch (n.kind) {
      case LayerKind::kInput:
        break;
      case LayerKind::kConv2d: {
        const Tensor<Scalar>& x = tape.value(n.inputs[0]);
        const Tensor<Scalar>& w = params.tensor(graph.param_key(n.id, "w"));
        auto grads =
            conv2d_backward(x, w, n.bias, {n.stride, n.padding, n.groups}, dy);
        param_grads[graph.param_key(n.id, "w")] = std::move(grads.dw);
        if (n.bias)
          param_grads[graph.param_key(n.id, "b")] = std::move(grads.db);
        accumulate(n.inputs[0], std::move(grads.dx));
        break;
      }
      case LayerKind::kBatchNorm2d: {
        const Tensor<Scalar>& x = tape.value(n.inputs[0]);
        const Tensor<Scalar>& gamma =
            params.tensor(graph.param_key(n.id, "gamma"));
        BnGrads<Scalar> grads;
        if (tape.training) {
          grads = batchnorm2d_backward_train(x, gamma,
                                             tape.bn_caches.at(n.id), dy);
        } else {
          grads = batchnorm2d_backward_eval(
              x, gamma, params.buffer(graph.param_key(n.id, "running_mean")),
              params.buffer(graph.param_key(n.id, "running_var")),
              static_cast<Scalar>(kBnEpsilon), dy);
        }
        param_grads[graph.param_key(n.id, "gamma")] = std::move(grads.dgamma);
        param_grads[graph.param_key(n.id, "beta")] = std::move(grads.dbeta);
        accumulate(n.inputs[0], std::move(grads.dx));
        break;
      }
      case LayerKind::kRelu:
        accumulate(n.inputs[0], relu_backward(tape.value(n.inputs[0]), dy));
        break;
      case LayerKind::kMaxPool2d:
        accumulate(n.inputs[0],
                   maxpool2d_backward(tape.value(n.inputs[0]).shape(),
                                      tape.pool_argmax.at(n.id), dy));
        break;
      case LayerKind::kGlobalAvgPool:
        accumulate(n.inputs[0],
                   global_avg_pool_backward(tape.value(n.inputs[0]).shape(),
                                            dy));
        break;
      case LayerKind::kAdd: {
        Tensor<Scalar> da = dy;
        Tensor<Scalar> db = dy;
        accumulate(n.inputs[0], std::move(da));
        accumulate(n.inputs[1], std::move(db));
        break;
      }
      case LayerKind::kFlatten: {
        const Tensor<Scalar>& x = tape.value(n.inputs[0]);
        accumulate(n.inputs[0], Tensor<Scalar>(x.shape(), dy.storage()));
        break;
      }
      case LayerKind::kDense: {
        const Tensor<Scalar>& x = tape.value(n.inputs[0]);
        const Tensor<Scalar>& w = params.tensor(graph.param_key(n.id, "w"));
        auto grads = dense_backward(x, w, n.bias, dy);
        param_grads[graph.param_key(n.id, "w")] = std::move(grads.dw);
        if (n.bias)
          param_grads[graph.param_key(n.id, "b")] = std::move(grads.db);
        accumulate(n.inputs[0], std::move(grads.dx));
        break;
      }
    }
  }
  return param_grads;
}

template <typename Scalar>
ParamStore<Scalar> init_params(const ModelGraph& graph, std::uint64_t seed) {
  ParamStore<Scalar> store = make_param_store<Scalar>(graph);
  for (const auto& n : graph.nodes()) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(n.id)));
    switch (n.kind) {
      case LayerKind::kConv2d:
      case LayerKind::kDense: {
        Tensor<Scalar>& w = store.mutate(graph.param_key(n.id, "w"));
        std::int64_t fan_in = 1;
        for (int d = 1; d < w.rank(); ++d) fan_in *= w.dim(d);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (std::int64_t i = 0; i < w.size(); ++i)
          w[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
        break;  // biases stay zero
      }
      case LayerKind::kBatchNorm2d: {
        store.mutate(graph.param_key(n.id, "gamma")).fill(Scalar(1));
        store.mutate_buffer(graph.param_key(n.id, "running_var"))
            .fill(Scalar(1));
        break;  // beta and running_mean stay zero
      }
      default:
        break;
    }
  }
  return store;
}

template Tensor<float> forward(const ModelGraph&, ParamStore<float>&,
                               const Tensor<float>&, bool, Tape<float>*);
template Tensor<double> forward(const ModelGraph&, ParamStore<double>&,
                                const Tensor<double>&, bool, Tape<double>*);
template GradMap<float> backward(const Tape<float>&, const ParamStore<float>&,
                                 const Tensor<float>&);
template GradMap<double> backward(const Tape<double>&,
                                  const ParamStore<double>&,
                                  const Tensor<double>&);
template ParamStore<float> init_params(const ModelGraph&, std::uint64_t);
template ParamStore<double> init_params(const ModelGraph&, std::uint64_t);

}  // namespace ocs
