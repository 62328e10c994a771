// SPDX-License-Identifier: Apache-2.0
#include "ocs/regularizer.hpp"

#include <cmath>

#include "ocs/error.hpp"

namespace ocs {

double PenaltyState::advance(const PenaltyConfig& cfg, int t) {
  if (start_epoch < 0) throw Error("penalty schedule not started");
  if (t == last_epoch) return lambda;
  if (t != last_epoch + 1) throw Error("penalty epochs must be consecutive");
  lambda += cfg.delta *
            static_cast<double>((t - start_epoch) / cfg.every);  // floor
  last_epoch = t;
  return lambda;
}

double penalty_coefficient(const PenaltyConfig& cfg, int t, int start_epoch) {
  if (t < start_epoch) throw Error("penalty queried before its start epoch");
  // sum_{m=1..n} floor(m/d) = q*(n+1) - d*q*(q+1)/2 with q = floor(n/d).
  const long long n = t - start_epoch;
  const long long d = cfg.every;
  const long long q = n / d;
  const long long steps = q * (n + 1) - d * q * (q + 1) / 2;
  return cfg.lambda0 + cfg.delta * static_cast<double>(steps);
}

template <typename Scalar>
double penalty_loss_and_grads(const GroupSet& groups,
                              const PruneSelection& selection,
                              const ParamStore<Scalar>& params, double lambda,
                              GradMap<Scalar>& grads) {
  double norm_sum = 0.0;
  for (const auto& [gid, channels] : selection) {
    const PruningGroup& g = groups.group(gid);
    for (const ParamSlice& s : g.slices) {
      if (!s.trained) continue;
      const Tensor<Scalar>& t = params.tensor(s.key);
      auto git = grads.find(s.key);
      if (git == grads.end())
        git = grads.emplace(s.key, Tensor<Scalar>(t.shape())).first;
      Tensor<Scalar>& grad = git->second;
      for (int c : channels) {
        double sq = 0.0;
        for_each_slice_index(s, t.shape(), c, [&](std::size_t i) {
          const double v = static_cast<double>(t[static_cast<std::int64_t>(i)]);
          sq += v * v;
        });
        const double norm = std::sqrt(sq);
        norm_sum += norm;
        if (norm == 0.0) continue;
        const double scale = lambda / norm;
        for_each_slice_index(s, t.shape(), c, [&](std::size_t i) {
          grad[static_cast<std::int64_t>(i)] += static_cast<Scalar>(
              scale * static_cast<double>(t[static_cast<std::int64_t>(i)]));
        });
      }
    }
  }
  return lambda * norm_sum;
}

template <typename Scalar>
void direct_shrink(const GroupSet& groups, const PruneSelection& selection,
                   ParamStore<Scalar>& params, double lambda, double lr) {
  const double step = lambda * lr;
  if (step >= 1.0)
    throw NumericError("direct shrink factor 1 - lambda*lr = " +
                       std::to_string(1.0 - step) + " would flip signs");
  if (step == 0.0 || selection.empty()) return;
  const Scalar factor = static_cast<Scalar>(1.0 - step);
  for (const auto& [gid, channels] : selection) {
    const PruningGroup& g = groups.group(gid);
    for (const ParamSlice& s : g.slices) {
      if (!s.trained) continue;
      Tensor<Scalar>& t = params.mutate(s.key);
      for (int c : channels)
        for_each_slice_index(s, t.shape(), c, [&](std::size_t i) {
          t[static_cast<std::int64_t>(i)] *= factor;
        });
    }
  }
}

template double penalty_loss_and_grads<float>(const GroupSet&,
                                              const PruneSelection&,
                                              const ParamStore<float>&, double,
                                              GradMap<float>&);
template double penalty_loss_and_grads<double>(const GroupSet&,
                                               const PruneSelection&,
                                               const ParamStore<double>&,
                                               double, GradMap<double>&);
template void direct_shrink<float>(const GroupSet&, const PruneSelection&,
                                   ParamStore<float>&, double, double);
template void direct_shrink<double>(const GroupSet&, const PruneSelection&,
                                    ParamStore<double>&, double, double);

}  // namespace ocs
