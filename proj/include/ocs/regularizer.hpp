// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ocs/groups.hpp"
#include "ocs/param_store.hpp"
#include "ocs/saliency.hpp"

namespace ocs {

struct PenaltyConfig {
  double lambda0 = 1e-4;  // coefficient at the starting epoch
  double delta = 1e-4;    // growth increment
  int every = 1;          // epochs between increment growth steps
};

/// Growing penalty coefficient. From the starting epoch on, each epoch adds
/// delta * floor((t - start) / every) on top of the previous value.
struct PenaltyState {
  double lambda = 0.0;
  int start_epoch = -1;
  int last_epoch = -1;

  void begin(const PenaltyConfig& cfg, int epoch) {
    lambda = cfg.lambda0;
    start_epoch = epoch;
    last_epoch = epoch;
  }
  /// Advances to epoch t (consecutive with the last update).
  double advance(const PenaltyConfig& cfg, int t);
};

/// Non-recurrent form of the same sequence, used as the oracle:
/// lambda0 + delta * sum_{k=start+1..t} floor((k - start) / every).
double penalty_coefficient(const PenaltyConfig& cfg, int t, int start_epoch);

/// L2-norm penalty over every trained slice the selection marks for removal:
/// returns lambda * sum of slice norms and adds lambda * w / |w| into the
/// gradient map (zero-norm slices contribute no gradient). Keep-set
/// parameters are untouched.
template <typename Scalar>
double penalty_loss_and_grads(const GroupSet& groups,
                              const PruneSelection& selection,
                              const ParamStore<Scalar>& params, double lambda,
                              GradMap<Scalar>& grads);

/// Multiplies every trained slice in the selection by (1 - lambda * lr).
/// Throws NumericError when lambda * lr >= 1 (the factor would flip signs).
template <typename Scalar>
void direct_shrink(const GroupSet& groups, const PruneSelection& selection,
                   ParamStore<Scalar>& params, double lambda, double lr);

}  // namespace ocs
