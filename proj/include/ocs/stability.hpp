// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "ocs/saliency.hpp"

namespace ocs {

/// Mean over layers of |retained_A ∩ retained_B| / |retained_A ∪ retained_B|.
/// A layer where both sets are empty counts as fully similar. Throws on
/// mismatched node sets.
double jaccard(const Signature& a, const Signature& b);

struct StabilityConfig {
  int gap = 1;      // epochs between the two compared partitions (i)
  int window = 5;   // sliding-mean width over raw similarities (r)
  double tau = 1e-4;
  double epsilon = 1e-3;
  int fixed_sl_start = -1;  // >= 0 starts regularization there unconditionally
};

/// Comparison slack: threshold tests on values assembled from decimal
/// constants must not miss by one ulp.
inline constexpr double kEventSlack = 1e-12;

struct StabilityEvents {
  std::optional<double> j;
  std::optional<double> j_avg;
  bool sl_start_fired = false;
  bool stable_fired = false;
};

/// Trailing-mean plateau/convergence detector over a raw similarity series.
/// Consumes one J value per epoch (first one at epoch `first_epoch`):
/// j_avg(t) = mean of the last `window` values; SL_START fires at the first
/// t with j_avg(t) - j_avg(t - window) <= tau (or unconditionally at
/// fixed_sl_start); STABLE fires at the first t > sl_start with
/// j_avg(t) >= 1 - epsilon. Each event fires at most once.
class EventDetector {
 public:
  explicit EventDetector(const StabilityConfig& cfg) : cfg_(cfg) {}

  /// Feeds epoch t; `j` is absent while similarity is still undefined
  /// (fewer than `gap`+1 observed partitions).
  StabilityEvents observe(int epoch, std::optional<double> j);

  int sl_start_epoch() const { return sl_start_epoch_; }
  int stable_epoch() const { return stable_epoch_; }
  const std::vector<double>& j_series() const { return j_; }
  const std::vector<double>& j_avg_series() const { return j_avg_; }

  /// Rebuilds detector state from recorded series (checkpoint restore).
  void restore(std::vector<double> j, std::vector<double> j_avg,
               int first_epoch, int sl_start, int stable);

 private:
  StabilityConfig cfg_;
  std::vector<double> j_;      // NaN where undefined
  std::vector<double> j_avg_;  // NaN where undefined
  int first_epoch_ = -1;
  int last_epoch_ = -1;
  int sl_start_epoch_ = -1;
  int stable_epoch_ = -1;
};

/// Signature bookkeeping on top of the detector: stores the per-epoch
/// partitions, derives raw similarities at the configured gap and forwards
/// them. Epochs must arrive consecutively.
class StabilityTracker {
 public:
  explicit StabilityTracker(const StabilityConfig& cfg)
      : cfg_(cfg), detector_(cfg) {}

  StabilityEvents observe(int epoch, Signature sig);

  const StabilityConfig& config() const { return cfg_; }
  const EventDetector& detector() const { return detector_; }
  const std::vector<Signature>& history() const { return history_; }
  int first_epoch() const { return first_epoch_; }
  int sl_start_epoch() const { return detector_.sl_start_epoch(); }
  int stable_epoch() const { return detector_.stable_epoch(); }

  /// Checkpoint restore: replays recorded signatures through a fresh
  /// detector; the result is bit-identical to the live run.
  static StabilityTracker replay(const StabilityConfig& cfg,
                                 const std::vector<Signature>& history,
                                 int first_epoch);

 private:
  StabilityConfig cfg_;
  EventDetector detector_;
  std::vector<Signature> history_;
  int first_epoch_ = -1;
};

}  // namespace ocs
