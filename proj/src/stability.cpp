// SPDX-License-Identifier: Apache-2.0
#include "ocs/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ocs/error.hpp"

namespace ocs {
namespace {

constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

bool defined(double v) { return !std::isnan(v); }

double set_similarity(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t ia = 0, ib = 0, common = 0;
  while (ia < a.size() && ib < b.size()) {
    if (a[ia] == b[ib]) {
      ++common;
      ++ia;
      ++ib;
    } else if (a[ia] < b[ib]) {
      ++ia;
    } else {
      ++ib;
    }
  }
  const std::size_t unioned = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(unioned);
}

}  // namespace

double jaccard(const Signature& a, const Signature& b) {
  if (a.size() != b.size())
    throw GroupingError("signatures cover different node sets");
  if (a.empty()) throw GroupingError("empty signature");
  double sum = 0.0;
  auto ib = b.begin();
  for (auto ia = a.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first)
      throw GroupingError("signatures cover different node sets");
    sum += set_similarity(ia->second, ib->second);
  }
  return sum / static_cast<double>(a.size());
}

StabilityEvents EventDetector::observe(int epoch, std::optional<double> j) {
  if (first_epoch_ < 0) first_epoch_ = epoch;
  if (last_epoch_ >= 0 && epoch != last_epoch_ + 1)
    throw Error("stability epochs must be consecutive");
  last_epoch_ = epoch;

  StabilityEvents ev;
  ev.j = j;
  j_.push_back(j ? *j : kUndefined);

  // Trailing mean over the last `window` defined similarities; undefined
  // until the window is full.
  double avg = kUndefined;
  const int n = static_cast<int>(j_.size());
  if (n >= cfg_.window) {
    bool ok = true;
    double sum = 0.0;
    for (int k = 0; k < cfg_.window; ++k) {
      const double v = j_[static_cast<std::size_t>(n - 1 - k)];
      if (!defined(v)) {
        ok = false;
        break;
      }
      sum += v;
    }
    if (ok) avg = sum / static_cast<double>(cfg_.window);
  }
  j_avg_.push_back(avg);
  if (defined(avg)) ev.j_avg = avg;

  if (sl_start_epoch_ < 0) {
    if (cfg_.fixed_sl_start >= 0) {
      if (epoch >= cfg_.fixed_sl_start) {
        sl_start_epoch_ = epoch;
        ev.sl_start_fired = true;
      }
    } else if (defined(avg) && n - 1 - cfg_.window >= 0) {
      const double prev = j_avg_[static_cast<std::size_t>(n - 1 - cfg_.window)];
      if (defined(prev) && avg - prev <= cfg_.tau + kEventSlack) {
        sl_start_epoch_ = epoch;
        ev.sl_start_fired = true;
      }
    }
  } else if (stable_epoch_ < 0 && epoch > sl_start_epoch_ && defined(avg) &&
             avg >= 1.0 - cfg_.epsilon - kEventSlack) {
    stable_epoch_ = epoch;
    ev.stable_fired = true;
  }
  return ev;
}

void EventDetector::restore(std::vector<double> j, std::vector<double> j_avg,
                            int first_epoch, int sl_start, int stable) {
  if (j.size() != j_avg.size())
    throw Error("stability series length mismatch");
  j_ = std::move(j);
  j_avg_ = std::move(j_avg);
  first_epoch_ = first_epoch;
  last_epoch_ = j_.empty() ? -1 : first_epoch + static_cast<int>(j_.size()) - 1;
  sl_start_epoch_ = sl_start;
  stable_epoch_ = stable;
}

StabilityEvents StabilityTracker::observe(int epoch, Signature sig) {
  if (first_epoch_ < 0) first_epoch_ = epoch;
  std::optional<double> j;
  const int have = static_cast<int>(history_.size());
  if (have >= cfg_.gap)
    j = jaccard(history_[static_cast<std::size_t>(have - cfg_.gap)], sig);
  history_.push_back(std::move(sig));
  return detector_.observe(epoch, j);
}

StabilityTracker StabilityTracker::replay(const StabilityConfig& cfg,
                                          const std::vector<Signature>& history,
                                          int first_epoch) {
  StabilityTracker tracker(cfg);
  int epoch = first_epoch;
  for (const Signature& sig : history) tracker.observe(epoch++, sig);
  return tracker;
}

}  // namespace ocs
