#pragma once

namespace adalag {

/// Finalized output for one marginal index s. stop_time is the first time the
/// variance criterion fell below the tolerance (capped by the horizon), lag is
/// stop_time - s, and truncated_by_horizon marks estimators that were still
/// active when the observation stream ended.
struct SmoothedMarginal {
  int s = 0;
  double estimate = 0.0;
  int stop_time = 0;
  int lag = 0;
  double variance_at_stop = 0.0;
  bool truncated_by_horizon = false;
};

}  // namespace adalag
