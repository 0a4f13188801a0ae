#pragma once

#include <Eigen/Dense>
#include <string>
#include <unordered_set>
#include <vector>

#include "adalag/errors.hpp"
#include "adalag/particle.hpp"

namespace adalag {

/// Ring buffer retaining the last W particle generations (positions, weights,
/// ancestor indices). Lookups outside the retained window raise a
/// RetentionError instead of returning stale data.
class GenealogyStore {
 public:
  explicit GenealogyStore(int window) : window_(window) {
    if (window < 1) throw InvalidParameterError("genealogy window must be >= 1");
  }

  int window() const { return window_; }
  int latest_time() const { return latest_; }

  bool retains(int t) const {
    return latest_ >= 0 && t <= latest_ && t > latest_ - static_cast<int>(slots_.size());
  }

  /// Appends a generation; must be pushed in time order starting at t = 0.
  void push(const WeightedSample& sample) {
    if (sample.t != latest_ + 1)
      throw InvalidParameterError("generations must be pushed in time order");
    if (static_cast<int>(slots_.size()) < window_) {
      slots_.push_back(sample);
    } else {
      slots_[sample.t % window_] = sample;
    }
    latest_ = sample.t;
  }

  const WeightedSample& at(int t) const {
    if (!retains(t))
      throw RetentionError("generation t=" + std::to_string(t) + " outside the retained window");
    return slots_[t % window_];
  }

  /// Genealogical indices G_{s|t}^i for all i: ancestor at time s of particle
  /// i alive at time t, obtained by composing the stored resampling indices.
  std::vector<int> trace(int s, int t) const {
    if (s > t) throw InvalidParameterError("trace requires s <= t");
    if (!retains(t) || !retains(s))
      throw RetentionError("trace endpoints outside the retained window");
    const int n = at(t).size();
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int u = t; u > s; --u) {
      const auto& anc = at(u).ancestors;
      for (int i = 0; i < n; ++i) idx[i] = anc[idx[i]];
    }
    return idx;
  }

 private:
  int window_;
  int latest_ = -1;
  std::vector<WeightedSample> slots_;
};

/// Genealogy-tracing smoother: sum_i (w_t^i / W_t) f(xi_s^{G_{s|t}^i}).
inline double poor_mans_estimate(const GenealogyStore& store, int s, int t,
                                 const std::function<double(ConstVec)>& f) {
  const std::vector<int> idx = store.trace(s, t);
  const WeightedSample& at_t = store.at(t);
  const WeightedSample& at_s = store.at(s);
  const double total = at_t.total_weight();
  if (!(total > 0.0)) throw DegenerateWeightsError("all weights are zero");
  double acc = 0.0;
  for (int i = 0; i < at_t.size(); ++i)
    acc += at_t.weights[i] * f(at_s.particles.col(idx[i]));
  return acc / total;
}

/// Number of distinct time-s ancestors of the generation alive at time t; the
/// path-degeneracy diagnostic (it collapses toward 1 as t - s grows).
inline int unique_ancestors(const GenealogyStore& store, int s, int t) {
  const std::vector<int> idx = store.trace(s, t);
  std::unordered_set<int> distinct(idx.begin(), idx.end());
  return static_cast<int>(distinct.size());
}

}  // namespace adalag
