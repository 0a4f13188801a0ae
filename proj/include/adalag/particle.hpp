#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "adalag/errors.hpp"
#include "adalag/model.hpp"
#include "adalag/rng.hpp"

namespace adalag {

/// One particle generation: positions (one column per particle), unnormalized
/// weights, and the resampling ancestor indices (0-based; empty at t = 0).
struct WeightedSample {
  int t = 0;
  Eigen::MatrixXd particles;  // state_dim x N
  Eigen::VectorXd weights;    // N, all >= 0 and finite
  std::vector<int> ancestors;

  int size() const { return static_cast<int>(weights.size()); }

  /// Total weight, accumulated in ascending index order.
  double total_weight() const {
    double s = 0.0;
    for (int i = 0; i < weights.size(); ++i) s += weights[i];
    return s;
  }

  /// Effective sample size, (sum w)^2 / sum w^2.
  double ess() const {
    double s = 0.0, sq = 0.0;
    for (int i = 0; i < weights.size(); ++i) {
      s += weights[i];
      sq += weights[i] * weights[i];
    }
    return sq > 0.0 ? s * s / sq : 0.0;
  }
};

/// Inverse-CDF sampler for the categorical distribution proportional to a
/// fixed weight vector. The cumulative sum is accumulated in ascending index
/// order; a draw selects the first index whose cumulative weight reaches u,
/// with u drawn in (0, total], so zero-weight indices are never returned.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(const Eigen::VectorXd& weights) : cumulative_(weights.size()) {
    double acc = 0.0;
    for (int i = 0; i < weights.size(); ++i) {
      const double w = weights[i];
      if (!(w >= 0.0) || !std::isfinite(w))
        throw DegenerateWeightsError("weights must be finite and nonnegative");
      acc += w;
      cumulative_[i] = acc;
    }
    if (!(acc > 0.0)) throw DegenerateWeightsError("all weights are zero");
  }

  double total() const { return cumulative_.back(); }

  int draw(RngStream& rng) const {
    const double u = (1.0 - rng.uniform()) * total();  // in (0, total]
    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<int>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

/// Single draw from Pr(weights). P(i) = w_i / sum w; deterministic given the
/// rng state. Prefer CategoricalSampler when drawing repeatedly from the same
/// weights.
inline int categorical_draw(const Eigen::VectorXd& weights, RngStream& rng) {
  return CategoricalSampler(weights).draw(rng);
}

namespace detail {

inline void check_weights(const WeightedSample& sample) {
  for (int i = 0; i < sample.size(); ++i) {
    const double w = sample.weights[i];
    if (!(w >= 0.0) || !std::isfinite(w))
      throw DegenerateWeightsError("weights must be finite and nonnegative");
  }
  if (!(sample.total_weight() > 0.0)) throw WeightCollapseError(sample.t);
}

}  // namespace detail

/// Initial generation: xi_0^i ~ chi and w_0^i = g_0(xi_0^i).
inline WeightedSample bootstrap_init(const ModelSpec& model, int n_particles, RngStream& rng) {
  if (n_particles < 1) throw InvalidParameterError("n_particles must be >= 1");
  WeightedSample sample;
  sample.t = 0;
  sample.particles.resize(model.state_dim, n_particles);
  sample.weights.resize(n_particles);
  for (int i = 0; i < n_particles; ++i) {
    model.initial_sampler(sample.particles.col(i), rng);
    sample.weights[i] = model.observation_density(0, sample.particles.col(i));
  }
  detail::check_weights(sample);
  return sample;
}

/// One bootstrap transition: for each i, draw an ancestor from Pr(weights),
/// propagate it through the state dynamics, and weight by g_{t+1}. The three
/// operations run per particle in ascending index order so a fixed seed gives
/// a fixed genealogy.
inline WeightedSample bootstrap_step(const WeightedSample& sample, const ModelSpec& model,
                                     RngStream& rng) {
  const int n = sample.size();
  const CategoricalSampler resampler(sample.weights);
  WeightedSample next;
  next.t = sample.t + 1;
  next.particles.resize(model.state_dim, n);
  next.weights.resize(n);
  next.ancestors.resize(n);
  for (int i = 0; i < n; ++i) {
    const int parent = resampler.draw(rng);
    next.ancestors[i] = parent;
    model.transition_sampler(sample.particles.col(parent), next.particles.col(i), rng);
    next.weights[i] = model.observation_density(next.t, next.particles.col(i));
  }
  detail::check_weights(next);
  return next;
}

/// Self-normalized estimate sum_i (w_i / W) f(xi_i), summed in ascending index
/// order so results are bit-reproducible for a fixed seed.
inline double filter_estimate(const WeightedSample& sample,
                              const std::function<double(ConstVec)>& f) {
  const double total = sample.total_weight();
  if (!(total > 0.0)) throw DegenerateWeightsError("all weights are zero");
  double acc = 0.0;
  for (int i = 0; i < sample.size(); ++i)
    acc += sample.weights[i] * f(sample.particles.col(i));
  return acc / total;
}

}  // namespace adalag
