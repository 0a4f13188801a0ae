#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "adalag/errors.hpp"
#include "adalag/genealogy.hpp"
#include "adalag/marginal.hpp"
#include "adalag/model.hpp"
#include "adalag/particle.hpp"

namespace adalag {

namespace detail {

inline int backward_index_impl(const WeightedSample& prev, ConstVec x_new, const ModelSpec& model,
                               RngStream& rng, int max_trials, const CategoricalSampler& prop) {
  if (!(model.density_upper_bound > 0.0))
    throw InvalidParameterError("model has no transition density upper bound");
  for (int trial = 0; trial < max_trials; ++trial) {
    const int j = prop.draw(rng);
    const double q = model.transition_density(prev.particles.col(j), x_new);
    if (rng.uniform() * model.density_upper_bound < q) return j;
  }
  Eigen::VectorXd products(prev.size());
  for (int l = 0; l < prev.size(); ++l)
    products[l] = prev.weights[l] * model.transition_density(prev.particles.col(l), x_new);
  try {
    return CategoricalSampler(products).draw(rng);
  } catch (const DegenerateWeightsError&) {
    throw DegenerateBackwardWeightsError("all backward weights are zero at time t=" +
                                         std::to_string(prev.t + 1));
  }
}

}  // namespace detail

/// Draws J distributed as Pr({w^l q(xi^l, x_new)}) by rejection: propose from
/// Pr(weights), accept with probability q / density_upper_bound. After
/// max_trials rejections the draw falls back to the exact O(N) categorical on
/// the computed products, which has the identical law. Pass a precomputed
/// proposal sampler when drawing repeatedly against the same generation.
inline int backward_index(const WeightedSample& prev, ConstVec x_new, const ModelSpec& model,
                          RngStream& rng, int max_trials,
                          const CategoricalSampler* proposal = nullptr) {
  if (proposal) return detail::backward_index_impl(prev, x_new, model, rng, max_trials, *proposal);
  return detail::backward_index_impl(prev, x_new, model, rng, max_trials,
                                     CategoricalSampler(prev.weights));
}

/// The bank of active marginal estimators: for each active s, the N-vector of
/// statistics tau_{s|t}^i plus the activation time. epsilon is the stopping
/// tolerance (0 disables stopping entirely, the full-PaRIS mode) and
/// precision_k the number of backward draws averaged per particle. max_active
/// caps |S| (0 = unlimited); exceeding the cap aborts loudly instead of
/// degrading silently.
struct EstimatorBank {
  struct Active {
    int s = 0;
    int activation_time = 0;
    Eigen::VectorXd stats;
  };

  std::vector<Active> active;  // ascending s
  double epsilon = 1e-3;
  int precision_k = 2;
  Objective objective;
  std::size_t max_active = 0;

  /// Hook invoked for every variance-criterion evaluation (s, t, value).
  std::function<void(int, int, double)> on_criterion;

  void validate() const {
    if (!(epsilon >= 0.0)) throw InvalidParameterError("epsilon must be >= 0");
    if (precision_k < 1) throw InvalidParameterError("precision K must be >= 1");
    if (!objective) throw InvalidParameterError("objective function not set");
  }
};

/// Weighted mean of per-particle statistics, ascending index order.
inline double weighted_mean(const WeightedSample& sample, const Eigen::VectorXd& stats) {
  const double total = sample.total_weight();
  if (!(total > 0.0)) throw DegenerateWeightsError("all weights are zero");
  double acc = 0.0;
  for (int i = 0; i < sample.size(); ++i) acc += sample.weights[i] * stats[i];
  return acc / total;
}

/// Weighted population variance of the statistics under normalized weights,
/// computed in two passes (mean first, then squared deviations).
inline double variance_criterion(const WeightedSample& sample, const Eigen::VectorXd& stats) {
  const double total = sample.total_weight();
  if (!(total > 0.0)) throw DegenerateWeightsError("all weights are zero");
  double mean = 0.0;
  for (int i = 0; i < sample.size(); ++i) mean += sample.weights[i] * stats[i];
  mean /= total;
  double acc = 0.0;
  for (int i = 0; i < sample.size(); ++i) {
    const double d = stats[i] - mean;
    acc += sample.weights[i] * d * d;
  }
  return acc / total;
}

/// Exact O(N^2) statistic update through the particle backward kernel:
///   tau'_i = sum_j w_j q(xi_j, xi'_i) tau_j / sum_l w_l q(xi_l, xi'_i).
/// Correctness oracle for the sampled update; not a production path.
inline Eigen::VectorXd ffbsm_update(const Eigen::VectorXd& stats_prev, const WeightedSample& prev,
                                    const WeightedSample& next, const ModelSpec& model) {
  if (stats_prev.size() != prev.size())
    throw InvalidParameterError("statistics not aligned with the previous generation");
  const int n = next.size();
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    double denom = 0.0, numer = 0.0;
    for (int l = 0; l < prev.size(); ++l) {
      const double wq = prev.weights[l] * model.transition_density(prev.particles.col(l),
                                                                   next.particles.col(i));
      denom += wq;
      numer += wq * stats_prev[l];
    }
    if (!(denom > 0.0))
      throw DegenerateBackwardWeightsError("zero backward weight sum for particle i=" +
                                           std::to_string(i));
    out[i] = numer / denom;
  }
  return out;
}

/// PaRIS-type update of every active statistic vector: K backward indices are
/// drawn once per target particle (i outer, j inner, matching the sampling
/// order of the smoother's inner loop) and shared across all active marginals;
/// each new statistic is the mean of the K selected predecessors. Draws happen
/// even when the active set is empty so the consumed random stream does not
/// depend on the stopping tolerance.
inline void paris_update(EstimatorBank& bank, const WeightedSample& prev,
                         const WeightedSample& next, const ModelSpec& model, RngStream& rng) {
  bank.validate();
  const int n = next.size();
  const int k = bank.precision_k;
  const CategoricalSampler proposal(prev.weights);
  std::vector<int> draws(static_cast<std::size_t>(n) * k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j)
      draws[static_cast<std::size_t>(i) * k + j] =
          backward_index(prev, next.particles.col(i), model, rng, prev.size(), &proposal);

  const double inv_k = 1.0 / k;
  for (auto& a : bank.active) {
    if (a.stats.size() != prev.size())
      throw InvalidParameterError("statistics not aligned with the previous generation");
    Eigen::VectorXd fresh(n);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < k; ++j) acc += a.stats[draws[static_cast<std::size_t>(i) * k + j]];
      fresh[i] = acc * inv_k;
    }
    a.stats = std::move(fresh);
  }
}

namespace detail {

inline void bank_activate(EstimatorBank& bank, const WeightedSample& sample) {
  EstimatorBank::Active a;
  a.s = sample.t;
  a.activation_time = sample.t;
  a.stats.resize(sample.size());
  for (int i = 0; i < sample.size(); ++i)
    a.stats[i] = bank.objective(sample.t, sample.particles.col(i));
  bank.active.push_back(std::move(a));
  if (bank.max_active && bank.active.size() > bank.max_active)
    throw ActiveSetOverflowError("active estimator count exceeded the configured cap of " +
                                 std::to_string(bank.max_active));
}

inline void bank_sweep(EstimatorBank& bank, const WeightedSample& sample, bool is_final,
                       std::vector<SmoothedMarginal>& out) {
  for (auto it = bank.active.begin(); it != bank.active.end();) {
    const double v = variance_criterion(sample, it->stats);
    if (bank.on_criterion) bank.on_criterion(it->s, sample.t, v);
    const bool stop = v < bank.epsilon;
    if (stop || is_final) {
      SmoothedMarginal m;
      m.s = it->s;
      m.estimate = weighted_mean(sample, it->stats);
      m.stop_time = sample.t;
      m.lag = sample.t - it->s;
      m.variance_at_stop = v;
      m.truncated_by_horizon = !stop;
      out.push_back(m);
      it = bank.active.erase(it);
    } else {
      ++it;
    }
  }
}

}  // namespace detail

/// One body of the smoother's outer loop, applied after the particle filter
/// produced `next` from `prev`: update all active statistics, activate an
/// estimator for the new time index, then finalize every active marginal whose
/// variance criterion is strictly below epsilon (all of them when is_final).
inline std::vector<SmoothedMarginal> adaptive_lag_step(EstimatorBank& bank,
                                                       const WeightedSample& prev,
                                                       const WeightedSample& next,
                                                       const ModelSpec& model, RngStream& rng,
                                                       bool is_final) {
  paris_update(bank, prev, next, model, rng);
  detail::bank_activate(bank, next);
  std::vector<SmoothedMarginal> emitted;
  detail::bank_sweep(bank, next, is_final, emitted);
  return emitted;
}

/// Options for a full adaptive-lag run over the model's bound observations.
struct AdaptiveLagOptions {
  int n_particles = 400;
  int precision_k = 2;
  double epsilon = 1e-3;
  std::size_t max_active = 0;
  /// Invoked as each marginal finalizes, in stop-time order.
  std::function<void(const SmoothedMarginal&)> on_emit;
  /// Invoked for every criterion evaluation (s, t, value).
  std::function<void(int, int, double)> on_criterion;
  /// Invoked with each particle generation right after the filter step.
  std::function<void(const WeightedSample&)> on_sample;
  /// When set, receives |S| after each time step.
  std::vector<int>* active_size_trace = nullptr;
};

/// Runs the bootstrap filter and the adaptive-lag smoother over all bound
/// observations. Emission order is by stop time, ties by s; marginals still
/// active at the horizon are emitted with the truncation flag set.
inline std::vector<SmoothedMarginal> run_adaptive_lag(const ModelSpec& model, const Objective& h,
                                                      const AdaptiveLagOptions& opt,
                                                      RngStream& rng) {
  const int count = model.observation_count();
  if (count < 1) throw InvalidParameterError("no observations bound to the model");
  const int horizon = count - 1;

  EstimatorBank bank;
  bank.epsilon = opt.epsilon;
  bank.precision_k = opt.precision_k;
  bank.objective = h;
  bank.max_active = opt.max_active;
  bank.on_criterion = opt.on_criterion;
  bank.validate();

  std::vector<SmoothedMarginal> emitted;
  auto flush = [&](std::size_t from) {
    if (opt.on_emit)
      for (std::size_t i = from; i < emitted.size(); ++i) opt.on_emit(emitted[i]);
  };

  WeightedSample current = bootstrap_init(model, opt.n_particles, rng);
  if (opt.on_sample) opt.on_sample(current);
  detail::bank_activate(bank, current);
  detail::bank_sweep(bank, current, horizon == 0, emitted);
  flush(0);
  if (opt.active_size_trace) opt.active_size_trace->push_back(static_cast<int>(bank.active.size()));

  for (int t = 1; t <= horizon; ++t) {
    WeightedSample next = bootstrap_step(current, model, rng);
    if (opt.on_sample) opt.on_sample(next);
    const std::size_t before = emitted.size();
    auto step_out = adaptive_lag_step(bank, current, next, model, rng, t == horizon);
    emitted.insert(emitted.end(), step_out.begin(), step_out.end());
    flush(before);
    if (opt.active_size_trace)
      opt.active_size_trace->push_back(static_cast<int>(bank.active.size()));
    current = std::move(next);
  }
  return emitted;
}

/// Fixed-lag smoother: for each s the estimate freezes at lambda = (s + delta)
/// with lambda capped by the horizon, tracing time-s ancestors of the
/// generation alive at lambda. variance_at_stop is not defined for this
/// estimator and is reported as NaN.
inline std::vector<SmoothedMarginal> fixed_lag_run(const ModelSpec& model, int delta,
                                                   int n_particles, const Objective& h,
                                                   RngStream& rng) {
  if (delta < 1) throw InvalidParameterError("fixed lag delta must be >= 1");
  const int count = model.observation_count();
  if (count < 1) throw InvalidParameterError("no observations bound to the model");
  const int horizon = count - 1;

  GenealogyStore store(delta + 1);
  std::vector<SmoothedMarginal> out;
  auto finalize = [&](int s, int lambda) {
    SmoothedMarginal m;
    m.s = s;
    m.estimate = poor_mans_estimate(store, s, lambda, [&](ConstVec x) { return h(s, x); });
    m.stop_time = lambda;
    m.lag = lambda - s;
    m.variance_at_stop = std::numeric_limits<double>::quiet_NaN();
    m.truncated_by_horizon = s + delta > horizon;
    out.push_back(m);
  };

  WeightedSample current = bootstrap_init(model, n_particles, rng);
  store.push(current);
  for (int t = 0; t <= horizon; ++t) {
    if (t > 0) {
      current = bootstrap_step(current, model, rng);
      store.push(current);
    }
    if (t >= delta) finalize(t - delta, t);
    if (t == horizon)
      for (int s = std::max(0, horizon - delta + 1); s <= horizon; ++s) finalize(s, horizon);
  }
  return out;
}

}  // namespace adalag
