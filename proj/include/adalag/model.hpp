#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "adalag/errors.hpp"
#include "adalag/rng.hpp"

namespace adalag {

using ConstVec = Eigen::Ref<const Eigen::VectorXd>;

/// Observation record a model is conditioned on. Models hold a shared pointer
/// to one of these, so a stream can grow (append) after model construction and
/// every closure bound to the store sees the new data. Appending is a
/// single-writer operation; during smoothing runs the store is read-only.
class ObservationStore {
 public:
  int size() const { return static_cast<int>(ys_.size()); }

  const Eigen::VectorXd& at(int t) const {
    if (t < 0 || t >= size())
      throw InvalidParameterError("no observation bound at time t=" + std::to_string(t));
    return ys_[t];
  }

  void append(Eigen::VectorXd y) { ys_.push_back(std::move(y)); }
  void replace(std::vector<Eigen::VectorXd> ys) { ys_ = std::move(ys); }

  const std::vector<Eigen::VectorXd>& all() const { return ys_; }

 private:
  std::vector<Eigen::VectorXd> ys_;
};

/// A fully dominated state-space model: initial law, Markov transition with
/// density q and sampler, and per-time observation density g_t bound to the
/// observation store. density_upper_bound dominates q everywhere and drives
/// the rejection sampler for backward indices.
struct ModelSpec {
  int state_dim = 0;
  int obs_dim = 0;

  std::function<void(Eigen::Ref<Eigen::VectorXd>, RngStream&)> initial_sampler;
  std::function<double(ConstVec)> initial_density;
  std::function<double(ConstVec, ConstVec)> transition_density;  // q(x, x')
  std::function<void(ConstVec, Eigen::Ref<Eigen::VectorXd>, RngStream&)> transition_sampler;
  std::function<double(int, ConstVec)> observation_density;  // g_t(x)
  std::function<void(ConstVec, Eigen::Ref<Eigen::VectorXd>, RngStream&)> observation_sampler;
  double density_upper_bound = 0.0;

  std::shared_ptr<ObservationStore> observations = std::make_shared<ObservationStore>();

  int observation_count() const { return observations->size(); }

  /// Streaming hook: makes g_t defined for the next time index.
  void append_observation(Eigen::VectorXd y) {
    if (y.size() != obs_dim) throw InvalidParameterError("observation dimension mismatch");
    observations->append(std::move(y));
  }

  void bind_observations(std::vector<Eigen::VectorXd> ys) {
    for (const auto& y : ys)
      if (y.size() != obs_dim) throw InvalidParameterError("observation dimension mismatch");
    observations->replace(std::move(ys));
  }
};

/// One simulated path of the joint law, states x_{0:T} and observations
/// y_{0:T}, plus the seed that produced it.
struct Trajectory {
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> observations;
  std::uint64_t seed = 0;
};

/// Draws x_{0:T}, y_{0:T} from the joint law of the model. Deterministic given
/// the seed. Does not touch the model's bound observation store.
inline Trajectory simulate(const ModelSpec& model, int horizon, std::uint64_t seed) {
  if (horizon < 0) throw InvalidParameterError("horizon must be >= 0");
  Trajectory traj;
  traj.seed = seed;
  traj.states.reserve(horizon + 1);
  traj.observations.reserve(horizon + 1);
  RngStream rng(seed);
  Eigen::VectorXd x(model.state_dim), y(model.obs_dim);
  model.initial_sampler(x, rng);
  for (int t = 0; t <= horizon; ++t) {
    if (t > 0) {
      Eigen::VectorXd next(model.state_dim);
      model.transition_sampler(x, next, rng);
      x = next;
    }
    model.observation_sampler(x, y, rng);
    traj.states.push_back(x);
    traj.observations.push_back(y);
  }
  return traj;
}

/// Objective function h_s(x); the first argument is the marginal index s.
using Objective = std::function<double(int, ConstVec)>;

/// Named objectives selectable from configuration.
inline Objective objective_by_name(const std::string& name) {
  if (name == "identity") return [](int, ConstVec x) { return x[0]; };
  if (name == "square") return [](int, ConstVec x) { return x[0] * x[0]; };
  throw InvalidParameterError("unknown objective: " + name);
}

}  // namespace adalag
