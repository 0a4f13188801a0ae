#pragma once

#include <cmath>

#include "adalag/gaussian.hpp"
#include "adalag/model.hpp"

namespace adalag {

/// Parameters of the stochastic volatility model
///   X_{t+1} = phi X_t + sigma U_{t+1}
///   Y_t     = beta exp(X_t / 2) V_t
/// with X_0 ~ N(0, sigma^2 / (1 - phi^2)), the stationary law.
struct SvParams {
  double phi = 0.0;
  double sigma = 1.0;
  double beta = 1.0;
};

inline ModelSpec make_sv(const SvParams& params) {
  if (!(std::abs(params.phi) < 1.0))
    throw InvalidParameterError("|phi| must be < 1 for a stationary initial law");
  if (!(params.sigma > 0.0)) throw InvalidParameterError("sigma must be > 0");
  if (!(params.beta > 0.0)) throw InvalidParameterError("beta must be > 0");

  const double phi = params.phi;
  const double var_u = params.sigma * params.sigma;
  const double beta2 = params.beta * params.beta;
  const double init_var = var_u / (1.0 - phi * phi);

  ModelSpec model;
  model.state_dim = 1;
  model.obs_dim = 1;

  model.initial_sampler = [init_var](Eigen::Ref<Eigen::VectorXd> out, RngStream& rng) {
    out[0] = std::sqrt(init_var) * rng.normal();
  };
  model.initial_density = [init_var](ConstVec x) {
    return std::exp(log_normal_pdf(x[0], 0.0, init_var));
  };
  model.transition_density = [phi, var_u](ConstVec x, ConstVec xn) {
    return std::exp(log_normal_pdf(xn[0], phi * x[0], var_u));
  };
  model.transition_sampler = [phi, var_u](ConstVec x, Eigen::Ref<Eigen::VectorXd> out,
                                          RngStream& rng) {
    out[0] = phi * x[0] + std::sqrt(var_u) * rng.normal();
  };
  model.density_upper_bound = std::exp(-0.5 * (kLogTwoPi + std::log(var_u)));

  auto store = model.observations;
  model.observation_density = [store, beta2](int t, ConstVec x) {
    return std::exp(log_normal_pdf(store->at(t)[0], 0.0, beta2 * std::exp(x[0])));
  };
  model.observation_sampler = [beta = params.beta](ConstVec x, Eigen::Ref<Eigen::VectorXd> out,
                                                   RngStream& rng) {
    out[0] = beta * std::exp(0.5 * x[0]) * rng.normal();
  };

  return model;
}

}  // namespace adalag
