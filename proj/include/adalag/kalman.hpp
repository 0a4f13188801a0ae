#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <map>
#include <vector>

#include "adalag/errors.hpp"
#include "adalag/lgssm.hpp"
#include "adalag/marginal.hpp"

namespace adalag {

/// Exact filter moments of X_t given y_{0:t}.
struct KalmanState {
  int t = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Gaussian law of X_t given X_{t+1} = x and y_{0:t}: the mean is
/// gain_state * x + gain_filter and the covariance is cov, where
///   cov        = (A' Sigma_U^{-1} A + Sigma_t^{-1})^{-1}
///   gain_state = cov A' Sigma_U^{-1}
///   gain_filter= cov Sigma_t^{-1} mu_t.
struct BackwardGaussian {
  Eigen::MatrixXd gain_state;
  Eigen::VectorXd gain_filter;
  Eigen::MatrixXd cov;
};

/// Affine representation of the smoothing statistic for marginal s at the
/// current time t: T_{s|t}(x) = alpha' x + beta.
struct KalmanAffineStat {
  int s = 0;
  Eigen::VectorXd alpha;
  double beta = 0.0;
};

/// Affine objective h_s(x) = alpha' x + beta.
struct AffineObjective {
  Eigen::VectorXd alpha;
  double beta = 0.0;
};

using AffineObjectives = std::function<AffineObjective(int)>;

namespace detail {

inline Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError(what);
  return llt;
}

}  // namespace detail

/// Filter moments of X_0 given y_0 (Bayes update of the initial law).
inline KalmanState kalman_init(const LgssmParams& params, ConstVec y0) {
  const Eigen::MatrixXd& P = params.initial_cov;
  const Eigen::MatrixXd S = params.B * P * params.B.transpose() + params.sigma_v;
  auto llt_s = detail::checked_llt(S, "singular innovation covariance at t=0");
  const Eigen::MatrixXd K = llt_s.solve(params.B * P).transpose();
  KalmanState state;
  state.t = 0;
  state.mean = params.initial_mean + K * (y0 - params.B * params.initial_mean);
  const Eigen::MatrixXd J =
      Eigen::MatrixXd::Identity(params.state_dim(), params.state_dim()) - K * params.B;
  Eigen::MatrixXd cov = J * P * J.transpose() + K * params.sigma_v * K.transpose();
  state.cov = 0.5 * (cov + cov.transpose());
  return state;
}

/// One predict/update sweep: exact filter moments of X_{t+1} given y_{0:t+1}.
/// Uses the Joseph-stabilized covariance update.
inline KalmanState kalman_step(const KalmanState& state, ConstVec y, const LgssmParams& params) {
  const Eigen::VectorXd pred_mean = params.A * state.mean;
  const Eigen::MatrixXd pred_cov =
      params.A * state.cov * params.A.transpose() + params.sigma_u;
  const Eigen::MatrixXd S = params.B * pred_cov * params.B.transpose() + params.sigma_v;
  auto llt_s = detail::checked_llt(S, "singular innovation covariance");
  const Eigen::MatrixXd K = llt_s.solve(params.B * pred_cov).transpose();
  KalmanState next;
  next.t = state.t + 1;
  next.mean = pred_mean + K * (y - params.B * pred_mean);
  const Eigen::MatrixXd J =
      Eigen::MatrixXd::Identity(params.state_dim(), params.state_dim()) - K * params.B;
  Eigen::MatrixXd cov = J * pred_cov * J.transpose() + K * params.sigma_v * K.transpose();
  next.cov = 0.5 * (cov + cov.transpose());
  return next;
}

/// Filter moments for every t in 0..T.
inline std::vector<KalmanState> kalman_filter(const LgssmParams& params,
                                              const std::vector<Eigen::VectorXd>& observations) {
  if (observations.empty()) throw InvalidParameterError("at least one observation required");
  std::vector<KalmanState> out;
  out.reserve(observations.size());
  out.push_back(kalman_init(params, observations[0]));
  for (std::size_t t = 1; t < observations.size(); ++t)
    out.push_back(kalman_step(out.back(), observations[t], params));
  return out;
}

/// Marginal smoothing moments E[X_s | y_{0:T}], Cov[X_s | y_{0:T}].
struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Disturbance smoother: one forward filter pass plus one backward sweep
/// producing the exact marginal smoothing moments for every s <= T.
inline std::vector<GaussianMoments> disturbance_smoother(
    const LgssmParams& params, const std::vector<Eigen::VectorXd>& observations) {
  if (observations.empty()) throw InvalidParameterError("at least one observation required");
  const int nx = params.state_dim();
  const int T = static_cast<int>(observations.size()) - 1;

  // Forward pass over predicted moments a_t = E[X_t | y_{0:t-1}], P_t.
  std::vector<Eigen::VectorXd> a(T + 1);
  std::vector<Eigen::MatrixXd> P(T + 1), L(T + 1), W(T + 1);  // W_t = B' F_t^{-1} B
  std::vector<Eigen::VectorXd> u(T + 1);                      // u_t = B' F_t^{-1} v_t
  a[0] = params.initial_mean;
  P[0] = params.initial_cov;
  for (int t = 0; t <= T; ++t) {
    const Eigen::VectorXd v = observations[t] - params.B * a[t];
    const Eigen::MatrixXd F = params.B * P[t] * params.B.transpose() + params.sigma_v;
    auto llt_f = detail::checked_llt(F, "singular innovation covariance in smoother");
    u[t] = params.B.transpose() * llt_f.solve(v);
    W[t] = params.B.transpose() * llt_f.solve(params.B);
    const Eigen::MatrixXd K = params.A * P[t] * params.B.transpose() * llt_f.solve(
                                  Eigen::MatrixXd::Identity(params.obs_dim(), params.obs_dim()));
    L[t] = params.A - K * params.B;
    if (t < T) {
      a[t + 1] = params.A * a[t] + K * v;
      P[t + 1] = params.A * P[t] * L[t].transpose() + params.sigma_u;
    }
  }

  // Backward sweep.
  std::vector<GaussianMoments> out(T + 1);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(nx);
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(nx, nx);
  for (int t = T; t >= 0; --t) {
    r = u[t] + L[t].transpose() * r;
    N = W[t] + L[t].transpose() * N * L[t];
    out[t].mean = a[t] + P[t] * r;
    Eigen::MatrixXd cov = P[t] - P[t] * N * P[t];
    out[t].cov = 0.5 * (cov + cov.transpose());
  }
  return out;
}

/// Parameters of the backward Gaussian law at the current filter state.
inline BackwardGaussian backward_params(const KalmanState& state, const LgssmParams& params) {
  auto llt_u = detail::checked_llt(params.sigma_u, "Sigma_U not positive definite");
  auto llt_t = detail::checked_llt(state.cov, "filter covariance not positive definite");
  const int nx = params.state_dim();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(nx, nx);
  const Eigen::MatrixXd u_inv_a = llt_u.solve(params.A);          // Sigma_U^{-1} A
  const Eigen::MatrixXd sigma_t_inv = llt_t.solve(eye);
  const Eigen::MatrixXd M = params.A.transpose() * u_inv_a + sigma_t_inv;
  auto llt_m = detail::checked_llt(M, "backward covariance not positive definite");
  BackwardGaussian bg;
  bg.cov = llt_m.solve(eye);
  bg.gain_state = llt_m.solve(u_inv_a.transpose());
  bg.gain_filter = llt_m.solve(llt_t.solve(state.mean));
  return bg;
}

/// Propagates the affine statistic through the backward kernel:
///   alpha' <- gain_state' alpha,   beta' <- alpha . gain_filter + beta.
inline KalmanAffineStat ideal_affine_update(const KalmanAffineStat& stat,
                                            const BackwardGaussian& bg) {
  KalmanAffineStat next;
  next.s = stat.s;
  next.alpha = bg.gain_state.transpose() * stat.alpha;
  next.beta = stat.alpha.dot(bg.gain_filter) + stat.beta;
  return next;
}

/// Variance of the affine statistic under the current filter: alpha' Sigma alpha.
inline double ideal_variance(const KalmanAffineStat& stat, const KalmanState& state) {
  return stat.alpha.dot(state.cov * stat.alpha);
}

/// Exact adaptive-lag run for affine objectives: at each time the active
/// statistics are propagated, a new estimator is activated, and every active
/// estimator whose filter variance drops strictly below epsilon is finalized.
/// Estimators still active at the horizon are emitted with the truncation flag
/// set. Output is ordered by stop time, ties by s.
inline std::vector<SmoothedMarginal> ideal_adaptive_lag_run(
    const LgssmParams& params, const std::vector<Eigen::VectorXd>& observations,
    const AffineObjectives& objectives, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidParameterError("epsilon must be > 0");
  if (observations.empty()) throw InvalidParameterError("at least one observation required");
  const int T = static_cast<int>(observations.size()) - 1;

  std::vector<SmoothedMarginal> emitted;
  std::map<int, KalmanAffineStat> active;  // ordered by s
  KalmanState state;
  for (int t = 0; t <= T; ++t) {
    if (t == 0) {
      state = kalman_init(params, observations[0]);
    } else {
      const BackwardGaussian bg = backward_params(state, params);
      for (auto& [s, stat] : active) stat = ideal_affine_update(stat, bg);
      state = kalman_step(state, observations[t], params);
    }

    const AffineObjective h = objectives(t);
    if (h.alpha.size() != params.state_dim())
      throw InvalidParameterError("objective dimension mismatch");
    active[t] = KalmanAffineStat{t, h.alpha, h.beta};

    for (auto it = active.begin(); it != active.end();) {
      const double v = ideal_variance(it->second, state);
      const bool stop = v < epsilon;
      if (stop || t == T) {
        SmoothedMarginal m;
        m.s = it->first;
        m.estimate = it->second.alpha.dot(state.mean) + it->second.beta;
        m.stop_time = t;
        m.lag = t - it->first;
        m.variance_at_stop = v;
        m.truncated_by_horizon = !stop;
        emitted.push_back(m);
        it = active.erase(it);
      } else {
        ++it;
      }
    }
  }
  return emitted;
}

}  // namespace adalag
