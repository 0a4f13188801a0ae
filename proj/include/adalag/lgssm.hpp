#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <utility>

#include "adalag/gaussian.hpp"
#include "adalag/model.hpp"

namespace adalag {

/// Parameters of the linear Gaussian model
///   X_{t+1} = A X_t + U_{t+1},   U ~ N(0, Sigma_U)
///   Y_t     = B X_t + V_t,       V ~ N(0, Sigma_V)
/// with X_0 ~ N(initial_mean, initial_cov).
struct LgssmParams {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd sigma_u;
  Eigen::MatrixXd sigma_v;
  Eigen::VectorXd initial_mean;
  Eigen::MatrixXd initial_cov;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int obs_dim() const { return static_cast<int>(B.rows()); }

  static LgssmParams scalar(double a, double b, double sigma_u, double sigma_v,
                            double initial_mean = 0.0, double initial_var = 1.0) {
    LgssmParams p;
    p.A = Eigen::MatrixXd::Constant(1, 1, a);
    p.B = Eigen::MatrixXd::Constant(1, 1, b);
    p.sigma_u = Eigen::MatrixXd::Constant(1, 1, sigma_u * sigma_u);
    p.sigma_v = Eigen::MatrixXd::Constant(1, 1, sigma_v * sigma_v);
    p.initial_mean = Eigen::VectorXd::Constant(1, initial_mean);
    p.initial_cov = Eigen::MatrixXd::Constant(1, 1, initial_var);
    return p;
  }
};

/// Particle mode requires Sigma_U positive definite (the backward density must
/// exist); simulation-only mode accepts positive semidefinite Sigma_U, e.g. a
/// deterministic transition, and leaves the transition density unset.
enum class LgssmMode { particle, simulation_only };

namespace detail {

constexpr double kSymTol = 1e-12;

inline void check_lgssm_dims(const LgssmParams& p) {
  const int nx = p.state_dim(), ny = p.obs_dim();
  if (nx < 1 || ny < 1) throw InvalidParameterError("state and observation dimensions must be >= 1");
  if (p.A.cols() != nx || p.B.cols() != nx || p.sigma_u.rows() != nx || p.sigma_u.cols() != nx ||
      p.sigma_v.rows() != ny || p.sigma_v.cols() != ny || p.initial_mean.size() != nx ||
      p.initial_cov.rows() != nx || p.initial_cov.cols() != nx)
    throw InvalidParameterError("inconsistent matrix dimensions in LgssmParams");
  if (!is_symmetric(p.sigma_u, kSymTol) || !is_symmetric(p.sigma_v, kSymTol) ||
      !is_symmetric(p.initial_cov, kSymTol))
    throw InvalidParameterError("covariance matrices must be symmetric");
}

/// Square root of a PSD matrix via the symmetric eigendecomposition; small
/// negative eigenvalues within tolerance are clamped to zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (int i = 0; i < lam.size(); ++i) {
    if (lam[i] < -tol) throw InvalidParameterError("covariance matrix has a negative eigenvalue");
    lam[i] = std::sqrt(std::max(lam[i], 0.0));
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// Builds a ModelSpec for the linear Gaussian model. The transition density is
/// N(x'; Ax, Sigma_U) and density_upper_bound is its mode
/// (2 pi)^{-nx/2} det(Sigma_U)^{-1/2}. Densities are computed in log space and
/// exponentiated at the interface.
inline ModelSpec make_lgssm(const LgssmParams& params, LgssmMode mode = LgssmMode::particle) {
  detail::check_lgssm_dims(params);
  const int nx = params.state_dim();
  const int ny = params.obs_dim();

  ModelSpec model;
  model.state_dim = nx;
  model.obs_dim = ny;

  // Initial law; simulation-only mode tolerates a degenerate (PSD) covariance,
  // in which case only the sampler is defined.
  Eigen::LLT<Eigen::MatrixXd> llt_0(params.initial_cov);
  if (llt_0.info() == Eigen::Success && params.initial_cov.diagonal().minCoeff() > 0.0) {
    auto initial = std::make_shared<MvNormal>(params.initial_mean, params.initial_cov);
    model.initial_sampler = [initial](Eigen::Ref<Eigen::VectorXd> out, RngStream& rng) {
      initial->sample(out, rng);
    };
    model.initial_density = [initial](ConstVec x) { return std::exp(initial->log_pdf(x)); };
  } else if (mode == LgssmMode::simulation_only) {
    const Eigen::VectorXd mean0 = params.initial_mean;
    const Eigen::MatrixXd root0 = detail::psd_sqrt(params.initial_cov);
    model.initial_sampler = [mean0, root0, nx](Eigen::Ref<Eigen::VectorXd> out, RngStream& rng) {
      Eigen::VectorXd z(nx);
      for (int i = 0; i < nx; ++i) z[i] = rng.normal();
      out = mean0 + root0 * z;
    };
  } else {
    throw InvalidParameterError("initial covariance must be positive definite");
  }

  // Transition. Particle mode demands SPD noise; simulation-only tolerates a
  // PSD (possibly zero) Sigma_U and provides only the sampler.
  const Eigen::MatrixXd A = params.A;
  Eigen::LLT<Eigen::MatrixXd> llt_u(params.sigma_u);
  const bool spd_u = llt_u.info() == Eigen::Success && params.sigma_u.diagonal().minCoeff() > 0.0;
  if (mode == LgssmMode::particle && !spd_u)
    throw InvalidParameterError("Sigma_U must be positive definite for particle models");

  const Eigen::MatrixXd chol_u = spd_u ? Eigen::MatrixXd(llt_u.matrixL()) : detail::psd_sqrt(params.sigma_u);
  model.transition_sampler = [A, chol_u, nx](ConstVec x, Eigen::Ref<Eigen::VectorXd> out,
                                             RngStream& rng) {
    Eigen::VectorXd z(nx);
    for (int i = 0; i < nx; ++i) z[i] = rng.normal();
    out = A * x + chol_u * z;
  };

  if (spd_u) {
    const double log_det_u = 2.0 * chol_u.diagonal().array().log().sum();
    const double log_mode = -0.5 * (nx * kLogTwoPi + log_det_u);
    model.density_upper_bound = std::exp(log_mode);
    if (nx == 1) {
      const double a = A(0, 0), var_u = params.sigma_u(0, 0);
      model.transition_density = [a, var_u](ConstVec x, ConstVec xn) {
        return std::exp(log_normal_pdf(xn[0], a * x[0], var_u));
      };
    } else {
      Eigen::MatrixXd chol = chol_u;
      model.transition_density = [A, chol, log_mode](ConstVec x, ConstVec xn) {
        Eigen::VectorXd d = xn - A * x;
        chol.triangularView<Eigen::Lower>().solveInPlace(d);
        return std::exp(log_mode - 0.5 * d.squaredNorm());
      };
    }
  }

  // Observation law N(y; Bx, Sigma_V), with g_t bound to the store.
  const Eigen::MatrixXd B = params.B;
  Eigen::LLT<Eigen::MatrixXd> llt_v(params.sigma_v);
  if (llt_v.info() != Eigen::Success || params.sigma_v.diagonal().minCoeff() <= 0.0)
    throw InvalidParameterError("Sigma_V must be positive definite");
  const Eigen::MatrixXd chol_v = llt_v.matrixL();
  model.observation_sampler = [B, chol_v, ny](ConstVec x, Eigen::Ref<Eigen::VectorXd> out,
                                              RngStream& rng) {
    Eigen::VectorXd z(ny);
    for (int i = 0; i < ny; ++i) z[i] = rng.normal();
    out = B * x + chol_v * z;
  };

  auto store = model.observations;
  if (nx == 1 && ny == 1) {
    const double b = B(0, 0), var_v = params.sigma_v(0, 0);
    model.observation_density = [store, b, var_v](int t, ConstVec x) {
      return std::exp(log_normal_pdf(store->at(t)[0], b * x[0], var_v));
    };
  } else {
    const double log_det_v = 2.0 * chol_v.diagonal().array().log().sum();
    const double log_norm_v = -0.5 * (ny * kLogTwoPi + log_det_v);
    Eigen::MatrixXd chol = chol_v;
    model.observation_density = [store, B, chol, log_norm_v](int t, ConstVec x) {
      Eigen::VectorXd d = store->at(t) - B * x;
      chol.triangularView<Eigen::Lower>().solveInPlace(d);
      return std::exp(log_norm_v - 0.5 * d.squaredNorm());
    };
  }

  return model;
}

}  // namespace adalag
