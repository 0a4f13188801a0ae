#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>

#include "adalag/errors.hpp"
#include "adalag/rng.hpp"

namespace adalag {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

/// log N(x; mean, var) for scalar Gaussians.
inline double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + d * d / var);
}

/// Checks symmetry of a square matrix within an absolute tolerance.
inline bool is_symmetric(const Eigen::MatrixXd& m, double tol) {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

/// Multivariate Gaussian with a precomputed Cholesky factor. Densities are
/// evaluated in log space; callers exponentiate at the interface if a plain
/// density is required.
class MvNormal {
 public:
  MvNormal(Eigen::VectorXd mean, const Eigen::MatrixXd& cov, double symmetry_tol = 1e-12)
      : mean_(std::move(mean)) {
    if (cov.rows() != cov.cols() || cov.rows() != mean_.size())
      throw InvalidParameterError("covariance dimensions do not match the mean");
    if (!is_symmetric(cov, symmetry_tol))
      throw InvalidParameterError("covariance matrix is not symmetric");
    llt_.compute(cov);
    if (llt_.info() != Eigen::Success)
      throw InvalidParameterError("covariance matrix is not positive definite");
    log_det_ = 2.0 * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }

  const Eigen::VectorXd& mean() const { return mean_; }
  int dim() const { return static_cast<int>(mean_.size()); }

  double log_pdf(Eigen::Ref<const Eigen::VectorXd> x) const {
    Eigen::VectorXd d = x - mean_;
    llt_.matrixL().solveInPlace(d);
    return -0.5 * (dim() * kLogTwoPi + log_det_ + d.squaredNorm());
  }

  /// Mode of the density, exp(-(n/2) log(2 pi) - (1/2) log det).
  double max_pdf() const { return std::exp(-0.5 * (dim() * kLogTwoPi + log_det_)); }

  void sample(Eigen::Ref<Eigen::VectorXd> out, RngStream& rng) const {
    for (int i = 0; i < dim(); ++i) out[i] = rng.normal();
    out = mean_ + llt_.matrixL() * out;
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_det_ = 0.0;
};

}  // namespace adalag
