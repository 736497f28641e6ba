#pragma once

#include <stdexcept>

#include <Eigen/Dense>

namespace pmcmc {

/// Partial derivatives of log N(x; mean, cov).
struct GaussianLogpdfDerivs {
  Eigen::VectorXd d_x;
  Eigen::VectorXd d_mean;
  Eigen::MatrixXd d_cov;
};

/// d/dx = -C^-1 (x - mu), d/dmu = C^-1 (x - mu),
/// d/dC = -1/2 (C^-1 - C^-1 (x - mu)(x - mu)^T C^-1).
/// d/dC treats the entries of C as independent (no symmetrization).
inline GaussianLogpdfDerivs gaussian_logpdf_derivs(const Eigen::VectorXd& x,
                                                   const Eigen::VectorXd& mean,
                                                   const Eigen::MatrixXd& cov) {
  if (x.size() != mean.size() || cov.rows() != x.size() || cov.cols() != x.size()) {
    throw std::invalid_argument("dimension mismatch in gaussian_logpdf_derivs");
  }
  if (!cov.isApprox(cov.transpose(), 1e-12)) {
    throw std::invalid_argument("covariance must be symmetric");
  }
  const Eigen::LLT<Eigen::MatrixXd> chol(cov);
  if (chol.info() != Eigen::Success) {
    throw std::invalid_argument("covariance must be positive definite");
  }
  const Eigen::Index n = x.size();
  const Eigen::MatrixXd cov_inv = chol.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::VectorXd scaled = chol.solve(x - mean);

  GaussianLogpdfDerivs out;
  out.d_mean = scaled;
  out.d_x = -scaled;
  out.d_cov = -0.5 * (cov_inv - scaled * scaled.transpose());
  return out;
}

}  // namespace pmcmc
