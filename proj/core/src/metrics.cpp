#include "robustvi/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace robustvi {
namespace metrics {

namespace {

void check_symmetric(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string("moment_distance: ") + name + " is not square");
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    throw std::invalid_argument(std::string("moment_distance: ") + name +
                                " is not symmetric");
  }
}

}  // namespace

MomentDistance moment_distance(const Eigen::VectorXd& mu_hat,
                               const Eigen::MatrixXd& sigma_hat,
                               const Eigen::VectorXd& mu_ref,
                               const Eigen::MatrixXd& sigma_ref) {
  if (mu_hat.size() != mu_ref.size()) {
    throw std::invalid_argument("moment_distance: mean length mismatch");
  }
  check_symmetric(sigma_hat, "sigma_hat");
  check_symmetric(sigma_ref, "sigma_ref");
  if (sigma_hat.rows() != mu_hat.size() || sigma_ref.rows() != mu_ref.size()) {
    throw std::invalid_argument("moment_distance: covariance/mean shape mismatch");
  }

  MomentDistance out;
  out.d_mu = (mu_hat - mu_ref).norm();
  out.d_sigma = std::sqrt((sigma_hat - sigma_ref).norm());
  out.d = std::hypot(out.d_mu, out.d_sigma);
  return out;
}

models::Moments variational_moments(const families::VariationalParams& params) {
  models::Moments moments;
  moments.mean = params.location;
  if (params.kind == families::FamilyKind::mean_field) {
    moments.cov = (2.0 * params.scale_unconstrained).array().exp().matrix().asDiagonal();
    return moments;
  }
  const Eigen::MatrixXd chol = families::cholesky_factor(params);
  moments.cov = chol * chol.transpose();
  return moments;
}

}  // namespace metrics
}  // namespace robustvi
