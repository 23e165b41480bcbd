#ifndef ROBUSTVI_METRICS_HPP
#define ROBUSTVI_METRICS_HPP

#include <Eigen/Core>

#include "robustvi/families.hpp"
#include "robustvi/models.hpp"

namespace robustvi {
namespace metrics {

/**
 * Normalized moment distance to a reference posterior:
 * d_mu = ||mu_hat - mu||_2, d_sigma = ||Sigma_hat - Sigma||_F^{1/2},
 * d = sqrt(d_mu^2 + d_sigma^2).
 */
struct MomentDistance {
  double d_mu = 0.0;
  double d_sigma = 0.0;
  double d = 0.0;
};

// Symmetric in (hat, ref); covariance inputs must be symmetric to 1e-8.
MomentDistance moment_distance(const Eigen::VectorXd& mu_hat,
                               const Eigen::MatrixXd& sigma_hat,
                               const Eigen::VectorXd& mu_ref,
                               const Eigen::MatrixXd& sigma_ref);

// (mu, L L^T) of the fitted family.
models::Moments variational_moments(const families::VariationalParams& params);

}  // namespace metrics
}  // namespace robustvi

#endif
