#ifndef ROBUSTVI_FAMILIES_HPP
#define ROBUSTVI_FAMILIES_HPP

#include <Eigen/Core>

namespace robustvi {
namespace families {

enum class FamilyKind { mean_field, full_rank };

/**
 * Gaussian variational family q(theta) = N(theta; mu, L L^T) stored in
 * unconstrained coordinates.
 *
 * The scale block holds log standard deviations (mean-field) or the row-major
 * lower triangle of L with log-transformed diagonal entries (full-rank), so
 * every point of R^K corresponds to a valid Cholesky factor.
 *
 * Flattened layout: [location; scale], giving K = 2P (mean-field) or
 * K = P + P(P+1)/2 (full-rank) components.
 */
struct VariationalParams {
  FamilyKind kind = FamilyKind::mean_field;
  Eigen::VectorXd location;
  Eigen::VectorXd scale_unconstrained;

  int dim() const { return static_cast<int>(location.size()); }
  int flat_size() const {
    return static_cast<int>(location.size() + scale_unconstrained.size());
  }
};

// Length of the unconstrained scale block for dimension p.
int scale_size(FamilyKind kind, int p);
// Total flattened length K.
int flat_size(FamilyKind kind, int p);

// mu = 0, L = I.
VariationalParams standard(FamilyKind kind, int p);

Eigen::VectorXd flatten(const VariationalParams& params);
VariationalParams unflatten(FamilyKind kind, int p, const Eigen::VectorXd& flat);

// Dense lower-triangular Cholesky factor L reconstructed from the
// unconstrained scale block.
Eigen::MatrixXd cholesky_factor(const VariationalParams& params);

// Index of the k-th log-diagonal entry inside the scale block.
int diagonal_scale_index(FamilyKind kind, int k);

// theta = mu + L z. Deterministic in `noise`; theta ~ q for z ~ N(0, I).
Eigen::VectorXd sample(const VariationalParams& params, const Eigen::VectorXd& noise);

// Exact log N(point; mu, L L^T) via forward substitution, never a matrix
// inverse.
double log_density(const VariationalParams& params, const Eigen::VectorXd& point);

// (P/2)(1 + ln 2 pi) + sum_i ln L_ii.
double entropy(const VariationalParams& params);

// Gradient of entropy with respect to the flattened coordinates: exactly 1 on
// each log-diagonal coordinate, 0 elsewhere.
Eigen::VectorXd entropy_gradient(const VariationalParams& params);

// Gradient of log_density(params, point) with respect to the flattened
// coordinates, with `point` held fixed.
Eigen::VectorXd log_density_gradient(const VariationalParams& params,
                                     const Eigen::VectorXd& point);

// Chains a d f / d theta gradient through theta = mu + L z into the flattened
// coordinates; `noise` is the z that produced theta.
Eigen::VectorXd chain_sample_gradient(const VariationalParams& params,
                                      const Eigen::VectorXd& grad_theta,
                                      const Eigen::VectorXd& noise);

}  // namespace families
}  // namespace robustvi

#endif
