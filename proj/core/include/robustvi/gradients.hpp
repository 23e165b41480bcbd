#ifndef ROBUSTVI_GRADIENTS_HPP
#define ROBUSTVI_GRADIENTS_HPP

#include <Eigen/Core>
#include <span>
#include <vector>

#include "robustvi/families.hpp"
#include "robustvi/models.hpp"
#include "robustvi/rng.hpp"

namespace robustvi {
namespace gradients {

/**
 * A stochastic estimate of the ELBO and (optionally) its gradient in the
 * flattened variational coordinates.
 *
 * `finite` is false when any Monte Carlo draw produced a non-finite log
 * density or gradient; the workflow treats that as optimizer divergence.
 */
struct ElboEstimate {
  double value = 0.0;
  Eigen::VectorXd grad;  // length K, empty when only the value was estimated
  int num_mc_draws = 0;
  std::vector<int> minibatch_indices;
  bool finite = true;
};

/**
 * Estimates the ELBO with M reparameterized draws and the given minibatch:
 * the likelihood sum is scaled by N/|S|, the prior term uses the same draws,
 * and the entropy enters analytically. The expectation over draws and
 * uniformly sampled minibatches equals the exact ELBO.
 */
ElboEstimate estimate_elbo(const models::Model& model,
                           const families::VariationalParams& params, int num_mc_draws,
                           std::span<const int> minibatch, Rng& rng);

/**
 * Pathwise (reparameterization) gradient estimate. Each draw chains the model
 * gradient at theta = mu + L z into the flattened coordinates; the entropy
 * gradient is added analytically. Also fills `value` with the matching ELBO
 * estimate from the same draws, so the estimate is the exact gradient of
 * estimate_elbo under common random numbers.
 */
ElboEstimate estimate_grad(const models::Model& model,
                           const families::VariationalParams& params, int num_mc_draws,
                           std::span<const int> minibatch, Rng& rng);

}  // namespace gradients
}  // namespace robustvi

#endif
