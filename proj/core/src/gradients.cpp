#include "robustvi/gradients.hpp"

#include <cmath>
#include <stdexcept>

namespace robustvi {
namespace gradients {

namespace {

void check_args(const models::Model& model, const families::VariationalParams& params,
                int num_mc_draws, std::span<const int> minibatch, const char* function) {
  if (params.dim() != model.dim()) {
    throw std::invalid_argument(std::string(function) +
                                ": family dimension does not match model dimension");
  }
  if (num_mc_draws < 1) {
    throw std::invalid_argument(std::string(function) + ": need at least one MC draw");
  }
  if (minibatch.empty() && model.data_size() > 0) {
    throw std::invalid_argument(std::string(function) + ": empty minibatch");
  }
}

}  // namespace

ElboEstimate estimate_elbo(const models::Model& model,
                           const families::VariationalParams& params, int num_mc_draws,
                           std::span<const int> minibatch, Rng& rng) {
  check_args(model, params, num_mc_draws, minibatch, "estimate_elbo");

  ElboEstimate est;
  est.num_mc_draws = num_mc_draws;
  est.minibatch_indices.assign(minibatch.begin(), minibatch.end());

  double acc = 0.0;
  for (int m = 0; m < num_mc_draws; ++m) {
    const Eigen::VectorXd noise = draw_standard_normal(rng, params.dim());
    const Eigen::VectorXd theta = families::sample(params, noise);
    const double term =
        model.minibatch_log_lik(theta, minibatch) + model.log_prior(theta);
    if (!std::isfinite(term)) {
      est.finite = false;
    }
    acc += term;
  }
  est.value = acc / num_mc_draws + families::entropy(params);
  if (!std::isfinite(est.value)) {
    est.finite = false;
  }
  return est;
}

ElboEstimate estimate_grad(const models::Model& model,
                           const families::VariationalParams& params, int num_mc_draws,
                           std::span<const int> minibatch, Rng& rng) {
  check_args(model, params, num_mc_draws, minibatch, "estimate_grad");

  ElboEstimate est;
  est.num_mc_draws = num_mc_draws;
  est.minibatch_indices.assign(minibatch.begin(), minibatch.end());

  double value_acc = 0.0;
  Eigen::VectorXd grad_acc = Eigen::VectorXd::Zero(params.flat_size());
  for (int m = 0; m < num_mc_draws; ++m) {
    const Eigen::VectorXd noise = draw_standard_normal(rng, params.dim());
    const Eigen::VectorXd theta = families::sample(params, noise);

    value_acc += model.minibatch_log_lik(theta, minibatch) + model.log_prior(theta);
    Eigen::VectorXd grad_theta = model.log_prior_grad(theta);
    if (!minibatch.empty()) {
      grad_theta += model.minibatch_log_lik_grad(theta, minibatch);
    }
    grad_acc += families::chain_sample_gradient(params, grad_theta, noise);
  }

  est.value = value_acc / num_mc_draws + families::entropy(params);
  est.grad = grad_acc / num_mc_draws + families::entropy_gradient(params);
  est.finite = std::isfinite(est.value) && est.grad.allFinite();
  return est;
}

}  // namespace gradients
}  // namespace robustvi
