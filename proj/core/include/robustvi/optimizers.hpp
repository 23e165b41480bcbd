#ifndef ROBUSTVI_OPTIMIZERS_HPP
#define ROBUSTVI_OPTIMIZERS_HPP

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace robustvi {
namespace optimizers {

enum class OptimizerKind { sgd, adagrad, rmsprop, adam };

OptimizerKind optimizer_kind_from_string(const std::string& name);
std::string to_string(OptimizerKind kind);

// Thrown when a gradient goes non-finite; the workflow reports it as
// optimizer divergence.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OptimizerOptions {
  double rmsprop_decay = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double stabilizer = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables clipping
};

/**
 * Ascent update lambda <- lambda + eta * gamma_t(g) * g with a constant base
 * step and the per-scheme adaptive factor gamma_t. State is one plain value
 * per chain; identical (state, params, gradient stream) produce identical
 * trajectories.
 */
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double base_step, int dim,
            OptimizerOptions options = {});

  // Applies one update in place. Throws DivergenceError on non-finite
  // gradient components.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

  OptimizerKind kind() const { return kind_; }
  double base_step() const { return base_step_; }
  int dim() const { return dim_; }
  std::int64_t step_count() const { return step_count_; }

 private:
  OptimizerKind kind_;
  double base_step_;
  int dim_;
  OptimizerOptions options_;
  std::int64_t step_count_ = 0;
  Eigen::ArrayXd second_moment_;  // adagrad sum / rmsprop EMA / adam EMA
  Eigen::ArrayXd first_moment_;   // adam only
};

}  // namespace optimizers
}  // namespace robustvi

#endif
