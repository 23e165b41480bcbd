#include "robustvi/optimizers.hpp"

#include <cmath>

namespace robustvi {
namespace optimizers {

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adagrad") return OptimizerKind::adagrad;
  if (name == "rmsprop") return OptimizerKind::rmsprop;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer: " + name);
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adagrad: return "adagrad";
    case OptimizerKind::rmsprop: return "rmsprop";
    case OptimizerKind::adam: return "adam";
  }
  return "unknown";
}

Optimizer::Optimizer(OptimizerKind kind, double base_step, int dim,
                     OptimizerOptions options)
    : kind_(kind), base_step_(base_step), dim_(dim), options_(options) {
  if (base_step <= 0.0) {
    throw std::invalid_argument("Optimizer: base step must be positive");
  }
  if (dim < 1) {
    throw std::invalid_argument("Optimizer: dimension must be positive");
  }
  if (kind_ != OptimizerKind::sgd) {
    second_moment_ = Eigen::ArrayXd::Zero(dim_);
  }
  if (kind_ == OptimizerKind::adam) {
    first_moment_ = Eigen::ArrayXd::Zero(dim_);
  }
}

void Optimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (params.size() != dim_ || grad.size() != dim_) {
    throw std::invalid_argument("Optimizer::step: dimension mismatch");
  }
  if (!grad.allFinite()) {
    throw DivergenceError("Optimizer::step: non-finite gradient component");
  }

  Eigen::ArrayXd g = grad.array();
  if (options_.max_grad_norm > 0.0) {
    const double norm = grad.norm();
    if (norm > options_.max_grad_norm) {
      g *= options_.max_grad_norm / norm;
    }
  }
  ++step_count_;

  switch (kind_) {
    case OptimizerKind::sgd:
      params.array() += base_step_ * g;
      break;
    case OptimizerKind::adagrad:
      second_moment_ += g.square();
      params.array() += base_step_ * g / (second_moment_ + options_.stabilizer).sqrt();
      break;
    case OptimizerKind::rmsprop:
      second_moment_ = options_.rmsprop_decay * second_moment_ +
                       (1.0 - options_.rmsprop_decay) * g.square();
      params.array() += base_step_ * g / (second_moment_ + options_.stabilizer).sqrt();
      break;
    case OptimizerKind::adam: {
      first_moment_ = options_.adam_beta1 * first_moment_ + (1.0 - options_.adam_beta1) * g;
      second_moment_ =
          options_.adam_beta2 * second_moment_ + (1.0 - options_.adam_beta2) * g.square();
      const double c1 = 1.0 - std::pow(options_.adam_beta1, static_cast<double>(step_count_));
      const double c2 = 1.0 - std::pow(options_.adam_beta2, static_cast<double>(step_count_));
      params.array() +=
          base_step_ * (first_moment_ / c1) / ((second_moment_ / c2).sqrt() + options_.stabilizer);
      break;
    }
  }
}

}  // namespace optimizers
}  // namespace robustvi
