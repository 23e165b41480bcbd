#include "robustvi/families.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace robustvi {
namespace families {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_well_formed(const VariationalParams& params, const char* function) {
  const int p = params.dim();
  if (p < 1) {
    throw std::invalid_argument(std::string(function) + ": empty location vector");
  }
  if (params.scale_unconstrained.size() != scale_size(params.kind, p)) {
    throw std::invalid_argument(std::string(function) + ": scale block has length " +
                                std::to_string(params.scale_unconstrained.size()) +
                                ", expected " +
                                std::to_string(scale_size(params.kind, p)));
  }
}

void check_point(const VariationalParams& params, const Eigen::VectorXd& point,
                 const char* function) {
  if (point.size() != params.dim()) {
    throw std::invalid_argument(std::string(function) + ": point has length " +
                                std::to_string(point.size()) + ", expected " +
                                std::to_string(params.dim()));
  }
}

// Row-major lower-triangle offset of row i.
inline int tri_row_offset(int i) { return i * (i + 1) / 2; }

}  // namespace

int scale_size(FamilyKind kind, int p) {
  return kind == FamilyKind::mean_field ? p : p * (p + 1) / 2;
}

int flat_size(FamilyKind kind, int p) { return p + scale_size(kind, p); }

VariationalParams standard(FamilyKind kind, int p) {
  if (p < 1) {
    throw std::invalid_argument("families::standard: dimension must be positive");
  }
  VariationalParams params;
  params.kind = kind;
  params.location = Eigen::VectorXd::Zero(p);
  params.scale_unconstrained = Eigen::VectorXd::Zero(scale_size(kind, p));
  return params;
}

Eigen::VectorXd flatten(const VariationalParams& params) {
  check_well_formed(params, "families::flatten");
  Eigen::VectorXd flat(params.flat_size());
  flat.head(params.dim()) = params.location;
  flat.tail(params.scale_unconstrained.size()) = params.scale_unconstrained;
  return flat;
}

VariationalParams unflatten(FamilyKind kind, int p, const Eigen::VectorXd& flat) {
  if (flat.size() != flat_size(kind, p)) {
    throw std::invalid_argument("families::unflatten: flat vector has length " +
                                std::to_string(flat.size()) + ", expected " +
                                std::to_string(flat_size(kind, p)));
  }
  VariationalParams params;
  params.kind = kind;
  params.location = flat.head(p);
  params.scale_unconstrained = flat.tail(scale_size(kind, p));
  return params;
}

Eigen::MatrixXd cholesky_factor(const VariationalParams& params) {
  check_well_formed(params, "families::cholesky_factor");
  const int p = params.dim();
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(p, p);
  if (params.kind == FamilyKind::mean_field) {
    chol.diagonal() = params.scale_unconstrained.array().exp();
    return chol;
  }
  const Eigen::VectorXd& s = params.scale_unconstrained;
  for (int i = 0; i < p; ++i) {
    const int row = tri_row_offset(i);
    for (int j = 0; j < i; ++j) {
      chol(i, j) = s(row + j);
    }
    chol(i, i) = std::exp(s(row + i));
  }
  return chol;
}

int diagonal_scale_index(FamilyKind kind, int k) {
  return kind == FamilyKind::mean_field ? k : tri_row_offset(k) + k;
}

Eigen::VectorXd sample(const VariationalParams& params, const Eigen::VectorXd& noise) {
  check_well_formed(params, "families::sample");
  check_point(params, noise, "families::sample");
  const int p = params.dim();
  const Eigen::VectorXd& s = params.scale_unconstrained;
  Eigen::VectorXd out(p);
  if (params.kind == FamilyKind::mean_field) {
    out = params.location.array() + s.array().exp() * noise.array();
    return out;
  }
  for (int i = 0; i < p; ++i) {
    const int row = tri_row_offset(i);
    double acc = std::exp(s(row + i)) * noise(i);
    for (int j = 0; j < i; ++j) {
      acc += s(row + j) * noise(j);
    }
    out(i) = params.location(i) + acc;
  }
  return out;
}

namespace {

// Forward substitution z = L^{-1} (point - mu) over the packed scale block.
Eigen::VectorXd whiten(const VariationalParams& params, const Eigen::VectorXd& point) {
  const int p = params.dim();
  const Eigen::VectorXd& s = params.scale_unconstrained;
  Eigen::VectorXd z(p);
  if (params.kind == FamilyKind::mean_field) {
    z = (point - params.location).array() * (-s).array().exp();
    return z;
  }
  for (int i = 0; i < p; ++i) {
    const int row = tri_row_offset(i);
    double acc = point(i) - params.location(i);
    for (int j = 0; j < i; ++j) {
      acc -= s(row + j) * z(j);
    }
    z(i) = acc / std::exp(s(row + i));
  }
  return z;
}

double log_diag_sum(const VariationalParams& params) {
  if (params.kind == FamilyKind::mean_field) {
    return params.scale_unconstrained.sum();
  }
  double sum = 0.0;
  for (int i = 0; i < params.dim(); ++i) {
    sum += params.scale_unconstrained(tri_row_offset(i) + i);
  }
  return sum;
}

}  // namespace

double log_density(const VariationalParams& params, const Eigen::VectorXd& point) {
  check_well_formed(params, "families::log_density");
  check_point(params, point, "families::log_density");
  const Eigen::VectorXd z = whiten(params, point);
  return -0.5 * params.dim() * kLog2Pi - log_diag_sum(params) - 0.5 * z.squaredNorm();
}

double entropy(const VariationalParams& params) {
  check_well_formed(params, "families::entropy");
  return 0.5 * params.dim() * (1.0 + kLog2Pi) + log_diag_sum(params);
}

Eigen::VectorXd entropy_gradient(const VariationalParams& params) {
  check_well_formed(params, "families::entropy_gradient");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.flat_size());
  const int p = params.dim();
  for (int k = 0; k < p; ++k) {
    grad(p + diagonal_scale_index(params.kind, k)) = 1.0;
  }
  return grad;
}

Eigen::VectorXd log_density_gradient(const VariationalParams& params,
                                     const Eigen::VectorXd& point) {
  check_well_formed(params, "families::log_density_gradient");
  check_point(params, point, "families::log_density_gradient");
  const int p = params.dim();
  const Eigen::VectorXd& s = params.scale_unconstrained;
  const Eigen::VectorXd z = whiten(params, point);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.flat_size());

  if (params.kind == FamilyKind::mean_field) {
    const Eigen::ArrayXd inv_sd = (-s).array().exp();
    grad.head(p) = z.array() * inv_sd;                 // L^{-T} z for diagonal L
    grad.tail(p) = z.array().square() - 1.0;           // d/d(log sd)
    return grad;
  }

  // w = L^{-T} z by backward substitution over the packed lower triangle.
  Eigen::VectorXd w(p);
  for (int i = p - 1; i >= 0; --i) {
    double acc = z(i);
    for (int j = i + 1; j < p; ++j) {
      acc -= s(tri_row_offset(j) + i) * w(j);
    }
    w(i) = acc / std::exp(s(tri_row_offset(i) + i));
  }

  grad.head(p) = w;
  for (int i = 0; i < p; ++i) {
    const int row = tri_row_offset(i);
    for (int j = 0; j < i; ++j) {
      grad(p + row + j) = w(i) * z(j);
    }
    // Chain rule through L_ii = exp(u_ii) picks up the -1 from the log
    // determinant.
    grad(p + row + i) = w(i) * z(i) * std::exp(s(row + i)) - 1.0;
  }
  return grad;
}

Eigen::VectorXd chain_sample_gradient(const VariationalParams& params,
                                      const Eigen::VectorXd& grad_theta,
                                      const Eigen::VectorXd& noise) {
  check_well_formed(params, "families::chain_sample_gradient");
  check_point(params, grad_theta, "families::chain_sample_gradient");
  check_point(params, noise, "families::chain_sample_gradient");
  const int p = params.dim();
  const Eigen::VectorXd& s = params.scale_unconstrained;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.flat_size());
  grad.head(p) = grad_theta;

  if (params.kind == FamilyKind::mean_field) {
    grad.tail(p) = grad_theta.array() * noise.array() * s.array().exp();
    return grad;
  }
  for (int i = 0; i < p; ++i) {
    const int row = tri_row_offset(i);
    for (int j = 0; j < i; ++j) {
      grad(p + row + j) = grad_theta(i) * noise(j);
    }
    grad(p + row + i) = grad_theta(i) * noise(i) * std::exp(s(row + i));
  }
  return grad;
}

}  // namespace families
}  // namespace robustvi
