#ifndef ROBUSTVI_MODELS_HPP
#define ROBUSTVI_MODELS_HPP

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace robustvi {
namespace models {

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/**
 * A target posterior over theta in R^P with N conditionally independent
 * observations: log p(y, theta) = sum_i log p(y_i | theta) + log p0(theta).
 *
 * Evaluation is pure and reentrant; instances are immutable after
 * construction and safe to share across chains.
 */
class Model {
 public:
  virtual ~Model() = default;

  int dim() const { return dim_; }
  int data_size() const { return data_size_; }

  virtual double log_prior(const Eigen::VectorXd& theta) const = 0;
  virtual Eigen::VectorXd log_prior_grad(const Eigen::VectorXd& theta) const = 0;
  virtual double log_lik_term(const Eigen::VectorXd& theta, int i) const = 0;
  virtual Eigen::VectorXd log_lik_term_grad(const Eigen::VectorXd& theta, int i) const = 0;

  // Sums over an index subset; the default loops over log_lik_term and is
  // overridden where a vectorized form exists.
  virtual double log_lik_sum(const Eigen::VectorXd& theta, std::span<const int> indices) const;
  virtual Eigen::VectorXd log_lik_sum_grad(const Eigen::VectorXd& theta,
                                           std::span<const int> indices) const;

  double log_joint(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd log_joint_grad(const Eigen::VectorXd& theta) const;

  // (N/|S|) * sum_{s in S}, an unbiased estimate of the full-data sum over
  // uniformly drawn S. Empty index sets are allowed only when N = 0.
  double minibatch_log_lik(const Eigen::VectorXd& theta, std::span<const int> indices) const;
  Eigen::VectorXd minibatch_log_lik_grad(const Eigen::VectorXd& theta,
                                         std::span<const int> indices) const;

  const std::optional<Moments>& analytic_moments() const { return moments_; }

 protected:
  Model(int dim, int data_size);
  void set_analytic_moments(Moments moments) { moments_ = std::move(moments); }
  void check_theta(const Eigen::VectorXd& theta, const char* function) const;
  void check_indices(std::span<const int> indices, const char* function) const;

 private:
  int dim_;
  int data_size_;
  std::optional<Moments> moments_;
};

// ---------------------------------------------------------------------------
// Synthetic Gaussian target (prior only). The variational family contains it
// exactly, so the optimum and all moments are known.
class GaussianModel : public Model {
 public:
  GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd cov);
  static GaussianModel standard(int p);

  double log_prior(const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd log_prior_grad(const Eigen::VectorXd& theta) const override;
  double log_lik_term(const Eigen::VectorXd&, int) const override;
  Eigen::VectorXd log_lik_term_grad(const Eigen::VectorXd&, int) const override;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd chol_;  // lower Cholesky of cov
  double log_norm_;
};

// ---------------------------------------------------------------------------
// Bayesian linear regression y | X ~ N(X beta, sigma^2 I), beta_k ~ N(0, 1),
// with known noise variance. Conjugate: the posterior is Gaussian.
struct LinRegSpec {
  int p = 1;
  int n = 300;
  double noise_var = 0.4;
  double design_corr = 0.0;  // gamma in [0, 1); design covariance gamma^|i-j|
  std::uint64_t seed = 0;
};

class LinearRegressionModel : public Model {
 public:
  LinearRegressionModel(Eigen::MatrixXd x, Eigen::VectorXd y, double noise_var);

  double log_prior(const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd log_prior_grad(const Eigen::VectorXd& theta) const override;
  double log_lik_term(const Eigen::VectorXd& theta, int i) const override;
  Eigen::VectorXd log_lik_term_grad(const Eigen::VectorXd& theta, int i) const override;
  double log_lik_sum(const Eigen::VectorXd& theta, std::span<const int> indices) const override;
  Eigen::VectorXd log_lik_sum_grad(const Eigen::VectorXd& theta,
                                   std::span<const int> indices) const override;

  const Eigen::MatrixXd& design() const { return x_; }
  const Eigen::VectorXd& response() const { return y_; }
  double noise_var() const { return noise_var_; }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  double noise_var_;
};

// Draws X with rows ~ N(0, K), K_ij = gamma^|i-j|, beta ~ N(0, I),
// y ~ N(X beta, sigma^2 I); the returned model carries analytic posterior
// moments.
LinearRegressionModel linreg_generate(const LinRegSpec& spec);

// Conjugate posterior: Sigma* = (X^T X / sigma^2 + I)^{-1},
// mu* = Sigma* X^T y / sigma^2.
Moments linreg_posterior(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         double noise_var);

// ---------------------------------------------------------------------------
// Bayesian logistic regression with N(0, I) prior on the coefficients.
class LogisticRegressionModel : public Model {
 public:
  LogisticRegressionModel(Eigen::MatrixXd x, Eigen::VectorXd y);

  double log_prior(const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd log_prior_grad(const Eigen::VectorXd& theta) const override;
  double log_lik_term(const Eigen::VectorXd& theta, int i) const override;
  Eigen::VectorXd log_lik_term_grad(const Eigen::VectorXd& theta, int i) const override;

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
};

// ---------------------------------------------------------------------------
// Hierarchical model for J school effects, centered or non-centered.
//
// Unconstrained layout: (theta_1..theta_J | z_1..z_J, mu, log tau); tau is
// sampled on the log scale with the Jacobian term included. Hyperpriors:
// mu ~ N(0, 5^2), tau ~ half-Cauchy(0, 5).
enum class SchoolParameterization { centered, non_centered };

class EightSchoolsModel : public Model {
 public:
  EightSchoolsModel(Eigen::VectorXd effects, Eigen::VectorXd stderrs,
                    SchoolParameterization parameterization);

  double log_prior(const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd log_prior_grad(const Eigen::VectorXd& theta) const override;
  double log_lik_term(const Eigen::VectorXd& theta, int i) const override;
  Eigen::VectorXd log_lik_term_grad(const Eigen::VectorXd& theta, int i) const override;

  SchoolParameterization parameterization() const { return parameterization_; }
  int num_schools() const { return static_cast<int>(effects_.size()); }

 private:
  Eigen::VectorXd effects_;
  Eigen::VectorXd stderrs_;
  SchoolParameterization parameterization_;
};

// ---------------------------------------------------------------------------
// 1-D equal-weight mixture 0.5 N(-separation, sd^2) + 0.5 N(+separation, sd^2);
// a deliberately multimodal target.
class GaussianMixture1D : public Model {
 public:
  GaussianMixture1D(double separation, double sd);

  double log_prior(const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd log_prior_grad(const Eigen::VectorXd& theta) const override;
  double log_lik_term(const Eigen::VectorXd&, int) const override;
  Eigen::VectorXd log_lik_term_grad(const Eigen::VectorXd&, int) const override;

 private:
  double separation_;
  double sd_;
};

// ---------------------------------------------------------------------------
// CSV dataset: header row, float columns, final column = response/label.
struct Dataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd response;
};

Dataset load_csv_dataset(const std::string& path);

// Two-column file (effect, standard error), 8 rows, with header.
struct SchoolData {
  Eigen::VectorXd effects;
  Eigen::VectorXd stderrs;
};

SchoolData load_school_data(const std::string& path);

}  // namespace models
}  // namespace robustvi

#endif
