#include "robustvi/models.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "robustvi/rng.hpp"

namespace robustvi {
namespace models {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double normal_log_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * kLog2Pi - std::log(sd) - 0.5 * z * z;
}

}  // namespace

// ---------------------------------------------------------------------------
// Model base

Model::Model(int dim, int data_size) : dim_(dim), data_size_(data_size) {
  if (dim < 1) {
    throw std::invalid_argument("Model: dimension must be positive");
  }
  if (data_size < 0) {
    throw std::invalid_argument("Model: negative data size");
  }
}

void Model::check_theta(const Eigen::VectorXd& theta, const char* function) const {
  if (theta.size() != dim_) {
    throw std::invalid_argument(std::string(function) + ": theta has length " +
                                std::to_string(theta.size()) + ", expected " +
                                std::to_string(dim_));
  }
}

void Model::check_indices(std::span<const int> indices, const char* function) const {
  for (int i : indices) {
    if (i < 0 || i >= data_size_) {
      throw std::invalid_argument(std::string(function) + ": index " + std::to_string(i) +
                                  " out of range [0, " + std::to_string(data_size_) + ")");
    }
  }
}

double Model::log_lik_sum(const Eigen::VectorXd& theta, std::span<const int> indices) const {
  check_theta(theta, "Model::log_lik_sum");
  check_indices(indices, "Model::log_lik_sum");
  double sum = 0.0;
  for (int i : indices) {
    sum += log_lik_term(theta, i);
  }
  return sum;
}

Eigen::VectorXd Model::log_lik_sum_grad(const Eigen::VectorXd& theta,
                                        std::span<const int> indices) const {
  check_theta(theta, "Model::log_lik_sum_grad");
  check_indices(indices, "Model::log_lik_sum_grad");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim_);
  for (int i : indices) {
    grad += log_lik_term_grad(theta, i);
  }
  return grad;
}

double Model::log_joint(const Eigen::VectorXd& theta) const {
  double sum = log_prior(theta);
  for (int i = 0; i < data_size_; ++i) {
    sum += log_lik_term(theta, i);
  }
  return sum;
}

Eigen::VectorXd Model::log_joint_grad(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd grad = log_prior_grad(theta);
  for (int i = 0; i < data_size_; ++i) {
    grad += log_lik_term_grad(theta, i);
  }
  return grad;
}

double Model::minibatch_log_lik(const Eigen::VectorXd& theta,
                                std::span<const int> indices) const {
  if (indices.empty()) {
    if (data_size_ == 0) {
      return 0.0;
    }
    throw std::invalid_argument("Model::minibatch_log_lik: empty index set");
  }
  const double scale = static_cast<double>(data_size_) / static_cast<double>(indices.size());
  return scale * log_lik_sum(theta, indices);
}

Eigen::VectorXd Model::minibatch_log_lik_grad(const Eigen::VectorXd& theta,
                                              std::span<const int> indices) const {
  if (indices.empty()) {
    if (data_size_ == 0) {
      return Eigen::VectorXd::Zero(dim_);
    }
    throw std::invalid_argument("Model::minibatch_log_lik_grad: empty index set");
  }
  const double scale = static_cast<double>(data_size_) / static_cast<double>(indices.size());
  return scale * log_lik_sum_grad(theta, indices);
}

// ---------------------------------------------------------------------------
// GaussianModel

GaussianModel::GaussianModel(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : Model(static_cast<int>(mean.size()), 0), mean_(std::move(mean)) {
  if (cov.rows() != mean_.size() || cov.cols() != mean_.size()) {
    throw std::invalid_argument("GaussianModel: covariance shape mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("GaussianModel: covariance not positive definite");
  }
  chol_ = llt.matrixL();
  log_norm_ = -0.5 * dim() * kLog2Pi - chol_.diagonal().array().log().sum();
}

GaussianModel GaussianModel::standard(int p) {
  return GaussianModel(Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Identity(p, p));
}

double GaussianModel::log_prior(const Eigen::VectorXd& theta) const {
  check_theta(theta, "GaussianModel::log_prior");
  const Eigen::VectorXd z =
      chol_.triangularView<Eigen::Lower>().solve(theta - mean_);
  return log_norm_ - 0.5 * z.squaredNorm();
}

Eigen::VectorXd GaussianModel::log_prior_grad(const Eigen::VectorXd& theta) const {
  check_theta(theta, "GaussianModel::log_prior_grad");
  const Eigen::VectorXd z =
      chol_.triangularView<Eigen::Lower>().solve(theta - mean_);
  return -chol_.transpose().triangularView<Eigen::Upper>().solve(z);
}

double GaussianModel::log_lik_term(const Eigen::VectorXd&, int) const {
  throw std::invalid_argument("GaussianModel has no observations");
}

Eigen::VectorXd GaussianModel::log_lik_term_grad(const Eigen::VectorXd&, int) const {
  throw std::invalid_argument("GaussianModel has no observations");
}

// ---------------------------------------------------------------------------
// Linear regression

LinearRegressionModel::LinearRegressionModel(Eigen::MatrixXd x, Eigen::VectorXd y,
                                             double noise_var)
    : Model(static_cast<int>(x.cols()), static_cast<int>(x.rows())),
      x_(std::move(x)),
      y_(std::move(y)),
      noise_var_(noise_var) {
  if (y_.size() != x_.rows()) {
    throw std::invalid_argument("LinearRegressionModel: X/y size mismatch");
  }
  if (noise_var_ <= 0.0) {
    throw std::invalid_argument("LinearRegressionModel: noise variance must be positive");
  }
  set_analytic_moments(linreg_posterior(x_, y_, noise_var_));
}

double LinearRegressionModel::log_prior(const Eigen::VectorXd& theta) const {
  check_theta(theta, "LinearRegressionModel::log_prior");
  return -0.5 * dim() * kLog2Pi - 0.5 * theta.squaredNorm();
}

Eigen::VectorXd LinearRegressionModel::log_prior_grad(const Eigen::VectorXd& theta) const {
  check_theta(theta, "LinearRegressionModel::log_prior_grad");
  return -theta;
}

double LinearRegressionModel::log_lik_term(const Eigen::VectorXd& theta, int i) const {
  check_theta(theta, "LinearRegressionModel::log_lik_term");
  const int idx[] = {i};
  check_indices(idx, "LinearRegressionModel::log_lik_term");
  const double r = y_(i) - x_.row(i).dot(theta);
  return -0.5 * kLog2Pi - 0.5 * std::log(noise_var_) - 0.5 * r * r / noise_var_;
}

Eigen::VectorXd LinearRegressionModel::log_lik_term_grad(const Eigen::VectorXd& theta,
                                                         int i) const {
  check_theta(theta, "LinearRegressionModel::log_lik_term_grad");
  const int idx[] = {i};
  check_indices(idx, "LinearRegressionModel::log_lik_term_grad");
  const double r = y_(i) - x_.row(i).dot(theta);
  return x_.row(i).transpose() * (r / noise_var_);
}

double LinearRegressionModel::log_lik_sum(const Eigen::VectorXd& theta,
                                          std::span<const int> indices) const {
  check_theta(theta, "LinearRegressionModel::log_lik_sum");
  check_indices(indices, "LinearRegressionModel::log_lik_sum");
  const double norm = -0.5 * kLog2Pi - 0.5 * std::log(noise_var_);
  double quad = 0.0;
  for (int i : indices) {
    const double r = y_(i) - x_.row(i).dot(theta);
    quad += r * r;
  }
  return static_cast<double>(indices.size()) * norm - 0.5 * quad / noise_var_;
}

Eigen::VectorXd LinearRegressionModel::log_lik_sum_grad(const Eigen::VectorXd& theta,
                                                        std::span<const int> indices) const {
  check_theta(theta, "LinearRegressionModel::log_lik_sum_grad");
  check_indices(indices, "LinearRegressionModel::log_lik_sum_grad");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim());
  for (int i : indices) {
    const double r = y_(i) - x_.row(i).dot(theta);
    grad += x_.row(i).transpose() * (r / noise_var_);
  }
  return grad;
}

LinearRegressionModel linreg_generate(const LinRegSpec& spec) {
  if (spec.design_corr < 0.0 || spec.design_corr >= 1.0) {
    throw std::invalid_argument("linreg_generate: design_corr must lie in [0, 1)");
  }
  if (spec.p < 1 || spec.n < 1) {
    throw std::invalid_argument("linreg_generate: p and n must be positive");
  }
  if (spec.noise_var <= 0.0) {
    throw std::invalid_argument("linreg_generate: noise_var must be positive");
  }

  Eigen::MatrixXd design_cov(spec.p, spec.p);
  for (int i = 0; i < spec.p; ++i) {
    for (int j = 0; j < spec.p; ++j) {
      design_cov(i, j) = std::pow(spec.design_corr, std::abs(i - j));
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(design_cov);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("linreg_generate: design covariance not positive definite");
  }
  const Eigen::MatrixXd chol = llt.matrixL();

  Rng rng = make_rng(spec.seed);
  Eigen::MatrixXd x(spec.n, spec.p);
  for (int i = 0; i < spec.n; ++i) {
    x.row(i) = (chol * draw_standard_normal(rng, spec.p)).transpose();
  }
  const Eigen::VectorXd beta = draw_standard_normal(rng, spec.p);
  const Eigen::VectorXd y =
      x * beta + std::sqrt(spec.noise_var) * draw_standard_normal(rng, spec.n);
  return LinearRegressionModel(std::move(x), y, spec.noise_var);
}

Moments linreg_posterior(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         double noise_var) {
  if (x.rows() != y.size()) {
    throw std::invalid_argument("linreg_posterior: X/y size mismatch");
  }
  const int p = static_cast<int>(x.cols());
  const Eigen::MatrixXd precision =
      x.transpose() * x / noise_var + Eigen::MatrixXd::Identity(p, p);
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  Moments moments;
  moments.cov = llt.solve(Eigen::MatrixXd::Identity(p, p));
  moments.mean = llt.solve(x.transpose() * y / noise_var);
  return moments;
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace {

// log(1 + exp(v)) without overflow.
double softplus(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

double sigmoid(double v) { return v > 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); }

}  // namespace

LogisticRegressionModel::LogisticRegressionModel(Eigen::MatrixXd x, Eigen::VectorXd y)
    : Model(static_cast<int>(x.cols()), static_cast<int>(x.rows())),
      x_(std::move(x)),
      y_(std::move(y)) {
  if (y_.size() != x_.rows()) {
    throw std::invalid_argument("LogisticRegressionModel: X/y size mismatch");
  }
  for (int i = 0; i < y_.size(); ++i) {
    if (y_(i) != 0.0 && y_(i) != 1.0) {
      throw std::invalid_argument("LogisticRegressionModel: labels must be 0 or 1, got " +
                                  std::to_string(y_(i)) + " at row " + std::to_string(i));
    }
  }
}

double LogisticRegressionModel::log_prior(const Eigen::VectorXd& theta) const {
  check_theta(theta, "LogisticRegressionModel::log_prior");
  return -0.5 * dim() * kLog2Pi - 0.5 * theta.squaredNorm();
}

Eigen::VectorXd LogisticRegressionModel::log_prior_grad(const Eigen::VectorXd& theta) const {
  check_theta(theta, "LogisticRegressionModel::log_prior_grad");
  return -theta;
}

double LogisticRegressionModel::log_lik_term(const Eigen::VectorXd& theta, int i) const {
  check_theta(theta, "LogisticRegressionModel::log_lik_term");
  const int idx[] = {i};
  check_indices(idx, "LogisticRegressionModel::log_lik_term");
  const double score = x_.row(i).dot(theta);
  // y log sigma(s) + (1 - y) log(1 - sigma(s)) = y s - softplus(s)
  return y_(i) * score - softplus(score);
}

Eigen::VectorXd LogisticRegressionModel::log_lik_term_grad(const Eigen::VectorXd& theta,
                                                           int i) const {
  check_theta(theta, "LogisticRegressionModel::log_lik_term_grad");
  const int idx[] = {i};
  check_indices(idx, "LogisticRegressionModel::log_lik_term_grad");
  const double score = x_.row(i).dot(theta);
  return x_.row(i).transpose() * (y_(i) - sigmoid(score));
}

// ---------------------------------------------------------------------------
// Eight schools

namespace {

constexpr double kHyperMeanSd = 5.0;
constexpr double kTauScale = 5.0;

double half_cauchy_log_density(double tau, double scale) {
  return std::log(2.0 / (M_PI * scale)) - std::log1p(tau * tau / (scale * scale));
}

// d/d(log tau) of log half-Cauchy(tau; scale), tau = exp(u).
double half_cauchy_log_density_grad_u(double tau, double scale) {
  const double s2 = scale * scale;
  return -2.0 * tau * tau / (s2 + tau * tau);
}

}  // namespace

EightSchoolsModel::EightSchoolsModel(Eigen::VectorXd effects, Eigen::VectorXd stderrs,
                                     SchoolParameterization parameterization)
    : Model(static_cast<int>(effects.size()) + 2, static_cast<int>(effects.size())),
      effects_(std::move(effects)),
      stderrs_(std::move(stderrs)),
      parameterization_(parameterization) {
  if (stderrs_.size() != effects_.size()) {
    throw std::invalid_argument("EightSchoolsModel: effect/stderr size mismatch");
  }
  if (effects_.size() < 1) {
    throw std::invalid_argument("EightSchoolsModel: no schools");
  }
  for (int j = 0; j < stderrs_.size(); ++j) {
    if (stderrs_(j) <= 0.0) {
      throw std::invalid_argument("EightSchoolsModel: non-positive standard error at row " +
                                  std::to_string(j));
    }
  }
}

double EightSchoolsModel::log_prior(const Eigen::VectorXd& theta) const {
  check_theta(theta, "EightSchoolsModel::log_prior");
  const int j_n = num_schools();
  const double mu = theta(j_n);
  const double u = theta(j_n + 1);
  const double tau = std::exp(u);

  double lp = normal_log_density(mu, 0.0, kHyperMeanSd);
  lp += half_cauchy_log_density(tau, kTauScale) + u;  // + u is the log-scale Jacobian
  if (parameterization_ == SchoolParameterization::centered) {
    for (int j = 0; j < j_n; ++j) {
      lp += normal_log_density(theta(j), mu, tau);
    }
  } else {
    for (int j = 0; j < j_n; ++j) {
      lp += normal_log_density(theta(j), 0.0, 1.0);
    }
  }
  return lp;
}

Eigen::VectorXd EightSchoolsModel::log_prior_grad(const Eigen::VectorXd& theta) const {
  check_theta(theta, "EightSchoolsModel::log_prior_grad");
  const int j_n = num_schools();
  const double mu = theta(j_n);
  const double u = theta(j_n + 1);
  const double tau = std::exp(u);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim());
  grad(j_n) = -mu / (kHyperMeanSd * kHyperMeanSd);
  grad(j_n + 1) = half_cauchy_log_density_grad_u(tau, kTauScale) + 1.0;
  if (parameterization_ == SchoolParameterization::centered) {
    for (int j = 0; j < j_n; ++j) {
      const double d = theta(j) - mu;
      grad(j) += -d / (tau * tau);
      grad(j_n) += d / (tau * tau);
      grad(j_n + 1) += -1.0 + d * d / (tau * tau);
    }
  } else {
    grad.head(j_n) = -theta.head(j_n);
  }
  return grad;
}

double EightSchoolsModel::log_lik_term(const Eigen::VectorXd& theta, int i) const {
  check_theta(theta, "EightSchoolsModel::log_lik_term");
  const int idx[] = {i};
  check_indices(idx, "EightSchoolsModel::log_lik_term");
  const int j_n = num_schools();
  if (parameterization_ == SchoolParameterization::centered) {
    return normal_log_density(effects_(i), theta(i), stderrs_(i));
  }
  const double mean = theta(j_n) + std::exp(theta(j_n + 1)) * theta(i);
  return normal_log_density(effects_(i), mean, stderrs_(i));
}

Eigen::VectorXd EightSchoolsModel::log_lik_term_grad(const Eigen::VectorXd& theta,
                                                     int i) const {
  check_theta(theta, "EightSchoolsModel::log_lik_term_grad");
  const int idx[] = {i};
  check_indices(idx, "EightSchoolsModel::log_lik_term_grad");
  const int j_n = num_schools();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim());
  const double var = stderrs_(i) * stderrs_(i);
  if (parameterization_ == SchoolParameterization::centered) {
    grad(i) = (effects_(i) - theta(i)) / var;
    return grad;
  }
  const double tau = std::exp(theta(j_n + 1));
  const double r = effects_(i) - theta(j_n) - tau * theta(i);
  grad(i) = tau * r / var;
  grad(j_n) = r / var;
  grad(j_n + 1) = tau * theta(i) * r / var;
  return grad;
}

// ---------------------------------------------------------------------------
// 1-D Gaussian mixture

GaussianMixture1D::GaussianMixture1D(double separation, double sd)
    : Model(1, 0), separation_(separation), sd_(sd) {
  if (sd <= 0.0) {
    throw std::invalid_argument("GaussianMixture1D: sd must be positive");
  }
}

double GaussianMixture1D::log_prior(const Eigen::VectorXd& theta) const {
  check_theta(theta, "GaussianMixture1D::log_prior");
  const double a = normal_log_density(theta(0), -separation_, sd_);
  const double b = normal_log_density(theta(0), separation_, sd_);
  const double m = std::max(a, b);
  return std::log(0.5) + m + std::log(std::exp(a - m) + std::exp(b - m));
}

Eigen::VectorXd GaussianMixture1D::log_prior_grad(const Eigen::VectorXd& theta) const {
  check_theta(theta, "GaussianMixture1D::log_prior_grad");
  const double a = normal_log_density(theta(0), -separation_, sd_);
  const double b = normal_log_density(theta(0), separation_, sd_);
  const double m = std::max(a, b);
  const double wa = std::exp(a - m);
  const double wb = std::exp(b - m);
  const double var = sd_ * sd_;
  const double grad = (wa * (-(theta(0) + separation_) / var) +
                       wb * (-(theta(0) - separation_) / var)) /
                      (wa + wb);
  return Eigen::VectorXd::Constant(1, grad);
}

double GaussianMixture1D::log_lik_term(const Eigen::VectorXd&, int) const {
  throw std::invalid_argument("GaussianMixture1D has no observations");
}

Eigen::VectorXd GaussianMixture1D::log_lik_term_grad(const Eigen::VectorXd&, int) const {
  throw std::invalid_argument("GaussianMixture1D has no observations");
}

// ---------------------------------------------------------------------------
// File loaders

namespace {

std::vector<std::vector<double>> load_numeric_csv(const std::string& path,
                                                  const char* function) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error(std::string(function) + ": cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(std::string(function) + ": " + path + " is empty");
  }
  // First line is a header and is ignored.
  std::vector<std::vector<double>> rows;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) {
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t consumed = 0;
        const double value = std::stod(cell, &consumed);
        while (consumed < cell.size() &&
               std::isspace(static_cast<unsigned char>(cell[consumed]))) {
          ++consumed;
        }
        if (consumed != cell.size()) {
          throw std::invalid_argument(cell);
        }
        row.push_back(value);
      } catch (const std::exception&) {
        throw std::runtime_error(std::string(function) + ": " + path + ":" +
                                 std::to_string(line_number) + ": not a number: '" + cell +
                                 "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error(std::string(function) + ": " + path + ":" +
                               std::to_string(line_number) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw std::runtime_error(std::string(function) + ": " + path + " has no data rows");
  }
  return rows;
}

}  // namespace

Dataset load_csv_dataset(const std::string& path) {
  const auto rows = load_numeric_csv(path, "load_csv_dataset");
  const int n = static_cast<int>(rows.size());
  const int cols = static_cast<int>(rows.front().size());
  if (cols < 2) {
    throw std::runtime_error("load_csv_dataset: " + path +
                             ": need at least one feature column plus the response");
  }
  Dataset dataset;
  dataset.features.resize(n, cols - 1);
  dataset.response.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < cols - 1; ++j) {
      dataset.features(i, j) = rows[i][j];
    }
    dataset.response(i) = rows[i][cols - 1];
  }
  return dataset;
}

SchoolData load_school_data(const std::string& path) {
  const auto rows = load_numeric_csv(path, "load_school_data");
  if (rows.front().size() != 2) {
    throw std::runtime_error("load_school_data: " + path +
                             ": expected two columns (effect, standard error)");
  }
  SchoolData data;
  const int n = static_cast<int>(rows.size());
  data.effects.resize(n);
  data.stderrs.resize(n);
  for (int i = 0; i < n; ++i) {
    data.effects(i) = rows[i][0];
    data.stderrs(i) = rows[i][1];
  }
  return data;
}

}  // namespace models
}  // namespace robustvi
