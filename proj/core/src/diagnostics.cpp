#include "robustvi/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <thread>
#include <unsupported/Eigen/FFT>

namespace robustvi {
namespace diagnostics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int diagnostics_workers() {
  static const int workers = [] {
    int w = 0;
    if (const char* env = std::getenv("ROBUSTVI_THREADS")) {
      w = std::atoi(env);
    }
    if (w <= 0) {
      w = static_cast<int>(std::thread::hardware_concurrency());
    }
    return std::max(1, w);
  }();
  return workers;
}

// Per-component work is independent; ordering of writes is fixed by index.
template <typename Fn>
void parallel_components(int dim, Fn&& fn) {
  const int workers = std::min(diagnostics_workers(), dim);
  if (workers <= 1) {
    for (int k = 0; k < dim; ++k) {
      fn(k);
    }
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int k = w; k < dim; k += workers) {
        fn(k);
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
}

double sample_variance(const Eigen::VectorXd& values) {
  const auto n = values.size();
  if (n < 2) {
    return 0.0;
  }
  const double mean = values.mean();
  return (values.array() - mean).square().sum() / static_cast<double>(n - 1);
}

double median_of(Eigen::VectorXd values) {
  const auto n = values.size();
  std::nth_element(values.data(), values.data() + n / 2, values.data() + n);
  double upper = values(n / 2);
  if (n % 2 == 1) {
    return upper;
  }
  std::nth_element(values.data(), values.data() + n / 2 - 1, values.data() + n / 2);
  return 0.5 * (values(n / 2 - 1) + upper);
}

// Biased autocovariance c_t = (1/n) sum (y_i - ybar)(y_{i+t} - ybar), t < n,
// via a zero-padded real FFT. Plans and scratch buffers are thread-local and
// reused across the many equal-length component sequences.
Eigen::VectorXd autocovariance(const Eigen::VectorXd& y) {
  const auto n = y.size();
  Eigen::Index m = 1;
  while (m < 2 * n) {
    m *= 2;
  }
  thread_local Eigen::FFT<double> fft;
  thread_local std::vector<double> padded;
  thread_local std::vector<std::complex<double>> freq;
  thread_local std::vector<double> corr;

  padded.assign(m, 0.0);
  const double mean = y.mean();
  for (Eigen::Index i = 0; i < n; ++i) {
    padded[i] = y(i) - mean;
  }
  fft.fwd(freq, padded);
  for (auto& c : freq) {
    c = std::norm(c);
  }
  fft.inv(corr, freq);
  return Eigen::Map<const Eigen::VectorXd>(corr.data(), n) / static_cast<double>(n);
}

void check_window(const IterateChains& chains, std::int64_t window, const char* function) {
  if (window < 4 || window % 2 != 0) {
    throw std::invalid_argument(std::string(function) +
                                ": window must be even and at least 4, got " +
                                std::to_string(window));
  }
  if (window > chains.size()) {
    throw std::invalid_argument(std::string(function) + ": window " +
                                std::to_string(window) + " exceeds stored iterations " +
                                std::to_string(chains.size()));
  }
}

// The last `window` iterates of every chain, each split in half: 2J sequences
// of length window/2.
std::vector<Eigen::VectorXd> split_sequences(const IterateChains& chains, int component,
                                             std::int64_t window) {
  const std::int64_t half = window / 2;
  std::vector<Eigen::VectorXd> seqs;
  seqs.reserve(2 * chains.num_chains());
  for (int j = 0; j < chains.num_chains(); ++j) {
    const Eigen::VectorXd segment = chains.component_window(j, component, window);
    seqs.push_back(segment.head(half));
    seqs.push_back(segment.tail(half));
  }
  return seqs;
}

struct EssComputation {
  double ess = kNaN;
  bool degenerate = false;
  Eigen::VectorXd rho;  // combined autocorrelation estimates (when requested)
};

// Mean-over-sequences autocovariance, served lag by lag. Small lags are
// computed directly (the Geyer truncation usually stops within a few dozen
// lags); if the caller keeps asking, the full FFT transform is computed once
// and reused. Both paths evaluate the same biased estimator.
class LaggedMeanAutocovariance {
 public:
  explicit LaggedMeanAutocovariance(const std::vector<Eigen::VectorXd>& seqs)
      : n_(seqs.front().size()) {
    centered_.reserve(seqs.size());
    for (const Eigen::VectorXd& s : seqs) {
      centered_.push_back(s.array() - s.mean());
    }
  }

  Eigen::Index length() const { return n_; }

  double variance() {
    double acc = 0.0;
    for (const Eigen::VectorXd& c : centered_) {
      acc += c.squaredNorm();
    }
    return acc / (centered_.size() * static_cast<double>(n_));
  }

  double operator()(Eigen::Index lag) {
    static constexpr Eigen::Index kDirectLagLimit = 64;
    if (!promoted_ && lag > kDirectLagLimit) {
      transformed_.reserve(centered_.size());
      for (const Eigen::VectorXd& c : centered_) {
        transformed_.push_back(autocovariance(c));
      }
      promoted_ = true;
    }
    double acc = 0.0;
    if (promoted_) {
      for (const Eigen::VectorXd& a : transformed_) {
        acc += a(lag);
      }
    } else {
      for (const Eigen::VectorXd& c : centered_) {
        acc += c.head(n_ - lag).dot(c.tail(n_ - lag)) / static_cast<double>(n_);
      }
    }
    return acc / centered_.size();
  }

 private:
  Eigen::Index n_;
  std::vector<Eigen::VectorXd> centered_;
  std::vector<Eigen::VectorXd> transformed_;
  bool promoted_ = false;
};

// Effective sample size of a set of equal-length sequences, with combined
// within/between-sequence autocorrelation estimates and Geyer initial
// positive-pair truncation.
EssComputation ess_from_sequences(const std::vector<Eigen::VectorXd>& seqs,
                                  bool want_rho = false) {
  const int m = static_cast<int>(seqs.size());
  const auto n = seqs.front().size();
  if (n < 4) {
    throw std::invalid_argument("ess: sequences must have at least 4 draws");
  }

  LaggedMeanAutocovariance acov(seqs);
  Eigen::VectorXd means(m);
  for (int s = 0; s < m; ++s) {
    means(s) = seqs[s].mean();
  }
  // Within-sequence variance, kept at the same (biased) normalization as the
  // lagged autocovariances so that rho_t stays in [-1, 1].
  const double within_var = acov.variance();
  double var_plus = within_var;
  if (m > 1) {
    var_plus += sample_variance(means);
  }

  EssComputation out;
  if (!(var_plus > 0.0) || !std::isfinite(var_plus)) {
    out.degenerate = true;
    return out;
  }

  thread_local std::vector<double> rho_buffer;
  rho_buffer.assign(n, 0.0);
  const auto rho_at = [&](Eigen::Index lag) -> double& { return rho_buffer[lag]; };

  double rho_even = 1.0;
  rho_at(0) = rho_even;
  double rho_odd = 1.0 - (within_var - acov(1)) / var_plus;
  rho_at(1) = rho_odd;

  // Geyer's initial positive sequence: accumulate lag pairs while their sum
  // stays positive. The final even term is kept as a bias correction, which
  // matters for antithetic chains.
  Eigen::Index s = 1;
  while (s < n - 4 && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (within_var - acov(s + 1)) / var_plus;
    rho_odd = 1.0 - (within_var - acov(s + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho_at(s + 1) = rho_even;
      rho_at(s + 2) = rho_odd;
    }
    s += 2;
  }
  const Eigen::Index max_s = s;
  if (rho_even > 0.0) {
    rho_at(max_s + 1) = rho_even;
  }

  // Geyer's initial monotone sequence.
  for (Eigen::Index t = 1; t <= max_s - 3; t += 2) {
    if (rho_at(t + 1) + rho_at(t + 2) > rho_at(t - 1) + rho_at(t)) {
      rho_at(t + 1) = 0.5 * (rho_at(t - 1) + rho_at(t));
      rho_at(t + 2) = rho_at(t + 1);
    }
  }

  const double total_draws = static_cast<double>(m) * static_cast<double>(n);
  double sum = 0.0;
  for (Eigen::Index t = 0; t < max_s; ++t) {
    sum += rho_buffer[t];
  }
  double tau = -1.0 + 2.0 * sum + rho_buffer[max_s + 1];
  if (!(tau > 0.0)) {
    // The truncated estimator can collapse for strongly negatively correlated
    // inputs; fall back to the usual reliability bound.
    tau = 1.0 / std::log10(total_draws + 10.0);
  }
  out.ess = total_draws / tau;
  if (want_rho) {
    out.rho = Eigen::Map<const Eigen::VectorXd>(rho_buffer.data(), n);
  }
  return out;
}

double pooled_window_variance(const IterateChains& chains, int component,
                              std::int64_t window) {
  const std::int64_t total = window * chains.num_chains();
  Eigen::VectorXd pooled(total);
  for (int j = 0; j < chains.num_chains(); ++j) {
    pooled.segment(j * window, window) = chains.component_window(j, component, window);
  }
  return sample_variance(pooled);
}

}  // namespace

// ---------------------------------------------------------------------------
// IterateChains

IterateChains::IterateChains(int num_chains, int dim, std::int64_t start_iteration)
    : dim_(dim), start_iteration_(start_iteration) {
  if (num_chains < 1) {
    throw std::invalid_argument("IterateChains: need at least one chain");
  }
  if (dim < 1) {
    throw std::invalid_argument("IterateChains: dimension must be positive");
  }
  columns_.resize(num_chains);
  sizes_.assign(num_chains, 0);
}

void IterateChains::append(int chain, const Eigen::VectorXd& iterate) {
  if (chain < 0 || chain >= num_chains()) {
    throw std::invalid_argument("IterateChains::append: chain index out of range");
  }
  if (iterate.size() != dim_) {
    throw std::invalid_argument("IterateChains::append: iterate has length " +
                                std::to_string(iterate.size()) + ", expected " +
                                std::to_string(dim_));
  }
  if (!iterate.allFinite()) {
    throw std::invalid_argument("IterateChains::append: non-finite iterate entry");
  }
  Eigen::MatrixXd& store = columns_[chain];
  if (sizes_[chain] == store.cols()) {
    store.conservativeResize(dim_, std::max<Eigen::Index>(64, 2 * store.cols()));
  }
  store.col(sizes_[chain]) = iterate;
  ++sizes_[chain];
}

std::int64_t IterateChains::size() const {
  for (std::size_t j = 1; j < sizes_.size(); ++j) {
    if (sizes_[j] != sizes_[0]) {
      throw std::logic_error("IterateChains: chains are out of lockstep");
    }
  }
  return sizes_[0];
}

double IterateChains::value(int chain, std::int64_t t, int component) const {
  if (chain < 0 || chain >= num_chains() || t < 0 || t >= sizes_[chain] ||
      component < 0 || component >= dim_) {
    throw std::invalid_argument("IterateChains::value: index out of range");
  }
  return columns_[chain](component, t);
}

Eigen::VectorXd IterateChains::component_window(int chain, int component,
                                                std::int64_t window) const {
  if (chain < 0 || chain >= num_chains()) {
    throw std::invalid_argument("IterateChains::component_window: chain out of range");
  }
  if (component < 0 || component >= dim_) {
    throw std::invalid_argument("IterateChains::component_window: component out of range");
  }
  const std::int64_t n = sizes_[chain];
  if (window < 1 || window > n) {
    throw std::invalid_argument("IterateChains::component_window: bad window");
  }
  return columns_[chain].row(component).segment(n - window, window).transpose();
}

Eigen::VectorXd IterateChains::mean() const { return window_mean(size()); }

Eigen::VectorXd IterateChains::window_mean(std::int64_t window) const {
  const std::int64_t n = size();
  if (window < 1 || window > n) {
    throw std::invalid_argument("IterateChains::window_mean: bad window");
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim_);
  for (int j = 0; j < num_chains(); ++j) {
    acc += columns_[j].middleCols(n - window, window).rowwise().sum();
  }
  return acc / (static_cast<double>(window) * num_chains());
}

// ---------------------------------------------------------------------------
// Autocorrelation

Eigen::VectorXd autocorrelation(std::span<const double> sequence, bool* degenerate) {
  const auto n = static_cast<Eigen::Index>(sequence.size());
  if (n < 4) {
    throw std::invalid_argument("autocorrelation: need at least 4 values");
  }
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(sequence.data(), n);
  const Eigen::VectorXd acov = autocovariance(y);
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(n);
  rho(0) = 1.0;
  if (acov(0) <= 0.0) {
    if (degenerate != nullptr) {
      *degenerate = true;
    }
    return rho;
  }
  if (degenerate != nullptr) {
    *degenerate = false;
  }
  rho.tail(n - 1) = acov.tail(n - 1) / acov(0);
  return rho;
}

// ---------------------------------------------------------------------------
// Split-Rhat

namespace {

double rhat_from_sequences(const std::vector<Eigen::VectorXd>& seqs, std::int64_t half) {
  const int m = static_cast<int>(seqs.size());
  Eigen::VectorXd means(m);
  Eigen::VectorXd vars(m);
  for (int s = 0; s < m; ++s) {
    means(s) = seqs[s].mean();
    vars(s) = sample_variance(seqs[s]);
  }
  const double within = vars.mean();
  const double between_over_n = sample_variance(means);  // = B / n
  if (within <= 0.0) {
    return between_over_n > 0.0 ? kRhatDegenerateSentinel : 1.0;
  }
  const double var_plus =
      (static_cast<double>(half - 1) / half) * within + between_over_n;
  return std::max(1.0, std::sqrt(var_plus / within));
}

}  // namespace

Eigen::VectorXd split_rhat(const IterateChains& chains, std::int64_t window) {
  check_window(chains, window, "split_rhat");
  const std::int64_t half = window / 2;
  Eigen::VectorXd rhat(chains.dim());
  parallel_components(chains.dim(), [&](int k) {
    rhat(k) = rhat_from_sequences(split_sequences(chains, k, window), half);
  });
  return rhat;
}

double split_rhat_component(const IterateChains& chains, std::int64_t window,
                            int component) {
  check_window(chains, window, "split_rhat_component");
  return rhat_from_sequences(split_sequences(chains, component, window), window / 2);
}

// ---------------------------------------------------------------------------
// ESS / MCSE

Eigen::VectorXd ess(const IterateChains& chains, std::int64_t window) {
  check_window(chains, window, "ess");
  const double total = static_cast<double>(window) * chains.num_chains();
  Eigen::VectorXd out(chains.dim());
  parallel_components(chains.dim(), [&](int k) {
    const EssComputation e = ess_from_sequences(split_sequences(chains, k, window));
    out(k) = e.degenerate ? total : e.ess;
  });
  return out;
}

double ess_component(const IterateChains& chains, std::int64_t window, int component) {
  check_window(chains, window, "ess_component");
  const EssComputation e = ess_from_sequences(split_sequences(chains, component, window));
  return e.degenerate ? static_cast<double>(window) * chains.num_chains() : e.ess;
}

Eigen::VectorXd mcse(const IterateChains& chains, std::int64_t window) {
  return ess_mcse(chains, window).mcse;
}

EssMcse ess_mcse(const IterateChains& chains, std::int64_t window) {
  check_window(chains, window, "ess_mcse");
  const double total = static_cast<double>(window) * chains.num_chains();
  EssMcse out;
  out.ess.resize(chains.dim());
  out.mcse.resize(chains.dim());
  parallel_components(chains.dim(), [&](int k) {
    const EssComputation e = ess_from_sequences(split_sequences(chains, k, window));
    if (e.degenerate) {
      out.ess(k) = total;
      out.mcse(k) = 0.0;
      return;
    }
    out.ess(k) = e.ess;
    out.mcse(k) = std::sqrt(pooled_window_variance(chains, k, window) / e.ess);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Generalized Pareto fit (profile-likelihood quadrature)

GpdFit gpd_fit(std::span<const double> excesses, bool weakly_informative_prior) {
  const auto n = static_cast<Eigen::Index>(excesses.size());
  if (n < 20) {
    throw std::invalid_argument(
        "gpd_fit: need at least 20 threshold excesses; draw more samples");
  }
  std::vector<double> x(excesses.begin(), excesses.end());
  for (double v : x) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("gpd_fit: excesses must be positive and finite");
    }
  }
  std::sort(x.begin(), x.end());

  const auto grid_size = static_cast<Eigen::Index>(30 + std::floor(std::sqrt(n)));
  const double x_max = x[n - 1];
  const double x_star = x[static_cast<std::size_t>(std::floor(n / 4.0 + 0.5)) - 1];

  auto mean_log1p = [&](double theta) {
    double acc = 0.0;
    for (double v : x) {
      acc += std::log1p(-theta * v);
    }
    return acc / static_cast<double>(n);
  };

  Eigen::VectorXd theta(grid_size);
  Eigen::VectorXd profile(grid_size);
  for (Eigen::Index j = 0; j < grid_size; ++j) {
    theta(j) = 1.0 / x_max + (1.0 - std::sqrt(static_cast<double>(grid_size) / (j + 0.5))) /
                                 (3.0 * x_star);
    if (theta(j) == 0.0) {
      // Exponential limit of the profile likelihood.
      profile(j) = n * (-std::log(Eigen::Map<const Eigen::VectorXd>(x.data(), n).mean()) - 1.0);
      continue;
    }
    const double k_j = mean_log1p(theta(j));
    profile(j) = n * (std::log(-theta(j) / k_j) - k_j - 1.0);
  }

  // Quadrature weights over the grid from the normalized profile likelihood.
  double theta_hat = 0.0;
  for (Eigen::Index j = 0; j < grid_size; ++j) {
    const double weight = 1.0 / (profile.array() - profile(j)).exp().sum();
    theta_hat += theta(j) * weight;
  }

  GpdFit fit;
  if (theta_hat == 0.0) {
    fit.k = 0.0;
    fit.sigma = Eigen::Map<const Eigen::VectorXd>(x.data(), n).mean();
  } else {
    fit.k = mean_log1p(theta_hat);
    fit.sigma = -fit.k / theta_hat;
  }
  if (weakly_informative_prior) {
    // Shrinks k toward 0.5 with 10 pseudo-observations; stabilizes small tails.
    fit.k = fit.k * n / (n + 10.0) + 5.0 / (n + 10.0);
  }
  return fit;
}

std::int64_t tail_sample_count(std::int64_t n) {
  return static_cast<std::int64_t>(
      std::ceil(std::min(n / 5.0, 3.0 * std::sqrt(static_cast<double>(n)))));
}

namespace {

// k-hat of the upper tail of a sorted (ascending) sample; NaN when the tail
// has too few distinct exceedances to fit.
double upper_tail_khat(const std::vector<double>& sorted, std::int64_t tail_count) {
  const auto n = static_cast<std::int64_t>(sorted.size());
  const double threshold = sorted[n - tail_count - 1];
  std::vector<double> excesses;
  excesses.reserve(tail_count);
  for (std::int64_t i = n - tail_count; i < n; ++i) {
    const double e = sorted[i] - threshold;
    if (e > 0.0) {
      excesses.push_back(e);
    }
  }
  if (static_cast<std::int64_t>(excesses.size()) < 20) {
    return kNaN;
  }
  return gpd_fit(excesses).k;
}

}  // namespace

TailIndexReport khat_iterates(const IterateChains& chains, std::int64_t window) {
  if (window < 1 || window > chains.size()) {
    throw std::invalid_argument("khat_iterates: bad window");
  }
  const std::int64_t pooled_count = window * chains.num_chains();
  if (pooled_count < 100) {
    throw std::invalid_argument("khat_iterates: need at least 100 pooled iterates, got " +
                                std::to_string(pooled_count));
  }
  const std::int64_t tail_count = tail_sample_count(pooled_count);

  TailIndexReport report;
  report.khat_lower.resize(chains.dim());
  report.khat_upper.resize(chains.dim());
  double max_k = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (int k = 0; k < chains.dim(); ++k) {
    std::vector<double> pooled;
    pooled.reserve(pooled_count);
    for (int j = 0; j < chains.num_chains(); ++j) {
      const Eigen::VectorXd seg = chains.component_window(j, k, window);
      pooled.insert(pooled.end(), seg.data(), seg.data() + seg.size());
    }
    std::sort(pooled.begin(), pooled.end());
    report.khat_upper(k) = upper_tail_khat(pooled, tail_count);

    std::vector<double> negated(pooled.size());
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      negated[i] = -pooled[pooled.size() - 1 - i];
    }
    report.khat_lower(k) = upper_tail_khat(negated, tail_count);

    for (double v : {report.khat_lower(k), report.khat_upper(k)}) {
      if (std::isfinite(v)) {
        max_k = std::max(max_k, v);
        any = true;
      }
    }
  }
  report.max_khat = any ? max_k : kNaN;
  report.problematic = any && report.max_khat > 1.0;
  return report;
}

// ---------------------------------------------------------------------------
// Importance-weight screen

double psis_khat(const models::Model& model, const families::VariationalParams& params,
                 int num_draws, Rng& rng) {
  if (num_draws < 100) {
    throw std::invalid_argument("psis_khat: need at least 100 draws");
  }
  if (params.dim() != model.dim()) {
    throw std::invalid_argument("psis_khat: family dimension does not match model");
  }
  Eigen::VectorXd log_weights(num_draws);
  for (int s = 0; s < num_draws; ++s) {
    const Eigen::VectorXd noise = draw_standard_normal(rng, params.dim());
    const Eigen::VectorXd theta = families::sample(params, noise);
    log_weights(s) = model.log_joint(theta) - families::log_density(params, theta);
    if (!std::isfinite(log_weights(s))) {
      throw std::runtime_error("psis_khat: non-finite log-weight");
    }
  }
  const double lw_max = log_weights.maxCoeff();
  if (lw_max - log_weights.minCoeff() < 1e-8) {
    // Constant weights: the proposal matches the target exactly.
    return -std::numeric_limits<double>::infinity();
  }
  std::vector<double> weights(num_draws);
  for (int s = 0; s < num_draws; ++s) {
    weights[s] = std::exp(log_weights(s) - lw_max);
  }
  std::sort(weights.begin(), weights.end());
  const double khat = upper_tail_khat(weights, tail_sample_count(num_draws));
  if (std::isnan(khat)) {
    // A point-mass upper tail has every moment.
    return -std::numeric_limits<double>::infinity();
  }
  return khat;
}

// ---------------------------------------------------------------------------
// Report assembly

DiagnosticsReport compute_report(const IterateChains& chains, std::int64_t window,
                                 int autocorr_max_lag) {
  check_window(chains, window, "compute_report");
  const int dim = chains.dim();
  const double total = static_cast<double>(window) * chains.num_chains();

  DiagnosticsReport report;
  report.rhat = split_rhat(chains, window);
  report.ess.resize(dim);
  report.mcse.resize(dim);
  report.autocorr.resize(dim);
  report.degenerate.assign(dim, 0);

  parallel_components(dim, [&](int k) {
    const EssComputation e =
        ess_from_sequences(split_sequences(chains, k, window), /*want_rho=*/true);
    if (e.degenerate) {
      report.degenerate[k] = 1;
      report.ess(k) = total;
      report.mcse(k) = 0.0;
      report.autocorr[k] = Eigen::VectorXd::Zero(1);
      return;
    }
    report.ess(k) = e.ess;
    report.mcse(k) = std::sqrt(pooled_window_variance(chains, k, window) / e.ess);
    const auto lags = std::min<Eigen::Index>(e.rho.size(), autocorr_max_lag + 1);
    report.autocorr[k] = e.rho.head(lags);
  });

  if (window * chains.num_chains() >= 100) {
    const TailIndexReport tails = khat_iterates(chains, window);
    report.khat_lower = tails.khat_lower;
    report.khat_upper = tails.khat_upper;
    report.max_khat = tails.max_khat;
    report.tail_problematic = tails.problematic;
  } else {
    report.khat_lower = Eigen::VectorXd::Constant(dim, kNaN);
    report.khat_upper = Eigen::VectorXd::Constant(dim, kNaN);
    report.max_khat = kNaN;
    report.tail_problematic = false;
  }

  report.max_rhat = report.rhat.maxCoeff();
  report.median_mcse = median_of(report.mcse);
  report.min_ess = report.ess.minCoeff();
  return report;
}

}  // namespace diagnostics
}  // namespace robustvi
