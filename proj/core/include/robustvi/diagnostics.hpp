#ifndef ROBUSTVI_DIAGNOSTICS_HPP
#define ROBUSTVI_DIAGNOSTICS_HPP

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "robustvi/families.hpp"
#include "robustvi/models.hpp"
#include "robustvi/rng.hpp"

namespace robustvi {
namespace diagnostics {

/**
 * J parallel optimizer trajectories, each a T x K record of flattened
 * variational parameters. Non-finite entries are rejected at append time, so
 * every diagnostic below can assume finite inputs. Appends must keep the
 * chains in lockstep (same T for every chain).
 */
class IterateChains {
 public:
  IterateChains(int num_chains, int dim, std::int64_t start_iteration = 1);

  void append(int chain, const Eigen::VectorXd& iterate);

  int num_chains() const { return static_cast<int>(columns_.size()); }
  int dim() const { return dim_; }
  // Iterations stored per chain; throws if chains are out of lockstep.
  std::int64_t size() const;
  std::int64_t start_iteration() const { return start_iteration_; }

  double value(int chain, std::int64_t t, int component) const;
  // Contiguous copy of one component over the last `window` iterates.
  Eigen::VectorXd component_window(int chain, int component, std::int64_t window) const;
  // Mean over all chains and stored iterates, per component.
  Eigen::VectorXd mean() const;
  // Mean over the last `window` iterates of all chains.
  Eigen::VectorXd window_mean(std::int64_t window) const;

 private:
  int dim_;
  std::int64_t start_iteration_;
  std::vector<Eigen::MatrixXd> columns_;  // per chain: dim x capacity
  std::vector<std::int64_t> sizes_;
};

// ---------------------------------------------------------------------------

// Empirical autocorrelations rho_0..rho_{n-1} with the mean removed and
// rho_0 = 1. A constant sequence yields zeros beyond lag 0 and sets
// *degenerate.
Eigen::VectorXd autocorrelation(std::span<const double> sequence,
                                bool* degenerate = nullptr);

/**
 * Split-Rhat per component over the last `window` iterates: each chain's
 * segment is halved into 2J sequences of length n = window/2, within-variance
 * W is the mean of unbiased sequence variances, and
 * V = (n-1)/n W + B/n with B = n * variance of sequence means. Returns
 * sqrt(V/W), floored at 1; identical constant sequences give exactly 1 and a
 * zero-W, positive-B window returns a large sentinel (> 10).
 */
Eigen::VectorXd split_rhat(const IterateChains& chains, std::int64_t window);

// Single-component variant; lets callers re-test a known-slow component
// before paying for the full sweep.
double split_rhat_component(const IterateChains& chains, std::int64_t window,
                            int component);

constexpr double kRhatDegenerateSentinel = 1e6;

/**
 * Multi-chain effective sample size per component over the last `window`
 * iterates. Chains are split in half; autocorrelation estimates combine
 * within- and between-sequence variance and the lag sum is truncated by
 * Geyer's initial positive-pair rule. May exceed the number of draws for
 * antithetic chains; no cap is applied. Degenerate (zero-variance) windows
 * report J*window.
 */
Eigen::VectorXd ess(const IterateChains& chains, std::int64_t window);

// Single-component variant of ess().
double ess_component(const IterateChains& chains, std::int64_t window, int component);

// Monte Carlo standard error sqrt(pooled sample variance / ESS) per
// component. Degenerate windows report 0.
Eigen::VectorXd mcse(const IterateChains& chains, std::int64_t window);

// Both statistics from one pass over the window.
struct EssMcse {
  Eigen::VectorXd ess;
  Eigen::VectorXd mcse;
};

EssMcse ess_mcse(const IterateChains& chains, std::int64_t window);

// ---------------------------------------------------------------------------

struct GpdFit {
  double k = 0.0;
  double sigma = 0.0;
};

/**
 * Profile-likelihood fit of a generalized Pareto distribution to positive
 * threshold excesses, by quadrature over a grid of the profile parameter.
 * The shape k is unconstrained in sign. Requires at least 20 excesses.
 */
GpdFit gpd_fit(std::span<const double> excesses, bool weakly_informative_prior = true);

// Number of tail samples used for a sample of size n:
// ceil(min(n/5, 3 sqrt(n))).
std::int64_t tail_sample_count(std::int64_t n);

struct TailIndexReport {
  Eigen::VectorXd khat_lower;  // per component; NaN where the tail is degenerate
  Eigen::VectorXd khat_upper;
  double max_khat = 0.0;       // NaN-skipping max over all components and tails
  bool problematic = false;    // max_khat > 1.0
};

/**
 * Tail index of the iterate distribution per component and tail, pooled
 * across chains over the last `window` iterates. Each tail takes the top
 * tail_sample_count(n) exceedances over the corresponding empirical quantile
 * (lower tail via negation) and fits gpd_fit. Requires J*window >= 100.
 */
TailIndexReport khat_iterates(const IterateChains& chains, std::int64_t window);

/**
 * Pareto shape of the importance weights p(y, theta_s)/q(theta_s) for
 * num_draws draws theta_s ~ q. The posterior normalizer cancels into the GPD
 * scale, so the unnormalized joint suffices. Constant weights (the proposal
 * equals the target) report -infinity.
 */
double psis_khat(const models::Model& model, const families::VariationalParams& params,
                 int num_draws, Rng& rng);

// ---------------------------------------------------------------------------

struct DiagnosticsReport {
  Eigen::VectorXd rhat;
  Eigen::VectorXd ess;
  Eigen::VectorXd mcse;
  std::vector<Eigen::VectorXd> autocorr;  // combined rho_t per component, capped lags
  Eigen::VectorXd khat_lower;
  Eigen::VectorXd khat_upper;
  std::vector<std::uint8_t> degenerate;   // per component
  double max_rhat = 0.0;
  double median_mcse = 0.0;
  double min_ess = 0.0;
  double max_khat = 0.0;
  bool tail_problematic = false;
};

// Assembles every diagnostic over the last `window` iterates. Tail indices
// are NaN when the pooled window is shorter than 100.
DiagnosticsReport compute_report(const IterateChains& chains, std::int64_t window,
                                 int autocorr_max_lag = 100);

}  // namespace diagnostics
}  // namespace robustvi

#endif
