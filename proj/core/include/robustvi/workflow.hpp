#ifndef ROBUSTVI_WORKFLOW_HPP
#define ROBUSTVI_WORKFLOW_HPP

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "robustvi/diagnostics.hpp"
#include "robustvi/families.hpp"
#include "robustvi/gradients.hpp"
#include "robustvi/models.hpp"
#include "robustvi/optimizers.hpp"

namespace robustvi {
namespace workflow {

enum class StoppingRule { mcse, delbo };

StoppingRule stopping_rule_from_string(const std::string& name);
std::string to_string(StoppingRule rule);

struct WorkflowConfig {
  double eta = 0.01;
  int num_chains = 1;
  std::int64_t window = 100;
  double rhat_cutoff = 1.1;
  double mcse_cutoff = 0.02;
  double ess_cutoff = 20.0;
  std::int64_t t_max = 120000;
  optimizers::OptimizerKind optimizer = optimizers::OptimizerKind::rmsprop;
  optimizers::OptimizerOptions optimizer_options;
  int mc_draws = 10;
  int minibatch_size = 0;  // 0 = full batch
  StoppingRule stopping_rule = StoppingRule::mcse;
  double delbo_epsilon = 0.01;
  std::uint64_t seed = 0;

  // Chain starts: location ~ N(0, init_location_sd^2 I) unless explicit
  // per-chain locations are given; unconstrained scale starts at 0 (unit L).
  double init_location_sd = 0.1;
  std::vector<Eigen::VectorXd> init_locations;

  int threads = 0;            // 0 = ROBUSTVI_THREADS or hardware default
  bool use_median_ess = false;  // median-over-components variant of the ESS gate
  std::int64_t trace_thin = 0;  // >= 1 keeps every thin-th iterate for persistence
};

void validate(const WorkflowConfig& config);

enum class RuleFired {
  none,
  mcse,            // median MCSE below cutoff and ESS above cutoff
  delbo,           // windowed ELBO change below cutoff
  max_iterations,  // budget exhausted
  tail_guard,      // iterate tail index above 1 at the averaging gate
  diverged         // non-finite gradient or objective
};

std::string to_string(RuleFired rule);

struct RunResult {
  families::VariationalParams lambda_bar;
  std::vector<families::VariationalParams> lambda_last;  // per chain
  std::int64_t t_converged = -1;  // iteration where max Rhat fell below the cutoff; -1 = never
  std::int64_t t_stop = 0;
  RuleFired rule_fired = RuleFired::none;
  bool warned_nonconvergence = false;
  double max_rhat_at_convergence = 0.0;
  double iterate_khat_max = 0.0;
  diagnostics::DiagnosticsReport diagnostics;
  std::vector<double> elbo_trace;  // per iteration, mean across chains

  // lambda_bar is exactly the mean of iterations
  // [averaging_start, averaging_start + averaging_count) of every chain.
  std::int64_t averaging_start = 0;
  std::int64_t averaging_count = 0;

  std::string divergence_message;

  // Thinned full-trajectory record (global iteration, flattened params) per
  // chain; populated when trace_thin >= 1.
  std::vector<std::vector<std::pair<std::int64_t, Eigen::VectorXd>>> trace;
};

/**
 * Runs J optimizer chains on the model. With the mcse rule: phase 1 iterates
 * until the windowed split-Rhat of every component falls below the cutoff,
 * then checks the iterate tail index; phase 2 keeps iterating until the
 * median MCSE over the post-convergence history is below the cutoff and every
 * component ESS is above its cutoff. Non-convergence or a tail index above 1
 * returns the last-window average with a warning. With the delbo rule: stops
 * when consecutive windowed ELBO means change by less than delbo_epsilon in
 * relative terms.
 */
RunResult run(const models::Model& model, families::FamilyKind family,
              const WorkflowConfig& config);

// Arithmetic mean of all stored iterates of all chains in flattened
// unconstrained coordinates, reconstructed as params (so L stays valid).
families::VariationalParams iterate_average(const diagnostics::IterateChains& chains,
                                            families::FamilyKind kind, int p);

// The baseline rule: true when the relative change between the two most
// recent non-overlapping window means of the trace falls below epsilon.
// Requires trace length >= 2 * window.
bool delbo_should_stop(std::span<const double> elbo_trace, std::int64_t window,
                       double epsilon);

// Simulates iid lambda = lambda* + alpha z and its T-average; returns the
// empirical means of the squared distances A and A-bar.
struct OuCheckResult {
  double mean_a = 0.0;
  double mean_abar = 0.0;
};

OuCheckResult ou_theory_check(double alpha, int dim, int num_averaged, int replications,
                              std::uint64_t seed = 0);

}  // namespace workflow
}  // namespace robustvi

#endif
