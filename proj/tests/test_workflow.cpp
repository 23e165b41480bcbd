#include "robustvi/workflow.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "robustvi/families.hpp"
#include "robustvi/models.hpp"
#include "robustvi/rng.hpp"

using namespace robustvi;
using families::FamilyKind;

namespace {

class BrokenModel : public models::Model {
 public:
  BrokenModel() : Model(1, 0) {}
  double log_prior(const Eigen::VectorXd&) const override {
    return std::numeric_limits<double>::quiet_NaN();
  }
  Eigen::VectorXd log_prior_grad(const Eigen::VectorXd&) const override {
    return Eigen::VectorXd::Constant(1, std::numeric_limits<double>::quiet_NaN());
  }
  double log_lik_term(const Eigen::VectorXd&, int) const override { return 0.0; }
  Eigen::VectorXd log_lik_term_grad(const Eigen::VectorXd&, int) const override {
    return Eigen::VectorXd::Zero(1);
  }
};

workflow::WorkflowConfig quick_config(std::uint64_t seed) {
  workflow::WorkflowConfig config;
  config.seed = seed;
  config.t_max = 20000;
  return config;
}

}  // namespace

TEST(Workflow, QuadraticSanityRunConvergesCleanly) {
  const models::GaussianModel model = models::GaussianModel::standard(2);
  const workflow::WorkflowConfig config = quick_config(3);
  const workflow::RunResult result = workflow::run(model, FamilyKind::mean_field, config);

  EXPECT_EQ(result.rule_fired, workflow::RuleFired::mcse);
  EXPECT_FALSE(result.warned_nonconvergence);
  EXPECT_GT(result.t_converged, 0);
  EXPECT_LT(result.max_rhat_at_convergence, config.rhat_cutoff);
  EXPECT_LE(result.iterate_khat_max, 1.0);

  // The optimum is location 0; the averaged estimate should sit within the
  // Monte Carlo error the stopping rule certified.
  const double max_mcse = result.diagnostics.mcse.maxCoeff();
  EXPECT_LT(result.lambda_bar.location.cwiseAbs().maxCoeff(), 3.0 * max_mcse);

  // Stopping-gate internals match the final report.
  EXPECT_LT(result.diagnostics.median_mcse, config.mcse_cutoff);
  EXPECT_GT(result.diagnostics.min_ess, config.ess_cutoff);
}

TEST(Workflow, PhaseOrderingInvariant) {
  const models::GaussianModel model = models::GaussianModel::standard(2);
  const workflow::RunResult result =
      workflow::run(model, FamilyKind::mean_field, quick_config(4));
  ASSERT_EQ(result.rule_fired, workflow::RuleFired::mcse);
  EXPECT_GE(result.t_stop, result.t_converged + 100);
  EXPECT_EQ(result.averaging_start, result.t_converged + 1);
  EXPECT_EQ(result.averaging_count, result.t_stop - result.t_converged);
}

TEST(Workflow, BimodalTargetTriggersNonConvergenceWarning) {
  const models::GaussianMixture1D model(3.0, 0.5);
  workflow::WorkflowConfig config = quick_config(5);
  config.num_chains = 2;
  config.t_max = 3000;
  config.init_locations = {Eigen::VectorXd::Constant(1, -3.0),
                           Eigen::VectorXd::Constant(1, 3.0)};
  const workflow::RunResult result = workflow::run(model, FamilyKind::mean_field, config);

  EXPECT_TRUE(result.warned_nonconvergence);
  EXPECT_EQ(result.rule_fired, workflow::RuleFired::max_iterations);
  EXPECT_EQ(result.t_converged, -1);
  EXPECT_GT(result.max_rhat_at_convergence, config.rhat_cutoff);
  // Still returns the last-window average.
  EXPECT_EQ(result.averaging_count, config.window);
  EXPECT_EQ(result.averaging_start, config.t_max - config.window + 1);
}

TEST(Workflow, SingleChainPathIsTotal) {
  const models::GaussianModel model = models::GaussianModel::standard(1);
  workflow::WorkflowConfig config = quick_config(6);
  config.num_chains = 1;
  const workflow::RunResult result = workflow::run(model, FamilyKind::full_rank, config);
  EXPECT_EQ(result.rule_fired, workflow::RuleFired::mcse);
  EXPECT_EQ(static_cast<int>(result.lambda_last.size()), 1);
}

TEST(Workflow, DivergenceIsReportedWithPartialTrace) {
  const BrokenModel model;
  workflow::WorkflowConfig config = quick_config(7);
  config.t_max = 50;
  const workflow::RunResult result = workflow::run(model, FamilyKind::mean_field, config);
  EXPECT_EQ(result.rule_fired, workflow::RuleFired::diverged);
  EXPECT_TRUE(result.warned_nonconvergence);
  EXPECT_FALSE(result.divergence_message.empty());
}

TEST(Workflow, DeterministicAcrossWorkerCounts) {
  const models::GaussianModel model = models::GaussianModel::standard(2);
  workflow::WorkflowConfig config = quick_config(8);
  config.num_chains = 2;
  config.t_max = 1500;

  config.threads = 1;
  const workflow::RunResult serial = workflow::run(model, FamilyKind::mean_field, config);
  config.threads = 2;
  const workflow::RunResult parallel = workflow::run(model, FamilyKind::mean_field, config);

  EXPECT_TRUE(families::flatten(serial.lambda_bar) ==
              families::flatten(parallel.lambda_bar));
  EXPECT_EQ(serial.t_stop, parallel.t_stop);
  EXPECT_EQ(serial.elbo_trace, parallel.elbo_trace);
}

TEST(IterateAverage, SingleIterateIsIdentity) {
  diagnostics::IterateChains chains(1, 2);
  chains.append(0, Eigen::Vector2d(0.4, -1.0));
  const families::VariationalParams avg =
      workflow::iterate_average(chains, FamilyKind::mean_field, 1);
  EXPECT_EQ(avg.location(0), 0.4);
  EXPECT_EQ(avg.scale_unconstrained(0), -1.0);
}

TEST(IterateAverage, TwoIterateMean) {
  diagnostics::IterateChains chains(1, 2);
  chains.append(0, Eigen::Vector2d(0.0, 2.0));
  chains.append(0, Eigen::Vector2d(2.0, 0.0));
  const families::VariationalParams avg =
      workflow::iterate_average(chains, FamilyKind::mean_field, 1);
  EXPECT_EQ(avg.location(0), 1.0);
  EXPECT_EQ(avg.scale_unconstrained(0), 1.0);
}

TEST(IterateAverage, VarianceReductionMatchesTheory) {
  // Iterates lambda* + alpha z with iid z: E ||lambda_bar - lambda*||^2
  // = alpha^2 K / T.
  const double alpha = 0.1;
  const int dim = 10;   // K, as mean-field over p = 5
  const int horizon = 100;
  const int replications = 1000;
  Rng rng = make_rng(90);
  double acc = 0.0;
  for (int rep = 0; rep < replications; ++rep) {
    diagnostics::IterateChains chains(1, dim);
    for (int t = 0; t < horizon; ++t) {
      chains.append(0, alpha * draw_standard_normal(rng, dim));
    }
    acc += families::flatten(workflow::iterate_average(chains, FamilyKind::mean_field, 5))
               .squaredNorm();
  }
  const double expected = alpha * alpha * dim / horizon;  // 0.001
  EXPECT_NEAR(acc / replications / expected, 1.0, 0.05);
}

TEST(DelboRule, ConstantTraceStopsAtFirstComparison) {
  const std::vector<double> trace(200, -12.5);
  EXPECT_TRUE(workflow::delbo_should_stop(trace, 100, 0.01));
}

TEST(DelboRule, LinearTraceStopsIffSlopeSmallRelativeToLevel) {
  // Window means of a linear trace differ by exactly window * slope.
  const std::int64_t window = 50;
  auto linear_trace = [&](double level, double slope) {
    std::vector<double> trace(2 * window);
    for (std::size_t t = 0; t < trace.size(); ++t) {
      trace[t] = level + slope * static_cast<double>(t);
    }
    return trace;
  };
  // |w s| / |level-ish| vs epsilon = 0.01: w s = 0.5 against level 1000.
  EXPECT_TRUE(workflow::delbo_should_stop(linear_trace(1000.0, 0.01), window, 0.01));
  // w s = 50 against level ~1000 is a 5% change.
  EXPECT_FALSE(workflow::delbo_should_stop(linear_trace(1000.0, 1.0), window, 0.01));
}

TEST(DelboRule, PureNoiseRarelyTriggers) {
  const std::int64_t window = 50;
  const double epsilon = 0.01;
  int stops = 0;
  Rng rng = make_rng(91);
  std::normal_distribution<double> noise(1.0, 1.0);  // |level| = 1, sd = 1
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> trace(2 * window);
    for (auto& v : trace) {
      v = noise(rng);
    }
    if (workflow::delbo_should_stop(trace, window, epsilon)) {
      ++stops;
    }
  }
  EXPECT_LT(stops, 20);
}

TEST(DelboRule, RequiresTwoWindows) {
  const std::vector<double> trace(99, 1.0);
  EXPECT_THROW(workflow::delbo_should_stop(trace, 50, 0.01), std::invalid_argument);
}

TEST(DelboWorkflow, BaselineStopsEarlierThanMcseOnConjugateTarget) {
  models::LinRegSpec spec;
  spec.p = 5;
  spec.n = 100;
  spec.design_corr = 0.5;
  spec.seed = 17;
  const models::LinearRegressionModel model = models::linreg_generate(spec);

  workflow::WorkflowConfig config = quick_config(18);
  config.minibatch_size = 20;
  config.t_max = 30000;

  config.stopping_rule = workflow::StoppingRule::delbo;
  config.delbo_epsilon = 0.01;
  const workflow::RunResult delbo = workflow::run(model, FamilyKind::mean_field, config);

  config.stopping_rule = workflow::StoppingRule::mcse;
  const workflow::RunResult mcse = workflow::run(model, FamilyKind::mean_field, config);

  ASSERT_EQ(delbo.rule_fired, workflow::RuleFired::delbo);
  ASSERT_EQ(mcse.rule_fired, workflow::RuleFired::mcse);
  EXPECT_LT(delbo.t_stop, mcse.t_stop);
}

TEST(OuTheoryCheck, ReproducesBothScalingLaws) {
  const workflow::OuCheckResult unit = workflow::ou_theory_check(1.0, 1, 1, 10000, 1);
  EXPECT_NEAR(unit.mean_a, 1.0, 0.06);

  const workflow::OuCheckResult wide = workflow::ou_theory_check(0.1, 50, 10, 10000, 2);
  EXPECT_NEAR(wide.mean_a / 0.5, 1.0, 0.05);
  EXPECT_NEAR(wide.mean_abar / 0.05, 1.0, 0.05);
}

TEST(Workflow, ConfigValidation) {
  workflow::WorkflowConfig config;
  config.window = 101;
  EXPECT_THROW(workflow::validate(config), std::invalid_argument);
  config = workflow::WorkflowConfig{};
  config.rhat_cutoff = 1.0;
  EXPECT_THROW(workflow::validate(config), std::invalid_argument);
  config = workflow::WorkflowConfig{};
  config.mcse_cutoff = 0.0;
  EXPECT_THROW(workflow::validate(config), std::invalid_argument);
  config = workflow::WorkflowConfig{};
  config.num_chains = 0;
  EXPECT_THROW(workflow::validate(config), std::invalid_argument);
  config = workflow::WorkflowConfig{};
  config.eta = -0.5;
  EXPECT_THROW(workflow::validate(config), std::invalid_argument);
}

TEST(Workflow, TraceThinningRecordsRequestedIterations) {
  const models::GaussianModel model = models::GaussianModel::standard(1);
  workflow::WorkflowConfig config = quick_config(19);
  config.t_max = 500;
  config.trace_thin = 50;
  const workflow::RunResult result = workflow::run(model, FamilyKind::mean_field, config);
  ASSERT_EQ(result.trace.size(), 1u);
  ASSERT_FALSE(result.trace[0].empty());
  for (const auto& [iteration, flat] : result.trace[0]) {
    EXPECT_EQ(iteration % 50, 0);
    EXPECT_EQ(flat.size(), 2);
  }
}

TEST(Workflow, AveragedWindowIsRecomputableFromTrace) {
  const models::GaussianModel model = models::GaussianModel::standard(2);
  workflow::WorkflowConfig config = quick_config(20);
  config.trace_thin = 1;
  const workflow::RunResult result = workflow::run(model, FamilyKind::mean_field, config);
  ASSERT_EQ(result.rule_fired, workflow::RuleFired::mcse);

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(4);
  std::int64_t count = 0;
  for (const auto& [iteration, flat] : result.trace[0]) {
    if (iteration >= result.averaging_start &&
        iteration < result.averaging_start + result.averaging_count) {
      acc += flat;
      ++count;
    }
  }
  ASSERT_EQ(count, result.averaging_count);
  const Eigen::VectorXd recomputed = acc / static_cast<double>(count);
  EXPECT_LT((recomputed - families::flatten(result.lambda_bar)).cwiseAbs().maxCoeff(), 1e-12);
}
