#ifndef ROBUSTVI_EXPERIMENT_HPP
#define ROBUSTVI_EXPERIMENT_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "robustvi/diagnostics.hpp"
#include "robustvi/families.hpp"
#include "robustvi/metrics.hpp"
#include "robustvi/models.hpp"
#include "robustvi/workflow.hpp"

namespace robustvi {
namespace experiment {

/**
 * Experiment description parsed from a flat key=value file with dotted keys
 * (e.g. `workflow.window = 100`). Unknown keys are rejected with the line
 * number.
 */
struct ExperimentConfig {
  // model.*
  std::string model_kind = "linreg";  // linreg | logistic | eight_schools | gaussian | mixture
  int model_p = 1;
  int model_n = 300;
  double noise_var = 0.4;
  double design_corr = 0.0;
  std::uint64_t data_seed = 0;
  std::string dataset_path;      // logistic: CSV with the label in the last column
  std::string school_data_path;  // eight_schools: two-column effect/stderr file
  std::string parameterization = "ncp";  // cp | ncp
  double mixture_separation = 3.0;
  double mixture_sd = 0.5;

  std::string family = "full_rank";  // mean_field | full_rank
  workflow::WorkflowConfig workflow;

  std::string output_dir = "out";
  std::int64_t trace_thin = 1;
  int compare_seeds = 10;
  int psis_draws = 2000;
  std::string reference_moments_path;
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

families::FamilyKind family_kind_from_string(const std::string& name);

std::unique_ptr<models::Model> build_model(const ExperimentConfig& config);

// Reference moments used when the model has no analytic ones: a `dim N`
// line, a `mean` line with N values, then N covariance rows (row-major).
models::Moments load_reference_moments(const std::string& path);

// ---------------------------------------------------------------------------
// Output files

void write_trace_csv(const std::string& path, const workflow::RunResult& result);
void write_elbo_csv(const std::string& path, const workflow::RunResult& result);
void write_report_json(const std::string& path, const ExperimentConfig& config,
                       const workflow::RunResult& result,
                       const std::optional<models::Moments>& reference);

diagnostics::IterateChains read_trace_csv(const std::string& path);

struct CompareRow {
  int seed_index = 0;
  int flat_dim = 0;
  std::string rule;
  double epsilon = 0.0;
  std::int64_t t_stop = 0;
  double d_mu_last = 0.0;
  double d_mu_averaged = 0.0;
  double d_sigma_last = 0.0;
  double d_sigma_averaged = 0.0;
  double khat_last = 0.0;
  double khat_averaged = 0.0;
};

void write_table_csv(const std::string& path, const std::vector<CompareRow>& rows);

// ---------------------------------------------------------------------------
// Command entry points (shared by the CLI); return the process exit code:
// 0 = success, 1 = non-convergence warning, 2 = error.

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed_override,
            std::optional<std::string> out_override);
int cmd_compare(const std::string& config_path, std::optional<std::uint64_t> seed_override,
                std::optional<std::string> out_override);
int cmd_diagnose(const std::string& trace_path, double rhat_cutoff = 1.1);

}  // namespace experiment
}  // namespace robustvi

#endif
