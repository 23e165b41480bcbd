#include <cstdint>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "robustvi/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stochastic optimization for variational inference with "
               "Markov-chain convergence diagnostics"};
  app.require_subcommand(1);

  std::string config_path;
  std::string trace_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  double rhat_cutoff = 1.1;

  CLI::App* run = app.add_subcommand("run", "run one experiment and persist its outputs");
  run->add_option("--config", config_path, "experiment config file")->required();
  run->add_option("--seed", seed, "override workflow.seed");
  run->add_option("--out", out_dir, "override the output directory");

  CLI::App* compare =
      app.add_subcommand("compare", "run both stopping rules over several seeds");
  compare->add_option("--config", config_path, "experiment config file")->required();
  compare->add_option("--seed", seed, "override the base workflow seed");
  compare->add_option("--out", out_dir, "override the output directory");

  CLI::App* diagnose =
      app.add_subcommand("diagnose", "recompute convergence diagnostics from a trace");
  diagnose->add_option("--trace", trace_path, "trace.csv produced by run")->required();
  diagnose->add_option("--rhat-cutoff", rhat_cutoff, "stationarity cutoff (default 1.1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (run->parsed()) {
    return robustvi::experiment::cmd_run(config_path, seed, out_dir);
  }
  if (compare->parsed()) {
    return robustvi::experiment::cmd_compare(config_path, seed, out_dir);
  }
  return robustvi::experiment::cmd_diagnose(trace_path, rhat_cutoff);
}
