#include "robustvi/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "robustvi/rng.hpp"

namespace robustvi {
namespace experiment {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

// --------------------------------------------------------------------------
// Config parsing

struct KeyValue {
  std::string value;
  int line = 0;
};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

class ConfigReader {
 public:
  ConfigReader(const std::string& text, std::string origin) : origin_(std::move(origin)) {
    std::stringstream ss(text);
    std::string line;
    int line_number = 0;
    while (std::getline(ss, line)) {
      ++line_number;
      const std::string stripped = trim(line);
      if (stripped.empty() || stripped[0] == '#') {
        continue;
      }
      const auto eq = stripped.find('=');
      if (eq == std::string::npos) {
        fail(line_number, "expected key = value");
      }
      const std::string key = trim(stripped.substr(0, eq));
      if (key.empty()) {
        fail(line_number, "empty key");
      }
      if (entries_.count(key)) {
        fail(line_number, "duplicate key '" + key + "'");
      }
      entries_[key] = {trim(stripped.substr(eq + 1)), line_number};
    }
  }

  [[noreturn]] void fail(int line, const std::string& message) const {
    throw std::runtime_error(origin_ + ":" + std::to_string(line) + ": " + message);
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      return fallback;
    }
    consumed_.insert(key);
    return it->second.value;
  }

  double get_double(const std::string& key, double fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      return fallback;
    }
    consumed_.insert(key);
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second.value, &pos);
      if (pos != it->second.value.size()) {
        throw std::invalid_argument("");
      }
      return v;
    } catch (const std::exception&) {
      fail(it->second.line, "key '" + key + "': not a number: '" + it->second.value + "'");
    }
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      return fallback;
    }
    consumed_.insert(key);
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(it->second.value, &pos);
      if (pos != it->second.value.size()) {
        throw std::invalid_argument("");
      }
      return v;
    } catch (const std::exception&) {
      fail(it->second.line, "key '" + key + "': not an integer: '" + it->second.value + "'");
    }
  }

  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      return fallback;
    }
    consumed_.insert(key);
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(it->second.value, &pos);
      if (pos != it->second.value.size()) {
        throw std::invalid_argument("");
      }
      return v;
    } catch (const std::exception&) {
      fail(it->second.line, "key '" + key + "': not an unsigned integer");
    }
  }

  // "v v v | v v v": one block of space-separated values per chain.
  std::vector<Eigen::VectorXd> get_vectors(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      return {};
    }
    consumed_.insert(key);
    std::vector<Eigen::VectorXd> out;
    std::stringstream blocks(it->second.value);
    std::string block;
    while (std::getline(blocks, block, '|')) {
      std::vector<double> values;
      std::stringstream ss(block);
      std::string token;
      while (ss >> token) {
        try {
          values.push_back(std::stod(token));
        } catch (const std::exception&) {
          fail(it->second.line, "key '" + key + "': not a number: '" + token + "'");
        }
      }
      if (values.empty()) {
        fail(it->second.line, "key '" + key + "': empty chain block");
      }
      out.push_back(Eigen::Map<Eigen::VectorXd>(values.data(), values.size()));
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, entry] : entries_) {
      if (!consumed_.count(key)) {
        fail(entry.line, "unknown key '" + key + "'");
      }
    }
  }

 private:
  std::string origin_;
  std::map<std::string, KeyValue> entries_;
  std::set<std::string> consumed_;
};

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ConfigReader reader(text, origin);
  ExperimentConfig config;

  config.model_kind = reader.get_string("model.kind", config.model_kind);
  config.model_p = static_cast<int>(reader.get_int("model.p", config.model_p));
  config.model_n = static_cast<int>(reader.get_int("model.n", config.model_n));
  config.noise_var = reader.get_double("model.noise_var", config.noise_var);
  config.design_corr = reader.get_double("model.design_corr", config.design_corr);
  config.data_seed = reader.get_uint("model.data_seed", config.data_seed);
  config.dataset_path = reader.get_string("model.dataset", config.dataset_path);
  config.school_data_path = reader.get_string("model.school_data", config.school_data_path);
  config.parameterization = reader.get_string("model.parameterization", config.parameterization);
  config.mixture_separation = reader.get_double("model.separation", config.mixture_separation);
  config.mixture_sd = reader.get_double("model.sd", config.mixture_sd);

  config.family = reader.get_string("family", config.family);

  workflow::WorkflowConfig& wf = config.workflow;
  wf.eta = reader.get_double("workflow.eta", wf.eta);
  wf.num_chains = static_cast<int>(reader.get_int("workflow.chains", wf.num_chains));
  wf.window = reader.get_int("workflow.window", wf.window);
  wf.rhat_cutoff = reader.get_double("workflow.rhat_cutoff", wf.rhat_cutoff);
  wf.mcse_cutoff = reader.get_double("workflow.mcse_cutoff", wf.mcse_cutoff);
  wf.ess_cutoff = reader.get_double("workflow.ess_cutoff", wf.ess_cutoff);
  wf.t_max = reader.get_int("workflow.tmax", wf.t_max);
  wf.optimizer =
      optimizers::optimizer_kind_from_string(reader.get_string("workflow.optimizer", "rmsprop"));
  wf.mc_draws = static_cast<int>(reader.get_int("workflow.mc_draws", wf.mc_draws));
  wf.minibatch_size = static_cast<int>(reader.get_int("workflow.minibatch", wf.minibatch_size));
  wf.stopping_rule = workflow::stopping_rule_from_string(
      reader.get_string("workflow.stopping_rule", "mcse"));
  wf.delbo_epsilon = reader.get_double("workflow.delbo_epsilon", wf.delbo_epsilon);
  wf.seed = reader.get_uint("workflow.seed", wf.seed);
  wf.optimizer_options.max_grad_norm = reader.get_double("workflow.grad_clip", 0.0);
  wf.use_median_ess = reader.get_int("workflow.median_ess", 0) != 0;
  wf.threads = static_cast<int>(reader.get_int("workflow.threads", 0));
  wf.init_location_sd = reader.get_double("init.location_sd", wf.init_location_sd);
  wf.init_locations = reader.get_vectors("init.locations");

  config.output_dir = reader.get_string("output.dir", config.output_dir);
  config.trace_thin = reader.get_int("output.thin", config.trace_thin);
  config.compare_seeds = static_cast<int>(reader.get_int("compare.seeds", config.compare_seeds));
  config.psis_draws = static_cast<int>(reader.get_int("diagnostics.psis_draws", config.psis_draws));
  config.reference_moments_path =
      reader.get_string("metrics.reference", config.reference_moments_path);

  reader.reject_unknown();

  if (config.trace_thin < 1) {
    throw std::runtime_error(origin + ": output.thin must be at least 1");
  }
  return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("config not found: " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

families::FamilyKind family_kind_from_string(const std::string& name) {
  if (name == "mean_field") return families::FamilyKind::mean_field;
  if (name == "full_rank") return families::FamilyKind::full_rank;
  throw std::invalid_argument("unknown family: " + name);
}

std::unique_ptr<models::Model> build_model(const ExperimentConfig& config) {
  if (config.model_kind == "linreg") {
    models::LinRegSpec spec;
    spec.p = config.model_p;
    spec.n = config.model_n;
    spec.noise_var = config.noise_var;
    spec.design_corr = config.design_corr;
    spec.seed = config.data_seed;
    return std::make_unique<models::LinearRegressionModel>(models::linreg_generate(spec));
  }
  if (config.model_kind == "logistic") {
    if (config.dataset_path.empty()) {
      throw std::runtime_error("logistic model needs model.dataset");
    }
    models::Dataset data = models::load_csv_dataset(config.dataset_path);
    return std::make_unique<models::LogisticRegressionModel>(std::move(data.features),
                                                             std::move(data.response));
  }
  if (config.model_kind == "eight_schools") {
    if (config.school_data_path.empty()) {
      throw std::runtime_error("eight_schools model needs model.school_data");
    }
    models::SchoolData data = models::load_school_data(config.school_data_path);
    models::SchoolParameterization parameterization;
    if (config.parameterization == "cp") {
      parameterization = models::SchoolParameterization::centered;
    } else if (config.parameterization == "ncp") {
      parameterization = models::SchoolParameterization::non_centered;
    } else {
      throw std::runtime_error("unknown parameterization: " + config.parameterization);
    }
    return std::make_unique<models::EightSchoolsModel>(std::move(data.effects),
                                                       std::move(data.stderrs),
                                                       parameterization);
  }
  if (config.model_kind == "gaussian") {
    return std::make_unique<models::GaussianModel>(models::GaussianModel::standard(config.model_p));
  }
  if (config.model_kind == "mixture") {
    return std::make_unique<models::GaussianMixture1D>(config.mixture_separation,
                                                       config.mixture_sd);
  }
  throw std::runtime_error("unknown model kind: " + config.model_kind);
}

models::Moments load_reference_moments(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("reference moments file not found: " + path);
  }
  std::string tag;
  int dim = 0;
  if (!(in >> tag >> dim) || tag != "dim" || dim < 1) {
    throw std::runtime_error(path + ": expected 'dim <N>' header");
  }
  models::Moments moments;
  moments.mean.resize(dim);
  if (!(in >> tag) || tag != "mean") {
    throw std::runtime_error(path + ": expected 'mean' line");
  }
  for (int i = 0; i < dim; ++i) {
    if (!(in >> moments.mean(i))) {
      throw std::runtime_error(path + ": mean vector shorter than dim");
    }
  }
  if (!(in >> tag) || tag != "cov") {
    throw std::runtime_error(path + ": expected 'cov' section");
  }
  moments.cov.resize(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      if (!(in >> moments.cov(i, j))) {
        throw std::runtime_error(path + ": covariance matrix shorter than dim x dim");
      }
    }
  }
  return moments;
}

// ---------------------------------------------------------------------------
// Output files

void write_trace_csv(const std::string& path, const workflow::RunResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << "chain,iteration,component,value\n";
  for (std::size_t j = 0; j < result.trace.size(); ++j) {
    for (const auto& [iteration, flat] : result.trace[j]) {
      for (Eigen::Index k = 0; k < flat.size(); ++k) {
        out << j << ',' << iteration << ',' << k << ',' << format_double(flat(k)) << '\n';
      }
    }
  }
}

void write_elbo_csv(const std::string& path, const workflow::RunResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << "iteration,estimate\n";
  for (std::size_t t = 0; t < result.elbo_trace.size(); ++t) {
    out << (t + 1) << ',' << format_double(result.elbo_trace[t]) << '\n';
  }
}

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    arr.push_back(v(i));
  }
  return arr;
}

json params_to_json(const families::VariationalParams& params) {
  return json{{"location", vector_to_json(params.location)},
              {"scale_unconstrained", vector_to_json(params.scale_unconstrained)}};
}

json config_to_json(const ExperimentConfig& config) {
  const workflow::WorkflowConfig& wf = config.workflow;
  return json{
      {"model",
       {{"kind", config.model_kind},
        {"p", config.model_p},
        {"n", config.model_n},
        {"noise_var", config.noise_var},
        {"design_corr", config.design_corr},
        {"data_seed", config.data_seed},
        {"dataset", config.dataset_path},
        {"school_data", config.school_data_path},
        {"parameterization", config.parameterization},
        {"separation", config.mixture_separation},
        {"sd", config.mixture_sd}}},
      {"family", config.family},
      {"workflow",
       {{"eta", wf.eta},
        {"chains", wf.num_chains},
        {"window", wf.window},
        {"rhat_cutoff", wf.rhat_cutoff},
        {"mcse_cutoff", wf.mcse_cutoff},
        {"ess_cutoff", wf.ess_cutoff},
        {"tmax", wf.t_max},
        {"optimizer", optimizers::to_string(wf.optimizer)},
        {"mc_draws", wf.mc_draws},
        {"minibatch", wf.minibatch_size},
        {"stopping_rule", workflow::to_string(wf.stopping_rule)},
        {"delbo_epsilon", wf.delbo_epsilon},
        {"seed", wf.seed},
        {"median_ess", wf.use_median_ess},
        {"init_location_sd", wf.init_location_sd}}},
      {"output", {{"thin", config.trace_thin}}},
      {"psis_draws", config.psis_draws}};
}

constexpr int kReportAutocorrLags = 50;

json diagnostics_to_json(const diagnostics::DiagnosticsReport& report) {
  json autocorr = json::array();
  for (const Eigen::VectorXd& rho : report.autocorr) {
    autocorr.push_back(
        vector_to_json(rho.head(std::min<Eigen::Index>(rho.size(), kReportAutocorrLags + 1))));
  }
  return json{{"rhat", vector_to_json(report.rhat)},
              {"ess", vector_to_json(report.ess)},
              {"mcse", vector_to_json(report.mcse)},
              {"khat_lower", vector_to_json(report.khat_lower)},
              {"khat_upper", vector_to_json(report.khat_upper)},
              {"degenerate", report.degenerate},
              {"autocorr", autocorr},
              {"max_rhat", report.max_rhat},
              {"median_mcse", report.median_mcse},
              {"min_ess", report.min_ess},
              {"max_khat", report.max_khat},
              {"tail_problematic", report.tail_problematic}};
}

}  // namespace

void write_report_json(const std::string& path, const ExperimentConfig& config,
                       const workflow::RunResult& result,
                       const std::optional<models::Moments>& reference) {
  json report{
      {"config", config_to_json(config)},
      {"run",
       {{"t_converged", result.t_converged},
        {"t_stop", result.t_stop},
        {"rule_fired", workflow::to_string(result.rule_fired)},
        {"warned_nonconvergence", result.warned_nonconvergence},
        {"max_rhat_at_convergence", result.max_rhat_at_convergence},
        {"iterate_khat_max", result.iterate_khat_max},
        {"averaging_start", result.averaging_start},
        {"averaging_count", result.averaging_count},
        {"divergence_message", result.divergence_message},
        {"lambda_bar", params_to_json(result.lambda_bar)}}},
      {"diagnostics", diagnostics_to_json(result.diagnostics)}};

  json last = json::array();
  for (const auto& params : result.lambda_last) {
    last.push_back(params_to_json(params));
  }
  report["run"]["lambda_last"] = last;

  if (reference.has_value()) {
    const models::Moments bar = metrics::variational_moments(result.lambda_bar);
    const models::Moments fin = metrics::variational_moments(result.lambda_last.front());
    const metrics::MomentDistance d_bar =
        metrics::moment_distance(bar.mean, bar.cov, reference->mean, reference->cov);
    const metrics::MomentDistance d_last =
        metrics::moment_distance(fin.mean, fin.cov, reference->mean, reference->cov);
    report["metrics"] = {{"d_mu", d_bar.d_mu},
                         {"d_sigma", d_bar.d_sigma},
                         {"d", d_bar.d},
                         {"d_mu_last", d_last.d_mu},
                         {"d_sigma_last", d_last.d_sigma},
                         {"d_last", d_last.d}};
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << report.dump(2) << '\n';
}

diagnostics::IterateChains read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("trace not found: " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(path + ": empty trace file");
  }
  // chain -> iteration -> (component, value)
  std::map<int, std::map<std::int64_t, std::map<int, double>>> cells;
  int max_component = -1;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) {
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> fields;
    while (std::getline(ss, cell, ',')) {
      fields.push_back(cell);
    }
    if (fields.size() != 4) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) +
                               ": expected chain,iteration,component,value");
    }
    try {
      const int chain = std::stoi(fields[0]);
      const std::int64_t iteration = std::stoll(fields[1]);
      const int component = std::stoi(fields[2]);
      const double value = std::stod(fields[3]);
      cells[chain][iteration][component] = value;
      max_component = std::max(max_component, component);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) + ": malformed row");
    }
  }
  if (cells.empty()) {
    throw std::runtime_error(path + ": no data rows");
  }
  const int num_chains = static_cast<int>(cells.size());
  const int dim = max_component + 1;
  const std::int64_t start = cells.begin()->second.begin()->first;
  diagnostics::IterateChains chains(num_chains, dim, start);
  int expected_chain = 0;
  for (const auto& [chain, by_iteration] : cells) {
    if (chain != expected_chain++) {
      throw std::runtime_error(path + ": chain indices are not contiguous from 0");
    }
    for (const auto& [iteration, by_component] : by_iteration) {
      if (static_cast<int>(by_component.size()) != dim) {
        throw std::runtime_error(path + ": iteration " + std::to_string(iteration) +
                                 " of chain " + std::to_string(chain) +
                                 " is missing components");
      }
      Eigen::VectorXd flat(dim);
      for (const auto& [component, value] : by_component) {
        flat(component) = value;
      }
      chains.append(chain, flat);
    }
  }
  chains.size();  // throws if chains are ragged
  return chains;
}

void write_table_csv(const std::string& path, const std::vector<CompareRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << "seed,K,rule,epsilon,T,D_mu,D_mu_IA,D_sigma,D_sigma_IA,khat,khat_IA\n";
  for (const CompareRow& row : rows) {
    out << row.seed_index << ',' << row.flat_dim << ',' << row.rule << ','
        << format_double(row.epsilon) << ',' << row.t_stop << ','
        << format_double(row.d_mu_last) << ',' << format_double(row.d_mu_averaged) << ','
        << format_double(row.d_sigma_last) << ',' << format_double(row.d_sigma_averaged) << ','
        << format_double(row.khat_last) << ',' << format_double(row.khat_averaged) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Commands

namespace {

std::optional<models::Moments> reference_moments_for(const ExperimentConfig& config,
                                                     const models::Model& model) {
  if (model.analytic_moments().has_value()) {
    return model.analytic_moments();
  }
  if (!config.reference_moments_path.empty()) {
    models::Moments moments = load_reference_moments(config.reference_moments_path);
    if (moments.mean.size() != model.dim()) {
      throw std::runtime_error("reference moments dimension " +
                               std::to_string(moments.mean.size()) +
                               " does not match model dimension " +
                               std::to_string(model.dim()));
    }
    return moments;
  }
  return std::nullopt;
}

workflow::RunResult run_once(const models::Model& model, const ExperimentConfig& config) {
  workflow::WorkflowConfig wf = config.workflow;
  wf.trace_thin = config.trace_thin;
  return workflow::run(model, family_kind_from_string(config.family), wf);
}

CompareRow make_row(const ExperimentConfig& config, const models::Model& model,
                    const workflow::RunResult& result,
                    const std::optional<models::Moments>& reference, int seed_index) {
  CompareRow row;
  row.seed_index = seed_index;
  row.flat_dim = families::flat_size(family_kind_from_string(config.family), model.dim());
  row.rule = workflow::to_string(config.workflow.stopping_rule);
  row.epsilon = config.workflow.stopping_rule == workflow::StoppingRule::delbo
                    ? config.workflow.delbo_epsilon
                    : config.workflow.mcse_cutoff;
  row.t_stop = result.t_stop;

  const double nan = std::numeric_limits<double>::quiet_NaN();
  row.d_mu_last = row.d_mu_averaged = row.d_sigma_last = row.d_sigma_averaged = nan;
  if (reference.has_value()) {
    const models::Moments bar = metrics::variational_moments(result.lambda_bar);
    const models::Moments fin = metrics::variational_moments(result.lambda_last.front());
    const metrics::MomentDistance d_bar =
        metrics::moment_distance(bar.mean, bar.cov, reference->mean, reference->cov);
    const metrics::MomentDistance d_last =
        metrics::moment_distance(fin.mean, fin.cov, reference->mean, reference->cov);
    row.d_mu_last = d_last.d_mu;
    row.d_mu_averaged = d_bar.d_mu;
    row.d_sigma_last = d_last.d_sigma;
    row.d_sigma_averaged = d_bar.d_sigma;
  }

  Rng psis_rng = make_stream_rng(config.workflow.seed, 0x70736973u);
  row.khat_last =
      diagnostics::psis_khat(model, result.lambda_last.front(), config.psis_draws, psis_rng);
  row.khat_averaged =
      diagnostics::psis_khat(model, result.lambda_bar, config.psis_draws, psis_rng);
  return row;
}

}  // namespace

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed_override,
            std::optional<std::string> out_override) {
  try {
    ExperimentConfig config = parse_config_file(config_path);
    if (seed_override.has_value()) {
      config.workflow.seed = *seed_override;
    }
    if (out_override.has_value()) {
      config.output_dir = *out_override;
    }
    std::filesystem::create_directories(config.output_dir);

    const std::unique_ptr<models::Model> model = build_model(config);
    const workflow::RunResult result = run_once(*model, config);
    const std::optional<models::Moments> reference = reference_moments_for(config, *model);

    const std::filesystem::path out(config.output_dir);
    write_trace_csv((out / "trace.csv").string(), result);
    write_elbo_csv((out / "elbo.csv").string(), result);
    write_report_json((out / "report.json").string(), config, result, reference);
    write_table_csv((out / "table.csv").string(),
                    {make_row(config, *model, result, reference, 0)});

    std::cout << "rule_fired=" << workflow::to_string(result.rule_fired)
              << " t_stop=" << result.t_stop << " t_converged=" << result.t_converged
              << " warned=" << (result.warned_nonconvergence ? 1 : 0) << '\n';
    if (result.rule_fired == workflow::RuleFired::diverged) {
      std::cerr << "error: optimizer diverged: " << result.divergence_message << '\n';
      return 2;
    }
    return result.warned_nonconvergence ? 1 : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

int cmd_compare(const std::string& config_path, std::optional<std::uint64_t> seed_override,
                std::optional<std::string> out_override) {
  try {
    ExperimentConfig base = parse_config_file(config_path);
    if (seed_override.has_value()) {
      base.workflow.seed = *seed_override;
    }
    if (out_override.has_value()) {
      base.output_dir = *out_override;
    }
    std::filesystem::create_directories(base.output_dir);
    const std::filesystem::path out(base.output_dir);

    std::vector<CompareRow> rows;
    bool any_warned = false;
    for (int s = 0; s < base.compare_seeds; ++s) {
      ExperimentConfig config = base;
      config.data_seed = base.data_seed + static_cast<std::uint64_t>(s);
      config.workflow.seed = base.workflow.seed + static_cast<std::uint64_t>(s);
      const std::unique_ptr<models::Model> model = build_model(config);
      const std::optional<models::Moments> reference = reference_moments_for(config, *model);
      if (!reference.has_value()) {
        throw std::runtime_error(
            "compare needs ground truth: analytic moments or metrics.reference");
      }

      for (const workflow::StoppingRule rule :
           {workflow::StoppingRule::delbo, workflow::StoppingRule::mcse}) {
        config.workflow.stopping_rule = rule;
        const workflow::RunResult result = run_once(*model, config);
        if (rule == workflow::StoppingRule::mcse && result.warned_nonconvergence) {
          any_warned = true;
        }

        rows.push_back(make_row(config, *model, result, reference, s));

        const std::filesystem::path run_dir =
            out / ("seed" + std::to_string(s) + "_" + workflow::to_string(rule));
        std::filesystem::create_directories(run_dir);
        write_trace_csv((run_dir / "trace.csv").string(), result);
        write_elbo_csv((run_dir / "elbo.csv").string(), result);
        write_report_json((run_dir / "report.json").string(), config, result, reference);
      }
    }
    write_table_csv((out / "table.csv").string(), rows);
    std::cout << "wrote " << rows.size() << " comparison rows to "
              << (out / "table.csv").string() << '\n';
    return any_warned ? 1 : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

int cmd_diagnose(const std::string& trace_path, double rhat_cutoff) {
  try {
    const diagnostics::IterateChains chains = read_trace_csv(trace_path);
    const std::int64_t stored = chains.size();
    const std::int64_t window = stored - (stored % 2);
    if (window < 4) {
      throw std::runtime_error(trace_path + ": trace too short to diagnose");
    }
    const diagnostics::DiagnosticsReport report = diagnostics::compute_report(chains, window);

    double max_rho1 = 0.0;
    for (const Eigen::VectorXd& rho : report.autocorr) {
      if (rho.size() > 1) {
        max_rho1 = std::max(max_rho1, rho(1));
      }
    }

    std::cout << "chains=" << chains.num_chains() << " iterations=" << stored
              << " components=" << chains.dim() << '\n';
    std::cout << "max_rhat=" << format_double(report.max_rhat)
              << " min_ess=" << format_double(report.min_ess)
              << " median_mcse=" << format_double(report.median_mcse)
              << " max_khat=" << format_double(report.max_khat)
              << " max_lag1_autocorr=" << format_double(max_rho1) << '\n';

    if (report.max_rhat >= rhat_cutoff) {
      std::cout << "verdict: not stationary (Rhat >= " << rhat_cutoff << ")\n";
    } else if (report.tail_problematic) {
      std::cout << "verdict: heavy-tailed iterates (khat > 1), averaging unreliable\n";
    } else if (max_rho1 > 0.99) {
      std::cout << "verdict: high lag-1 autocorrelation, averaging may be unreliable\n";
    } else {
      std::cout << "verdict: converged, averaging efficient\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace experiment
}  // namespace robustvi
