#include "robustvi/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace robustvi {
namespace workflow {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

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

int resolve_workers(const WorkflowConfig& config) {
  int workers = config.threads;
  if (workers <= 0) {
    if (const char* env = std::getenv("ROBUSTVI_THREADS")) {
      workers = std::atoi(env);
    }
  }
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
  }
  return std::clamp(workers, 1, config.num_chains);
}

// Runs fn(chain) for every chain, on up to `workers` threads. The per-chain
// work touches disjoint state, so scheduling cannot affect results.
template <typename Fn>
void for_each_chain(int num_chains, int workers, Fn&& fn) {
  if (workers <= 1 || num_chains <= 1) {
    for (int j = 0; j < num_chains; ++j) {
      fn(j);
    }
    return;
  }
  std::vector<std::exception_ptr> errors(num_chains);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int j = w; j < num_chains; j += workers) {
        try {
          fn(j);
        } catch (...) {
          errors[j] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
  for (auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

// Uniform shuffling per epoch, batches drawn without replacement within an
// epoch; a trailing remainder smaller than the batch is dropped.
class MinibatchSampler {
 public:
  MinibatchSampler(int data_size, int batch_size)
      : data_size_(data_size),
        batch_size_(batch_size <= 0 || batch_size > data_size ? data_size : batch_size),
        permutation_(static_cast<std::size_t>(data_size)),
        position_(data_size) {
    std::iota(permutation_.begin(), permutation_.end(), 0);
  }

  std::span<const int> next(Rng& rng) {
    if (data_size_ == 0) {
      return {};
    }
    if (batch_size_ == data_size_) {
      return {permutation_.data(), permutation_.size()};
    }
    if (position_ + batch_size_ > data_size_) {
      std::shuffle(permutation_.begin(), permutation_.end(), rng);
      position_ = 0;
    }
    std::span<const int> batch{permutation_.data() + position_,
                               static_cast<std::size_t>(batch_size_)};
    position_ += batch_size_;
    return batch;
  }

 private:
  int data_size_;
  int batch_size_;
  std::vector<int> permutation_;
  int position_;
};

// Fixed-capacity window of the most recent iterates, per chain.
class RingStore {
 public:
  RingStore(int num_chains, int dim, std::int64_t capacity)
      : dim_(dim), capacity_(capacity) {
    mats_.assign(num_chains, Eigen::MatrixXd::Zero(dim, capacity));
  }

  void push(int chain, std::int64_t t, const Eigen::VectorXd& v) {
    mats_[chain].col((t - 1) % capacity_) = v;
  }

  // Ordered copy of iterations (t_now - window, t_now].
  diagnostics::IterateChains materialize(std::int64_t t_now, std::int64_t window) const {
    diagnostics::IterateChains out(static_cast<int>(mats_.size()), dim_,
                                   t_now - window + 1);
    for (int j = 0; j < static_cast<int>(mats_.size()); ++j) {
      for (std::int64_t s = t_now - window + 1; s <= t_now; ++s) {
        out.append(j, mats_[j].col((s - 1) % capacity_));
      }
    }
    return out;
  }

 private:
  int dim_;
  std::int64_t capacity_;
  std::vector<Eigen::MatrixXd> mats_;
};

struct ChainState {
  Rng rng;
  families::VariationalParams params;
  optimizers::Optimizer optimizer;
  MinibatchSampler sampler;
  std::vector<double> elbo;
  std::vector<std::pair<std::int64_t, Eigen::VectorXd>> trace;
  std::string error;

  ChainState(Rng rng_in, families::VariationalParams params_in,
             optimizers::Optimizer optimizer_in, MinibatchSampler sampler_in)
      : rng(std::move(rng_in)),
        params(std::move(params_in)),
        optimizer(std::move(optimizer_in)),
        sampler(std::move(sampler_in)) {}
};

struct Driver {
  const models::Model& model;
  families::FamilyKind family;
  const WorkflowConfig& config;
  int flat_dim;
  std::vector<ChainState> chains;
  RingStore ring;
  std::int64_t now = 0;  // last completed global iteration
  bool diverged = false;
  std::string divergence_message;

  Driver(const models::Model& model_in, families::FamilyKind family_in,
         const WorkflowConfig& config_in)
      : model(model_in),
        family(family_in),
        config(config_in),
        flat_dim(families::flat_size(family_in, model_in.dim())),
        ring(config_in.num_chains, flat_dim, config_in.window) {
    const int p = model.dim();
    if (!config.init_locations.empty() &&
        static_cast<int>(config.init_locations.size()) != config.num_chains) {
      throw std::invalid_argument("workflow: init_locations must have one entry per chain");
    }
    chains.reserve(config.num_chains);
    for (int j = 0; j < config.num_chains; ++j) {
      Rng rng = make_stream_rng(config.seed, static_cast<std::uint64_t>(j));
      families::VariationalParams params = families::standard(family, p);
      if (!config.init_locations.empty()) {
        if (config.init_locations[j].size() != p) {
          throw std::invalid_argument("workflow: init location has wrong dimension");
        }
        params.location = config.init_locations[j];
      } else {
        params.location = config.init_location_sd * draw_standard_normal(rng, p);
      }
      chains.emplace_back(std::move(rng), std::move(params),
                          optimizers::Optimizer(config.optimizer, config.eta, flat_dim,
                                                config.optimizer_options),
                          MinibatchSampler(model.data_size(), config.minibatch_size));
    }
  }

  // Advances one chain through global iterations (from, from + count].
  void advance_chain(int j, std::int64_t from, std::int64_t count,
                     diagnostics::IterateChains* store) {
    ChainState& chain = chains[j];
    if (!chain.error.empty()) {
      return;
    }
    const int p = model.dim();
    for (std::int64_t i = 1; i <= count; ++i) {
      const std::int64_t t = from + i;
      const auto batch = chain.sampler.next(chain.rng);
      const gradients::ElboEstimate est =
          gradients::estimate_grad(model, chain.params, config.mc_draws, batch, chain.rng);
      if (!est.finite) {
        chain.error = "non-finite ELBO/gradient estimate at iteration " + std::to_string(t);
        return;
      }
      chain.elbo.push_back(est.value);
      Eigen::VectorXd flat = families::flatten(chain.params);
      try {
        chain.optimizer.step(flat, est.grad);
      } catch (const optimizers::DivergenceError& e) {
        chain.error = std::string(e.what()) + " at iteration " + std::to_string(t);
        return;
      }
      if (!flat.allFinite()) {
        chain.error = "non-finite parameter at iteration " + std::to_string(t);
        return;
      }
      chain.params = families::unflatten(family, p, flat);
      ring.push(j, t, flat);
      if (store != nullptr) {
        store->append(j, flat);
      }
      if (config.trace_thin >= 1 && t % config.trace_thin == 0) {
        chain.trace.emplace_back(t, flat);
      }
    }
  }

  // Advances all chains to global iteration `target`; returns false on
  // divergence in any chain.
  bool advance_all(std::int64_t target, int workers, diagnostics::IterateChains* store) {
    const std::int64_t from = now;
    const std::int64_t count = target - from;
    for_each_chain(config.num_chains, workers,
                   [&](int j) { advance_chain(j, from, count, store); });
    for (const ChainState& chain : chains) {
      if (!chain.error.empty()) {
        diverged = true;
        divergence_message = chain.error;
        return false;
      }
    }
    now = target;
    return true;
  }

  // Average and diagnostics over the trailing window of a full history store.
  void finalize_from_store(RunResult& result, const diagnostics::IterateChains& store) {
    const std::int64_t stored = store.size();
    const std::int64_t window = std::min<std::int64_t>(config.window, stored);
    const std::int64_t even_window = window - (window % 2);
    if (even_window >= 4) {
      result.lambda_bar =
          families::unflatten(family, model.dim(), store.window_mean(even_window));
      result.diagnostics = diagnostics::compute_report(store, even_window);
      result.averaging_start = now - even_window + 1;
      result.averaging_count = even_window;
    } else if (stored >= 1) {
      result.lambda_bar =
          families::unflatten(family, model.dim(), store.window_mean(window));
      result.averaging_start = now - window + 1;
      result.averaging_count = window;
    } else {
      result.lambda_bar = chains.front().params;
      result.averaging_start = 0;
      result.averaging_count = 0;
    }
  }

  std::vector<double> mean_elbo_trace() const {
    std::size_t len = chains.front().elbo.size();
    for (const ChainState& chain : chains) {
      len = std::min(len, chain.elbo.size());
    }
    std::vector<double> trace(len, 0.0);
    for (const ChainState& chain : chains) {
      for (std::size_t t = 0; t < len; ++t) {
        trace[t] += chain.elbo[t];
      }
    }
    for (double& v : trace) {
      v /= config.num_chains;
    }
    return trace;
  }

  void finalize_common(RunResult& result) {
    result.elbo_trace = mean_elbo_trace();
    result.t_stop = now;
    result.lambda_last.reserve(chains.size());
    for (const ChainState& chain : chains) {
      result.lambda_last.push_back(chain.params);
    }
    if (config.trace_thin >= 1) {
      result.trace.reserve(chains.size());
      for (ChainState& chain : chains) {
        result.trace.push_back(std::move(chain.trace));
      }
    }
  }

  // Average and diagnostics over the trailing window of the ring store.
  void finalize_from_last_window(RunResult& result) {
    const std::int64_t window = std::min<std::int64_t>(config.window, now);
    const std::int64_t even_window = window - (window % 2);
    if (even_window >= 4) {
      const diagnostics::IterateChains win = ring.materialize(now, even_window);
      result.lambda_bar = iterate_average(win, family, model.dim());
      result.diagnostics = diagnostics::compute_report(win, even_window);
      result.averaging_start = now - even_window + 1;
      result.averaging_count = even_window;
    } else if (now >= 1) {
      const diagnostics::IterateChains win = ring.materialize(now, std::min(window, now));
      result.lambda_bar = iterate_average(win, family, model.dim());
      result.averaging_start = now - std::min(window, now) + 1;
      result.averaging_count = std::min(window, now);
    } else {
      result.lambda_bar = chains.front().params;
      result.averaging_start = 0;
      result.averaging_count = 0;
    }
  }
};

}  // namespace

// ---------------------------------------------------------------------------

StoppingRule stopping_rule_from_string(const std::string& name) {
  if (name == "mcse") return StoppingRule::mcse;
  if (name == "delbo") return StoppingRule::delbo;
  throw std::invalid_argument("unknown stopping rule: " + name);
}

std::string to_string(StoppingRule rule) {
  return rule == StoppingRule::mcse ? "mcse" : "delbo";
}

std::string to_string(RuleFired rule) {
  switch (rule) {
    case RuleFired::none: return "none";
    case RuleFired::mcse: return "mcse";
    case RuleFired::delbo: return "delbo";
    case RuleFired::max_iterations: return "max_iterations";
    case RuleFired::tail_guard: return "tail_guard";
    case RuleFired::diverged: return "diverged";
  }
  return "unknown";
}

void validate(const WorkflowConfig& config) {
  if (config.eta <= 0.0) throw std::invalid_argument("workflow: eta must be positive");
  if (config.num_chains < 1) throw std::invalid_argument("workflow: need at least one chain");
  if (config.window < 4 || config.window % 2 != 0) {
    throw std::invalid_argument("workflow: window must be even and at least 4");
  }
  if (config.rhat_cutoff <= 1.0) {
    throw std::invalid_argument("workflow: rhat_cutoff must exceed 1");
  }
  if (config.mcse_cutoff <= 0.0) {
    throw std::invalid_argument("workflow: mcse_cutoff must be positive");
  }
  if (config.ess_cutoff < 0.0) {
    throw std::invalid_argument("workflow: ess_cutoff must be nonnegative");
  }
  if (config.t_max < 1) throw std::invalid_argument("workflow: t_max must be positive");
  if (config.mc_draws < 1) throw std::invalid_argument("workflow: mc_draws must be positive");
  if (config.delbo_epsilon <= 0.0) {
    throw std::invalid_argument("workflow: delbo_epsilon must be positive");
  }
  if (config.init_location_sd < 0.0) {
    throw std::invalid_argument("workflow: init_location_sd must be nonnegative");
  }
  if (config.trace_thin < 0) {
    throw std::invalid_argument("workflow: trace_thin must be nonnegative");
  }
}

RunResult run(const models::Model& model, families::FamilyKind family,
              const WorkflowConfig& config) {
  validate(config);
  Driver driver(model, family, config);
  const int workers = resolve_workers(config);
  const std::int64_t window = config.window;

  RunResult result;
  result.max_rhat_at_convergence = kNaN;
  result.iterate_khat_max = kNaN;

  if (config.stopping_rule == StoppingRule::delbo) {
    // Baseline: no stationarity phase, only the windowed ELBO change,
    // evaluated every iteration once two full windows exist.
    bool fired = false;
    std::vector<double> pooled;
    pooled.reserve(config.t_max);
    while (driver.now < config.t_max) {
      if (!driver.advance_all(driver.now + 1, 1, nullptr)) {
        break;
      }
      double mean_elbo = 0.0;
      for (const auto& chain : driver.chains) {
        mean_elbo += chain.elbo.back();
      }
      pooled.push_back(mean_elbo / config.num_chains);
      if (driver.now >= 2 * window &&
          delbo_should_stop(pooled, window, config.delbo_epsilon)) {
        fired = true;
        break;
      }
    }
    if (driver.diverged) {
      result.rule_fired = RuleFired::diverged;
      result.warned_nonconvergence = true;
      result.divergence_message = driver.divergence_message;
    } else if (fired) {
      result.rule_fired = RuleFired::delbo;
    } else {
      result.rule_fired = RuleFired::max_iterations;
      result.warned_nonconvergence = true;
    }
    driver.finalize_from_last_window(result);
    result.iterate_khat_max = result.diagnostics.max_khat;
    driver.finalize_common(result);
    return result;
  }

  // Phase 1: iterate until split-Rhat over the history so far clears the
  // cutoff. The full history (halved per chain) is what certifies
  // stationarity; a bare W-iterate window carries too few effective samples
  // once the iterates autocorrelate on the scale of W.
  diagnostics::IterateChains history(config.num_chains, driver.flat_dim, 1);
  bool rhat_converged = false;
  int slow_component = -1;  // last argmax Rhat; re-tested first to skip full sweeps
  while (driver.now < config.t_max) {
    const std::int64_t target = std::min<std::int64_t>(
        config.t_max, (driver.now / window + 1) * window);
    if (!driver.advance_all(target, workers, &history)) {
      break;
    }
    if (driver.now % window == 0) {
      if (slow_component >= 0 &&
          diagnostics::split_rhat_component(history, driver.now, slow_component) >=
              config.rhat_cutoff) {
        continue;  // still not mixed; the max cannot be below the cutoff
      }
      Eigen::Index argmax = 0;
      const double max_rhat =
          diagnostics::split_rhat(history, driver.now).maxCoeff(&argmax);
      slow_component = static_cast<int>(argmax);
      result.max_rhat_at_convergence = max_rhat;
      if (max_rhat < config.rhat_cutoff) {
        rhat_converged = true;
        result.t_converged = driver.now;
        break;
      }
    }
  }

  if (driver.diverged) {
    result.rule_fired = RuleFired::diverged;
    result.warned_nonconvergence = true;
    result.divergence_message = driver.divergence_message;
    driver.finalize_from_store(result, history);
    driver.finalize_common(result);
    return result;
  }

  // Averaging gate: require stationarity and a non-heavy iterate tail over
  // the last W iterates.
  const std::int64_t gate_window = std::min<std::int64_t>(window, driver.now);
  if (gate_window * config.num_chains >= 100) {
    result.iterate_khat_max = diagnostics::khat_iterates(history, gate_window).max_khat;
  }
  const bool tail_failed =
      std::isfinite(result.iterate_khat_max) && result.iterate_khat_max > 1.0;

  if (!rhat_converged || tail_failed) {
    result.rule_fired = rhat_converged ? RuleFired::tail_guard : RuleFired::max_iterations;
    result.warned_nonconvergence = true;
    driver.finalize_from_store(result, history);
    driver.finalize_common(result);
    return result;
  }
  history = diagnostics::IterateChains(1, 1);  // release phase-1 history

  // Phase 2: keep iterating; every window, test MCSE and ESS over the whole
  // post-convergence history.
  const std::int64_t t0 = result.t_converged;
  diagnostics::IterateChains post(config.num_chains, driver.flat_dim, t0 + 1);
  bool mcse_fired = false;
  int starved_component = -1;  // last argmin ESS; re-tested before full sweeps
  while (driver.now < config.t_max) {
    const std::int64_t target = std::min<std::int64_t>(
        config.t_max, t0 + ((driver.now - t0) / window + 1) * window);
    if (!driver.advance_all(target, workers, &post)) {
      break;
    }
    if ((driver.now - t0) % window == 0) {
      const std::int64_t n = driver.now - t0;
      if (!config.use_median_ess && starved_component >= 0 &&
          diagnostics::ess_component(post, n, starved_component) <= config.ess_cutoff) {
        continue;  // the minimum cannot clear the cutoff either
      }
      const diagnostics::EssMcse stats = diagnostics::ess_mcse(post, n);
      const double mcse_summary = median_of(stats.mcse);
      double ess_summary = 0.0;
      if (config.use_median_ess) {
        ess_summary = median_of(stats.ess);
      } else {
        Eigen::Index argmin = 0;
        ess_summary = stats.ess.minCoeff(&argmin);
        starved_component = static_cast<int>(argmin);
      }
      if (mcse_summary < config.mcse_cutoff && ess_summary > config.ess_cutoff) {
        mcse_fired = true;
        break;
      }
    }
  }

  if (driver.diverged) {
    result.rule_fired = RuleFired::diverged;
    result.warned_nonconvergence = true;
    result.divergence_message = driver.divergence_message;
    if (post.size() >= 4) {
      result.lambda_bar = iterate_average(post, family, model.dim());
      result.averaging_start = t0 + 1;
      result.averaging_count = post.size();
    } else {
      driver.finalize_from_last_window(result);
    }
    driver.finalize_common(result);
    return result;
  }

  result.rule_fired = mcse_fired ? RuleFired::mcse : RuleFired::max_iterations;
  result.warned_nonconvergence = !mcse_fired;
  const std::int64_t stored = post.size();
  result.lambda_bar = iterate_average(post, family, model.dim());
  result.averaging_start = t0 + 1;
  result.averaging_count = stored;
  const std::int64_t report_window = stored - (stored % 2);
  if (report_window >= 4) {
    result.diagnostics = diagnostics::compute_report(post, report_window);
  }
  driver.finalize_common(result);
  return result;
}

families::VariationalParams iterate_average(const diagnostics::IterateChains& chains,
                                            families::FamilyKind kind, int p) {
  if (chains.size() < 1) {
    throw std::invalid_argument("iterate_average: no iterates stored");
  }
  if (chains.dim() != families::flat_size(kind, p)) {
    throw std::invalid_argument("iterate_average: chain dimension does not match family");
  }
  return families::unflatten(kind, p, chains.mean());
}

bool delbo_should_stop(std::span<const double> elbo_trace, std::int64_t window,
                       double epsilon) {
  if (window < 1) {
    throw std::invalid_argument("delbo_should_stop: window must be positive");
  }
  const auto n = static_cast<std::int64_t>(elbo_trace.size());
  if (n < 2 * window) {
    throw std::invalid_argument("delbo_should_stop: trace shorter than two windows");
  }
  double mean_now = 0.0;
  double mean_prev = 0.0;
  for (std::int64_t i = 0; i < window; ++i) {
    mean_now += elbo_trace[n - 1 - i];
    mean_prev += elbo_trace[n - 1 - window - i];
  }
  mean_now /= static_cast<double>(window);
  mean_prev /= static_cast<double>(window);
  return std::abs(mean_now - mean_prev) / (std::abs(mean_prev) + 1e-12) < epsilon;
}

OuCheckResult ou_theory_check(double alpha, int dim, int num_averaged, int replications,
                              std::uint64_t seed) {
  if (alpha <= 0.0 || dim < 1 || num_averaged < 1 || replications < 1) {
    throw std::invalid_argument("ou_theory_check: all arguments must be positive");
  }
  Rng rng = make_rng(seed);
  double sum_a = 0.0;
  double sum_abar = 0.0;
  Eigen::VectorXd acc(dim);
  for (int r = 0; r < replications; ++r) {
    sum_a += alpha * alpha * draw_standard_normal(rng, dim).squaredNorm();
    acc.setZero();
    for (int t = 0; t < num_averaged; ++t) {
      acc += draw_standard_normal(rng, dim);
    }
    acc *= alpha / num_averaged;
    sum_abar += acc.squaredNorm();
  }
  return {sum_a / replications, sum_abar / replications};
}

}  // namespace workflow
}  // namespace robustvi
