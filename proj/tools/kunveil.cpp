// Apache License, Version 2.0, refer to LICENSE.txt
//
// Command-line front end: estimate transition matrices from subsampled
// observation files, simulate such observations, replicate the benchmark
// experiments, and check supports for identifiability.

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kunveil/estimator.hpp"
#include "kunveil/io.hpp"
#include "kunveil/montecarlo.hpp"
#include "kunveil/parallel.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitUnvisited = 3;
constexpr int kExitIdentifiability = 4;
constexpr int kExitNumerical = 5;

void emit(const std::string& text, const std::string& output_path) {
  if (output_path.empty())
    std::fputs(text.c_str(), stdout);
  else
    kunveil::io::write_text_file(output_path, text);
}

struct EstimateArgs {
  std::string observations;
  std::string support;
  bool two_step = false;
  bool project = false;
  double tol = 1e-10;
  std::string output;
};

int cmd_estimate(const EstimateArgs& args) {
  const kunveil::SupportSet s = kunveil::io::read_support_file(args.support);
  const std::vector<int> y = kunveil::io::read_observations_file(args.observations);
  const kunveil::AffineChart chart = kunveil::build_chart(s);
  const kunveil::EmpiricalKernel kernel = kunveil::empirical_kernel(y, s.n_states());
  const kunveil::EstimateReport report =
      args.two_step ? kunveil::two_step_from_kernel(kernel, chart, args.tol)
                    : kunveil::estimate(kernel.Q_hat, chart, args.tol);
  if (args.project && report.diagnostics.projection_failed)
    throw kunveil::numerical_error(
        "projection failed: an estimated row is entirely nonpositive");
  const kunveil::IdentifiabilityReport ident =
      kunveil::identifiability_rank_check(kernel.Q_hat, chart);
  emit(kunveil::io::estimate_report_json(report, kernel, ident).dump(2) + "\n", args.output);
  if (!ident.identifiable) {
    std::fprintf(stderr,
                 "warning: support not identifiable from the observed kernel "
                 "(rank %lld, expected %lld)\n",
                 static_cast<long long>(ident.rank), static_cast<long long>(ident.expected));
    return kExitIdentifiability;
  }
  return kExitOk;
}

struct SimulateArgs {
  std::string p_file;
  std::string mu = "geometric:0.5";
  int n = 0;
  std::uint64_t seed = 1;
  std::string init = "stationary";
  bool condition = false;
  int max_retries = 1000;
  std::string output;
};

int cmd_simulate(const SimulateArgs& args) {
  const kunveil::StochasticMatrix p(kunveil::io::read_matrix_file(args.p_file));
  const kunveil::GapDistribution mu = kunveil::io::parse_gap_spec(args.mu);
  std::optional<int> init;
  if (args.init != "stationary") {
    char* end = nullptr;
    const long v = std::strtol(args.init.c_str(), &end, 10);
    if (end == args.init.c_str() || *end != '\0' || v < 1 || v > p.n_states())
      throw std::invalid_argument("--init must be a 1-based state index or \"stationary\"");
    init = static_cast<int>(v - 1);
  }
  std::vector<int> states;
  if (args.condition) {
    const kunveil::ConditionedSample sample = kunveil::sample_until_all_states(
        p, mu, args.n, init, args.seed, args.max_retries, /*observe_initial=*/true);
    states = sample.states;
    std::fprintf(stderr, "conditioning retries: %d\n", sample.attempts - 1);
  } else {
    states = kunveil::simulate_subsampled(p, mu, args.n, init, args.seed,
                                          /*observe_initial=*/true);
  }
  emit(kunveil::io::format_observations(states), args.output);
  return kExitOk;
}

struct BenchmarkArgs {
  std::string config;
  int example = 0;
  int reps = 0;
  std::optional<std::uint64_t> seed;
  std::vector<int> sizes;
  std::string format = "csv";
  int threads = 0;
  std::string output;
};

int cmd_benchmark(const BenchmarkArgs& args) {
  std::optional<kunveil::ExperimentConfig> cfg;
  if (!args.config.empty()) {
    cfg = kunveil::io::read_experiment_config(args.config);
  } else {
    cfg = kunveil::builtin_examples()[args.example - 1];
  }
  if (args.reps > 0) cfg->replications = args.reps;
  if (args.seed) cfg->base_seed = *args.seed;
  if (!args.sizes.empty()) cfg->sample_sizes = args.sizes;
  cfg->validate();
  const kunveil::RiskTable table = kunveil::run_experiment(*cfg, args.threads);
  kunveil::TableFormat fmt = kunveil::TableFormat::csv;
  if (args.format == "json") fmt = kunveil::TableFormat::json;
  if (args.format == "text") fmt = kunveil::TableFormat::text;
  emit(kunveil::emit_table(table, fmt), args.output);
  return kExitOk;
}

struct CheckArgs {
  std::string support;
  std::string mu = "geometric:0.5";
  int trials = 100;
  std::uint64_t seed = 1;
  double tol = 1e-8;
};

int cmd_check_identifiability(const CheckArgs& args) {
  const kunveil::SupportSet s = kunveil::io::read_support_file(args.support);
  const kunveil::GapDistribution mu = kunveil::io::parse_gap_spec(args.mu);
  const kunveil::NecessaryConditionsReport nc = kunveil::necessary_conditions_report(s);
  const int n = s.n_states();
  std::printf("states: %d  support size: %d  chart dimension: %d\n", n, s.d(), s.d() - n);
  std::printf("strongly connected: %s\n", nc.strongly_connected ? "yes" : "no");
  if (nc.aperiodic) {
    std::printf("aperiodic: yes\n");
  } else if (nc.strongly_connected) {
    const int period = kunveil::graph_period(s.graph());
    if (period == 2)
      std::printf("aperiodic: no (period 2: bipartite transition structure)\n");
    else
      std::printf("aperiodic: no (period %d)\n", period);
  } else {
    std::printf("aperiodic: no\n");
  }
  std::printf("dimension bound d <= N(N-1): %s\n", nc.dimension_ok ? "yes" : "no");
  std::printf("some diagonal entry absent: %s\n", nc.diagonal_entry_absent ? "yes" : "no");
  std::printf("not a full bipartite pattern: %s\n", nc.not_full_bipartite ? "yes" : "no");
  const double fraction =
      kunveil::randomized_genericity_probe(s, mu, args.trials, args.seed, args.tol);
  std::printf("genericity probe (%s, %d trials): %g\n", mu.to_string().c_str(), args.trials,
              fraction);
  return fraction > 0.5 ? kExitOk : kExitIdentifiability;
}

int cmd_examples() {
  for (const kunveil::ExperimentConfig& cfg : kunveil::builtin_examples()) {
    std::printf("%s: %d states, support size %d, chart dimension %d\n", cfg.name.c_str(),
                cfg.P.n_states(), cfg.support.d(), cfg.support.d() - cfg.P.n_states());
    std::string gaps;
    for (const kunveil::GapDistribution& g : cfg.gaps) {
      if (!gaps.empty()) gaps += ", ";
      gaps += g.to_string();
    }
    std::string sizes;
    for (int v : cfg.sample_sizes) {
      if (!sizes.empty()) sizes += ", ";
      sizes += std::to_string(v);
    }
    std::printf("  gaps: %s\n  sample sizes: %s\n  replications: %d\n", gaps.c_str(),
                sizes.c_str(), cfg.replications);
    if (cfg.init_state)
      std::printf("  initial state: %d (chain is periodic)\n", *cfg.init_state + 1);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transition-matrix estimation for sparsely supported Markov chains "
               "observed at unknown random subsampling times"};
  app.require_subcommand(1);

  EstimateArgs est;
  CLI::App* c_est = app.add_subcommand(
      "estimate", "Estimate the transition matrix from an observation file");
  c_est->add_option("observations", est.observations, "Observation file (1-based states)")
      ->required();
  c_est->add_option("--support", est.support, "Support file (JSON pairs or matrix)")->required();
  c_est->add_flag("--two-step", est.two_step, "Also compute the covariance-weighted estimate");
  c_est->add_flag("--project", est.project,
                  "Require the projection onto stochastic matrices to succeed");
  c_est->add_option("--tol", est.tol, "Normal-matrix admissibility threshold");
  c_est->add_option("--output,-o", est.output, "Write the JSON report here instead of stdout");

  SimulateArgs sim;
  CLI::App* c_sim = app.add_subcommand(
      "simulate", "Sample a subsampled observation sequence from a known chain");
  c_sim->add_option("P", sim.p_file, "Transition matrix file (CSV or JSON)")->required();
  c_sim->add_option("--mu", sim.mu, "Gap distribution, kind:params or pmf:@file");
  c_sim->add_option("-n,--n-obs", sim.n, "Number of observations")
      ->required()
      ->check(CLI::PositiveNumber);
  c_sim->add_option("--seed", sim.seed, "RNG seed");
  c_sim->add_option("--init", sim.init, "Initial state (1-based) or \"stationary\"");
  c_sim->add_flag("--condition-all-states", sim.condition,
                  "Resample until every state appears");
  c_sim->add_option("--max-retries", sim.max_retries, "Conditioning retry budget")
      ->check(CLI::PositiveNumber);
  c_sim->add_option("--output,-o", sim.output, "Write observations here instead of stdout");

  BenchmarkArgs bench;
  CLI::App* c_bench =
      app.add_subcommand("benchmark", "Run a replicated risk experiment and print the table");
  CLI::Option* opt_config =
      c_bench->add_option("--config", bench.config, "Experiment config JSON file");
  c_bench->add_option("--example", bench.example, "Builtin benchmark number")
      ->check(CLI::Range(1, 3))
      ->excludes(opt_config);
  c_bench->add_option("--reps", bench.reps, "Override replication count")
      ->check(CLI::PositiveNumber);
  c_bench->add_option("--seed", bench.seed, "Override base seed");
  c_bench->add_option("--sizes", bench.sizes, "Override sample sizes")->delimiter(',');
  c_bench->add_option("--format", bench.format, "Output format")
      ->check(CLI::IsMember({"csv", "json", "text"}));
  c_bench->add_option("--threads", bench.threads,
                      "Worker threads (default: KERNEL_UNVEIL_THREADS or hardware)");
  c_bench->add_option("--output,-o", bench.output, "Write the table here instead of stdout");

  CheckArgs check;
  CLI::App* c_check = app.add_subcommand(
      "check-identifiability", "Evaluate a support's identifiability conditions");
  c_check->add_option("support", check.support, "Support file (JSON pairs or matrix)")
      ->required();
  c_check->add_option("--mu", check.mu, "Gap distribution used by the probe");
  c_check->add_option("--trials", check.trials, "Probe trials")->check(CLI::PositiveNumber);
  c_check->add_option("--seed", check.seed, "Probe RNG seed");
  c_check->add_option("--tol", check.tol, "Relative rank threshold");

  CLI::App* c_examples =
      app.add_subcommand("examples", "List the builtin benchmark configurations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (app.got_subcommand(c_est)) return cmd_estimate(est);
    if (app.got_subcommand(c_sim)) return cmd_simulate(sim);
    if (app.got_subcommand(c_bench)) {
      if (bench.config.empty() && bench.example == 0)
        throw std::invalid_argument("benchmark needs --config or --example");
      return cmd_benchmark(bench);
    }
    if (app.got_subcommand(c_check)) return cmd_check_identifiability(check);
    if (app.got_subcommand(c_examples)) return cmd_examples();
  } catch (const kunveil::unvisited_state_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUnvisited;
  } catch (const kunveil::retry_exhausted_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUnvisited;
  } catch (const kunveil::numerical_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
  return kExitOk;
}
