// Command-line front end: simulate, tune-beta, estimate, compare.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fastuplink/config.hpp"
#include "fastuplink/error.hpp"
#include "fastuplink/estimation.hpp"
#include "fastuplink/harness.hpp"
#include "fastuplink/tuning.hpp"

namespace fu = fastuplink;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct RunFlags {
  std::string config_path;
  std::string seeds;
  std::string policies;
  std::string beta;
  std::string feedback_beta;
  std::string out;
  std::string format;
  std::size_t horizon = 0;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file (or a run manifest)");
  cmd->add_option("--seeds", flags.seeds, "seed list, e.g. 1,2,5-9");
  cmd->add_option("--policies", flags.policies, "comma separated policy names");
  cmd->add_option("--beta", flags.beta, "age weight of fu-online-aoi: a number or 'optimize'");
  cmd->add_option("--feedback-beta", flags.feedback_beta, "age weight of fu-feedback: a number or 'optimize'");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--format", flags.format, "csv or json");
  cmd->add_option("--horizon", flags.horizon, "slots per run");
}

fu::ExperimentConfig build_config(const RunFlags& flags) {
  fu::ExperimentConfig config = flags.config_path.empty() ? fu::ExperimentConfig{} : fu::load_config(flags.config_path);
  if (!flags.seeds.empty()) config.seeds = fu::parse_seed_list(flags.seeds);
  if (!flags.policies.empty()) config.policies = fu::parse_policy_list(flags.policies);
  if (!flags.beta.empty()) config.beta = fu::parse_beta(flags.beta, "beta");
  if (!flags.feedback_beta.empty()) config.feedback_beta = fu::parse_beta(flags.feedback_beta, "feedback_beta");
  if (!flags.out.empty()) config.out_dir = flags.out;
  if (!flags.format.empty()) config.format = flags.format;
  if (flags.horizon != 0) config.horizon = flags.horizon;
  config.validate();
  return config;
}

int cmd_simulate(const RunFlags& flags) {
  const auto config = build_config(flags);
  const auto result = fu::run_experiment(config);
  const auto files = fu::emit_series(result, config.out_dir);
  std::printf("wrote %zu files under %s\n", files.size(), config.out_dir.c_str());
  return 0;
}

int cmd_compare(const RunFlags& flags) {
  const auto config = build_config(flags);
  if (config.policies.size() < 2) throw fu::ConfigError("policies", "compare needs at least two policies");
  const auto result = fu::run_experiment(config);
  fu::emit_series(result, config.out_dir);
  const auto report = fu::compare_report(result);
  const std::string text = report.to_text();
  std::ofstream(std::filesystem::path(config.out_dir) / "summary.txt") << text;
  std::fputs(text.c_str(), stdout);
  return 0;
}

int cmd_tune(const RunFlags& flags, const std::string& policy, std::size_t replications) {
  const auto config = build_config(flags);
  const auto kind = fu::parse_policy(policy);
  if (!kind) throw fu::ConfigError("policy", "unknown policy '" + policy + "'");

  std::filesystem::create_directories(config.out_dir);
  std::ostringstream grid_csv;
  grid_csv << "seed,beta,avg_regret,avg_aoi,cost\n";
  std::ostringstream best_csv;
  best_csv << "seed,beta_opt,cost,bracketed\n";
  for (auto seed : config.seeds) {
    fu::SeedStreams streams(seed);
    const auto params = config.param_source == "explicit"
                            ? config.explicit_params()
                            : fu::sample_params(streams.params, config.n_events, config.n_devices, config.n_slots);
    fu::BetaSearchConfig search;
    search.policy = *kind;
    search.replications = replications ? replications : config.tune_replications;
    search.horizon = config.horizon;
    search.seed = streams.beta_search_seed;
    search.steady = config.steady;
    search.validate();
    const auto best = fu::optimize_beta(search, params);
    char line[200];
    for (const auto& e : best.grid) {
      std::snprintf(line, sizeof line, "%llu,%.9g,%.9g,%.9g,%.9g\n", static_cast<unsigned long long>(seed), e.beta,
                    e.avg_regret, e.avg_aoi, e.cost);
      grid_csv << line;
    }
    std::snprintf(line, sizeof line, "%llu,%.9g,%.9g,%d\n", static_cast<unsigned long long>(seed), best.beta,
                  best.cost, best.bracketed ? 1 : 0);
    best_csv << line;
    std::printf("seed %llu: beta* = %.6g (cost %.6g)\n", static_cast<unsigned long long>(seed), best.beta, best.cost);
  }
  const std::filesystem::path dir(config.out_dir);
  std::ofstream(dir / "beta_grid.csv") << grid_csv.str();
  std::ofstream(dir / "beta_opt.csv") << best_csv.str();
  return 0;
}

int cmd_estimate(const std::string& trace_path, std::size_t n_events, std::size_t iters, std::uint64_t seed,
                 const std::string& out, bool soft_q) {
  std::ifstream in(trace_path, std::ios::binary);
  if (!in) throw fu::ConfigError("trace", "cannot read " + trace_path);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto trace = fu::parse_trace_csv(buf.str());
  if (n_events == 0) throw fu::ConfigError("events", "must be at least 1");

  fu::RngStream rng = fu::RngStream(seed).substream("em-init");
  const auto init = fu::EstimatedParams::random_init(n_events, trace.front().n_devices(), rng);
  fu::EmOptions options;
  options.max_iters = iters;
  options.soft_q = soft_q;
  const auto estimate = fu::em_iterate(trace, init, options);
  const std::string json = fu::estimate_json(estimate);
  if (out.empty() || out == "-") {
    std::fputs(json.c_str(), stdout);
  } else {
    std::ofstream file(out, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open " + out + " for writing");
    file << json;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fast-uplink grant scheduling simulator"};
  app.require_subcommand(1);

  RunFlags simulate_flags;
  auto* simulate = app.add_subcommand("simulate", "run policies over seeds and write per-slot series");
  add_run_flags(simulate, simulate_flags);

  RunFlags compare_flags;
  auto* compare = app.add_subcommand("compare", "run policies and print the comparison table");
  add_run_flags(compare, compare_flags);

  RunFlags tune_flags;
  std::string tune_policy = "fu-feedback";
  std::size_t tune_reps = 0;
  auto* tune = app.add_subcommand("tune-beta", "grid plus golden-section search for the age weight");
  add_run_flags(tune, tune_flags);
  tune->add_option("--policy", tune_policy, "fu-feedback, fu-limited or fu-genie");
  tune->add_option("--replications", tune_reps, "trajectories per candidate");

  std::string trace_path;
  std::size_t est_events = fu::kDefaultEvents;
  std::size_t est_iters = fu::kDefaultEmIterations;
  std::uint64_t est_seed = 1;
  std::string est_out;
  bool est_soft_q = false;
  auto* estimate = app.add_subcommand("estimate", "offline EM on an activation trace");
  estimate->add_option("--trace", trace_path, "trace CSV (t,activations,mask)")->required();
  estimate->add_option("--events", est_events, "number of hidden events");
  estimate->add_option("--iters", est_iters, "EM iteration cap");
  estimate->add_option("--seed", est_seed, "initialisation seed");
  estimate->add_option("--out", est_out, "output JSON path (stdout if omitted)");
  estimate->add_flag("--soft-q", est_soft_q, "use posterior-weighted counts in the q-step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(simulate_flags);
    if (*compare) return cmd_compare(compare_flags);
    if (*tune) return cmd_tune(tune_flags, tune_policy, tune_reps);
    if (*estimate) return cmd_estimate(trace_path, est_events, est_iters, est_seed, est_out, est_soft_q);
  } catch (const fu::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const fu::ContractViolation& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
