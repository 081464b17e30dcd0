#include "fastuplink/tuning.hpp"

#include <cmath>
#include <memory>

#include "fastuplink/error.hpp"

namespace fastuplink {

std::vector<double> default_beta_grid(double lo, double hi, std::size_t points) {
  std::vector<double> grid{0.0};
  if (points == 1) {
    grid.push_back(lo);
    return grid;
  }
  const double step = std::log10(hi / lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    grid.push_back(lo * std::pow(10.0, step * static_cast<double>(i)));
  }
  grid.back() = hi;
  return grid;
}

void BetaSearchConfig::validate() const {
  if (policy != PolicyKind::FuFeedback && policy != PolicyKind::FuLimited && policy != PolicyKind::FuGenie) {
    throw ContractViolation("beta search supports fu-feedback, fu-limited and fu-genie");
  }
  if (replications == 0) throw ContractViolation("beta search needs at least one replication");
  if (horizon == 0) throw ContractViolation("beta search needs a positive horizon");
  if (!(beta_max >= 0.0)) throw ContractViolation("beta_max must be >= 0");
  if (grid.empty()) throw ContractViolation("beta grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0) || grid[i] > beta_max) throw ContractViolation("beta grid must lie in [0, beta_max]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ContractViolation("beta grid must be increasing");
  }
}

std::vector<Trajectory> beta_search_trajectories(const BetaSearchConfig& config, const ModelParams& params) {
  config.validate();
  const RngStream root = RngStream(config.seed).substream("beta-search");
  std::vector<Trajectory> out;
  out.reserve(config.replications);
  for (std::size_t r = 0; r < config.replications; ++r) {
    const RngStream rep = root.substream(r);
    RngStream events = rep.substream("events");
    RngStream activations = rep.substream("activations");
    out.push_back(simulate_trajectory(params, config.horizon, events, activations));
  }
  return out;
}

namespace {

std::unique_ptr<Scheduler> tuned_policy(const BetaSearchConfig& config, const ModelParams& params, double beta) {
  switch (config.policy) {
    case PolicyKind::FuGenie:
      return std::make_unique<GenieScheduler>(params, beta, config.steady);
    case PolicyKind::FuLimited:
      return std::make_unique<FilteringScheduler>(PolicyKind::FuLimited, params, Observation::Kind::Scheduled,
                                                  beta, config.steady);
    default:
      return std::make_unique<FilteringScheduler>(PolicyKind::FuFeedback, params, Observation::Kind::Full, beta,
                                                  config.steady);
  }
}

}  // namespace

BetaEvaluation evaluate_beta(double beta, const BetaSearchConfig& config, const ModelParams& params,
                             std::span<const Trajectory> trajectories) {
  if (!(beta >= 0.0)) throw ContractViolation("beta must be >= 0");
  if (trajectories.empty()) throw ContractViolation("no replication trajectories");
  BetaEvaluation e;
  e.beta = beta;
  for (const auto& traj : trajectories) {
    auto policy = tuned_policy(config, params, beta);
    const MetricsTrace trace = run_policy(*policy, traj);
    e.avg_regret += trace.average_regret();
    e.avg_aoi += trace.time_average_aoi();
  }
  const double reps = static_cast<double>(trajectories.size());
  e.avg_regret /= reps;
  e.avg_aoi /= reps;
  e.cost = cost(e.avg_regret, e.avg_aoi);
  return e;
}

BetaEvaluation evaluate_beta(double beta, const BetaSearchConfig& config, const ModelParams& params) {
  const auto trajectories = beta_search_trajectories(config, params);
  return evaluate_beta(beta, config, params, trajectories);
}

BetaOptimum optimize_beta(const BetaSearchConfig& config, const ModelParams& params) {
  const auto trajectories = beta_search_trajectories(config, params);
  BetaOptimum out;
  std::size_t best = 0;
  for (std::size_t i = 0; i < config.grid.size(); ++i) {
    out.grid.push_back(evaluate_beta(config.grid[i], config, params, trajectories));
    if (out.grid[i].cost < out.grid[best].cost) best = i;
  }
  out.beta = out.grid[best].beta;
  out.cost = out.grid[best].cost;
  out.bracketed = best > 0 && best + 1 < out.grid.size();
  if (!out.bracketed) return out;

  auto consider = [&](const BetaEvaluation& e) {
    if (e.cost < out.cost || (e.cost == out.cost && e.beta < out.beta)) {
      out.beta = e.beta;
      out.cost = e.cost;
    }
  };
  constexpr double kInvPhi = 0.6180339887498949;
  double a = config.grid[best - 1];
  double b = config.grid[best + 1];
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  BetaEvaluation fc = evaluate_beta(c, config, params, trajectories);
  BetaEvaluation fd = evaluate_beta(d, config, params, trajectories);
  consider(fc);
  consider(fd);
  for (std::size_t it = 0; it < config.refine_iterations; ++it) {
    if (fc.cost <= fd.cost) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = evaluate_beta(c, config, params, trajectories);
      consider(fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = evaluate_beta(d, config, params, trajectories);
      consider(fd);
    }
  }
  return out;
}

std::vector<BetaEvaluation> achievable_region(std::span<const double> betas, const BetaSearchConfig& config,
                                              const ModelParams& params) {
  const auto trajectories = beta_search_trajectories(config, params);
  std::vector<BetaEvaluation> out;
  out.reserve(betas.size());
  for (double beta : betas) out.push_back(evaluate_beta(beta, config, params, trajectories));
  return out;
}

}  // namespace fastuplink
