#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fastuplink/model.hpp"
#include "fastuplink/schedulers.hpp"

namespace fastuplink {

/// {0} followed by `points` log-spaced values on [lo, hi].
std::vector<double> default_beta_grid(double lo = 1e-4, double hi = 1.0, std::size_t points = 20);

struct BetaSearchConfig {
  /// Policy under tuning: fu-feedback, fu-limited or fu-genie.
  PolicyKind policy = PolicyKind::FuFeedback;
  std::vector<double> grid = default_beta_grid();
  double beta_max = 1.0;
  std::size_t replications = 20;
  std::size_t horizon = 100;
  std::uint64_t seed = 0;
  SteadyWeight steady = SteadyWeight::MeanOn;
  std::size_t refine_iterations = 20;

  void validate() const;
};

struct BetaEvaluation {
  double beta = 0.0;
  double avg_regret = 0.0;  ///< per slot, averaged over replications
  double avg_aoi = 0.0;     ///< time-averaged mean age, averaged over replications
  double cost = 0.0;
};

/// Replication trajectories for a search. Every candidate beta replays the
/// same set (common random numbers).
std::vector<Trajectory> beta_search_trajectories(const BetaSearchConfig& config, const ModelParams& params);

BetaEvaluation evaluate_beta(double beta, const BetaSearchConfig& config, const ModelParams& params);
BetaEvaluation evaluate_beta(double beta, const BetaSearchConfig& config, const ModelParams& params,
                             std::span<const Trajectory> trajectories);

struct BetaOptimum {
  double beta = 0.0;
  double cost = 0.0;
  /// False when the grid minimum had no bracketing neighbours; beta is then
  /// the grid argmin without refinement.
  bool bracketed = false;
  std::vector<BetaEvaluation> grid;
};

/// Grid scan, then golden-section refinement inside the bracket around the
/// grid minimum. Never returns a cost above the grid minimum.
BetaOptimum optimize_beta(const BetaSearchConfig& config, const ModelParams& params);

std::vector<BetaEvaluation> achievable_region(std::span<const double> betas, const BetaSearchConfig& config,
                                              const ModelParams& params);

}  // namespace fastuplink
