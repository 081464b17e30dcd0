#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fastuplink/inference.hpp"
#include "fastuplink/model.hpp"
#include "fastuplink/rng.hpp"

namespace fastuplink {

/// Every estimated probability is kept inside [kProbabilityFloor, 1 - kProbabilityFloor].
inline constexpr double kProbabilityFloor = 1e-4;
inline constexpr std::size_t kDefaultEmIterations = 40;

using ObservationTrace = std::vector<Observation>;

struct EstimatedParams {
  std::size_t n_events = 0;
  std::size_t n_devices = 0;
  std::vector<double> eps0_hat;
  std::vector<double> eps1_hat;
  std::vector<double> q_hat;  ///< N x K, row-major
  std::size_t iterations_run = 0;
  bool converged = false;

  double q(std::size_t n, std::size_t k) const { return q_hat[n * n_devices + k]; }

  /// i.i.d. U[0.2, 0.8] starting point.
  static EstimatedParams random_init(std::size_t n_events, std::size_t n_devices, RngStream& rng);
  /// Copies (and clamps) a known model.
  static EstimatedParams from_model(const ModelParams& params);

  ModelParams to_model(std::size_t n_slots) const;
  void clamp();
};

/// Sufficient statistics of one device's noisy-OR likelihood: for each joint
/// state pattern, the (possibly fractional) number of active and inactive slots.
struct PatternCounts {
  std::size_t n_events = 0;
  std::vector<double> active;    ///< indexed by joint state
  std::vector<double> inactive;

  explicit PatternCounts(std::size_t n = 0)
      : n_events(n), active(std::size_t{1} << n, 0.0), inactive(std::size_t{1} << n, 0.0) {}

  double log_likelihood(std::span<const double> q) const;
};

struct QSearchOptions {
  std::size_t restarts = 3;
  double tolerance = 1e-7;   ///< golden-section bracket width
  std::size_t max_sweeps = 200;
  std::uint64_t seed = 0x5eedULL;  ///< restart points are drawn from this stream
};

/// Maximizes the noisy-OR log-likelihood over q in [floor, 1-floor]^N by
/// projected coordinate ascent (golden section per coordinate) with restarts.
/// Coordinates without any supporting slot are set to the floor.
std::vector<double> maximize_noisy_or(const PatternCounts& counts, const QSearchOptions& options = {});

/// ML estimate of device k's activation row given decoded event states.
std::vector<double> estimate_q_ml(const ObservationTrace& trace, std::span<const EventStateVector> states,
                                  std::size_t k, const QSearchOptions& options = {});

struct EpsilonEstimate {
  std::vector<double> eps0;
  std::vector<double> eps1;
};

/// One Baum-Welch M-step for the transition probabilities: expected per-event
/// transition counts over the whole trace (from the all-Off origin) under the
/// current estimates, normalized by expected occupancy. A state with zero
/// expected occupancy keeps its previous estimate.
EpsilonEstimate baum_welch_epsilon(const ObservationTrace& trace, const EstimatedParams& current);

/// log p(A_{1:T}) under `params`, starting from the all-Off state.
double trace_log_likelihood(const ModelParams& params, const ObservationTrace& trace);

/// Per-slot filtering MAP states S_t* under `params`.
std::vector<EventStateVector> decode_filtered_map(const ModelParams& params, const ObservationTrace& trace);

struct EmOptions {
  std::size_t max_iters = kDefaultEmIterations;
  double tolerance = 1e-3;  ///< relative change in every parameter
  /// Weight the q-step with smoothed state posteriors instead of the decoded
  /// MAP sequence. Off by default.
  bool soft_q = false;
  QSearchOptions q_search;
  std::function<void(std::size_t iteration, const EstimatedParams&)> on_iteration;
};

/// Alternates filtered-MAP decoding, a Baum-Welch epsilon update and a
/// per-device q maximization until the cap or until convergence.
EstimatedParams em_iterate(const ObservationTrace& trace, const EstimatedParams& init,
                           const EmOptions& options = {});

ObservationTrace full_observation_trace(const Trajectory& traj);

/// Mean over eval trajectories of |regret(FU-feedback with the true model) -
/// regret(FU-feedback with the estimate)|, cumulative over each trajectory.
double estimation_error(const ModelParams& truth, const EstimatedParams& estimate,
                        std::span<const Trajectory> eval_trajectories);

}  // namespace fastuplink
