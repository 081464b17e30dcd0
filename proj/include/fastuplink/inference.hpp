#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fastuplink/model.hpp"

namespace fastuplink {

/// Largest number of events for which the joint state space is enumerated.
inline constexpr std::size_t kMaxJointEvents = 16;
/// Largest device count for which most_likely_pattern enumerates all patterns.
inline constexpr std::size_t kMaxExactPatternDevices = 20;

/// What the base station saw in one slot. Under `Scheduled` only devices in
/// the mask contribute to likelihoods; the remaining activation bits are ignored.
struct Observation {
  enum class Kind { Full, Scheduled };

  Kind kind = Kind::Full;
  ActivationVector activations;
  GrantVector observed_mask;

  static Observation full(ActivationVector a);
  static Observation scheduled(ActivationVector a, GrantVector mask);

  std::size_t n_devices() const noexcept { return activations.size(); }
  bool observed(std::size_t k) const { return observed_mask[k]; }
};

/// Forward weights over the 2^N joint event states, normalized to sum 1.
/// The running log normalizer equals log p(A_{1:t}) when the distribution
/// started from a normalized prior.
class JointStateDistribution {
 public:
  JointStateDistribution() = default;

  static JointStateDistribution point_mass(std::size_t n_events, std::uint32_t index);
  static JointStateDistribution uniform(std::size_t n_events);
  /// Takes arbitrary nonnegative weights, not all zero, and normalizes them.
  static JointStateDistribution from_weights(std::size_t n_events, std::vector<double> weights);

  std::size_t n_events() const noexcept { return n_events_; }
  std::size_t n_states() const noexcept { return weights_.size(); }
  std::span<const double> weights() const noexcept { return weights_; }
  double weight(std::uint32_t j) const { return weights_[j]; }
  double log_likelihood() const noexcept { return log_likelihood_; }

 private:
  friend class ForwardKernel;

  std::size_t n_events_ = 0;
  std::vector<double> weights_;
  double log_likelihood_ = 0.0;
};

/// Product of the per-event stationary laws; requires eps0 + eps1 > 0 for
/// every event.
JointStateDistribution stationary_distribution(const ModelParams& params);

/// Model-derived tables for repeated filtering under fixed parameters:
/// per-state log activation probabilities and the factorized event kernel.
class ForwardKernel {
 public:
  explicit ForwardKernel(const ModelParams& params);

  const ModelParams& params() const noexcept { return params_; }
  std::size_t n_states() const noexcept { return n_states_; }

  /// Multiplies the weights by the transition kernel, in place.
  void propagate(std::span<double> weights) const;

  /// log p(A | S = j), with unobserved devices marginalized out.
  double log_emission(std::uint32_t j, const Observation& obs) const;

  /// One forward step: propagate, weight by the emission, renormalize.
  JointStateDistribution update(const JointStateDistribution& prior, const Observation& obs) const;

  /// P(S_{t+1}^n = b' | S_t^n = b)
  double transition(std::size_t n, bool from, bool to) const;

  double activation(std::uint32_t j, std::size_t k) const {
    return activation_[static_cast<std::size_t>(j) * params_.n_devices + k];
  }

 private:
  ModelParams params_;
  std::size_t n_states_;
  std::vector<double> activation_;  // [state][device]
  std::vector<double> log_on_;
  std::vector<double> log_off_;
};

double emission_likelihood(const ModelParams& params, const EventStateVector& s,
                           const Observation& obs);

JointStateDistribution forward_update(const ModelParams& params, const JointStateDistribution& prior,
                                      const Observation& obs);

/// Argmax of the weights; ties resolve to the lowest joint index.
EventStateVector most_likely_state(const JointStateDistribution& dist);
std::uint32_t most_likely_index(const JointStateDistribution& dist);

struct PredictionResult {
  std::vector<double> per_device;
  EventStateVector map_state;
};

/// Noisy-OR activation scores for the next slot, assuming the events sit in
/// their MAP state: score_k = 1 - prod_n (1 - P_on^n q_nk), where P_on^n is the
/// probability that event n is On next slot given its MAP bit.
PredictionResult predict_activation_scores(const ModelParams& params,
                                           const JointStateDistribution& dist);

/// Most likely activation pattern b of the next slot, scoring
/// sum_s p(s) prod_k P(A^k = b_k | S_t = s) with the one-step marginals of
/// each device. Exhaustive for K <= kMaxExactPatternDevices; beyond that each
/// device is thresholded on its predictive marginal, which is an approximation.
ActivationVector most_likely_pattern(const ModelParams& params, const JointStateDistribution& dist);

}  // namespace fastuplink
