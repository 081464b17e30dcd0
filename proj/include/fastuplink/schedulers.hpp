#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fastuplink/estimation.hpp"
#include "fastuplink/inference.hpp"
#include "fastuplink/metrics.hpp"
#include "fastuplink/model.hpp"
#include "fastuplink/rng.hpp"

namespace fastuplink {

enum class PolicyKind {
  Tdma,
  GrantFree,
  FuGenie,
  FuFeedback,
  FuLimited,
  FuBaseline,
  FuOffline,
  FuOnlineAoi,
};

inline constexpr std::array<PolicyKind, 8> kAllPolicies = {
    PolicyKind::Tdma,       PolicyKind::GrantFree,  PolicyKind::FuGenie,   PolicyKind::FuFeedback,
    PolicyKind::FuLimited,  PolicyKind::FuBaseline, PolicyKind::FuOffline, PolicyKind::FuOnlineAoi,
};

/// "tdma", "gf", "fu-genie", "fu-feedback", "fu-limited", "fu-baseline",
/// "fu-offline", "fu-online-aoi"
std::string_view policy_name(PolicyKind kind);
std::optional<PolicyKind> parse_policy(std::string_view name);

/// How the steady-state weight p_ss of the age term is formed from the events.
enum class SteadyWeight { MeanOn, MaxOn };

double steady_state_weight(const ModelParams& params, SteadyWeight mode = SteadyWeight::MeanOn);

/// I_k = score_k + beta * p_ss * age_k
std::vector<double> priority_index(std::span<const double> scores, std::span<const std::size_t> ages,
                                   double beta, double p_ss);

/// The min(L, K) largest entries; equal values go to the lower device index.
GrantVector top_l(std::span<const double> index, std::size_t n_slots);

/// Common observe -> grant interface. Each slot the harness calls schedule()
/// before the activations are drawn, resolve() to learn which grants carried a
/// transmission, and observe() once the slot is over.
class Scheduler {
 public:
  Scheduler(std::size_t n_devices, std::size_t n_slots);
  virtual ~Scheduler() = default;

  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  virtual PolicyKind kind() const = 0;

  /// Grants for the coming slot.
  virtual GrantVector schedule() = 0;

  /// Devices that transmitted successfully. Index-based policies return the
  /// grants unchanged; grant-free access resolves contention here.
  virtual GrantVector resolve(const GrantVector& grants, const ActivationVector& truth);

  /// True when `resolve` reports successes rather than base-station grants.
  virtual bool contention_based() const { return false; }

  /// Feeds the slot outcome back. `true_state` is consulted only by the genie.
  void observe(const EventStateVector& true_state, const ActivationVector& truth,
               const GrantVector& served);

  std::size_t n_devices() const noexcept { return n_devices_; }
  std::size_t n_slots() const noexcept { return n_slots_; }
  const AgeVector& ages() const noexcept { return ages_; }

 protected:
  virtual void on_observe(const EventStateVector& true_state, const ActivationVector& truth,
                          const GrantVector& served) = 0;

 private:
  std::size_t n_devices_;
  std::size_t n_slots_;
  AgeVector ages_;
};

/// Round-robin: the next L devices in cyclic order.
class TdmaScheduler final : public Scheduler {
 public:
  TdmaScheduler(std::size_t n_devices, std::size_t n_slots);

  PolicyKind kind() const override { return PolicyKind::Tdma; }
  GrantVector schedule() override;
  std::size_t pointer() const noexcept { return pointer_; }

 protected:
  void on_observe(const EventStateVector&, const ActivationVector&, const GrantVector&) override {}

 private:
  std::size_t pointer_ = 0;
};

/// Grant-free random access: each active device picks one of the L slots
/// uniformly; a slot with a single transmitter succeeds, collisions destroy
/// every colliding packet. Draws come from a private stream.
class GrantFreeScheduler final : public Scheduler {
 public:
  GrantFreeScheduler(std::size_t n_devices, std::size_t n_slots, RngStream rng);

  PolicyKind kind() const override { return PolicyKind::GrantFree; }
  GrantVector schedule() override;
  GrantVector resolve(const GrantVector& grants, const ActivationVector& truth) override;
  bool contention_based() const override { return true; }

 protected:
  void on_observe(const EventStateVector&, const ActivationVector&, const GrantVector&) override {}

 private:
  RngStream rng_;
};

/// Base for the fast-uplink policies: rank devices by priority index.
class IndexScheduler : public Scheduler {
 public:
  IndexScheduler(std::size_t n_devices, std::size_t n_slots, double beta, double p_ss);

  GrantVector schedule() final;
  double beta() const noexcept { return beta_; }
  double steady_weight() const noexcept { return p_ss_; }

  /// Activation scores for the coming slot, before age compensation.
  virtual std::vector<double> scores() const = 0;

 protected:
  void set_steady_weight(double p_ss) { p_ss_ = p_ss; }

 private:
  double beta_;
  double p_ss_;
};

/// Perfect knowledge of the event states: scores are the exact one-step
/// activation probabilities from the true current state.
class GenieScheduler final : public IndexScheduler {
 public:
  GenieScheduler(ModelParams params, double beta = 0.0, SteadyWeight mode = SteadyWeight::MeanOn);

  PolicyKind kind() const override { return PolicyKind::FuGenie; }
  std::vector<double> scores() const override;
  const EventStateVector& known_state() const noexcept { return state_; }

 protected:
  void on_observe(const EventStateVector& true_state, const ActivationVector&, const GrantVector&) override;

 private:
  ModelParams params_;
  EventStateVector state_;
};

/// Forward-filtering policy. Full observations give FU-feedback (or
/// FU-offline when `params` are estimates); scheduled-only observations give
/// FU-limited.
class FilteringScheduler final : public IndexScheduler {
 public:
  FilteringScheduler(PolicyKind kind, const ModelParams& params, Observation::Kind observation,
                     double beta = 0.0, SteadyWeight mode = SteadyWeight::MeanOn);

  PolicyKind kind() const override { return kind_; }
  std::vector<double> scores() const override;
  const JointStateDistribution& posterior() const noexcept { return posterior_; }

 protected:
  void on_observe(const EventStateVector&, const ActivationVector& truth, const GrantVector& served) override;

 private:
  PolicyKind kind_;
  ForwardKernel kernel_;
  Observation::Kind observation_;
  JointStateDistribution posterior_;
};

/// Ranks devices once by their stationary activation probability.
class BaselineScheduler final : public IndexScheduler {
 public:
  explicit BaselineScheduler(const ModelParams& params);

  PolicyKind kind() const override { return PolicyKind::FuBaseline; }
  std::vector<double> scores() const override { return scores_; }

 protected:
  void on_observe(const EventStateVector&, const ActivationVector&, const GrantVector&) override {}

 private:
  std::vector<double> scores_;
};

struct OnlineLearningOptions {
  EmOptions em;
  /// Keep only the most recent slots for estimation; 0 keeps the full history.
  /// Filtering over a full window starts from the stationary law of the
  /// current estimate, while EM still treats the window as leaving all-Off.
  std::size_t window = 0;
  /// Start every slot's EM from `init` instead of the previous estimate.
  bool reinitialize = false;
  SteadyWeight steady = SteadyWeight::MeanOn;
};

/// Learns the model while scheduling: after every slot it re-estimates the
/// parameters by EM on the accumulated observations, re-filters the history
/// under the new estimate and ranks devices with age compensation.
class OnlineLearningScheduler final : public IndexScheduler {
 public:
  OnlineLearningScheduler(std::size_t n_events, std::size_t n_devices, std::size_t n_slots, double beta,
                          EstimatedParams init, OnlineLearningOptions options = {});

  PolicyKind kind() const override { return PolicyKind::FuOnlineAoi; }
  std::vector<double> scores() const override;
  const EstimatedParams& estimate() const noexcept { return estimate_; }
  const ObservationTrace& history() const noexcept { return history_; }

 protected:
  void on_observe(const EventStateVector&, const ActivationVector& truth, const GrantVector& served) override;

 private:
  std::size_t n_events_;
  EstimatedParams init_;
  EstimatedParams estimate_;
  OnlineLearningOptions options_;
  ObservationTrace history_;
  ModelParams model_;
  JointStateDistribution posterior_;
};

/// Drives a scheduler over a trajectory and returns its metrics.
MetricsTrace run_policy(Scheduler& scheduler, const Trajectory& traj);

}  // namespace fastuplink
