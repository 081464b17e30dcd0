#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "fastuplink/rng.hpp"

namespace fastuplink {

/// Fixed-length bit vector. The tag keeps event states, activations and
/// grants from being mixed up.
template <typename Tag>
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t n, bool value = false) : bits_(n, value ? 1 : 0) {}
  BitVector(std::initializer_list<int> bits) {
    bits_.reserve(bits.size());
    for (int b : bits) bits_.push_back(b != 0 ? 1 : 0);
  }

  std::size_t size() const noexcept { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool value = true) { bits_[i] = value ? 1 : 0; }

  std::size_t count() const noexcept {
    std::size_t c = 0;
    for (auto b : bits_) c += b;
    return c;
  }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  bool operator==(const BitVector&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

using EventStateVector = BitVector<struct EventStateTag>;
using ActivationVector = BitVector<struct ActivationTag>;
using GrantVector = BitVector<struct GrantTag>;

/// Joint index <-> event state. Bit n of the index is the state of event n.
std::uint32_t joint_index(const EventStateVector& s);
EventStateVector state_from_index(std::uint32_t index, std::size_t n_events);

/// Generative model: N two-state Markov events driving K devices through a
/// noisy-OR activation law, with L uplink slots per time step.
struct ModelParams {
  std::size_t n_events = 0;
  std::size_t n_devices = 0;
  std::size_t n_slots = 0;
  std::vector<double> eps0;  ///< P(On -> Off), per event
  std::vector<double> eps1;  ///< P(Off -> On), per event
  std::vector<double> q;     ///< N x K activation probabilities, row-major

  double activation(std::size_t n, std::size_t k) const { return q[n * n_devices + k]; }

  /// Throws ContractViolation on bad dimensions or probabilities outside [0,1].
  void validate() const;
  /// Throws UndefinedSteadyState if any event has eps0 + eps1 == 0.
  void require_steady_state() const;
};

inline constexpr std::size_t kDefaultEvents = 5;
inline constexpr std::size_t kDefaultDevices = 50;
inline constexpr std::size_t kDefaultSlots = 10;

EventStateVector step_events(const ModelParams& params, const EventStateVector& s, RngStream& rng);

/// 1 - prod_n (1 - q_nk)^{s_n}
double activation_prob_given_state(const ModelParams& params, const EventStateVector& s,
                                   std::size_t k);

ActivationVector sample_activations(const ModelParams& params, const EventStateVector& s,
                                    RngStream& rng);

/// P(A_{t+1}^k = 1 | S_t = s), marginalizing the next event transition.
double next_step_activation_prob(const ModelParams& params, const EventStateVector& s,
                                 std::size_t k);

double steady_state_prob(const ModelParams& params, std::size_t n, bool on);

/// Stationary marginal activation probability of device k, evaluated as the
/// sum over joint states weighted by the product of per-event steady states.
double steady_state_activation_prob(const ModelParams& params, std::size_t k);

/// eps0, eps1 ~ U[0, 0.5]; q ~ U[0, 1].
ModelParams sample_params(RngStream& rng, std::size_t n_events = kDefaultEvents,
                          std::size_t n_devices = kDefaultDevices,
                          std::size_t n_slots = kDefaultSlots);

/// One realization of the hidden events and the device activations.
struct Trajectory {
  std::vector<EventStateVector> events;       ///< S_1..S_T
  std::vector<ActivationVector> activations;  ///< A_1..A_T

  std::size_t length() const noexcept { return events.size(); }
};

/// Runs the chain from the all-Off state S_0 for `horizon` slots. Event
/// transitions and activation draws consume separate streams.
Trajectory simulate_trajectory(const ModelParams& params, std::size_t horizon,
                               RngStream& event_rng, RngStream& activation_rng);

}  // namespace fastuplink
