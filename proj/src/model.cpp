#include "fastuplink/model.hpp"

#include <string>

#include "fastuplink/error.hpp"

namespace fastuplink {

namespace {

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ContractViolation(std::string(what) + " must lie in [0,1], got " + std::to_string(p));
  }
}

void check_state(const ModelParams& params, const EventStateVector& s) {
  if (s.size() != params.n_events) {
    throw ContractViolation("event state has length " + std::to_string(s.size()) +
                            ", expected " + std::to_string(params.n_events));
  }
}

void check_device(const ModelParams& params, std::size_t k) {
  if (k >= params.n_devices) {
    throw ContractViolation("device index " + std::to_string(k) + " out of range");
  }
}

}  // namespace

std::uint32_t joint_index(const EventStateVector& s) {
  std::uint32_t j = 0;
  for (std::size_t n = 0; n < s.size(); ++n) {
    if (s[n]) j |= (1u << n);
  }
  return j;
}

EventStateVector state_from_index(std::uint32_t index, std::size_t n_events) {
  EventStateVector s(n_events);
  for (std::size_t n = 0; n < n_events; ++n) s.set(n, (index >> n) & 1u);
  return s;
}

void ModelParams::validate() const {
  if (n_events == 0 || n_devices == 0 || n_slots == 0) {
    throw ContractViolation("model dimensions must be positive");
  }
  if (n_slots > n_devices) throw ContractViolation("n_slots must not exceed n_devices");
  if (eps0.size() != n_events || eps1.size() != n_events) {
    throw ContractViolation("eps0/eps1 must have one entry per event");
  }
  if (q.size() != n_events * n_devices) {
    throw ContractViolation("q must be an n_events x n_devices matrix");
  }
  for (double p : eps0) check_probability(p, "eps0");
  for (double p : eps1) check_probability(p, "eps1");
  for (double p : q) check_probability(p, "q");
}

void ModelParams::require_steady_state() const {
  for (std::size_t n = 0; n < n_events; ++n) {
    if (!(eps0[n] + eps1[n] > 0.0)) {
      throw UndefinedSteadyState("event " + std::to_string(n) +
                                 " has eps0 + eps1 = 0; steady state undefined");
    }
  }
}

EventStateVector step_events(const ModelParams& params, const EventStateVector& s, RngStream& rng) {
  check_state(params, s);
  EventStateVector next(params.n_events);
  for (std::size_t n = 0; n < params.n_events; ++n) {
    const double u = rng.uniform();
    next.set(n, s[n] ? !(u < params.eps0[n]) : (u < params.eps1[n]));
  }
  return next;
}

double activation_prob_given_state(const ModelParams& params, const EventStateVector& s,
                                   std::size_t k) {
  check_state(params, s);
  check_device(params, k);
  double idle = 1.0;
  for (std::size_t n = 0; n < params.n_events; ++n) {
    if (s[n]) idle *= 1.0 - params.activation(n, k);
  }
  return 1.0 - idle;
}

ActivationVector sample_activations(const ModelParams& params, const EventStateVector& s,
                                    RngStream& rng) {
  check_state(params, s);
  ActivationVector a(params.n_devices);
  for (std::size_t k = 0; k < params.n_devices; ++k) {
    // One draw per device regardless of state keeps streams aligned across runs.
    const double u = rng.uniform();
    a.set(k, u < activation_prob_given_state(params, s, k));
  }
  return a;
}

double next_step_activation_prob(const ModelParams& params, const EventStateVector& s,
                                 std::size_t k) {
  check_state(params, s);
  check_device(params, k);
  double idle = 1.0;
  for (std::size_t n = 0; n < params.n_events; ++n) {
    const double miss = 1.0 - params.activation(n, k);
    idle *= s[n] ? params.eps0[n] + (1.0 - params.eps0[n]) * miss
                 : 1.0 - params.eps1[n] + params.eps1[n] * miss;
  }
  return 1.0 - idle;
}

double steady_state_prob(const ModelParams& params, std::size_t n, bool on) {
  if (n >= params.n_events) throw ContractViolation("event index out of range");
  const double total = params.eps0[n] + params.eps1[n];
  if (!(total > 0.0)) {
    throw UndefinedSteadyState("event " + std::to_string(n) + " has eps0 + eps1 = 0");
  }
  return (on ? params.eps1[n] : params.eps0[n]) / total;
}

double steady_state_activation_prob(const ModelParams& params, std::size_t k) {
  check_device(params, k);
  params.require_steady_state();
  const std::uint32_t n_states = 1u << params.n_events;
  double idle = 0.0;
  for (std::uint32_t j = 0; j < n_states; ++j) {
    double term = 1.0;
    for (std::size_t n = 0; n < params.n_events; ++n) {
      const bool on = (j >> n) & 1u;
      term *= steady_state_prob(params, n, on);
      if (on) term *= 1.0 - params.activation(n, k);
    }
    idle += term;
  }
  return 1.0 - idle;
}

ModelParams sample_params(RngStream& rng, std::size_t n_events, std::size_t n_devices,
                          std::size_t n_slots) {
  ModelParams p;
  p.n_events = n_events;
  p.n_devices = n_devices;
  p.n_slots = n_slots;
  p.eps0.resize(n_events);
  p.eps1.resize(n_events);
  for (std::size_t n = 0; n < n_events; ++n) {
    p.eps0[n] = rng.uniform(0.0, 0.5);
    p.eps1[n] = rng.uniform(0.0, 0.5);
  }
  p.q.resize(n_events * n_devices);
  for (double& v : p.q) v = rng.uniform();
  p.validate();
  return p;
}

Trajectory simulate_trajectory(const ModelParams& params, std::size_t horizon,
                               RngStream& event_rng, RngStream& activation_rng) {
  params.validate();
  Trajectory traj;
  traj.events.reserve(horizon);
  traj.activations.reserve(horizon);
  EventStateVector s(params.n_events);  // S_0: all Off
  for (std::size_t t = 0; t < horizon; ++t) {
    s = step_events(params, s, event_rng);
    traj.activations.push_back(sample_activations(params, s, activation_rng));
    traj.events.push_back(s);
  }
  return traj;
}

}  // namespace fastuplink
