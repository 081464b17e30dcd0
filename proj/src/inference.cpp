#include "fastuplink/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fastuplink/error.hpp"

namespace fastuplink {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_events(std::size_t n_events) {
  if (n_events == 0) throw ContractViolation("joint distribution needs at least one event");
  if (n_events > kMaxJointEvents) {
    throw CapabilityError("joint filtering supports at most " + std::to_string(kMaxJointEvents) +
                          " events, got " + std::to_string(n_events));
  }
}

void check_observation(const ModelParams& params, const Observation& obs) {
  if (obs.activations.size() != params.n_devices || obs.observed_mask.size() != params.n_devices) {
    throw ContractViolation("observation length does not match the device count");
  }
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

}  // namespace

Observation Observation::full(ActivationVector a) {
  Observation obs;
  obs.kind = Kind::Full;
  obs.observed_mask = GrantVector(a.size(), true);
  obs.activations = std::move(a);
  return obs;
}

Observation Observation::scheduled(ActivationVector a, GrantVector mask) {
  if (a.size() != mask.size()) throw ContractViolation("mask length does not match activations");
  Observation obs;
  obs.kind = Kind::Scheduled;
  obs.activations = std::move(a);
  obs.observed_mask = std::move(mask);
  return obs;
}

JointStateDistribution JointStateDistribution::point_mass(std::size_t n_events, std::uint32_t index) {
  check_events(n_events);
  JointStateDistribution d;
  d.n_events_ = n_events;
  d.weights_.assign(std::size_t{1} << n_events, 0.0);
  if (index >= d.weights_.size()) throw ContractViolation("joint index out of range");
  d.weights_[index] = 1.0;
  return d;
}

JointStateDistribution JointStateDistribution::uniform(std::size_t n_events) {
  check_events(n_events);
  JointStateDistribution d;
  d.n_events_ = n_events;
  const std::size_t n_states = std::size_t{1} << n_events;
  d.weights_.assign(n_states, 1.0 / static_cast<double>(n_states));
  return d;
}

JointStateDistribution JointStateDistribution::from_weights(std::size_t n_events,
                                                            std::vector<double> weights) {
  check_events(n_events);
  if (weights.size() != (std::size_t{1} << n_events)) {
    throw ContractViolation("weight vector must have 2^N entries");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractViolation("weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw ContractViolation("weights must not be all zero");
  for (double& w : weights) w /= total;
  JointStateDistribution d;
  d.n_events_ = n_events;
  d.weights_ = std::move(weights);
  return d;
}

JointStateDistribution stationary_distribution(const ModelParams& params) {
  params.require_steady_state();
  const std::size_t n_states = std::size_t{1} << params.n_events;
  std::vector<double> weights(n_states, 1.0);
  for (std::size_t j = 0; j < n_states; ++j) {
    for (std::size_t n = 0; n < params.n_events; ++n) {
      weights[j] *= steady_state_prob(params, n, ((j >> n) & 1U) != 0);
    }
  }
  return JointStateDistribution::from_weights(params.n_events, std::move(weights));
}

ForwardKernel::ForwardKernel(const ModelParams& params) : params_(params) {
  params_.validate();
  check_events(params_.n_events);
  n_states_ = std::size_t{1} << params_.n_events;
  const std::size_t K = params_.n_devices;
  activation_.resize(n_states_ * K);
  log_on_.resize(n_states_ * K);
  log_off_.resize(n_states_ * K);
  for (std::uint32_t j = 0; j < n_states_; ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      double idle = 1.0;
      for (std::size_t n = 0; n < params_.n_events; ++n) {
        if ((j >> n) & 1u) idle *= 1.0 - params_.activation(n, k);
      }
      const std::size_t at = j * K + k;
      activation_[at] = 1.0 - idle;
      log_on_[at] = safe_log(1.0 - idle);
      log_off_[at] = safe_log(idle);
    }
  }
}

double ForwardKernel::transition(std::size_t n, bool from, bool to) const {
  if (from) return to ? 1.0 - params_.eps0[n] : params_.eps0[n];
  return to ? params_.eps1[n] : 1.0 - params_.eps1[n];
}

void ForwardKernel::propagate(std::span<double> w) const {
  for (std::size_t n = 0; n < params_.n_events; ++n) {
    const std::uint32_t bit = 1u << n;
    const double stay_off = 1.0 - params_.eps1[n];
    const double turn_on = params_.eps1[n];
    const double turn_off = params_.eps0[n];
    const double stay_on = 1.0 - params_.eps0[n];
    for (std::uint32_t j = 0; j < n_states_; ++j) {
      if (j & bit) continue;
      const double off = w[j];
      const double on = w[j | bit];
      w[j] = stay_off * off + turn_off * on;
      w[j | bit] = turn_on * off + stay_on * on;
    }
  }
}

double ForwardKernel::log_emission(std::uint32_t j, const Observation& obs) const {
  const std::size_t K = params_.n_devices;
  const double* on = &log_on_[j * K];
  const double* off = &log_off_[j * K];
  double total = 0.0;
  const auto act = obs.activations.bits();
  const auto mask = obs.observed_mask.bits();
  for (std::size_t k = 0; k < K; ++k) {
    if (!mask[k]) continue;
    total += act[k] ? on[k] : off[k];
  }
  return total;
}

JointStateDistribution ForwardKernel::update(const JointStateDistribution& prior,
                                             const Observation& obs) const {
  if (prior.n_events() != params_.n_events) {
    throw ContractViolation("prior dimension does not match the model");
  }
  check_observation(params_, obs);
  std::vector<double> w(prior.weights().begin(), prior.weights().end());
  propagate(w);
  std::vector<double> logw(n_states_);
  double peak = kNegInf;
  for (std::uint32_t j = 0; j < n_states_; ++j) {
    logw[j] = w[j] > 0.0 ? std::log(w[j]) + log_emission(j, obs) : kNegInf;
    peak = std::max(peak, logw[j]);
  }
  if (peak == kNegInf) {
    throw InconsistentObservation("observation has zero likelihood under every joint state");
  }
  double total = 0.0;
  for (std::uint32_t j = 0; j < n_states_; ++j) {
    w[j] = logw[j] == kNegInf ? 0.0 : std::exp(logw[j] - peak);
    total += w[j];
  }
  for (double& x : w) x /= total;
  JointStateDistribution post;
  post.n_events_ = params_.n_events;
  post.weights_ = std::move(w);
  post.log_likelihood_ = prior.log_likelihood() + peak + std::log(total);
  return post;
}

double emission_likelihood(const ModelParams& params, const EventStateVector& s,
                           const Observation& obs) {
  check_observation(params, obs);
  double like = 1.0;
  for (std::size_t k = 0; k < params.n_devices; ++k) {
    if (!obs.observed(k)) continue;
    const double p = activation_prob_given_state(params, s, k);
    like *= obs.activations[k] ? p : 1.0 - p;
  }
  return like;
}

JointStateDistribution forward_update(const ModelParams& params, const JointStateDistribution& prior,
                                      const Observation& obs) {
  return ForwardKernel(params).update(prior, obs);
}

std::uint32_t most_likely_index(const JointStateDistribution& dist) {
  const auto w = dist.weights();
  if (w.empty()) throw ContractViolation("empty distribution");
  // max_element returns the first maximum, i.e. the lowest index on ties.
  return static_cast<std::uint32_t>(std::max_element(w.begin(), w.end()) - w.begin());
}

EventStateVector most_likely_state(const JointStateDistribution& dist) {
  return state_from_index(most_likely_index(dist), dist.n_events());
}

PredictionResult predict_activation_scores(const ModelParams& params,
                                           const JointStateDistribution& dist) {
  if (dist.n_events() != params.n_events) {
    throw ContractViolation("distribution dimension does not match the model");
  }
  PredictionResult out;
  out.map_state = most_likely_state(dist);
  std::vector<double> p_on(params.n_events);
  for (std::size_t n = 0; n < params.n_events; ++n) {
    p_on[n] = out.map_state[n] ? 1.0 - params.eps0[n] : params.eps1[n];
  }
  out.per_device.resize(params.n_devices);
  for (std::size_t k = 0; k < params.n_devices; ++k) {
    double idle = 1.0;
    for (std::size_t n = 0; n < params.n_events; ++n) idle *= 1.0 - p_on[n] * params.activation(n, k);
    out.per_device[k] = 1.0 - idle;
  }
  return out;
}

namespace {

struct PatternSearch {
  std::size_t n_states;
  std::size_t n_devices;
  const std::vector<double>* next_active;  // [state][device]
  std::vector<std::uint8_t> current;
  std::vector<std::uint8_t> best;
  double best_value = -1.0;

  // partial[j] = w_j * prod_{k' < k} P(b_k' | j)
  void search(std::size_t k, const std::vector<double>& partial) {
    if (k == n_devices) {
      double value = 0.0;
      for (double x : partial) value += x;
      if (value > best_value) {
        best_value = value;
        best = current;
      }
      return;
    }
    std::vector<double> next(n_states);
    for (int b = 0; b <= 1; ++b) {
      double bound = 0.0;
      for (std::size_t j = 0; j < n_states; ++j) {
        const double p = (*next_active)[j * n_devices + k];
        next[j] = partial[j] * (b ? p : 1.0 - p);
        bound += next[j];
      }
      // The remaining factors are at most 1, so the partial sum bounds any completion.
      if (bound <= best_value) continue;
      current[k] = static_cast<std::uint8_t>(b);
      search(k + 1, next);
    }
    current[k] = 0;
  }
};

}  // namespace

ActivationVector most_likely_pattern(const ModelParams& params, const JointStateDistribution& dist) {
  if (dist.n_events() != params.n_events) {
    throw ContractViolation("distribution dimension does not match the model");
  }
  check_events(params.n_events);
  const std::size_t n_states = dist.n_states();
  const std::size_t K = params.n_devices;
  std::vector<double> next_active(n_states * K);
  for (std::uint32_t j = 0; j < n_states; ++j) {
    const EventStateVector s = state_from_index(j, params.n_events);
    for (std::size_t k = 0; k < K; ++k) next_active[j * K + k] = next_step_activation_prob(params, s, k);
  }

  ActivationVector pattern(K);
  if (K > kMaxExactPatternDevices) {
    for (std::size_t k = 0; k < K; ++k) {
      double p = 0.0;
      for (std::uint32_t j = 0; j < n_states; ++j) p += dist.weight(j) * next_active[j * K + k];
      pattern.set(k, p > 0.5);
    }
    return pattern;
  }

  PatternSearch search{n_states, K, &next_active, std::vector<std::uint8_t>(K, 0), {}, -1.0};
  search.search(0, std::vector<double>(dist.weights().begin(), dist.weights().end()));
  for (std::size_t k = 0; k < K; ++k) pattern.set(k, search.best[k] != 0);
  return pattern;
}

}  // namespace fastuplink
