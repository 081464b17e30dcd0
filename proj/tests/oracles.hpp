// Reference computations for the tests. Everything here is written directly
// from the model definition and shares no code with the library beyond the
// plain data types.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fastuplink/inference.hpp"
#include "fastuplink/model.hpp"
#include "fastuplink/rng.hpp"

namespace oracle {

using fastuplink::ModelParams;
using fastuplink::Observation;

inline bool bit(std::uint32_t j, std::size_t n) { return ((j >> n) & 1U) != 0; }

inline double transition(const ModelParams& p, std::uint32_t from, std::uint32_t to) {
  double prob = 1.0;
  for (std::size_t n = 0; n < p.n_events; ++n) {
    const bool a = bit(from, n);
    const bool b = bit(to, n);
    if (a) {
      prob *= b ? 1.0 - p.eps0[n] : p.eps0[n];
    } else {
      prob *= b ? p.eps1[n] : 1.0 - p.eps1[n];
    }
  }
  return prob;
}

inline double activation(const ModelParams& p, std::uint32_t j, std::size_t k) {
  double silent = 1.0;
  for (std::size_t n = 0; n < p.n_events; ++n) {
    if (bit(j, n)) silent *= 1.0 - p.q[n * p.n_devices + k];
  }
  return 1.0 - silent;
}

inline double emission(const ModelParams& p, std::uint32_t j, const Observation& obs) {
  double like = 1.0;
  for (std::size_t k = 0; k < p.n_devices; ++k) {
    if (obs.kind == Observation::Kind::Scheduled && !obs.observed_mask[k]) continue;
    const double a = activation(p, j, k);
    like *= obs.activations[k] ? a : 1.0 - a;
  }
  return like;
}

// Sum over all state paths S_1..S_T leaving the all-Off origin, grouped by
// the final state. Returns the normalized filtering posterior of S_T.
inline std::vector<double> path_posterior(const ModelParams& p, const std::vector<Observation>& obs) {
  const std::uint32_t n_states = 1U << p.n_events;
  const std::size_t T = obs.size();
  std::vector<std::vector<double>> emit(T, std::vector<double>(n_states));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::uint32_t j = 0; j < n_states; ++j) emit[t][j] = emission(p, j, obs[t]);
  }
  std::vector<std::vector<double>> trans(n_states, std::vector<double>(n_states));
  for (std::uint32_t a = 0; a < n_states; ++a) {
    for (std::uint32_t b = 0; b < n_states; ++b) trans[a][b] = transition(p, a, b);
  }
  std::vector<double> final_mass(n_states, 0.0);
  // Explicit depth-first walk over paths; no recursion sharing between paths.
  struct Frame {
    std::uint32_t state;
    double weight;
  };
  std::vector<Frame> stack;
  std::vector<std::size_t> depth_of;
  stack.push_back({0, 1.0});
  depth_of.push_back(0);
  while (!stack.empty()) {
    const Frame f = stack.back();
    const std::size_t depth = depth_of.back();
    stack.pop_back();
    depth_of.pop_back();
    if (depth == T) {
      final_mass[f.state] += f.weight;
      continue;
    }
    for (std::uint32_t next = 0; next < n_states; ++next) {
      stack.push_back({next, f.weight * trans[f.state][next] * emit[depth][next]});
      depth_of.push_back(depth + 1);
    }
  }
  double total = 0.0;
  for (double m : final_mass) total += m;
  for (double& m : final_mass) m /= total;
  return final_mass;
}

// P(A_{t+1}^k = 1 | S_t = s) by summing over the next joint state.
inline double one_step_marginal(const ModelParams& p, std::uint32_t s, std::size_t k) {
  const std::uint32_t n_states = 1U << p.n_events;
  double total = 0.0;
  for (std::uint32_t next = 0; next < n_states; ++next) total += transition(p, s, next) * activation(p, next, k);
  return total;
}

inline ModelParams random_params(fastuplink::RngStream& rng, std::size_t n, std::size_t k, std::size_t l = 1) {
  ModelParams p;
  p.n_events = n;
  p.n_devices = k;
  p.n_slots = l;
  for (std::size_t i = 0; i < n; ++i) {
    p.eps0.push_back(rng.uniform(0.05, 0.95));
    p.eps1.push_back(rng.uniform(0.05, 0.95));
  }
  for (std::size_t i = 0; i < n * k; ++i) p.q.push_back(rng.uniform(0.05, 0.95));
  return p;
}

// One-sided sign test: probability of at least `wins` successes out of
// `wins + losses` fair coin flips. Ties are dropped by the caller.
inline double sign_test_p(std::size_t wins, std::size_t losses) {
  const std::size_t n = wins + losses;
  if (n == 0) return 1.0;
  double p = 0.0;
  for (std::size_t i = wins; i <= n; ++i) {
    p += std::exp(std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(i) + 1) -
                  std::lgamma(static_cast<double>(n - i) + 1) - static_cast<double>(n) * std::log(2.0));
  }
  return p;
}

}  // namespace oracle
