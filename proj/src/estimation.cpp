#include "fastuplink/estimation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "fastuplink/error.hpp"
#include "fastuplink/schedulers.hpp"

namespace fastuplink {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLo = kProbabilityFloor;
constexpr double kHi = 1.0 - kProbabilityFloor;
// Expected counts below this are treated as no data.
constexpr double kNoSupport = 1e-12;

double clamp_prob(double p) { return std::clamp(p, kLo, kHi); }

void check_trace(const ObservationTrace& trace) {
  if (trace.empty()) throw InsufficientData("observation trace is empty");
  const std::size_t K = trace.front().n_devices();
  for (const auto& obs : trace) {
    if (obs.n_devices() != K || obs.observed_mask.size() != K) {
      throw ContractViolation("observation trace has inconsistent device counts");
    }
  }
}

// Per-coordinate view of the likelihood: for every pattern containing event
// n, the product of (1 - q_m) over the other On events of that pattern.
struct CoordinateTerm {
  double active;
  double inactive;
  double rest_idle;
};

double coordinate_objective(const std::vector<CoordinateTerm>& terms, double x) {
  const double log_miss = std::log1p(-x);
  double f = 0.0;
  for (const auto& t : terms) {
    if (t.active > 0.0) {
      const double idle = t.rest_idle * (1.0 - x);
      f += idle < 1.0 ? t.active * std::log1p(-idle) : kNegInf;
    }
    if (t.inactive > 0.0) f += t.inactive * (log_miss + std::log(t.rest_idle));
  }
  return f;
}

double golden_section_max(const std::vector<CoordinateTerm>& terms, double tolerance) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = kLo;
  double b = kHi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = coordinate_objective(terms, c);
  double fd = coordinate_objective(terms, d);
  while (b - a > tolerance) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = coordinate_objective(terms, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = coordinate_objective(terms, d);
    }
  }
  double best = 0.5 * (a + b);
  double f_best = coordinate_objective(terms, best);
  // The maximizer often sits on the box boundary.
  for (double edge : {kLo, kHi}) {
    const double fe = coordinate_objective(terms, edge);
    if (fe > f_best) {
      best = edge;
      f_best = fe;
    }
  }
  return best;
}

std::vector<double> coordinate_ascent(const PatternCounts& counts, std::vector<double> q,
                                      const std::vector<bool>& supported, const QSearchOptions& options) {
  const std::size_t N = counts.n_events;
  const std::uint32_t n_states = 1u << N;
  std::vector<CoordinateTerm> terms;
  for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
    double moved = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      if (!supported[n]) continue;
      terms.clear();
      for (std::uint32_t j = 0; j < n_states; ++j) {
        if (!((j >> n) & 1u)) continue;
        if (counts.active[j] <= 0.0 && counts.inactive[j] <= 0.0) continue;
        double rest = 1.0;
        for (std::size_t m = 0; m < N; ++m) {
          if (m != n && ((j >> m) & 1u)) rest *= 1.0 - q[m];
        }
        terms.push_back({counts.active[j], counts.inactive[j], rest});
      }
      const double next = golden_section_max(terms, options.tolerance);
      moved = std::max(moved, std::abs(next - q[n]));
      q[n] = next;
    }
    if (moved < 10.0 * options.tolerance) break;
  }
  return q;
}

}  // namespace

// --- EstimatedParams ----------------------------------------------------------

EstimatedParams EstimatedParams::random_init(std::size_t n_events, std::size_t n_devices, RngStream& rng) {
  EstimatedParams e;
  e.n_events = n_events;
  e.n_devices = n_devices;
  e.eps0_hat.resize(n_events);
  e.eps1_hat.resize(n_events);
  for (std::size_t n = 0; n < n_events; ++n) {
    e.eps0_hat[n] = rng.uniform(0.2, 0.8);
    e.eps1_hat[n] = rng.uniform(0.2, 0.8);
  }
  e.q_hat.resize(n_events * n_devices);
  for (double& v : e.q_hat) v = rng.uniform(0.2, 0.8);
  return e;
}

EstimatedParams EstimatedParams::from_model(const ModelParams& params) {
  EstimatedParams e;
  e.n_events = params.n_events;
  e.n_devices = params.n_devices;
  e.eps0_hat = params.eps0;
  e.eps1_hat = params.eps1;
  e.q_hat = params.q;
  e.clamp();
  return e;
}

void EstimatedParams::clamp() {
  for (double& v : eps0_hat) v = clamp_prob(v);
  for (double& v : eps1_hat) v = clamp_prob(v);
  for (double& v : q_hat) v = clamp_prob(v);
}

ModelParams EstimatedParams::to_model(std::size_t n_slots) const {
  ModelParams p;
  p.n_events = n_events;
  p.n_devices = n_devices;
  p.n_slots = n_slots;
  p.eps0 = eps0_hat;
  p.eps1 = eps1_hat;
  p.q = q_hat;
  p.validate();
  return p;
}

// --- q step -------------------------------------------------------------------

double PatternCounts::log_likelihood(std::span<const double> q) const {
  const std::uint32_t n_states = 1u << n_events;
  double f = 0.0;
  for (std::uint32_t j = 1; j < n_states; ++j) {
    if (active[j] <= 0.0 && inactive[j] <= 0.0) continue;
    double idle = 1.0;
    for (std::size_t n = 0; n < n_events; ++n) {
      if ((j >> n) & 1u) idle *= 1.0 - q[n];
    }
    if (active[j] > 0.0) f += idle < 1.0 ? active[j] * std::log1p(-idle) : kNegInf;
    if (inactive[j] > 0.0) f += idle > 0.0 ? inactive[j] * std::log(idle) : kNegInf;
  }
  return f;
}

std::vector<double> maximize_noisy_or(const PatternCounts& counts, const QSearchOptions& options) {
  const std::size_t N = counts.n_events;
  const std::uint32_t n_states = 1u << N;
  std::vector<bool> supported(N, false);
  for (std::uint32_t j = 1; j < n_states; ++j) {
    if (counts.active[j] + counts.inactive[j] <= kNoSupport) continue;
    for (std::size_t n = 0; n < N; ++n) {
      if ((j >> n) & 1u) supported[n] = true;
    }
  }

  RngStream rng(options.seed);
  std::vector<double> best(N, kLo);
  double best_f = kNegInf;
  const std::size_t starts = std::max<std::size_t>(options.restarts, 1);
  for (std::size_t r = 0; r < starts; ++r) {
    std::vector<double> q(N, 0.5);
    if (r > 0) {
      for (double& v : q) v = rng.uniform(kLo, kHi);
    }
    for (std::size_t n = 0; n < N; ++n) {
      if (!supported[n]) q[n] = kLo;
    }
    q = coordinate_ascent(counts, std::move(q), supported, options);
    const double f = counts.log_likelihood(q);
    if (r == 0 || f > best_f) {
      best_f = f;
      best = std::move(q);
    }
  }
  return best;
}

namespace {

PatternCounts hard_counts(const ObservationTrace& trace, std::span<const EventStateVector> states,
                          std::size_t n_events, std::size_t k) {
  PatternCounts counts(n_events);
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const auto& obs = trace[t];
    if (!obs.observed(k)) continue;
    const std::uint32_t j = joint_index(states[t]);
    (obs.activations[k] ? counts.active[j] : counts.inactive[j]) += 1.0;
  }
  return counts;
}

}  // namespace

std::vector<double> estimate_q_ml(const ObservationTrace& trace, std::span<const EventStateVector> states,
                                  std::size_t k, const QSearchOptions& options) {
  check_trace(trace);
  if (states.size() != trace.size()) throw ContractViolation("state sequence length differs from the trace");
  if (k >= trace.front().n_devices()) throw ContractViolation("device index out of range");
  const std::size_t N = states.front().size();
  if (N == 0 || N > kMaxJointEvents) throw CapabilityError("unsupported number of events");
  for (const auto& s : states) {
    if (s.size() != N) throw ContractViolation("state sequence has inconsistent lengths");
  }
  return maximize_noisy_or(hard_counts(trace, states, N, k), options);
}

// --- Forward-backward ----------------------------------------------------------

namespace {

struct SmoothingPass {
  std::vector<std::vector<double>> alpha;     // alpha[t], t = 0..T, normalized filtering weights
  std::vector<std::vector<double>> emission;  // emission[t-1] for slot t, scaled by its maximum
  std::vector<std::vector<double>> beta;      // beta[t], t = 0..T, arbitrarily scaled
};

SmoothingPass forward_backward(const ForwardKernel& kernel, const ObservationTrace& trace) {
  const std::size_t T = trace.size();
  const std::size_t S = kernel.n_states();
  SmoothingPass pass;
  pass.alpha.assign(T + 1, std::vector<double>(S, 0.0));
  pass.emission.assign(T, std::vector<double>(S, 0.0));
  pass.beta.assign(T + 1, std::vector<double>(S, 1.0));
  pass.alpha[0][0] = 1.0;

  for (std::size_t t = 1; t <= T; ++t) {
    auto& e = pass.emission[t - 1];
    double peak = kNegInf;
    for (std::uint32_t j = 0; j < S; ++j) {
      e[j] = kernel.log_emission(j, trace[t - 1]);
      peak = std::max(peak, e[j]);
    }
    if (peak == kNegInf) throw InconsistentObservation("slot " + std::to_string(t) + " is impossible");
    for (double& x : e) x = x == kNegInf ? 0.0 : std::exp(x - peak);

    auto& a = pass.alpha[t];
    a = pass.alpha[t - 1];
    kernel.propagate(a);
    double total = 0.0;
    for (std::uint32_t j = 0; j < S; ++j) {
      a[j] *= e[j];
      total += a[j];
    }
    if (!(total > 0.0)) throw InconsistentObservation("slot " + std::to_string(t) + " is impossible");
    for (double& x : a) x /= total;
  }

  const std::size_t N = kernel.params().n_events;
  for (std::size_t t = T; t >= 1; --t) {
    // beta[t-1](i) = sum_j P(j | i) e_t(j) beta[t](j)
    std::vector<double> v(S);
    for (std::uint32_t j = 0; j < S; ++j) v[j] = pass.emission[t - 1][j] * pass.beta[t][j];
    for (std::size_t n = 0; n < N; ++n) {
      const std::uint32_t bit = 1u << n;
      for (std::uint32_t j = 0; j < S; ++j) {
        if (j & bit) continue;
        const double to_off = v[j];
        const double to_on = v[j | bit];
        v[j] = kernel.transition(n, false, false) * to_off + kernel.transition(n, false, true) * to_on;
        v[j | bit] = kernel.transition(n, true, false) * to_off + kernel.transition(n, true, true) * to_on;
      }
    }
    double total = 0.0;
    for (double x : v) total += x;
    if (total > 0.0) {
      for (double& x : v) x /= total;
    }
    pass.beta[t - 1] = std::move(v);
  }
  return pass;
}

// counts[n][from][to], expected number of transitions of event n
using TransitionCounts = std::vector<std::array<std::array<double, 2>, 2>>;

TransitionCounts expected_transitions(const ForwardKernel& kernel, const SmoothingPass& pass) {
  const std::size_t N = kernel.params().n_events;
  const std::size_t S = kernel.n_states();
  const std::size_t T = pass.emission.size();
  TransitionCounts counts(N, {{{0.0, 0.0}, {0.0, 0.0}}});
  std::vector<double> u(S);
  std::vector<double> v(S);
  std::vector<std::array<std::array<double, 2>, 2>> slot(N);
  for (std::size_t t = 1; t <= T; ++t) {
    for (std::uint32_t j = 0; j < S; ++j) u[j] = pass.emission[t - 1][j] * pass.beta[t][j];
    double z = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      // Fold every other event's transition into u; bit n keeps the "to" state.
      v = u;
      for (std::size_t m = 0; m < N; ++m) {
        if (m == n) continue;
        const std::uint32_t bit = 1u << m;
        for (std::uint32_t j = 0; j < S; ++j) {
          if (j & bit) continue;
          const double to_off = v[j];
          const double to_on = v[j | bit];
          v[j] = kernel.transition(m, false, false) * to_off + kernel.transition(m, false, true) * to_on;
          v[j | bit] = kernel.transition(m, true, false) * to_off + kernel.transition(m, true, true) * to_on;
        }
      }
      const std::uint32_t bit = 1u << n;
      slot[n] = {{{0.0, 0.0}, {0.0, 0.0}}};
      for (std::uint32_t i = 0; i < S; ++i) {
        const double a = pass.alpha[t - 1][i];
        if (a == 0.0) continue;
        const bool from = i & bit;
        for (int to = 0; to <= 1; ++to) {
          const std::uint32_t target = to ? (i | bit) : (i & ~bit);
          slot[n][from][to] += a * kernel.transition(n, from, to) * v[target];
        }
      }
      if (n == 0) z = slot[0][0][0] + slot[0][0][1] + slot[0][1][0] + slot[0][1][1];
    }
    if (!(z > 0.0)) continue;
    for (std::size_t n = 0; n < N; ++n) {
      for (int a = 0; a <= 1; ++a) {
        for (int b = 0; b <= 1; ++b) counts[n][a][b] += slot[n][a][b] / z;
      }
    }
  }
  return counts;
}

}  // namespace

EpsilonEstimate baum_welch_epsilon(const ObservationTrace& trace, const EstimatedParams& current) {
  check_trace(trace);
  if (trace.size() < 2) throw InsufficientData("epsilon estimation needs at least two slots");
  const ForwardKernel kernel(current.to_model(1));
  const auto pass = forward_backward(kernel, trace);
  const auto counts = expected_transitions(kernel, pass);

  EpsilonEstimate out{current.eps0_hat, current.eps1_hat};
  for (std::size_t n = 0; n < current.n_events; ++n) {
    const double from_on = counts[n][1][0] + counts[n][1][1];
    const double from_off = counts[n][0][0] + counts[n][0][1];
    if (from_on > kNoSupport) out.eps0[n] = clamp_prob(counts[n][1][0] / from_on);
    if (from_off > kNoSupport) out.eps1[n] = clamp_prob(counts[n][0][1] / from_off);
  }
  return out;
}

double trace_log_likelihood(const ModelParams& params, const ObservationTrace& trace) {
  const ForwardKernel kernel(params);
  auto dist = JointStateDistribution::point_mass(params.n_events, 0);
  for (const auto& obs : trace) dist = kernel.update(dist, obs);
  return dist.log_likelihood();
}

std::vector<EventStateVector> decode_filtered_map(const ModelParams& params, const ObservationTrace& trace) {
  const ForwardKernel kernel(params);
  auto dist = JointStateDistribution::point_mass(params.n_events, 0);
  std::vector<EventStateVector> states;
  states.reserve(trace.size());
  for (const auto& obs : trace) {
    dist = kernel.update(dist, obs);
    states.push_back(most_likely_state(dist));
  }
  return states;
}

// --- EM -------------------------------------------------------------------------

namespace {

double max_relative_change(const EstimatedParams& a, const EstimatedParams& b) {
  double worst = 0.0;
  auto scan = [&](const std::vector<double>& x, const std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      worst = std::max(worst, std::abs(y[i] - x[i]) / std::max(std::abs(x[i]), kProbabilityFloor));
    }
  };
  scan(a.eps0_hat, b.eps0_hat);
  scan(a.eps1_hat, b.eps1_hat);
  scan(a.q_hat, b.q_hat);
  return worst;
}

std::vector<PatternCounts> soft_counts(const ForwardKernel& kernel, const ObservationTrace& trace) {
  const auto pass = forward_backward(kernel, trace);
  const std::size_t N = kernel.params().n_events;
  const std::size_t K = kernel.params().n_devices;
  const std::size_t S = kernel.n_states();
  std::vector<PatternCounts> counts(K, PatternCounts(N));
  std::vector<double> gamma(S);
  for (std::size_t t = 1; t <= trace.size(); ++t) {
    double total = 0.0;
    for (std::uint32_t j = 0; j < S; ++j) {
      gamma[j] = pass.alpha[t][j] * pass.beta[t][j];
      total += gamma[j];
    }
    if (!(total > 0.0)) continue;
    const auto& obs = trace[t - 1];
    for (std::size_t k = 0; k < K; ++k) {
      if (!obs.observed(k)) continue;
      auto& bucket = obs.activations[k] ? counts[k].active : counts[k].inactive;
      for (std::uint32_t j = 0; j < S; ++j) bucket[j] += gamma[j] / total;
    }
  }
  return counts;
}

}  // namespace

EstimatedParams em_iterate(const ObservationTrace& trace, const EstimatedParams& init, const EmOptions& options) {
  check_trace(trace);
  if (options.max_iters == 0) throw ContractViolation("EM needs at least one iteration");
  if (trace.size() < 2) throw InsufficientData("EM needs at least two slots");
  if (init.n_devices != trace.front().n_devices()) {
    throw ContractViolation("initial estimate does not match the trace device count");
  }

  EstimatedParams current = init;
  current.clamp();
  current.iterations_run = 0;
  current.converged = false;
  const std::size_t N = current.n_events;
  const std::size_t K = current.n_devices;

  for (std::size_t iter = 1; iter <= options.max_iters; ++iter) {
    const ModelParams model = current.to_model(1);
    EstimatedParams next = current;

    // (a) per-slot MAP states under the previous estimate
    const auto states = decode_filtered_map(model, trace);
    // (b) epsilon from expected transition counts
    const auto eps = baum_welch_epsilon(trace, current);
    next.eps0_hat = eps.eps0;
    next.eps1_hat = eps.eps1;
    // (c) q per device
    std::vector<PatternCounts> soft;
    if (options.soft_q) soft = soft_counts(ForwardKernel(model), trace);
    for (std::size_t k = 0; k < K; ++k) {
      const auto row = options.soft_q ? maximize_noisy_or(soft[k], options.q_search)
                                      : maximize_noisy_or(hard_counts(trace, states, N, k), options.q_search);
      for (std::size_t n = 0; n < N; ++n) next.q_hat[n * K + k] = row[n];
    }
    next.clamp();
    next.iterations_run = iter;
    next.converged = max_relative_change(current, next) < options.tolerance;
    current = std::move(next);
    if (options.on_iteration) options.on_iteration(iter, current);
    if (current.converged) break;
  }
  return current;
}

ObservationTrace full_observation_trace(const Trajectory& traj) {
  ObservationTrace trace;
  trace.reserve(traj.length());
  for (const auto& a : traj.activations) trace.push_back(Observation::full(a));
  return trace;
}

double estimation_error(const ModelParams& truth, const EstimatedParams& estimate,
                        std::span<const Trajectory> eval_trajectories) {
  if (eval_trajectories.empty()) throw InsufficientData("no evaluation trajectories");
  const ModelParams learned = estimate.to_model(truth.n_slots);
  double total = 0.0;
  for (const auto& traj : eval_trajectories) {
    FilteringScheduler oracle(PolicyKind::FuFeedback, truth, Observation::Kind::Full);
    FilteringScheduler trained(PolicyKind::FuOffline, learned, Observation::Kind::Full);
    const double a = static_cast<double>(run_policy(oracle, traj).cumulative_regret());
    const double b = static_cast<double>(run_policy(trained, traj).cumulative_regret());
    total += std::abs(a - b);
  }
  return total / static_cast<double>(eval_trajectories.size());
}

}  // namespace fastuplink
