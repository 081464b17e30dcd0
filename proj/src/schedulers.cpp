#include "fastuplink/schedulers.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "fastuplink/error.hpp"

namespace fastuplink {

namespace {

constexpr std::array<std::string_view, 8> kPolicyNames = {
    "tdma", "gf", "fu-genie", "fu-feedback", "fu-limited", "fu-baseline", "fu-offline", "fu-online-aoi",
};

}  // namespace

std::string_view policy_name(PolicyKind kind) { return kPolicyNames[static_cast<std::size_t>(kind)]; }

std::optional<PolicyKind> parse_policy(std::string_view name) {
  for (std::size_t i = 0; i < kPolicyNames.size(); ++i) {
    if (kPolicyNames[i] == name) return static_cast<PolicyKind>(i);
  }
  return std::nullopt;
}

double steady_state_weight(const ModelParams& params, SteadyWeight mode) {
  params.require_steady_state();
  double acc = 0.0;
  for (std::size_t n = 0; n < params.n_events; ++n) {
    const double on = steady_state_prob(params, n, true);
    acc = mode == SteadyWeight::MeanOn ? acc + on : std::max(acc, on);
  }
  return mode == SteadyWeight::MeanOn ? acc / static_cast<double>(params.n_events) : acc;
}

std::vector<double> priority_index(std::span<const double> scores, std::span<const std::size_t> ages,
                                   double beta, double p_ss) {
  if (!(beta >= 0.0)) throw ContractViolation("age parameter beta must be >= 0");
  if (scores.size() != ages.size()) throw ContractViolation("scores and ages differ in length");
  std::vector<double> index(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) {
    index[k] = scores[k] + beta * p_ss * static_cast<double>(ages[k]);
  }
  return index;
}

GrantVector top_l(std::span<const double> index, std::size_t n_slots) {
  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(n_slots, index.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return index[a] > index[b] || (index[a] == index[b] && a < b);
                    });
  GrantVector grants(index.size());
  for (std::size_t i = 0; i < take; ++i) grants.set(order[i]);
  return grants;
}

// --- Scheduler ---------------------------------------------------------------

Scheduler::Scheduler(std::size_t n_devices, std::size_t n_slots)
    : n_devices_(n_devices), n_slots_(n_slots), ages_(n_devices, 0) {
  if (n_devices == 0 || n_slots == 0) throw ContractViolation("scheduler needs K > 0 and L > 0");
}

GrantVector Scheduler::resolve(const GrantVector& grants, const ActivationVector&) { return grants; }

void Scheduler::observe(const EventStateVector& true_state, const ActivationVector& truth,
                        const GrantVector& served) {
  if (truth.size() != n_devices_ || served.size() != n_devices_) {
    throw ContractViolation("observation does not match the device count");
  }
  on_observe(true_state, truth, served);
  ages_ = update_aoi(ages_, served, truth);
}

// --- TDMA --------------------------------------------------------------------

TdmaScheduler::TdmaScheduler(std::size_t n_devices, std::size_t n_slots) : Scheduler(n_devices, n_slots) {}

GrantVector TdmaScheduler::schedule() {
  const std::size_t K = n_devices();
  const std::size_t take = std::min(n_slots(), K);
  GrantVector grants(K);
  for (std::size_t i = 0; i < take; ++i) grants.set((pointer_ + i) % K);
  pointer_ = (pointer_ + take) % K;
  return grants;
}

// --- Grant-free --------------------------------------------------------------

GrantFreeScheduler::GrantFreeScheduler(std::size_t n_devices, std::size_t n_slots, RngStream rng)
    : Scheduler(n_devices, n_slots), rng_(std::move(rng)) {}

GrantVector GrantFreeScheduler::schedule() { return GrantVector(n_devices()); }

GrantVector GrantFreeScheduler::resolve(const GrantVector&, const ActivationVector& truth) {
  constexpr std::size_t kIdle = static_cast<std::size_t>(-1);
  constexpr std::size_t kCollision = static_cast<std::size_t>(-2);
  std::vector<std::size_t> owner(n_slots(), kIdle);
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (!truth[k]) continue;
    auto& slot = owner[rng_.below(n_slots())];
    slot = slot == kIdle ? k : kCollision;
  }
  GrantVector successes(n_devices());
  for (std::size_t who : owner) {
    if (who != kIdle && who != kCollision) successes.set(who);
  }
  return successes;
}

// --- Index-based policies -----------------------------------------------------

IndexScheduler::IndexScheduler(std::size_t n_devices, std::size_t n_slots, double beta, double p_ss)
    : Scheduler(n_devices, n_slots), beta_(beta), p_ss_(p_ss) {
  if (!(beta >= 0.0)) throw ContractViolation("age parameter beta must be >= 0");
}

GrantVector IndexScheduler::schedule() {
  const auto s = scores();
  if (beta_ == 0.0) return top_l(s, n_slots());
  return top_l(priority_index(s, ages(), beta_, p_ss_), n_slots());
}

namespace {

double weight_or_zero(const ModelParams& params, double beta, SteadyWeight mode) {
  // The steady-state weight only matters when the age term is active.
  return beta > 0.0 ? steady_state_weight(params, mode) : 0.0;
}

}  // namespace

GenieScheduler::GenieScheduler(ModelParams params, double beta, SteadyWeight mode)
    : IndexScheduler(params.n_devices, params.n_slots, beta, weight_or_zero(params, beta, mode)),
      params_(std::move(params)),
      state_(params_.n_events) {
  params_.validate();
}

std::vector<double> GenieScheduler::scores() const {
  std::vector<double> s(params_.n_devices);
  for (std::size_t k = 0; k < s.size(); ++k) s[k] = next_step_activation_prob(params_, state_, k);
  return s;
}

void GenieScheduler::on_observe(const EventStateVector& true_state, const ActivationVector&,
                                const GrantVector&) {
  if (true_state.size() != params_.n_events) throw ContractViolation("genie needs the true event state");
  state_ = true_state;
}

FilteringScheduler::FilteringScheduler(PolicyKind kind, const ModelParams& params,
                                       Observation::Kind observation, double beta, SteadyWeight mode)
    : IndexScheduler(params.n_devices, params.n_slots, beta, weight_or_zero(params, beta, mode)),
      kind_(kind),
      kernel_(params),
      observation_(observation),
      posterior_(JointStateDistribution::point_mass(params.n_events, 0)) {}

std::vector<double> FilteringScheduler::scores() const {
  return predict_activation_scores(kernel_.params(), posterior_).per_device;
}

void FilteringScheduler::on_observe(const EventStateVector&, const ActivationVector& truth,
                                    const GrantVector& served) {
  const Observation obs = observation_ == Observation::Kind::Full ? Observation::full(truth)
                                                                  : Observation::scheduled(truth, served);
  posterior_ = kernel_.update(posterior_, obs);
}

BaselineScheduler::BaselineScheduler(const ModelParams& params)
    : IndexScheduler(params.n_devices, params.n_slots, 0.0, 0.0), scores_(params.n_devices) {
  params.validate();
  params.require_steady_state();
  for (std::size_t k = 0; k < params.n_devices; ++k) scores_[k] = steady_state_activation_prob(params, k);
}

OnlineLearningScheduler::OnlineLearningScheduler(std::size_t n_events, std::size_t n_devices,
                                                 std::size_t n_slots, double beta, EstimatedParams init,
                                                 OnlineLearningOptions options)
    : IndexScheduler(n_devices, n_slots, beta, 0.0),
      n_events_(n_events),
      init_(std::move(init)),
      estimate_(init_),
      options_(std::move(options)),
      model_(estimate_.to_model(n_slots)),
      posterior_(JointStateDistribution::point_mass(n_events, 0)) {
  if (init_.n_events != n_events || init_.n_devices != n_devices) {
    throw ContractViolation("initial estimate does not match the model dimensions");
  }
  set_steady_weight(steady_state_weight(model_, options_.steady));
}

std::vector<double> OnlineLearningScheduler::scores() const {
  return predict_activation_scores(model_, posterior_).per_device;
}

void OnlineLearningScheduler::on_observe(const EventStateVector&, const ActivationVector& truth,
                                         const GrantVector&) {
  history_.push_back(Observation::full(truth));
  bool truncated = false;
  if (options_.window > 0 && history_.size() > options_.window) {
    history_.erase(history_.begin(), history_.begin() + static_cast<std::ptrdiff_t>(history_.size() - options_.window));
    truncated = true;
  }
  // Baum-Welch needs a transition, so the first slot keeps the initial guess.
  if (history_.size() >= 2) {
    estimate_ = em_iterate(history_, options_.reinitialize ? init_ : estimate_, options_.em);
  }
  model_ = estimate_.to_model(n_slots());
  const ForwardKernel kernel(model_);
  // A sliding window no longer starts at the all-Off origin; start it from the
  // stationary law of the current estimate instead.
  auto posterior = truncated ? stationary_distribution(model_) : JointStateDistribution::point_mass(n_events_, 0);
  for (const auto& obs : history_) posterior = kernel.update(posterior, obs);
  posterior_ = std::move(posterior);
  set_steady_weight(steady_state_weight(model_, options_.steady));
}

MetricsTrace run_policy(Scheduler& scheduler, const Trajectory& traj) {
  MetricsTrace trace(scheduler.n_slots());
  for (std::size_t t = 0; t < traj.length(); ++t) {
    const auto& truth = traj.activations[t];
    const GrantVector grants = scheduler.schedule();
    const GrantVector served = scheduler.resolve(grants, truth);
    const SlotCounts counts = scheduler.contention_based()
                                  ? count_contention(served, truth, scheduler.n_slots())
                                  : count_allocations(grants, truth);
    scheduler.observe(traj.events[t], truth, served);
    trace.record(counts, scheduler.ages());
  }
  return trace;
}

}  // namespace fastuplink
