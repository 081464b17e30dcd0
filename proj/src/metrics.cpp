#include "fastuplink/metrics.hpp"

#include <algorithm>

#include "fastuplink/error.hpp"

namespace fastuplink {

namespace {

template <typename A, typename B>
void check_lengths(const A& a, const B& b) {
  if (a.size() != b.size()) throw ContractViolation("grant and activation vectors differ in length");
}

}  // namespace

std::size_t wrong_allocations(const GrantVector& grants, const ActivationVector& truth) {
  check_lengths(grants, truth);
  std::size_t omega = 0;
  for (std::size_t k = 0; k < grants.size(); ++k) omega += grants[k] && !truth[k];
  return omega;
}

std::size_t missed_allocations(const GrantVector& grants, const ActivationVector& truth) {
  check_lengths(grants, truth);
  std::size_t mu = 0;
  for (std::size_t k = 0; k < grants.size(); ++k) mu += truth[k] && !grants[k];
  return mu;
}

std::size_t regret_slot(std::size_t omega, std::size_t mu) { return std::min(omega, mu); }

SlotCounts count_allocations(const GrantVector& grants, const ActivationVector& truth) {
  return {wrong_allocations(grants, truth), missed_allocations(grants, truth)};
}

SlotCounts count_contention(const GrantVector& successes, const ActivationVector& truth,
                            std::size_t n_slots) {
  check_lengths(successes, truth);
  std::size_t served = 0;
  for (std::size_t k = 0; k < successes.size(); ++k) {
    if (successes[k] && !truth[k]) throw ContractViolation("inactive device marked as a success");
    served += successes[k];
  }
  if (served > n_slots) throw ContractViolation("more successes than slots");
  return {n_slots - served, truth.count() - served};
}

AgeVector update_aoi(const AgeVector& ages, const GrantVector& served, const ActivationVector& truth) {
  check_lengths(served, truth);
  if (ages.size() != truth.size()) throw ContractViolation("age vector length mismatch");
  AgeVector next(ages.size());
  for (std::size_t k = 0; k < ages.size(); ++k) next[k] = (served[k] && truth[k]) ? 0 : ages[k] + 1;
  return next;
}

double average_aoi(std::span<const std::size_t> ages) {
  if (ages.empty()) return 0.0;
  double total = 0.0;
  for (auto a : ages) total += static_cast<double>(a);
  return total / static_cast<double>(ages.size());
}

std::size_t peak_aoi(std::span<const std::size_t> ages) {
  return ages.empty() ? 0 : *std::max_element(ages.begin(), ages.end());
}

double cost(double avg_regret, double avg_aoi) {
  if (avg_regret < 0.0 || avg_aoi < 0.0) throw ContractViolation("cost inputs must be nonnegative");
  return avg_regret * avg_aoi;
}

void MetricsTrace::record(SlotCounts counts, const AgeVector& ages_after) {
  if (counts.omega > n_slots_) throw ContractViolation("omega exceeds the slot count");
  SlotRecord r;
  r.t = records_.size() + 1;
  r.omega = counts.omega;
  r.mu = counts.mu;
  r.regret = regret_slot(counts.omega, counts.mu);
  r.regret_cum = (records_.empty() ? 0 : records_.back().regret_cum) + r.regret;
  omega_sum_ += counts.omega;
  const double capacity = static_cast<double>(r.t) * static_cast<double>(n_slots_);
  r.usage = (capacity - static_cast<double>(omega_sum_)) / capacity;
  r.aoi_mean = average_aoi(ages_after);
  r.aoi_peak = peak_aoi(ages_after);
  r.ages = ages_after;
  records_.push_back(std::move(r));
}

std::size_t MetricsTrace::cumulative_regret() const noexcept {
  return records_.empty() ? 0 : records_.back().regret_cum;
}

double MetricsTrace::average_regret() const noexcept {
  return records_.empty() ? 0.0
                          : static_cast<double>(cumulative_regret()) / static_cast<double>(records_.size());
}

double MetricsTrace::final_usage() const noexcept {
  return records_.empty() ? 0.0 : records_.back().usage;
}

double MetricsTrace::final_aoi() const noexcept {
  return records_.empty() ? 0.0 : records_.back().aoi_mean;
}

double MetricsTrace::time_average_aoi() const noexcept {
  if (records_.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : records_) total += r.aoi_mean;
  return total / static_cast<double>(records_.size());
}

double system_usage(const MetricsTrace& trace, std::size_t n_slots, std::size_t t) {
  if (t == 0 || t > trace.length()) throw ContractViolation("usage slot index out of range");
  if (n_slots == 0) throw ContractViolation("slot count must be positive");
  double used = 0.0;
  for (std::size_t tau = 1; tau <= t; ++tau) {
    used += static_cast<double>(n_slots) - static_cast<double>(trace.at(tau).omega);
  }
  return used / (static_cast<double>(t) * static_cast<double>(n_slots));
}

}  // namespace fastuplink
