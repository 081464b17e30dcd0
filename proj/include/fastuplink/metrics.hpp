#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fastuplink/model.hpp"

namespace fastuplink {

using AgeVector = std::vector<std::size_t>;

/// sum_k [u_k - A_k]^+ : grants spent on inactive devices.
std::size_t wrong_allocations(const GrantVector& grants, const ActivationVector& truth);
/// sum_k [A_k - u_k]^+ : active devices left without a grant.
std::size_t missed_allocations(const GrantVector& grants, const ActivationVector& truth);
std::size_t regret_slot(std::size_t omega, std::size_t mu);

/// Allocation counts for one slot.
struct SlotCounts {
  std::size_t omega = 0;
  std::size_t mu = 0;
};

SlotCounts count_allocations(const GrantVector& grants, const ActivationVector& truth);

/// Grant-free accounting: there is no base-station grant, so a slot is wasted
/// unless exactly one active device picked it. omega counts the L slots that
/// carried no successful transmission, mu the active devices not served.
SlotCounts count_contention(const GrantVector& successes, const ActivationVector& truth,
                            std::size_t n_slots);

/// Ages reset to 0 for devices that were active and served, all others grow by one.
AgeVector update_aoi(const AgeVector& ages, const GrantVector& served, const ActivationVector& truth);
double average_aoi(std::span<const std::size_t> ages);
std::size_t peak_aoi(std::span<const std::size_t> ages);

/// Regret-age trade-off objective: avg_regret * avg_aoi.
double cost(double avg_regret, double avg_aoi);

struct SlotRecord {
  std::size_t t = 0;  ///< 1-based slot index
  std::size_t omega = 0;
  std::size_t mu = 0;
  std::size_t regret = 0;
  std::size_t regret_cum = 0;
  double usage = 0.0;  ///< eta_t, usage to date
  double aoi_mean = 0.0;
  std::size_t aoi_peak = 0;
  AgeVector ages;
};

/// Per-slot metric series for one policy over one run.
class MetricsTrace {
 public:
  explicit MetricsTrace(std::size_t n_slots = 0) : n_slots_(n_slots) {}

  void record(SlotCounts counts, const AgeVector& ages_after);

  std::size_t n_slots() const noexcept { return n_slots_; }
  std::size_t length() const noexcept { return records_.size(); }
  const std::vector<SlotRecord>& records() const noexcept { return records_; }
  const SlotRecord& at(std::size_t t) const { return records_.at(t - 1); }

  std::size_t cumulative_regret() const noexcept;
  double average_regret() const noexcept;   ///< per slot
  double final_usage() const noexcept;
  double final_aoi() const noexcept;        ///< mean age at the last slot
  double time_average_aoi() const noexcept; ///< mean over slots of the mean age

 private:
  std::size_t n_slots_;
  std::size_t omega_sum_ = 0;
  std::vector<SlotRecord> records_;
};

/// eta_t = (1 / tL) sum_{tau <= t} (L - omega_tau)
double system_usage(const MetricsTrace& trace, std::size_t n_slots, std::size_t t);

}  // namespace fastuplink
