#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fastuplink/model.hpp"
#include "fastuplink/schedulers.hpp"

namespace fastuplink {

/// Age parameter: a fixed value, or tuned per seed by optimize_beta.
struct BetaSetting {
  bool optimize = false;
  double value = 0.0;

  bool operator==(const BetaSetting&) const = default;
};

inline constexpr double kTableBeta = 0.0233;
inline constexpr std::size_t kDefaultHorizon = 100;

struct ExperimentConfig {
  std::size_t n_events = kDefaultEvents;
  std::size_t n_devices = kDefaultDevices;
  std::size_t n_slots = kDefaultSlots;
  std::size_t horizon = kDefaultHorizon;
  std::vector<std::uint64_t> seeds{1};
  std::vector<PolicyKind> policies{kAllPolicies.begin(), kAllPolicies.end()};
  /// Age parameter of fu-online-aoi.
  BetaSetting beta{false, kTableBeta};
  /// Age parameter of fu-feedback; nonzero turns it into the AoI-compensated variant.
  BetaSetting feedback_beta{false, 0.0};
  std::size_t em_max_iters = 40;
  bool soft_q = false;
  std::size_t offline_train_slots = kDefaultHorizon;
  std::size_t online_window = 0;
  SteadyWeight steady = SteadyWeight::MeanOn;
  std::size_t tune_replications = 20;
  /// "sample" draws the model per seed; "explicit" uses eps0/eps1/q below.
  std::string param_source = "sample";
  std::vector<double> eps0;
  std::vector<double> eps1;
  std::vector<double> q;  ///< row-major N x K
  std::string out_dir = "results";
  std::string format = "csv";

  /// Throws ConfigError naming the first invalid field.
  void validate() const;

  /// The explicit model (param_source == "explicit").
  ModelParams explicit_params() const;
};

/// Flat JSON object keyed by the field names above. Unknown keys are errors.
/// A run manifest is accepted as well: its "config" member is used.
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json_text(const ExperimentConfig& config);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<PolicyKind> parse_policy_list(const std::string& text);
BetaSetting parse_beta(const std::string& text, const std::string& field = "beta");

}  // namespace fastuplink
