#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fastuplink/config.hpp"
#include "fastuplink/metrics.hpp"
#include "fastuplink/model.hpp"
#include "fastuplink/schedulers.hpp"

namespace fastuplink {

inline constexpr const char* kCodeVersion = "fastuplink 0.1.0";

struct PolicyRun {
  PolicyKind policy = PolicyKind::Tdma;
  double beta = 0.0;
  MetricsTrace metrics;
};

/// Everything produced for one seed: the drawn model, the shared truth and
/// one metric series per policy.
struct SeedRun {
  std::uint64_t seed = 0;
  ModelParams params;
  Trajectory truth;
  std::vector<PolicyRun> policies;
  double wall_seconds = 0.0;  ///< informational, never written to disk

  const PolicyRun& run(PolicyKind kind) const;
};

struct RunResult {
  ExperimentConfig config;
  std::vector<SeedRun> seeds;
};

/// Named substreams of one seed. Each consumer owns its stream, so adding or
/// removing a policy never perturbs the draws of another.
struct SeedStreams {
  explicit SeedStreams(std::uint64_t seed);

  RngStream params;
  RngStream events;
  RngStream activations;
  RngStream gf_choices;
  RngStream em_init;
  RngStream offline_events;
  RngStream offline_activations;
  std::uint64_t beta_search_seed;
};

/// Simulates one seed: draws (or takes) the model, generates one trajectory
/// and replays it against every configured policy.
SeedRun run_seed(const ExperimentConfig& config, std::uint64_t seed);

RunResult run_experiment(const ExperimentConfig& config);

struct PolicySummary {
  PolicyKind policy = PolicyKind::Tdma;
  double regret_median = 0.0;
  double regret_mean = 0.0;
  double aoi_mean = 0.0;   ///< mean age at the final slot, averaged over seeds
  double usage_mean = 0.0;  ///< final usage, averaged over seeds
};

struct RegretRatio {
  PolicyKind numerator = PolicyKind::Tdma;
  PolicyKind denominator = PolicyKind::Tdma;
  double median = 0.0;  ///< median over seeds of the per-seed ratio
};

struct CompareReport {
  std::vector<PolicySummary> policies;
  std::vector<RegretRatio> ratios;  ///< every ordered pair
  bool low_confidence = false;      ///< fewer than two seeds

  const PolicySummary& summary(PolicyKind kind) const;
  /// NaN when either policy is absent.
  double ratio(PolicyKind numerator, PolicyKind denominator) const;

  std::string to_csv() const;
  std::string ratios_csv() const;
  std::string to_text() const;
};

CompareReport compare_report(const RunResult& result);

/// One CSV (or JSON) series per policy and seed under `dir/seed_<s>/`, the
/// truth activation trace, the compare report and a manifest that reproduces
/// the run. Returns the files written.
std::vector<std::filesystem::path> emit_series(const RunResult& result, const std::filesystem::path& dir);

std::string series_csv(const MetricsTrace& metrics);
std::string manifest_json(const ExperimentConfig& config);

/// Activation trace file: header "t,activations,mask", one row per slot with
/// bit strings; an empty mask means every device was observed.
std::string trace_csv(const ObservationTrace& trace);
ObservationTrace parse_trace_csv(const std::string& text);

std::string estimate_json(const EstimatedParams& estimate);

}  // namespace fastuplink
