#include "fastuplink/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fastuplink/error.hpp"
#include "fastuplink/estimation.hpp"
#include "fastuplink/tuning.hpp"

namespace fastuplink {

namespace {

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

const PolicyRun& SeedRun::run(PolicyKind kind) const {
  for (const auto& p : policies) {
    if (p.policy == kind) return p;
  }
  throw ContractViolation("policy " + std::string(policy_name(kind)) + " was not run");
}

SeedStreams::SeedStreams(std::uint64_t seed)
    : params(RngStream(seed).substream("params")),
      events(RngStream(seed).substream("events")),
      activations(RngStream(seed).substream("activations")),
      gf_choices(RngStream(seed).substream("gf-choices")),
      em_init(RngStream(seed).substream("em-init")),
      offline_events(RngStream(seed).substream("offline-train").substream("events")),
      offline_activations(RngStream(seed).substream("offline-train").substream("activations")),
      beta_search_seed(RngStream(seed).substream("beta-search").seed()) {}

SeedRun run_seed(const ExperimentConfig& config, std::uint64_t seed) {
  const auto started = std::chrono::steady_clock::now();
  SeedStreams streams(seed);
  SeedRun out;
  out.seed = seed;
  out.params = config.param_source == "explicit"
                   ? config.explicit_params()
                   : sample_params(streams.params, config.n_events, config.n_devices, config.n_slots);
  out.truth = simulate_trajectory(out.params, config.horizon, streams.events, streams.activations);

  std::optional<double> tuned;
  auto resolve_beta = [&](const BetaSetting& setting) {
    if (!setting.optimize) return setting.value;
    if (!tuned) {
      BetaSearchConfig search;
      search.policy = PolicyKind::FuFeedback;
      search.replications = config.tune_replications;
      search.horizon = config.horizon;
      search.seed = streams.beta_search_seed;
      search.steady = config.steady;
      tuned = optimize_beta(search, out.params).beta;
    }
    return *tuned;
  };

  EmOptions em;
  em.max_iters = config.em_max_iters;
  em.soft_q = config.soft_q;

  const ModelParams& params = out.params;
  for (PolicyKind kind : config.policies) {
    PolicyRun run;
    run.policy = kind;
    std::unique_ptr<Scheduler> scheduler;
    switch (kind) {
      case PolicyKind::Tdma:
        scheduler = std::make_unique<TdmaScheduler>(params.n_devices, params.n_slots);
        break;
      case PolicyKind::GrantFree:
        scheduler = std::make_unique<GrantFreeScheduler>(params.n_devices, params.n_slots, streams.gf_choices);
        break;
      case PolicyKind::FuGenie:
        scheduler = std::make_unique<GenieScheduler>(params, 0.0, config.steady);
        break;
      case PolicyKind::FuFeedback:
        run.beta = resolve_beta(config.feedback_beta);
        scheduler = std::make_unique<FilteringScheduler>(PolicyKind::FuFeedback, params, Observation::Kind::Full,
                                                         run.beta, config.steady);
        break;
      case PolicyKind::FuLimited:
        scheduler = std::make_unique<FilteringScheduler>(PolicyKind::FuLimited, params,
                                                         Observation::Kind::Scheduled, 0.0, config.steady);
        break;
      case PolicyKind::FuBaseline:
        scheduler = std::make_unique<BaselineScheduler>(params);
        break;
      case PolicyKind::FuOffline: {
        RngStream ev = streams.offline_events;
        RngStream ac = streams.offline_activations;
        const Trajectory training = simulate_trajectory(params, config.offline_train_slots, ev, ac);
        RngStream init_rng = streams.em_init.substream("offline");
        const auto init = EstimatedParams::random_init(params.n_events, params.n_devices, init_rng);
        const auto estimate = em_iterate(full_observation_trace(training), init, em);
        scheduler = std::make_unique<FilteringScheduler>(PolicyKind::FuOffline, estimate.to_model(params.n_slots),
                                                         Observation::Kind::Full, 0.0, config.steady);
        break;
      }
      case PolicyKind::FuOnlineAoi: {
        run.beta = resolve_beta(config.beta);
        RngStream init_rng = streams.em_init.substream("online");
        OnlineLearningOptions options;
        options.em = em;
        options.window = config.online_window;
        options.steady = config.steady;
        scheduler = std::make_unique<OnlineLearningScheduler>(
            params.n_events, params.n_devices, params.n_slots, run.beta,
            EstimatedParams::random_init(params.n_events, params.n_devices, init_rng), options);
        break;
      }
    }
    run.metrics = run_policy(*scheduler, out.truth);
    out.policies.push_back(std::move(run));
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

RunResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  RunResult result;
  result.config = config;
  result.seeds.resize(config.seeds.size());

  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, config.seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      try {
        result.seeds[i] = run_seed(config, config.seeds[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return result;
}

// --- Reporting -------------------------------------------------------------------

const PolicySummary& CompareReport::summary(PolicyKind kind) const {
  for (const auto& s : policies) {
    if (s.policy == kind) return s;
  }
  throw ContractViolation("policy " + std::string(policy_name(kind)) + " is not in the report");
}

double CompareReport::ratio(PolicyKind numerator, PolicyKind denominator) const {
  for (const auto& r : ratios) {
    if (r.numerator == numerator && r.denominator == denominator) return r.median;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

CompareReport compare_report(const RunResult& result) {
  const auto& policies = result.config.policies;
  if (policies.size() < 2) throw ContractViolation("a comparison needs at least two policies");
  if (result.seeds.empty()) throw ContractViolation("no seeds to compare");
  CompareReport report;
  report.low_confidence = result.seeds.size() < 2;
  for (PolicyKind kind : policies) {
    PolicySummary s;
    s.policy = kind;
    std::vector<double> regrets;
    for (const auto& seed : result.seeds) {
      const auto& m = seed.run(kind).metrics;
      regrets.push_back(static_cast<double>(m.cumulative_regret()));
      s.aoi_mean += m.final_aoi();
      s.usage_mean += m.final_usage();
    }
    const double n = static_cast<double>(result.seeds.size());
    s.regret_median = median(regrets);
    for (double r : regrets) s.regret_mean += r / n;
    s.aoi_mean /= n;
    s.usage_mean /= n;
    report.policies.push_back(s);
  }
  for (PolicyKind a : policies) {
    for (PolicyKind b : policies) {
      if (a == b) continue;
      std::vector<double> per_seed;
      for (const auto& seed : result.seeds) {
        const double num = static_cast<double>(seed.run(a).metrics.cumulative_regret());
        const double den = static_cast<double>(seed.run(b).metrics.cumulative_regret());
        per_seed.push_back(den > 0.0 ? num / den : (num > 0.0 ? std::numeric_limits<double>::infinity() : 1.0));
      }
      report.ratios.push_back({a, b, median(per_seed)});
    }
  }
  return report;
}

std::string CompareReport::to_csv() const {
  std::ostringstream out;
  out << "policy,regret_median,regret_mean,aoi_mean,usage_mean,low_confidence\n";
  for (const auto& s : policies) {
    out << policy_name(s.policy) << ',' << format_double(s.regret_median) << ',' << format_double(s.regret_mean)
        << ',' << format_double(s.aoi_mean) << ',' << format_double(s.usage_mean) << ','
        << (low_confidence ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string CompareReport::ratios_csv() const {
  std::ostringstream out;
  out << "numerator,denominator,regret_ratio_median\n";
  for (const auto& r : ratios) {
    out << policy_name(r.numerator) << ',' << policy_name(r.denominator) << ',' << format_double(r.median) << '\n';
  }
  return out.str();
}

std::string CompareReport::to_text() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-15s %14s %12s %10s %8s\n", "policy", "regret(median)", "regret(mean)",
                "aoi", "usage");
  out << line;
  for (const auto& s : policies) {
    std::snprintf(line, sizeof line, "%-15s %14.1f %12.1f %10.3f %8.3f\n", std::string(policy_name(s.policy)).c_str(),
                  s.regret_median, s.regret_mean, s.aoi_mean, s.usage_mean);
    out << line;
  }
  for (auto [num, den] : {std::pair{PolicyKind::Tdma, PolicyKind::FuFeedback},
                          std::pair{PolicyKind::GrantFree, PolicyKind::FuFeedback}}) {
    const double r = ratio(num, den);
    if (std::isnan(r)) continue;
    std::snprintf(line, sizeof line, "regret %s / %s = %.2f (median over seeds)\n",
                  std::string(policy_name(num)).c_str(), std::string(policy_name(den)).c_str(), r);
    out << line;
  }
  if (low_confidence) out << "note: single seed, low confidence\n";
  return out.str();
}

// --- Output files ------------------------------------------------------------------

std::string series_csv(const MetricsTrace& metrics) {
  std::ostringstream out;
  out << "t,regret_slot,regret_cum,omega,mu,usage,aoi_mean,aoi_peak\n";
  for (const auto& r : metrics.records()) {
    out << r.t << ',' << r.regret << ',' << r.regret_cum << ',' << r.omega << ',' << r.mu << ','
        << format_double(r.usage) << ',' << format_double(r.aoi_mean) << ',' << r.aoi_peak << '\n';
  }
  return out.str();
}

std::string manifest_json(const ExperimentConfig& config) {
  nlohmann::ordered_json j;
  j["code_version"] = kCodeVersion;
  j["seeds"] = config.seeds;
  j["config"] = nlohmann::ordered_json::parse(config_to_json_text(config));
  return j.dump(2) + "\n";
}

namespace {

std::string bits_string(std::span<const std::uint8_t> bits) {
  std::string s(bits.size(), '0');
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) s[i] = '1';
  }
  return s;
}

nlohmann::ordered_json series_json(const MetricsTrace& m) {
  nlohmann::ordered_json j;
  std::vector<std::size_t> t, regret, regret_cum, omega, mu, peak;
  std::vector<double> usage, aoi;
  for (const auto& r : m.records()) {
    t.push_back(r.t);
    regret.push_back(r.regret);
    regret_cum.push_back(r.regret_cum);
    omega.push_back(r.omega);
    mu.push_back(r.mu);
    usage.push_back(r.usage);
    aoi.push_back(r.aoi_mean);
    peak.push_back(r.aoi_peak);
  }
  j["t"] = t;
  j["regret_slot"] = regret;
  j["regret_cum"] = regret_cum;
  j["omega"] = omega;
  j["mu"] = mu;
  j["usage"] = usage;
  j["aoi_mean"] = aoi;
  j["aoi_peak"] = peak;
  return j;
}

}  // namespace

std::string trace_csv(const ObservationTrace& trace) {
  std::ostringstream out;
  out << "t,activations,mask\n";
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const auto& obs = trace[t];
    out << (t + 1) << ',' << bits_string(obs.activations.bits()) << ',';
    if (obs.kind == Observation::Kind::Scheduled) out << bits_string(obs.observed_mask.bits());
    out << '\n';
  }
  return out.str();
}

ObservationTrace parse_trace_csv(const std::string& text) {
  ObservationTrace trace;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto parse_bits = [&](const std::string& s, auto& vec) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != '0' && s[i] != '1') {
        throw ConfigError("trace", "line " + std::to_string(line_no) + ": expected a 0/1 string");
      }
      vec.set(i, s[i] == '1');
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line.rfind("t,", 0) == 0) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (line.back() == ',') cols.emplace_back();
    if (cols.size() < 2) throw ConfigError("trace", "line " + std::to_string(line_no) + ": missing activations");
    ActivationVector a(cols[1].size());
    parse_bits(cols[1], a);
    if (cols.size() >= 3 && !cols[2].empty()) {
      if (cols[2].size() != cols[1].size()) {
        throw ConfigError("trace", "line " + std::to_string(line_no) + ": mask length differs");
      }
      GrantVector mask(cols[2].size());
      parse_bits(cols[2], mask);
      trace.push_back(Observation::scheduled(std::move(a), std::move(mask)));
    } else {
      trace.push_back(Observation::full(std::move(a)));
    }
    if (trace.back().n_devices() != trace.front().n_devices()) {
      throw ConfigError("trace", "line " + std::to_string(line_no) + ": inconsistent device count");
    }
  }
  if (trace.empty()) throw ConfigError("trace", "no observations");
  return trace;
}

std::string estimate_json(const EstimatedParams& e) {
  nlohmann::ordered_json j;
  j["n_events"] = e.n_events;
  j["n_devices"] = e.n_devices;
  j["iterations_run"] = e.iterations_run;
  j["converged"] = e.converged;
  j["eps0"] = e.eps0_hat;
  j["eps1"] = e.eps1_hat;
  j["q"] = e.q_hat;
  return j.dump(2) + "\n";
}

std::vector<std::filesystem::path> emit_series(const RunResult& result, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> written;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  const bool json_format = result.config.format == "json";
  for (const auto& seed : result.seeds) {
    const fs::path seed_dir = dir / ("seed_" + std::to_string(seed.seed));
    fs::create_directories(seed_dir, ec);
    if (ec) throw std::runtime_error("cannot create " + seed_dir.string() + ": " + ec.message());
    if (json_format) {
      nlohmann::ordered_json j;
      for (const auto& run : seed.policies) j[std::string(policy_name(run.policy))] = series_json(run.metrics);
      const fs::path p = seed_dir / "series.json";
      write_file(p, j.dump(2) + "\n");
      written.push_back(p);
    } else {
      for (const auto& run : seed.policies) {
        const fs::path p = seed_dir / (std::string(policy_name(run.policy)) + ".csv");
        write_file(p, series_csv(run.metrics));
        written.push_back(p);
      }
    }
    const fs::path trace_path = seed_dir / "trace.csv";
    write_file(trace_path, trace_csv(full_observation_trace(seed.truth)));
    written.push_back(trace_path);
  }
  if (result.config.policies.size() >= 2) {
    const auto report = compare_report(result);
    write_file(dir / "summary.csv", report.to_csv());
    write_file(dir / "ratios.csv", report.ratios_csv());
    written.push_back(dir / "summary.csv");
    written.push_back(dir / "ratios.csv");
  }
  write_file(dir / "manifest.json", manifest_json(result.config));
  written.push_back(dir / "manifest.json");
  return written;
}

}  // namespace fastuplink
