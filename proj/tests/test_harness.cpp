#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fastuplink/config.hpp"
#include "fastuplink/error.hpp"
#include "fastuplink/harness.hpp"

using namespace fastuplink;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fastuplink_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FASTUPLINK_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig quick_config() {
  ExperimentConfig c;
  c.seeds = {1, 2};
  c.horizon = 30;
  c.policies = {PolicyKind::Tdma, PolicyKind::GrantFree, PolicyKind::FuGenie, PolicyKind::FuFeedback,
                PolicyKind::FuLimited, PolicyKind::FuBaseline};
  return c;
}

}  // namespace

TEST_CASE("default configuration") {
  const ExperimentConfig c;
  CHECK(c.n_events == 5);
  CHECK(c.n_devices == 50);
  CHECK(c.n_slots == 10);
  CHECK(c.horizon == 100);
  CHECK(c.em_max_iters == 40);
  CHECK(c.policies.size() == 8);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config parsing and validation") {
  const auto c = config_from_json_text(R"({"n_devices": 20, "n_slots": 4, "seeds": "1-3", "beta": "optimize",
                                           "policies": ["tdma", "fu-feedback"]})");
  CHECK(c.n_devices == 20);
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(c.beta.optimize);
  CHECK(c.policies.size() == 2);

  CHECK_THROWS_AS(config_from_json_text(R"({"n_device": 20})"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"horizon": 0})"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"seeds": []})"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"policies": ["tdma", "aloha"]})"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"param_source": "explicit", "n_events": 1, "n_devices": 2,
                                            "n_slots": 1, "eps0": [0.1], "eps1": [0.2], "q": [0.5]})"),
                  ConfigError);
  try {
    config_from_json_text(R"({"n_slots": 60})");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "n_slots");
  }

  const auto round = config_from_json_text(config_to_json_text(c));
  CHECK(config_to_json_text(round) == config_to_json_text(c));
}

TEST_CASE("saturated TDMA uses every slot") {
  ExperimentConfig c;
  c.n_events = 1;
  c.n_devices = 4;
  c.n_slots = 4;
  c.horizon = 20;
  c.param_source = "explicit";
  c.eps0 = {0.0};
  c.eps1 = {1.0};
  c.q = {1, 1, 1, 1};
  c.policies = {PolicyKind::Tdma};
  const auto r = run_experiment(c);
  CHECK(r.seeds[0].run(PolicyKind::Tdma).metrics.final_usage() == 1.0);
}

TEST_CASE("paired truth across policies") {
  const auto c = quick_config();
  const auto a = run_seed(c, 3);
  auto only = c;
  only.policies = {PolicyKind::FuFeedback};
  const auto b = run_seed(only, 3);
  CHECK(a.truth.activations == b.truth.activations);
  // Removing other policies does not change the feedback series.
  CHECK(series_csv(a.run(PolicyKind::FuFeedback).metrics) == series_csv(b.run(PolicyKind::FuFeedback).metrics));
  for (const auto& run : a.policies) CHECK(run.metrics.length() == c.horizon);
}

TEST_CASE("comparison report") {
  const auto r = run_experiment(quick_config());
  const auto report = compare_report(r);
  CHECK_FALSE(report.low_confidence);
  CHECK(std::isfinite(report.ratio(PolicyKind::Tdma, PolicyKind::FuFeedback)));
  CHECK(std::isfinite(report.ratio(PolicyKind::GrantFree, PolicyKind::FuFeedback)));
  CHECK(report.to_text().find("tdma / fu-feedback") != std::string::npos);

  auto single = quick_config();
  single.seeds = {4};
  CHECK(compare_report(run_experiment(single)).low_confidence);

  auto lonely = quick_config();
  lonely.policies = {PolicyKind::Tdma};
  CHECK_THROWS_AS(compare_report(run_experiment(lonely)), ContractViolation);
}

TEST_CASE("series files") {
  const auto dir = scratch("series");
  auto c = quick_config();
  c.horizon = 100;
  c.seeds = {5};
  const auto r = run_experiment(c);
  emit_series(r, dir);
  const auto text = slurp(dir / "seed_5" / "tdma.csv");
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,regret_slot,regret_cum,omega,mu,usage,aoi_mean,aoi_peak");
  std::size_t rows = 0;
  const auto& m = r.seeds[0].run(PolicyKind::Tdma).metrics;
  while (std::getline(in, line)) {
    ++rows;
    const auto last_comma = line.rfind(',');
    const auto prev_comma = line.rfind(',', last_comma - 1);
    const double aoi = std::stod(line.substr(prev_comma + 1, last_comma - prev_comma - 1));
    CHECK(aoi == doctest::Approx(average_aoi(m.at(rows).ages)).epsilon(1e-8));
  }
  CHECK(rows == 100);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "summary.csv"));

  CHECK_THROWS(emit_series(r, "/proc/fastuplink/cannot/exist"));
}

TEST_CASE("manifest reproduces the run") {
  const auto dir = scratch("manifest");
  auto c = quick_config();
  c.out_dir = (dir / "a").string();
  emit_series(run_experiment(c), c.out_dir);
  const auto again = load_config((dir / "a" / "manifest.json").string());
  CHECK(config_to_json_text(again) == config_to_json_text(c));
  emit_series(run_experiment(again), dir / "b");
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir / "a");
    CHECK(slurp(entry.path()) == slurp(dir / "b" / rel));
  }
}

TEST_CASE("trace files") {
  ObservationTrace trace;
  trace.push_back(Observation::full({1, 0, 1}));
  trace.push_back(Observation::scheduled({0, 1, 1}, {1, 1, 0}));
  const auto parsed = parse_trace_csv(trace_csv(trace));
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0].kind == Observation::Kind::Full);
  CHECK(parsed[0].activations == trace[0].activations);
  CHECK(parsed[1].kind == Observation::Kind::Scheduled);
  CHECK(parsed[1].observed_mask == trace[1].observed_mask);
  CHECK_THROWS_AS(parse_trace_csv("t,activations,mask\n1,10x,\n"), ConfigError);
  CHECK_THROWS_AS(parse_trace_csv("t,activations,mask\n1,101,\n2,10,\n"), ConfigError);
}

TEST_CASE("command line") {
  const auto dir = scratch("cli");
  CHECK(run_cli("simulate --seeds 1 --policies tdma,fu-feedback --horizon 20 --out " + (dir / "sim").string()) == 0);
  CHECK(fs::exists(dir / "sim" / "seed_1" / "tdma.csv"));
  CHECK(run_cli("simulate --seeds 1 --policies tdma --format json --horizon 10 --out " + (dir / "js").string()) == 0);
  CHECK(fs::exists(dir / "js" / "seed_1" / "series.json"));
  CHECK(run_cli("compare --seeds 1-2 --policies tdma,gf --horizon 20 --out " + (dir / "cmp").string()) == 0);
  CHECK(fs::exists(dir / "cmp" / "summary.txt"));
  CHECK(run_cli("tune-beta --seeds 1 --replications 2 --horizon 20 --out " + (dir / "tune").string()) == 0);
  CHECK(fs::exists(dir / "tune" / "beta_opt.csv"));
  CHECK(run_cli("estimate --trace " + (dir / "sim" / "seed_1" / "trace.csv").string() + " --events 2 --iters 3 --out " +
                (dir / "est.json").string()) == 0);
  CHECK(slurp(dir / "est.json").find("\"q\"") != std::string::npos);

  CHECK(run_cli("simulate --policies bogus") == 2);
  CHECK(run_cli("simulate --format xml") == 2);
  CHECK(run_cli("simulate --seeds 3-x") == 2);
  CHECK(run_cli("simulate --config " + (dir / "missing.json").string()) == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("compare --policies tdma") == 2);
  CHECK(run_cli("estimate --trace " + (dir / "missing.csv").string()) == 2);
  CHECK(run_cli("simulate --seeds 1 --policies tdma --horizon 5 --out /proc/nope/out") == 3);
}
