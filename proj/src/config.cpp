#include "fastuplink/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fastuplink/error.hpp"

namespace fastuplink {

using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "n_events",     "n_devices",   "n_slots",  "horizon",           "seeds",         "policies",
    "beta",         "feedback_beta", "em_max_iters", "soft_q",      "offline_train_slots",
    "online_window", "steady_weight", "tune_replications", "param_source", "eps0", "eps1", "q",
    "out_dir",      "format",
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T get_field(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key, std::string("wrong type: ") + e.what());
  }
}

std::size_t get_count(const json& j, const std::string& key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(key, "expected a nonnegative integer");
  return v.get<std::size_t>();
}

BetaSetting beta_from_json(const json& v, const std::string& key) {
  if (v.is_string()) return parse_beta(v.get<std::string>(), key);
  if (v.is_number()) {
    const double b = v.get<double>();
    if (!(b >= 0.0)) throw ConfigError(key, "must be >= 0");
    return {false, b};
  }
  throw ConfigError(key, "expected a number or \"optimize\"");
}

json beta_to_json(const BetaSetting& b) { return b.optimize ? json("optimize") : json(b.value); }

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split_list(text)) {
    const auto dash = item.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        const auto lo = std::stoull(item.substr(0, dash));
        const auto hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw ConfigError("seeds", "empty range " + item);
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      } else {
        seeds.push_back(std::stoull(item));
      }
    } catch (const std::logic_error&) {
      throw ConfigError("seeds", "not a seed: " + item);
    }
  }
  if (seeds.empty()) throw ConfigError("seeds", "no seeds given");
  return seeds;
}

std::vector<PolicyKind> parse_policy_list(const std::string& text) {
  std::vector<PolicyKind> out;
  for (const auto& item : split_list(text)) {
    const auto p = parse_policy(item);
    if (!p) throw ConfigError("policies", "unknown policy " + item);
    out.push_back(*p);
  }
  if (out.empty()) throw ConfigError("policies", "no policies given");
  return out;
}

BetaSetting parse_beta(const std::string& text, const std::string& field) {
  const std::string t = trim(text);
  if (t == "optimize") return {true, 0.0};
  try {
    std::size_t used = 0;
    const double b = std::stod(t, &used);
    if (used != t.size()) throw ConfigError(field, "not a number: " + t);
    if (!(b >= 0.0)) throw ConfigError(field, "must be >= 0");
    return {false, b};
  } catch (const std::logic_error&) {
    throw ConfigError(field, "expected a number or \"optimize\", got " + t);
  }
}

void ExperimentConfig::validate() const {
  if (n_events == 0) throw ConfigError("n_events", "must be positive");
  if (n_events > kMaxJointEvents) throw ConfigError("n_events", "at most 16 events are supported");
  if (n_devices == 0) throw ConfigError("n_devices", "must be positive");
  if (n_slots == 0) throw ConfigError("n_slots", "must be positive");
  if (n_slots > n_devices) throw ConfigError("n_slots", "must not exceed n_devices");
  if (horizon == 0) throw ConfigError("horizon", "must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds", "must not be empty");
  if (policies.empty()) throw ConfigError("policies", "must not be empty");
  if (em_max_iters == 0) throw ConfigError("em_max_iters", "must be >= 1");
  if (offline_train_slots < 2) throw ConfigError("offline_train_slots", "must be >= 2");
  if (tune_replications == 0) throw ConfigError("tune_replications", "must be >= 1");
  if (!beta.optimize && !(beta.value >= 0.0)) throw ConfigError("beta", "must be >= 0");
  if (!feedback_beta.optimize && !(feedback_beta.value >= 0.0)) throw ConfigError("feedback_beta", "must be >= 0");
  if (format != "csv" && format != "json") throw ConfigError("format", "must be csv or json");
  if (param_source == "explicit") {
    if (eps0.size() != n_events) throw ConfigError("eps0", "expected " + std::to_string(n_events) + " entries");
    if (eps1.size() != n_events) throw ConfigError("eps1", "expected " + std::to_string(n_events) + " entries");
    if (q.size() != n_events * n_devices) {
      throw ConfigError("q", "expected an n_events x n_devices matrix (" + std::to_string(n_events * n_devices) +
                                 " entries)");
    }
    auto check = [](const std::vector<double>& v, const char* key) {
      for (double p : v) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(key, "probabilities must lie in [0,1]");
      }
    };
    check(eps0, "eps0");
    check(eps1, "eps1");
    check(q, "q");
  } else if (param_source != "sample") {
    throw ConfigError("param_source", "must be sample or explicit");
  }
}

ModelParams ExperimentConfig::explicit_params() const {
  ModelParams p;
  p.n_events = n_events;
  p.n_devices = n_devices;
  p.n_slots = n_slots;
  p.eps0 = eps0;
  p.eps1 = eps1;
  p.q = q;
  p.validate();
  return p;
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  if (doc.is_object() && doc.contains("config") && doc.contains("code_version")) doc = doc.at("config");
  if (!doc.is_object()) throw ConfigError("config", "expected a JSON object");

  for (const auto& [key, _] : doc.items()) {
    if (!kKnownKeys.count(key)) throw ConfigError(key, "unknown configuration key");
  }

  ExperimentConfig c;
  if (doc.contains("n_events")) c.n_events = get_count(doc, "n_events");
  if (doc.contains("n_devices")) c.n_devices = get_count(doc, "n_devices");
  if (doc.contains("n_slots")) c.n_slots = get_count(doc, "n_slots");
  if (doc.contains("horizon")) c.horizon = get_count(doc, "horizon");
  if (doc.contains("seeds")) {
    const auto& s = doc.at("seeds");
    if (s.is_string()) {
      c.seeds = parse_seed_list(s.get<std::string>());
    } else {
      c.seeds = get_field<std::vector<std::uint64_t>>(doc, "seeds");
    }
  }
  if (doc.contains("policies")) {
    const auto& p = doc.at("policies");
    if (p.is_string()) {
      c.policies = parse_policy_list(p.get<std::string>());
    } else {
      std::string joined;
      for (const auto& name : get_field<std::vector<std::string>>(doc, "policies")) joined += name + ",";
      c.policies = parse_policy_list(joined);
    }
  }
  if (doc.contains("beta")) c.beta = beta_from_json(doc.at("beta"), "beta");
  if (doc.contains("feedback_beta")) c.feedback_beta = beta_from_json(doc.at("feedback_beta"), "feedback_beta");
  if (doc.contains("em_max_iters")) c.em_max_iters = get_count(doc, "em_max_iters");
  if (doc.contains("soft_q")) c.soft_q = get_field<bool>(doc, "soft_q");
  if (doc.contains("offline_train_slots")) c.offline_train_slots = get_count(doc, "offline_train_slots");
  if (doc.contains("online_window")) c.online_window = get_count(doc, "online_window");
  if (doc.contains("steady_weight")) {
    const auto mode = get_field<std::string>(doc, "steady_weight");
    if (mode == "mean") {
      c.steady = SteadyWeight::MeanOn;
    } else if (mode == "max") {
      c.steady = SteadyWeight::MaxOn;
    } else {
      throw ConfigError("steady_weight", "must be mean or max");
    }
  }
  if (doc.contains("tune_replications")) c.tune_replications = get_count(doc, "tune_replications");
  if (doc.contains("param_source")) c.param_source = get_field<std::string>(doc, "param_source");
  if (doc.contains("eps0")) c.eps0 = get_field<std::vector<double>>(doc, "eps0");
  if (doc.contains("eps1")) c.eps1 = get_field<std::vector<double>>(doc, "eps1");
  if (doc.contains("q")) c.q = get_field<std::vector<double>>(doc, "q");
  if (doc.contains("out_dir")) c.out_dir = get_field<std::string>(doc, "out_dir");
  if (doc.contains("format")) c.format = get_field<std::string>(doc, "format");
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

std::string config_to_json_text(const ExperimentConfig& c) {
  // ordered_json keeps the echo in declaration order.
  nlohmann::ordered_json j;
  j["n_events"] = c.n_events;
  j["n_devices"] = c.n_devices;
  j["n_slots"] = c.n_slots;
  j["horizon"] = c.horizon;
  j["seeds"] = c.seeds;
  std::vector<std::string> names;
  for (auto p : c.policies) names.emplace_back(policy_name(p));
  j["policies"] = names;
  j["beta"] = beta_to_json(c.beta);
  j["feedback_beta"] = beta_to_json(c.feedback_beta);
  j["em_max_iters"] = c.em_max_iters;
  j["soft_q"] = c.soft_q;
  j["offline_train_slots"] = c.offline_train_slots;
  j["online_window"] = c.online_window;
  j["steady_weight"] = c.steady == SteadyWeight::MeanOn ? "mean" : "max";
  j["tune_replications"] = c.tune_replications;
  j["param_source"] = c.param_source;
  if (c.param_source == "explicit") {
    j["eps0"] = c.eps0;
    j["eps1"] = c.eps1;
    j["q"] = c.q;
  }
  j["out_dir"] = c.out_dir;
  j["format"] = c.format;
  return j.dump(2);
}

}  // namespace fastuplink
