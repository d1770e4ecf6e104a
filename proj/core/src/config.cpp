#include "robustbf/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "robustbf/errors.hpp"

namespace robustbf {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
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

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("key '" + key + "': not a number: " + text);
  return v;
}

long long to_int(const std::string& key, const std::string& text) {
  long long v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("key '" + key + "': not an integer: " + text);
  return v;
}

std::size_t to_count(const std::string& key, const std::string& text) {
  const long long v = to_int(key, text);
  if (v < 0) throw ConfigError("key '" + key + "': must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const std::string& item : split_list(text)) out.push_back(to_double("list", item));
  return out;
}

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  if (key.empty()) throw ConfigError("empty config key");
  values_[key] = value;
}

void KeyValueConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must look like key=value: " + assignment);
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

ExperimentSpec experiment_from(const KeyValueConfig& kv) {
  ExperimentSpec spec;
  ScenarioConfig& sc = spec.scenario;
  TrainConfig& tc = spec.train;
  BaselineConfig& bc = spec.baselines;

  for (const auto& [key, value] : kv.values()) {
    if (key == "antennas") {
      sc.antennas = static_cast<int>(to_int(key, value));
    } else if (key == "users") {
      sc.users = static_cast<int>(to_int(key, value));
    } else if (key == "radius") {
      sc.radius_m = to_double(key, value);
    } else if (key == "ref_distance") {
      sc.ref_distance_m = to_double(key, value);
    } else if (key == "pathloss_exponent") {
      sc.pathloss_exponent = to_double(key, value);
    } else if (key == "power_db") {
      sc.power_db = parse_double_list(value);
    } else if (key == "error_ratios") {
      sc.error_ratios = parse_double_list(value);
    } else if (key == "known_stats") {
      if (value == "all") {
        sc.known_stats = KnownStats::kAll;
      } else if (value == "random") {
        sc.known_stats = KnownStats::kRandom;
      } else {
        sc.known_stats = KnownStats::kFixed;
        sc.known_count = static_cast<int>(to_int(key, value));
      }
    } else if (key == "channel_variance") {
      if (value == "sqrt_rho")
        sc.variance = ChannelVariance::kSqrtRho;
      else if (value == "rho")
        sc.variance = ChannelVariance::kRho;
      else
        throw ConfigError("channel_variance must be sqrt_rho or rho");
    } else if (key == "seed") {
      const auto seed = static_cast<std::uint64_t>(to_count(key, value));
      sc.seed = seed;
      tc.seed = seed;
      spec.seed = seed;
    } else if (key == "learning_rate") {
      tc.learning_rate = to_double(key, value);
    } else if (key == "batch_size") {
      tc.batch_size = to_count(key, value);
    } else if (key == "epochs") {
      tc.max_epochs = static_cast<int>(to_int(key, value));
    } else if (key == "batches_per_epoch") {
      tc.batches_per_epoch = static_cast<int>(to_int(key, value));
    } else if (key == "validation_size") {
      tc.validation_size = to_count(key, value);
    } else if (key == "adam_beta1") {
      tc.adam_beta1 = to_double(key, value);
    } else if (key == "adam_beta2") {
      tc.adam_beta2 = to_double(key, value);
    } else if (key == "adam_eps") {
      tc.adam_eps = to_double(key, value);
    } else if (key == "patience") {
      tc.patience = static_cast<int>(to_int(key, value));
    } else if (key == "hidden") {
      tc.hidden.clear();
      if (value != "standard")
        for (const std::string& w : split_list(value)) tc.hidden.push_back(static_cast<int>(to_int(key, w)));
    } else if (key == "wmmse_max_iterations") {
      bc.wmmse_max_iterations = static_cast<int>(to_int(key, value));
    } else if (key == "wmmse_tolerance") {
      bc.wmmse_tolerance = to_double(key, value);
    } else if (key == "bisection_tolerance") {
      bc.bisection_tolerance = to_double(key, value);
    } else if (key == "rzf_loading") {
      if (value == "plain")
        bc.rzf_loading = RzfLoading::kPlain;
      else if (value == "robust")
        bc.rzf_loading = RzfLoading::kRobust;
      else
        throw ConfigError("rzf_loading must be plain or robust");
    } else if (key == "experiment") {
      spec.kind = parse_experiment_kind(value);
    } else if (key == "methods") {
      spec.methods = split_list(value);
    } else if (key == "test_size") {
      spec.test_size = to_count(key, value);
    } else if (key == "eval_power_db") {
      spec.eval_power_db = parse_double_list(value);
    } else if (key == "eval_error_ratios") {
      spec.eval_error_ratios = parse_double_list(value);
    } else if (key == "eval_known") {
      spec.eval_known.clear();
      for (const std::string& e : split_list(value)) spec.eval_known.push_back(static_cast<int>(to_int(key, e)));
    } else if (key == "timing_samples") {
      spec.timing_samples = static_cast<int>(to_int(key, value));
    } else if (key == "timing_warmup") {
      spec.timing_warmup = static_cast<int>(to_int(key, value));
    } else if (key == "output") {
      spec.output_path = value;
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  return spec;
}

}  // namespace robustbf
