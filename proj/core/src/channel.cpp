#include "robustbf/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "robustbf/errors.hpp"

namespace robustbf {

void ScenarioConfig::validate() const {
  if (antennas < 1) throw ConfigError("antennas must be >= 1");
  if (users < 1) throw ConfigError("users must be >= 1");
  if (!(radius_m > 0.0)) throw ConfigError("radius must be > 0");
  if (!(ref_distance_m > 0.0)) throw ConfigError("reference distance must be > 0");
  if (!std::isfinite(pathloss_exponent)) throw ConfigError("pathloss exponent must be finite");
  if (power_db.empty()) throw ConfigError("power set is empty");
  if (error_ratios.empty()) throw ConfigError("error-ratio set is empty");
  for (double p : power_db)
    if (!std::isfinite(p)) throw ConfigError("power set holds a non-finite value");
  for (double tau : error_ratios)
    if (!(tau > 0.0 && tau <= 1.0))
      throw ConfigError("error ratio " + std::to_string(tau) + " outside (0, 1]");
  if (known_stats == KnownStats::kFixed && (known_count < 0 || known_count > users))
    throw ConfigError("known error-statistic count must lie in [0, K]");
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double pathloss(double distance_m, const ScenarioConfig& cfg) {
  return 1.0 / (1.0 + std::pow(distance_m / cfg.ref_distance_m, cfg.pathloss_exponent));
}

double draw_distance(const ScenarioConfig& cfg, Engine& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return cfg.radius_m * std::sqrt(unit(rng));
}

ChannelSet channels_at(const ScenarioConfig& cfg, const RVec& distances_m, Engine& rng) {
  if (distances_m.size() != cfg.users) throw ContractError("channels_at: one distance per user");
  ChannelSet h(cfg.antennas, cfg.users);
  for (int k = 0; k < cfg.users; ++k) {
    const double rho = pathloss(distances_m(k), cfg);
    const double var = cfg.variance == ChannelVariance::kSqrtRho ? std::sqrt(rho) : rho;
    for (int m = 0; m < cfg.antennas; ++m) h(m, k) = complex_normal(rng, var);
  }
  return h;
}

ChannelSet draw_channels(const ScenarioConfig& cfg, Engine& rng) {
  RVec d(cfg.users);
  for (int k = 0; k < cfg.users; ++k) d(k) = draw_distance(cfg, rng);
  return channels_at(cfg, d, rng);
}

CorruptedCsi corrupt(const ChannelSet& actual, double error_ratio, Engine& rng) {
  if (!(error_ratio > 0.0)) throw ConfigError("error ratio must be > 0");
  CorruptedCsi out{actual, RVec(actual.cols())};
  for (Eigen::Index k = 0; k < actual.cols(); ++k) {
    const double eps = error_ratio * actual.col(k).squaredNorm();
    out.error_var(k) = eps;
    for (Eigen::Index m = 0; m < actual.rows(); ++m) out.estimate(m, k) += complex_normal(rng, eps);
  }
  return out;
}

std::vector<bool> choose_known(int users, int count, Engine& rng) {
  std::vector<int> order(static_cast<std::size_t>(users));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> known(static_cast<std::size_t>(users), false);
  for (int i = 0; i < count; ++i) known[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  return known;
}

CsiSample draw_sample(const ScenarioConfig& cfg, Engine& rng, Engine& mask_rng) {
  CsiSample s;
  std::uniform_int_distribution<std::size_t> pick_power(0, cfg.power_db.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_tau(0, cfg.error_ratios.size() - 1);
  s.power_db = cfg.power_db[pick_power(rng)];
  s.power = db_to_linear(s.power_db);
  s.error_ratio = cfg.error_ratios[pick_tau(rng)];
  s.actual = draw_channels(cfg, rng);
  CorruptedCsi c = corrupt(s.actual, s.error_ratio, rng);
  s.estimate = std::move(c.estimate);
  s.error_var = std::move(c.error_var);

  switch (cfg.known_stats) {
    case KnownStats::kAll:
      s.known.assign(static_cast<std::size_t>(cfg.users), true);
      break;
    case KnownStats::kFixed:
      s.known = choose_known(cfg.users, cfg.known_count, mask_rng);
      break;
    case KnownStats::kRandom: {
      std::uniform_int_distribution<int> pick_count(0, cfg.users);
      const int count = pick_count(mask_rng);
      s.known = choose_known(cfg.users, count, mask_rng);
      break;
    }
  }
  return s;
}

std::vector<CsiSample> sample_batch(const ScenarioConfig& cfg, std::size_t n, Stream stream,
                                    std::uint64_t batch) {
  cfg.validate();
  if (n == 0) throw ContractError("sample_batch: n must be >= 1");
  std::vector<CsiSample> out;
  out.reserve(n);
  const auto mask_stream = static_cast<Stream>(static_cast<std::uint64_t>(stream) ^
                                               static_cast<std::uint64_t>(Stream::kMask));
  for (std::size_t i = 0; i < n; ++i) {
    Engine rng = make_engine(cfg.seed, stream, batch, i);
    Engine mask_rng = make_engine(cfg.seed, mask_stream, batch, i);
    out.push_back(draw_sample(cfg, rng, mask_rng));
  }
  return out;
}

}  // namespace robustbf
