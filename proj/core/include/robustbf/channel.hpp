#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "robustbf/rng.hpp"
#include "robustbf/types.hpp"

namespace robustbf {

// How the long-term pathloss rho enters the per-entry channel variance.
enum class ChannelVariance {
  kSqrtRho,  // h_k ~ CN(0, sqrt(rho_k) I), the default
  kRho,      // h_k ~ CN(0, rho_k I)
};

// Which entries of the error-statistic vector the base station knows.
enum class KnownStats {
  kAll,     // E = K
  kFixed,   // E = known_count users, chosen uniformly per sample
  kRandom,  // E uniform over {0, ..., K}, then users chosen uniformly
};

struct ScenarioConfig {
  int antennas = 4;
  int users = 4;
  double radius_m = 100.0;
  double ref_distance_m = 30.0;
  double pathloss_exponent = 3.0;
  std::vector<double> power_db = {0, 5, 10, 15, 20, 25, 30};
  std::vector<double> error_ratios = {0.005, 0.01, 0.05, 0.1, 0.3, 1.0};
  KnownStats known_stats = KnownStats::kAll;
  int known_count = 0;
  ChannelVariance variance = ChannelVariance::kSqrtRho;
  std::uint64_t seed = 1;

  // Throws ConfigError on an invalid field.
  void validate() const;
};

struct CsiSample {
  ChannelSet actual;    // h
  ChannelSet estimate;  // h_hat = h + e
  RVec error_var;       // eps_k
  double power = 1.0;   // linear budget P
  std::vector<bool> known;  // which eps_k the base station sees
  // Bookkeeping for experiment output.
  double power_db = 0.0;
  double error_ratio = 0.0;
};

struct CorruptedCsi {
  ChannelSet estimate;
  RVec error_var;
};

double db_to_linear(double db);

// rho = 1 / (1 + (d / d_ref)^alpha)
double pathloss(double distance_m, const ScenarioConfig& cfg);

// Uniform in the disk of the configured radius.
double draw_distance(const ScenarioConfig& cfg, Engine& rng);

ChannelSet channels_at(const ScenarioConfig& cfg, const RVec& distances_m, Engine& rng);
ChannelSet draw_channels(const ScenarioConfig& cfg, Engine& rng);

// e_k ~ CN(0, eps_k I) entrywise with eps_k = tau ||h_k||^2. Throws
// ConfigError for tau <= 0.
CorruptedCsi corrupt(const ChannelSet& actual, double error_ratio, Engine& rng);

// One tuple (h, h_hat, eps, P). `mask_rng` draws only the known-statistics
// mask so the channel stream is unaffected by KnownStats.
CsiSample draw_sample(const ScenarioConfig& cfg, Engine& rng, Engine& mask_rng);

// n independent tuples; tuple i is keyed by (cfg.seed, stream, batch, i).
std::vector<CsiSample> sample_batch(const ScenarioConfig& cfg, std::size_t n, Stream stream,
                                    std::uint64_t batch = 0);

// Mask with exactly `count` true entries chosen uniformly.
std::vector<bool> choose_known(int users, int count, Engine& rng);

}  // namespace robustbf
