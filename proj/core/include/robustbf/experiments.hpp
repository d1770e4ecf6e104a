#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "robustbf/baselines.hpp"
#include "robustbf/beamnet.hpp"
#include "robustbf/channel.hpp"
#include "robustbf/training.hpp"

namespace robustbf {

enum class ExperimentKind { kConvergence, kRateVsSnr, kRateVsTau, kRateVsE, kTiming };

ExperimentKind parse_experiment_kind(const std::string& name);
std::string to_string(ExperimentKind kind);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::kRateVsSnr;
  ScenarioConfig scenario;
  TrainConfig train;
  BaselineConfig baselines;
  // "mrt", "zf", "rzf", "rrzf", "wmmse", "dnn" or "dnn:<label>".
  std::vector<std::string> methods = {"dnn", "zf", "rrzf", "wmmse"};
  std::size_t test_size = 1000;
  std::vector<double> eval_power_db = {0, 5, 10, 15, 20, 25, 30};
  std::vector<double> eval_error_ratios = {0.1, 1.0};
  std::vector<int> eval_known;  // E values; empty means 0..K
  int timing_samples = 100;
  int timing_warmup = 10;
  std::string output_path;
  std::uint64_t seed = 1;

  void validate() const;
};

// Trained networks by label; "dnn" is the label of a bare `dnn` method.
using NetRegistry = std::map<std::string, NetParams>;

struct RateRow {
  double power_db = 0.0;
  double error_ratio = 0.0;
  int known = 0;  // E
  std::string method;
  double mean = 0.0;
  double std_err = 0.0;
  std::vector<double> per_sample;  // sum rate of each test tuple, in order
};

struct TimingRow {
  std::string method;
  double power_db = 0.0;
  double mean_us = 0.0;
  double std_us = 0.0;
};

// Test tuples at a fixed (P, tau, E). Channels depend only on the seed and
// the tuple index, so every operating point sees the same h.
std::vector<CsiSample> test_set(const ScenarioConfig& scenario, std::size_t n, double power_db,
                                double error_ratio, int known, std::uint64_t seed);

// Sum rate on the actual channel of each tuple. Baselines see only h_hat (and
// eps for the robust RZF); WMMSE runs on h_hat.
std::vector<double> evaluate_method(const std::string& method, std::span<const CsiSample> samples,
                                    const NetRegistry& nets, const BaselineConfig& baselines);

double mean_of(std::span<const double> xs);
double std_err_of(std::span<const double> xs);
// Standard error of the paired differences a_i - b_i.
double paired_std_err(std::span<const double> a, std::span<const double> b);

std::vector<RateRow> run_rate_vs_snr(const ExperimentSpec& spec, const NetRegistry& nets);
std::vector<RateRow> run_rate_vs_tau(const ExperimentSpec& spec, const NetRegistry& nets);
std::vector<RateRow> run_rate_vs_known(const ExperimentSpec& spec, const NetRegistry& nets);
std::vector<TimingRow> run_timing(const ExperimentSpec& spec, const NetRegistry& nets);

// CSV with a header row and 17-significant-digit floats.
std::string format_double(double x);
std::string rate_vs_snr_csv(const std::vector<RateRow>& rows);
std::string rate_vs_tau_csv(const std::vector<RateRow>& rows);
std::string rate_vs_known_csv(const std::vector<RateRow>& rows);
std::string timing_csv(const std::vector<TimingRow>& rows);
std::string training_log_csv(const std::vector<EpochLog>& log);

void write_text(const std::string& path, const std::string& text);

}  // namespace robustbf
