#include "robustbf/experiments.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "robustbf/errors.hpp"
#include "robustbf/metrics.hpp"

namespace robustbf {

namespace {

const NetParams& net_for(const std::string& method, const NetRegistry& nets) {
  const std::string label = method == "dnn" ? "dnn" : method.substr(4);
  auto it = nets.find(label);
  if (it == nets.end()) throw ConfigError("no checkpoint loaded for method '" + method + "'");
  return it->second;
}

bool is_dnn(const std::string& method) {
  return method == "dnn" || method.rfind("dnn:", 0) == 0;
}

BeamSet baseline_beams(const std::string& method, const CsiSample& s, const BaselineConfig& cfg) {
  if (method == "mrt") return mrt(s.estimate, s.power);
  if (method == "zf") return zf(s.estimate, s.power);
  if (method == "rzf") return rzf(s.estimate, s.power, s.error_var, RzfLoading::kPlain);
  if (method == "rrzf") {
    // Only the known error statistics reach the base station.
    RVec eps(s.error_var.size());
    Eigen::Index n = 0;
    for (Eigen::Index k = 0; k < eps.size(); ++k)
      if (s.known[static_cast<std::size_t>(k)]) eps(n++) = s.error_var(k);
    return rzf(s.estimate, s.power, RVec(eps.head(n)), cfg.rzf_loading);
  }
  if (method == "wmmse") return wmmse(s.estimate, s.power, cfg).beams;
  throw ConfigError("unknown method '" + method + "'");
}

RateRow summarize(std::string method, std::vector<double> rates) {
  RateRow row;
  row.method = std::move(method);
  row.mean = mean_of(rates);
  row.std_err = std_err_of(rates);
  row.per_sample = std::move(rates);
  return row;
}

std::vector<int> known_grid(const ExperimentSpec& spec) {
  if (!spec.eval_known.empty()) return spec.eval_known;
  std::vector<int> out;
  for (int e = 0; e <= spec.scenario.users; ++e) out.push_back(e);
  return out;
}

}  // namespace

ExperimentKind parse_experiment_kind(const std::string& name) {
  if (name == "convergence") return ExperimentKind::kConvergence;
  if (name == "rate-vs-snr") return ExperimentKind::kRateVsSnr;
  if (name == "rate-vs-tau") return ExperimentKind::kRateVsTau;
  if (name == "rate-vs-E") return ExperimentKind::kRateVsE;
  if (name == "timing") return ExperimentKind::kTiming;
  throw ConfigError("unknown experiment kind '" + name + "'");
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kConvergence: return "convergence";
    case ExperimentKind::kRateVsSnr: return "rate-vs-snr";
    case ExperimentKind::kRateVsTau: return "rate-vs-tau";
    case ExperimentKind::kRateVsE: return "rate-vs-E";
    case ExperimentKind::kTiming: return "timing";
  }
  return "?";
}

void ExperimentSpec::validate() const {
  scenario.validate();
  train.validate();
  baselines.validate();
  if (methods.empty()) throw ConfigError("method list is empty");
  for (const std::string& m : methods)
    if (!is_dnn(m) && m != "mrt" && m != "zf" && m != "rzf" && m != "rrzf" && m != "wmmse")
      throw ConfigError("unknown method '" + m + "'");
  if (test_size < 1) throw ConfigError("test size must be >= 1");
  if (eval_power_db.empty()) throw ConfigError("evaluation power list is empty");
  if (eval_error_ratios.empty()) throw ConfigError("evaluation error-ratio list is empty");
  for (double tau : eval_error_ratios)
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("evaluation error ratio outside (0, 1]");
  for (int e : eval_known)
    if (e < 0 || e > scenario.users) throw ConfigError("E must lie in [0, K]");
  if (timing_samples < 1 || timing_warmup < 0) throw ConfigError("invalid timing sample counts");
}

std::vector<CsiSample> test_set(const ScenarioConfig& scenario, std::size_t n, double power_db,
                                double error_ratio, int known, std::uint64_t seed) {
  ScenarioConfig cfg = scenario;
  cfg.power_db = {power_db};
  cfg.error_ratios = {error_ratio};
  cfg.seed = seed;
  if (known >= scenario.users) {
    cfg.known_stats = KnownStats::kAll;
  } else {
    cfg.known_stats = KnownStats::kFixed;
    cfg.known_count = known;
  }
  return sample_batch(cfg, n, Stream::kTest);
}

std::vector<double> evaluate_method(const std::string& method, std::span<const CsiSample> samples,
                                    const NetRegistry& nets, const BaselineConfig& baselines) {
  std::vector<double> rates;
  rates.reserve(samples.size());
  if (is_dnn(method)) {
    const std::vector<BeamSet> beams = infer_batch(net_for(method, nets), samples);
    for (std::size_t i = 0; i < samples.size(); ++i)
      rates.push_back(sum_rate(samples[i].actual, beams[i]));
    return rates;
  }
  for (const CsiSample& s : samples) rates.push_back(sum_rate(s.actual, baseline_beams(method, s, baselines)));
  return rates;
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double total = 0.0;
  for (double x : xs) total += x;
  return total / static_cast<double>(xs.size());
}

double std_err_of(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mu) * (x - mu);
  const double n = static_cast<double>(xs.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

double paired_std_err(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("paired_std_err: samples are not paired");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return std_err_of(d);
}

std::vector<RateRow> run_rate_vs_snr(const ExperimentSpec& spec, const NetRegistry& nets) {
  spec.validate();
  std::vector<RateRow> rows;
  for (double tau : spec.eval_error_ratios) {
    for (double p_db : spec.eval_power_db) {
      const auto samples = test_set(spec.scenario, spec.test_size, p_db, tau, spec.scenario.users, spec.seed);
      for (const std::string& m : spec.methods) {
        RateRow row = summarize(m, evaluate_method(m, samples, nets, spec.baselines));
        row.power_db = p_db;
        row.error_ratio = tau;
        row.known = spec.scenario.users;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::vector<RateRow> run_rate_vs_tau(const ExperimentSpec& spec, const NetRegistry& nets) {
  spec.validate();
  std::vector<RateRow> rows;
  for (double p_db : spec.eval_power_db) {
    for (double tau : spec.eval_error_ratios) {
      const auto samples = test_set(spec.scenario, spec.test_size, p_db, tau, spec.scenario.users, spec.seed);
      for (const std::string& m : spec.methods) {
        RateRow row = summarize(m, evaluate_method(m, samples, nets, spec.baselines));
        row.power_db = p_db;
        row.error_ratio = tau;
        row.known = spec.scenario.users;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::vector<RateRow> run_rate_vs_known(const ExperimentSpec& spec, const NetRegistry& nets) {
  spec.validate();
  std::vector<RateRow> rows;
  const double p_db = spec.eval_power_db.front();
  for (double tau : spec.eval_error_ratios) {
    for (int e : known_grid(spec)) {
      const auto samples = test_set(spec.scenario, spec.test_size, p_db, tau, e, spec.seed);
      for (const std::string& m : spec.methods) {
        RateRow row = summarize(m, evaluate_method(m, samples, nets, spec.baselines));
        row.power_db = p_db;
        row.error_ratio = tau;
        row.known = e;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::vector<TimingRow> run_timing(const ExperimentSpec& spec, const NetRegistry& nets) {
  spec.validate();
  using Clock = std::chrono::steady_clock;
  std::vector<TimingRow> rows;
  const double tau = spec.eval_error_ratios.back();
  for (const std::string& m : spec.methods) {
    for (double p_db : spec.eval_power_db) {
      const auto samples = test_set(spec.scenario,
                                    static_cast<std::size_t>(spec.timing_samples + spec.timing_warmup),
                                    p_db, tau, spec.scenario.users, spec.seed);
      std::vector<double> micros;
      double sink = 0.0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto start = Clock::now();
        BeamSet v = is_dnn(m) ? infer(net_for(m, nets), samples[i])
                              : baseline_beams(m, samples[i], spec.baselines);
        const auto stop = Clock::now();
        sink += v(0, 0).real();
        if (i >= static_cast<std::size_t>(spec.timing_warmup))
          micros.push_back(std::chrono::duration<double, std::micro>(stop - start).count());
      }
      if (!std::isfinite(sink)) throw SolverError("timing: non-finite beam output");
      const double mu = mean_of(micros);
      double ss = 0.0;
      for (double x : micros) ss += (x - mu) * (x - mu);
      const double sd = micros.size() > 1 ? std::sqrt(ss / static_cast<double>(micros.size() - 1)) : 0.0;
      rows.push_back(TimingRow{m, p_db, mu, sd});
    }
  }
  return rows;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string rate_vs_snr_csv(const std::vector<RateRow>& rows) {
  std::ostringstream out;
  out << "P_dB,tau,method,mean_sum_rate,std_err\n";
  for (const RateRow& r : rows)
    out << format_double(r.power_db) << ',' << format_double(r.error_ratio) << ',' << r.method << ','
        << format_double(r.mean) << ',' << format_double(r.std_err) << '\n';
  return out.str();
}

std::string rate_vs_tau_csv(const std::vector<RateRow>& rows) {
  std::ostringstream out;
  out << "tau,P_dB,method,mean_sum_rate,std_err\n";
  for (const RateRow& r : rows)
    out << format_double(r.error_ratio) << ',' << format_double(r.power_db) << ',' << r.method << ','
        << format_double(r.mean) << ',' << format_double(r.std_err) << '\n';
  return out.str();
}

std::string rate_vs_known_csv(const std::vector<RateRow>& rows) {
  std::ostringstream out;
  out << "E,tau,P_dB,method,mean_sum_rate,std_err\n";
  for (const RateRow& r : rows)
    out << r.known << ',' << format_double(r.error_ratio) << ',' << format_double(r.power_db) << ','
        << r.method << ',' << format_double(r.mean) << ',' << format_double(r.std_err) << '\n';
  return out.str();
}

std::string timing_csv(const std::vector<TimingRow>& rows) {
  std::ostringstream out;
  out << "method,P_dB,mean_us,std_us\n";
  for (const TimingRow& r : rows)
    out << r.method << ',' << format_double(r.power_db) << ',' << format_double(r.mean_us) << ','
        << format_double(r.std_us) << '\n';
  return out.str();
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch,train_sum_rate,val_sum_rate,R_best\n";
  for (const EpochLog& e : log)
    out << e.epoch << ',' << format_double(e.train_sum_rate) << ',' << format_double(e.val_sum_rate)
        << ',' << format_double(e.best_sum_rate) << '\n';
  return out.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open output file: " + path);
  out << text;
  if (!out) throw ConfigError("failed writing output file: " + path);
}

}  // namespace robustbf
