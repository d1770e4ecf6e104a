// Experiment runner: train a robust beamforming network, evaluate it against
// the classical baselines, and time inference.
//
//   robustbf train  --config c.cfg --checkpoint net.bin --out log.csv [key=value ...]
//   robustbf eval   --config c.cfg --checkpoint [label=]net.bin --out rates.csv
//   robustbf timing --config c.cfg --checkpoint net.bin --out timing.csv

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "robustbf/config.hpp"
#include "robustbf/errors.hpp"
#include "robustbf/experiments.hpp"
#include "robustbf/training.hpp"

namespace {

using namespace robustbf;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> checkpoints;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool checkpoint_required) {
  cmd->add_option("--config", args.config, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "seed for channel draws and initialization");
  cmd->add_option("--out", args.out, "output CSV path (stdout when omitted)");
  auto* ck = cmd->add_option("--checkpoint", args.checkpoints,
                             "network checkpoint; for eval/timing optionally label=path");
  ck->allow_extra_args(false);  // one path per flag; later words are overrides
  if (checkpoint_required) ck->required();
  cmd->add_option("overrides", args.overrides, "key=value overrides applied after --config");
}

ExperimentSpec load_spec(const CommonArgs& args) {
  KeyValueConfig kv = args.config.empty() ? KeyValueConfig{} : KeyValueConfig::from_file(args.config);
  for (const std::string& o : args.overrides) kv.apply_override(o);
  if (args.seed) kv.set("seed", std::to_string(*args.seed));
  return experiment_from(kv);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty())
    std::cout << text;
  else
    write_text(path, text);
}

NetRegistry load_nets(const std::vector<std::string>& specs) {
  NetRegistry nets;
  for (const std::string& s : specs) {
    const auto eq = s.find('=');
    const std::string label = eq == std::string::npos ? "dnn" : s.substr(0, eq);
    const std::string path = eq == std::string::npos ? s : s.substr(eq + 1);
    nets[label] = load_checkpoint(path);
  }
  return nets;
}

int run_train(const CommonArgs& args) {
  ExperimentSpec spec = load_spec(args);
  const std::string log_path = args.out.empty() ? spec.output_path : args.out;
  TrainState state = train(spec.train, spec.scenario, [](const EpochLog& e) {
    std::cerr << "epoch " << e.epoch << "  train " << e.train_sum_rate << "  val " << e.val_sum_rate
              << "  best " << e.best_sum_rate << '\n';
  });
  save_checkpoint(state.best_params, args.checkpoints.front());
  emit(log_path, training_log_csv(state.log));
  if (state.aborted) {
    std::cerr << "training aborted: " << state.diagnostic << " (best checkpoint kept)\n";
    return 2;
  }
  return 0;
}

int run_eval(const CommonArgs& args) {
  ExperimentSpec spec = load_spec(args);
  const NetRegistry nets = load_nets(args.checkpoints);
  const std::string path = args.out.empty() ? spec.output_path : args.out;
  switch (spec.kind) {
    case ExperimentKind::kRateVsSnr:
      emit(path, rate_vs_snr_csv(run_rate_vs_snr(spec, nets)));
      return 0;
    case ExperimentKind::kRateVsTau:
      emit(path, rate_vs_tau_csv(run_rate_vs_tau(spec, nets)));
      return 0;
    case ExperimentKind::kRateVsE:
      emit(path, rate_vs_known_csv(run_rate_vs_known(spec, nets)));
      return 0;
    case ExperimentKind::kTiming:
      emit(path, timing_csv(run_timing(spec, nets)));
      return 0;
    case ExperimentKind::kConvergence:
      throw ConfigError("the convergence experiment is produced by `train`");
  }
  return 1;
}

int run_timing_cmd(const CommonArgs& args) {
  ExperimentSpec spec = load_spec(args);
  const NetRegistry nets = load_nets(args.checkpoints);
  emit(args.out.empty() ? spec.output_path : args.out, timing_csv(run_timing(spec, nets)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust deep-learning beamforming for multi-user MISO downlink"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, timing_args;
  auto* train_cmd = app.add_subcommand("train", "train a network; writes the epoch log CSV");
  add_common(train_cmd, train_args, true);
  auto* eval_cmd = app.add_subcommand("eval", "rate-vs-snr, rate-vs-tau or rate-vs-E experiment");
  add_common(eval_cmd, eval_args, false);
  auto* timing_cmd = app.add_subcommand("timing", "per-sample CPU time of each method");
  add_common(timing_cmd, timing_args, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(train_args);
    if (*eval_cmd) return run_eval(eval_args);
    if (*timing_cmd) return run_timing_cmd(timing_args);
  } catch (const robustbf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
