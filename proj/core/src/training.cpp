#include "robustbf/training.hpp"

#include <cmath>
#include <string>

#include "robustbf/errors.hpp"
#include "robustbf/metrics.hpp"

namespace robustbf {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (max_epochs < 0) throw ConfigError("max epochs must be >= 0");
  if (batches_per_epoch < 1) throw ConfigError("batches per epoch must be >= 1");
  if (validation_size < 1) throw ConfigError("validation size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("Adam epsilon must be > 0");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  for (int w : hidden)
    if (w < 1) throw ConfigError("hidden widths must be >= 1");
}

AdamState AdamState::zeros_like(const NetParams& params) {
  AdamState s;
  for (const Tensor* t : params.trainables()) {
    s.first.push_back(Tensor::Zero(t->rows(), t->cols()));
    s.second.push_back(Tensor::Zero(t->rows(), t->cols()));
  }
  return s;
}

std::vector<Tensor> BatchLoss::gradients() {
  tape->backward(loss);
  std::vector<Tensor> grads;
  grads.reserve(bound.leaves.size());
  for (const ad::Var& leaf : bound.leaves) {
    const Tensor& g = leaf.grad();
    grads.push_back(g.size() == 0 ? Tensor::Zero(leaf.rows(), leaf.cols()) : g);
  }
  return grads;
}

BatchLoss batch_loss(const NetParams& params, std::span<const CsiSample> batch) {
  if (batch.empty()) throw ContractError("batch_loss: empty batch");
  BatchLoss out;
  out.tape = std::make_unique<ad::Tape>();
  ad::Tape& tape = *out.tape;
  out.bound = bind_params(tape, params);
  ad::Var x = tape.constant(build_inputs(batch));
  ad::Var z = forward_mlp(tape, out.bound, params, x, &out.stats);
  if (!z.value().allFinite()) throw TrainingError("non-finite network output");
  ad::Var beams = beams_node(z, batch, params.arch.antennas, params.arch.users);
  ad::Var rates = sum_rate_node(beams, pack_channels(batch, false), params.arch.antennas);
  out.loss = ad::scale(ad::mean(rates), -1.0);
  return out;
}

void adam_step(NetParams& params, AdamState& state, const std::vector<Tensor>& grads,
               const TrainConfig& cfg) {
  std::vector<Tensor*> theta = params.trainables();
  if (grads.size() != theta.size() || state.first.size() != theta.size() ||
      state.second.size() != theta.size())
    throw ContractError("adam_step: gradient/moment buffers do not match parameters");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].rows() != theta[i]->rows() || grads[i].cols() != theta[i]->cols())
      throw ContractError("adam_step: gradient shape mismatch");
    if (!grads[i].allFinite())
      throw TrainingError("non-finite gradient in parameter tensor " + std::to_string(i) +
                          " at step " + std::to_string(state.step + 1));
  }
  ++state.step;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    state.first[i] = b1 * state.first[i] + (1.0 - b1) * grads[i];
    state.second[i] = b2 * state.second[i] + (1.0 - b2) * grads[i].cwiseAbs2();
    const auto m_hat = state.first[i].array() / c1;
    const auto v_hat = state.second[i].array() / c2;
    theta[i]->array() -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
  }
}

double mean_sum_rate(const NetParams& params, std::span<const CsiSample> samples) {
  if (samples.empty()) throw ContractError("mean_sum_rate: empty sample set");
  const std::vector<BeamSet> beams = infer_batch(params, samples);
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) total += sum_rate(samples[i].actual, beams[i]);
  return total / static_cast<double>(samples.size());
}

Architecture architecture_for(const TrainConfig& cfg, const ScenarioConfig& scenario) {
  if (cfg.hidden.empty()) return Architecture::standard(scenario.antennas, scenario.users);
  return Architecture{scenario.antennas, scenario.users, cfg.hidden};
}

TrainState train(const TrainConfig& cfg, const ScenarioConfig& scenario,
                 const EpochCallback& on_epoch) {
  cfg.validate();
  scenario.validate();

  TrainState state;
  state.params = NetParams::init(architecture_for(cfg, scenario), cfg.seed);
  state.adam = AdamState::zeros_like(state.params);

  // Channel draws are keyed by the scenario seed; the training seed also
  // selects the stream so two runs with different TrainConfig seeds differ.
  ScenarioConfig draws = scenario;
  draws.seed = stream_key(scenario.seed, cfg.seed, 0, 0);
  const std::vector<CsiSample> validation =
      sample_batch(scenario, cfg.validation_size, Stream::kValidation);

  auto record = [&](int epoch, double train_rate) {
    const double val = mean_sum_rate(state.params, validation);
    if (!std::isfinite(val))
      throw TrainingError("non-finite validation sum rate at epoch " + std::to_string(epoch));
    // Algorithm's ">=" comparison against a best initialized to -infinity.
    if (val >= state.best_sum_rate) {
      state.best_sum_rate = val;
      state.best_params = state.params;
      state.best_epoch = epoch;
    }
    EpochLog row{epoch, train_rate, val, state.best_sum_rate};
    state.log.push_back(row);
    if (on_epoch) on_epoch(row);
  };

  // Epoch 0: the untrained network, its training objective measured on one
  // fresh mini-batch without an update.
  {
    const auto batch = sample_batch(draws, cfg.batch_size, Stream::kTrain, 0);
    BatchLoss l = batch_loss(state.params, batch);
    record(0, -l.value());
  }

  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double train_total = 0.0;
    try {
      for (int b = 0; b < cfg.batches_per_epoch; ++b) {
        ++step;
        const auto batch = sample_batch(draws, cfg.batch_size, Stream::kTrain, step);
        BatchLoss l = batch_loss(state.params, batch);
        if (!std::isfinite(l.value()))
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step));
        std::vector<Tensor> grads = l.gradients();
        adam_step(state.params, state.adam, grads, cfg);
        update_running_stats(state.params, l.stats);
        if (!state.params.all_finite())
          throw TrainingError("parameters became non-finite at epoch " + std::to_string(epoch) +
                              ", step " + std::to_string(step));
        train_total -= l.value();
      }
      record(epoch, train_total / cfg.batches_per_epoch);
    } catch (const TrainingError& e) {
      state.aborted = true;
      state.diagnostic = e.what();
      break;
    } catch (const FactorizationError& e) {
      // A diverged network can feed non-finite dual powers into the solve.
      state.aborted = true;
      state.diagnostic = std::string("epoch ") + std::to_string(epoch) + ": " + e.what();
      break;
    }
    state.epoch = epoch;
    if (epoch - state.best_epoch >= cfg.patience) break;
  }
  return state;
}

}  // namespace robustbf
