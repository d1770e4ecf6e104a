#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "robustbf/beamnet.hpp"
#include "robustbf/channel.hpp"
#include "robustbf/tape.hpp"

namespace robustbf {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 1024;
  int max_epochs = 200;
  int batches_per_epoch = 50;
  std::size_t validation_size = 1000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int patience = 50;  // epochs without a new best before stopping
  std::vector<int> hidden;  // empty: five layers of width 20 M K
  std::uint64_t seed = 1;

  void validate() const;
};

struct AdamState {
  std::vector<Tensor> first;
  std::vector<Tensor> second;
  long step = 0;

  static AdamState zeros_like(const NetParams& params);
};

struct EpochLog {
  int epoch = 0;
  double train_sum_rate = 0.0;
  double val_sum_rate = 0.0;
  double best_sum_rate = 0.0;
};

struct TrainState {
  NetParams params;
  AdamState adam;
  int epoch = 0;
  double best_sum_rate = -std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  NetParams best_params;
  std::vector<EpochLog> log;
  bool aborted = false;
  std::string diagnostic;
};

// The minimized loss -(1/|H|) sum_i R(h_i, V_theta(x_I,i)): the network only
// sees the erroneous CSI while the rate is scored on the actual channel. The
// tape must outlive the returned handles.
struct BatchLoss {
  std::unique_ptr<ad::Tape> tape;
  BoundParams bound;
  ad::Var loss;
  std::vector<ad::BatchStats> stats;

  double value() const { return loss.value()(0, 0); }
  // Runs backward and returns one gradient per trainable tensor.
  std::vector<Tensor> gradients();
};

BatchLoss batch_loss(const NetParams& params, std::span<const CsiSample> batch);

// One bias-corrected Adam update. Throws TrainingError on a non-finite
// gradient, leaving params untouched.
void adam_step(NetParams& params, AdamState& state, const std::vector<Tensor>& grads,
               const TrainConfig& cfg);

// Mean sum rate under eval-mode batch norm, summed in sample order.
double mean_sum_rate(const NetParams& params, std::span<const CsiSample> samples);

using EpochCallback = std::function<void(const EpochLog&)>;

// Validation set is drawn once from Stream::kValidation; mini-batches are
// fresh draws from Stream::kTrain keyed by the global step.
TrainState train(const TrainConfig& cfg, const ScenarioConfig& scenario,
                 const EpochCallback& on_epoch = {});

Architecture architecture_for(const TrainConfig& cfg, const ScenarioConfig& scenario);

}  // namespace robustbf
