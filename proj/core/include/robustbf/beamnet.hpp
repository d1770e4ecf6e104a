#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "robustbf/channel.hpp"
#include "robustbf/tape.hpp"
#include "robustbf/types.hpp"

namespace robustbf {

inline constexpr double kBatchNormMomentum = 0.9;
inline constexpr double kBatchNormEps = 1e-5;

struct Architecture {
  int antennas = 0;
  int users = 0;
  std::vector<int> hidden;  // widths of the hidden layers

  // Five hidden layers of width 20 M K.
  static Architecture standard(int antennas, int users);

  Eigen::Index input_size() const { return 2 * antennas * users + users + 1; }
  Eigen::Index output_size() const { return 2 * users; }
  void validate() const;
  bool operator==(const Architecture&) const = default;
};

// One affine layer. Hidden layers also carry batch-norm scale/shift and
// running statistics; the output layer leaves those empty.
struct DenseLayer {
  Tensor weight;  // fan_in x fan_out
  Tensor bias;    // 1 x fan_out
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;

  bool normalized() const { return gamma.size() != 0; }
};

struct NetParams {
  Architecture arch;
  std::vector<DenseLayer> layers;

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, gamma = 1,
  // beta = 0, running mean 0 and variance 1.
  static NetParams init(const Architecture& arch, std::uint64_t seed);

  // Trainable tensors in a fixed order: per layer W, b and then gamma, beta
  // for hidden layers.
  std::vector<Tensor*> trainables();
  std::vector<const Tensor*> trainables() const;
  std::size_t parameter_count() const;
  bool all_finite() const;
};

enum class Mode { kTrain, kEval };

// Input feature [Re(h_hat); Im(h_hat); eps; P_dB / 30]. Unknown eps entries
// are replaced by the mean of the known ones (0 when none are known).
RowVec build_input(const CsiSample& sample);
Tensor build_inputs(std::span<const CsiSample> samples);

// Eval-mode forward pass (running batch-norm statistics), one row per sample.
Tensor forward_mlp(const Tensor& inputs, const NetParams& params);

// Train-mode forward pass: uses batch statistics and folds them into the
// running statistics of `params`.
Tensor forward_mlp_train(const Tensor& inputs, NetParams& params);

struct PowerSplit {
  RVec p;  // downlink powers
  RVec q;  // dual uplink powers
  double power = 0.0;
};

// p = P softmax(z_p), q = P softmax(z_q) with z = [z_p; z_q].
PowerSplit power_heads(const Eigen::Ref<const RowVec>& z, double power);

// v_k = sqrt(p_k) u_k / ||u_k|| with u_k = (I + sum_j q_j h_j h_j^H)^{-1} h_k,
// sharing one Cholesky factorization across users.
BeamSet construct_beams(const ChannelSet& estimate, const PowerSplit& split);

// Full eval-mode pipeline on one sample or a batch.
BeamSet infer(const NetParams& params, const CsiSample& sample);
std::vector<BeamSet> infer_batch(const NetParams& params, std::span<const CsiSample> samples);

// ---- differentiable pipeline ----------------------------------------------

struct LayerVars {
  ad::Var weight, bias, gamma, beta;
};

// Leaf nodes for every trainable tensor, in NetParams::trainables() order.
struct BoundParams {
  std::vector<LayerVars> layers;
  std::vector<ad::Var> leaves;
};

BoundParams bind_params(ad::Tape& tape, const NetParams& params);

// Train-mode forward on the tape; hidden-layer batch statistics are returned
// through `stats` (one entry per hidden layer) when non-null.
ad::Var forward_mlp(ad::Tape& tape, const BoundParams& bound, const NetParams& params,
                    ad::Var inputs, std::vector<ad::BatchStats>* stats);

// z (B x 2K) -> packed beams (B x 2MK) through the softmax heads and the
// duality-based beam construction.
ad::Var beams_node(ad::Var z, std::span<const CsiSample> samples, int antennas, int users);

void update_running_stats(NetParams& params, const std::vector<ad::BatchStats>& stats);

// Packs one ChannelSet per row.
Tensor pack_channels(std::span<const CsiSample> samples, bool estimate);

// ---- checkpoints ----------------------------------------------------------

// Versioned little-endian binary: magic, version, architecture, then every
// layer's tensors as raw IEEE-754 doubles. Round-trips bit-exactly.
void save_checkpoint(const NetParams& params, const std::string& path);
NetParams load_checkpoint(const std::string& path);
std::string serialize(const NetParams& params);
NetParams deserialize(const std::string& bytes);

}  // namespace robustbf
