#include "robustbf/beamnet.hpp"

#include <cmath>
#include <random>

#include "robustbf/errors.hpp"
#include "robustbf/linalg.hpp"
#include "robustbf/rng.hpp"

namespace robustbf {

namespace {

constexpr double kMinDirectionNorm = 1e-14;
constexpr double kPowerDbScale = 30.0;

void normalize_eval(Tensor& h, const DenseLayer& layer) {
  const RowVec inv_std = (layer.running_var.row(0).array() + kBatchNormEps).rsqrt();
  const RowVec scale = layer.gamma.row(0).cwiseProduct(inv_std);
  const RowVec shift = layer.beta.row(0) - layer.running_mean.row(0).cwiseProduct(scale);
  h = (h * scale.asDiagonal()).rowwise() + shift;
}

}  // namespace

Architecture Architecture::standard(int antennas, int users) {
  return Architecture{antennas, users, std::vector<int>(5, 20 * antennas * users)};
}

void Architecture::validate() const {
  if (antennas < 1 || users < 1) throw ContractError("architecture: M and K must be >= 1");
  for (int w : hidden)
    if (w < 1) throw ContractError("architecture: hidden widths must be >= 1");
}

NetParams NetParams::init(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  NetParams params;
  params.arch = arch;
  Engine rng = make_engine(seed, Stream::kInit);
  Eigen::Index fan_in = arch.input_size();
  const std::size_t n_layers = arch.hidden.size() + 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const bool hidden = l + 1 < n_layers;
    const Eigen::Index fan_out = hidden ? arch.hidden[l] : arch.output_size();
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> unif(-bound, bound);
    DenseLayer layer;
    layer.weight.resize(fan_in, fan_out);
    for (Eigen::Index i = 0; i < fan_in; ++i)
      for (Eigen::Index j = 0; j < fan_out; ++j) layer.weight(i, j) = unif(rng);
    layer.bias = Tensor::Zero(1, fan_out);
    if (hidden) {
      layer.gamma = Tensor::Ones(1, fan_out);
      layer.beta = Tensor::Zero(1, fan_out);
      layer.running_mean = Tensor::Zero(1, fan_out);
      layer.running_var = Tensor::Ones(1, fan_out);
    }
    params.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return params;
}

std::vector<Tensor*> NetParams::trainables() {
  std::vector<Tensor*> out;
  for (DenseLayer& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
    if (l.normalized()) {
      out.push_back(&l.gamma);
      out.push_back(&l.beta);
    }
  }
  return out;
}

std::vector<const Tensor*> NetParams::trainables() const {
  std::vector<const Tensor*> out;
  for (Tensor* t : const_cast<NetParams*>(this)->trainables()) out.push_back(t);
  return out;
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : trainables()) n += static_cast<std::size_t>(t->size());
  return n;
}

bool NetParams::all_finite() const {
  for (const DenseLayer& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    if (l.normalized() && (!l.gamma.allFinite() || !l.beta.allFinite() ||
                           !l.running_mean.allFinite() || !l.running_var.allFinite()))
      return false;
  }
  return true;
}

RowVec build_input(const CsiSample& sample) {
  const Eigen::Index m = sample.estimate.rows();
  const Eigen::Index k = sample.estimate.cols();
  if (sample.error_var.size() != k || static_cast<Eigen::Index>(sample.known.size()) != k)
    throw ContractError("build_input: error statistics do not match the user count");
  RowVec x(2 * m * k + k + 1);
  for (Eigen::Index u = 0; u < k; ++u)
    for (Eigen::Index a = 0; a < m; ++a) {
      x(u * m + a) = sample.estimate(a, u).real();
      x(m * k + u * m + a) = sample.estimate(a, u).imag();
    }
  double known_sum = 0.0;
  int known_count = 0;
  for (Eigen::Index u = 0; u < k; ++u)
    if (sample.known[static_cast<std::size_t>(u)]) {
      known_sum += sample.error_var(u);
      ++known_count;
    }
  const double fill = known_count > 0 ? known_sum / known_count : 0.0;
  for (Eigen::Index u = 0; u < k; ++u)
    x(2 * m * k + u) = sample.known[static_cast<std::size_t>(u)] ? sample.error_var(u) : fill;
  x(2 * m * k + k) = 10.0 * std::log10(sample.power) / kPowerDbScale;
  return x;
}

Tensor build_inputs(std::span<const CsiSample> samples) {
  if (samples.empty()) throw ContractError("build_inputs: empty batch");
  const RowVec first = build_input(samples.front());
  Tensor x(static_cast<Eigen::Index>(samples.size()), first.size());
  x.row(0) = first;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    RowVec row = build_input(samples[i]);
    if (row.size() != x.cols()) throw ContractError("build_inputs: mixed sample shapes");
    x.row(static_cast<Eigen::Index>(i)) = row;
  }
  return x;
}

Tensor forward_mlp(const Tensor& inputs, const NetParams& params) {
  if (inputs.cols() != params.arch.input_size())
    throw ContractError("forward_mlp: input width " + std::to_string(inputs.cols()) +
                        " does not match architecture " + std::to_string(params.arch.input_size()));
  Tensor h = inputs;
  for (const DenseLayer& layer : params.layers) {
    Tensor next;
    next.noalias() = h * layer.weight;
    next.rowwise() += layer.bias.row(0);
    if (layer.normalized()) {
      normalize_eval(next, layer);
      next = next.cwiseMax(0.0);
    }
    h = std::move(next);
  }
  return h;
}

Tensor forward_mlp_train(const Tensor& inputs, NetParams& params) {
  ad::Tape tape;
  BoundParams bound = bind_params(tape, params);
  std::vector<ad::BatchStats> stats;
  ad::Var z = forward_mlp(tape, bound, params, tape.constant(inputs), &stats);
  update_running_stats(params, stats);
  return z.value();
}

PowerSplit power_heads(const Eigen::Ref<const RowVec>& z, double power) {
  if (z.size() % 2 != 0) throw ContractError("power_heads: output length must be 2K");
  if (!(power > 0.0)) throw ContractError("power_heads: power budget must be > 0");
  const Eigen::Index k = z.size() / 2;
  auto softmax = [](const RowVec& x) {
    RVec e = (x.array() - x.maxCoeff()).exp().transpose();
    return RVec(e / e.sum());
  };
  return PowerSplit{power * softmax(z.head(k)), power * softmax(z.tail(k)), power};
}

BeamSet construct_beams(const ChannelSet& estimate, const PowerSplit& split) {
  const Eigen::Index k = estimate.cols();
  if (split.p.size() != k || split.q.size() != k)
    throw ContractError("construct_beams: power vectors do not match the user count");
  if ((split.q.array() < 0.0).any() || (split.p.array() < 0.0).any())
    throw ContractError("construct_beams: negative power");
  const Cholesky chol(weighted_gram(estimate, split.q));
  BeamSet v = chol.solve(CMat(estimate));
  for (Eigen::Index u = 0; u < k; ++u) {
    const double n = v.col(u).norm();
    if (n < kMinDirectionNorm)
      throw DegenerateChannelError("construct_beams: vanishing direction for user " +
                                   std::to_string(u));
    v.col(u) *= std::sqrt(split.p(u)) / n;
  }
  return v;
}

BeamSet infer(const NetParams& params, const CsiSample& sample) {
  const Tensor x = build_input(sample);
  const Tensor z = forward_mlp(x, params);
  return construct_beams(sample.estimate, power_heads(z.row(0), sample.power));
}

std::vector<BeamSet> infer_batch(const NetParams& params, std::span<const CsiSample> samples) {
  const Tensor z = forward_mlp(build_inputs(samples), params);
  std::vector<BeamSet> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    out.push_back(construct_beams(samples[i].estimate,
                                  power_heads(z.row(static_cast<Eigen::Index>(i)), samples[i].power)));
  return out;
}

BoundParams bind_params(ad::Tape& tape, const NetParams& params) {
  BoundParams bound;
  for (const DenseLayer& l : params.layers) {
    LayerVars vars;
    vars.weight = tape.leaf(l.weight);
    vars.bias = tape.leaf(l.bias);
    bound.leaves.push_back(vars.weight);
    bound.leaves.push_back(vars.bias);
    if (l.normalized()) {
      vars.gamma = tape.leaf(l.gamma);
      vars.beta = tape.leaf(l.beta);
      bound.leaves.push_back(vars.gamma);
      bound.leaves.push_back(vars.beta);
    }
    bound.layers.push_back(vars);
  }
  return bound;
}

ad::Var forward_mlp(ad::Tape&, const BoundParams& bound, const NetParams& params, ad::Var inputs,
                    std::vector<ad::BatchStats>* stats) {
  if (inputs.cols() != params.arch.input_size())
    throw ContractError("forward_mlp: input width does not match architecture");
  if (stats) stats->clear();
  ad::Var h = inputs;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LayerVars& v = bound.layers[l];
    h = ad::add_bias(ad::matmul(h, v.weight), v.bias);
    if (params.layers[l].normalized()) {
      ad::BatchStats s;
      h = ad::relu(ad::batch_norm(h, v.gamma, v.beta, kBatchNormEps, &s));
      if (stats) stats->push_back(std::move(s));
    }
  }
  return h;
}

Tensor pack_channels(std::span<const CsiSample> samples, bool estimate) {
  if (samples.empty()) throw ContractError("pack_channels: empty batch");
  const ChannelSet& first = estimate ? samples.front().estimate : samples.front().actual;
  Tensor out(static_cast<Eigen::Index>(samples.size()), 2 * first.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    pack_columns(estimate ? samples[i].estimate : samples[i].actual,
                 out.row(static_cast<Eigen::Index>(i)));
  return out;
}

ad::Var beams_node(ad::Var z, std::span<const CsiSample> samples, int antennas, int users) {
  if (z.cols() != 2 * users || z.rows() != static_cast<Eigen::Index>(samples.size()))
    throw ContractError("beams_node: network output shape mismatch");
  ad::Tape& tape = *z.tape();
  RVec budget(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) budget(static_cast<Eigen::Index>(i)) = samples[i].power;

  ad::Var p = ad::scale_rows(ad::softmax_rows(ad::slice_cols(z, 0, users)), budget);
  ad::Var q = ad::scale_rows(ad::softmax_rows(ad::slice_cols(z, users, users)), budget);

  const Tensor estimate = pack_channels(samples, true);
  ad::Var gram = ad::hermitian_gram(q, estimate, antennas);
  ad::Var directions = ad::hermitian_solve(gram, tape.constant(estimate), antennas);
  ad::Var norms = ad::group_norm(directions, antennas);
  if ((norms.value().array() < kMinDirectionNorm).any())
    throw DegenerateChannelError("beams_node: vanishing beam direction");
  ad::Var gains = ad::div(ad::sqrt(p), norms);
  return ad::group_scale(directions, gains, antennas);
}

void update_running_stats(NetParams& params, const std::vector<ad::BatchStats>& stats) {
  std::size_t s = 0;
  for (DenseLayer& l : params.layers) {
    if (!l.normalized()) continue;
    if (s >= stats.size()) throw ContractError("update_running_stats: missing batch statistics");
    l.running_mean.row(0) = kBatchNormMomentum * l.running_mean.row(0) +
                            (1.0 - kBatchNormMomentum) * stats[s].mean;
    l.running_var.row(0) = kBatchNormMomentum * l.running_var.row(0) +
                           (1.0 - kBatchNormMomentum) * stats[s].var;
    ++s;
  }
}

}  // namespace robustbf
