#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "robustbf/baselines.hpp"
#include "robustbf/beamnet.hpp"
#include "robustbf/errors.hpp"
#include "robustbf/training.hpp"
#include "test_support.hpp"

namespace robustbf {
namespace {

using testing::random_cmat;

CsiSample make_sample(const ChannelSet& estimate, const RVec& eps, double power_db) {
  CsiSample s;
  s.actual = estimate;
  s.estimate = estimate;
  s.error_var = eps;
  s.power_db = power_db;
  s.power = db_to_linear(power_db);
  s.known.assign(static_cast<std::size_t>(estimate.cols()), true);
  return s;
}

// Weights drawn wider than the default init so the heads are far from uniform.
NetParams random_params(const Architecture& arch, std::mt19937_64& rng) {
  NetParams p = NetParams::init(arch, rng());
  std::normal_distribution<double> n(0.0, 1.0);
  for (Tensor* t : p.trainables())
    for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] = n(rng);
  for (DenseLayer& l : p.layers)
    if (l.normalized()) {
      for (Eigen::Index i = 0; i < l.running_mean.size(); ++i) {
        l.running_mean.data()[i] = n(rng);
        l.running_var.data()[i] = 0.5 + std::abs(n(rng));
      }
    }
  return p;
}

TEST(BuildInput, SingleUserAssembly) {
  ChannelSet h(1, 1);
  h << cdouble(1, 2);
  const RowVec x = build_input(make_sample(h, RVec::Constant(1, 0.1), 10.0));
  ASSERT_EQ(x.size(), 4);
  EXPECT_EQ(x(0), 1.0);
  EXPECT_EQ(x(1), 2.0);
  EXPECT_EQ(x(2), 0.1);
  EXPECT_NEAR(x(3), 1.0 / 3.0, 1e-15);
}

TEST(BuildInput, LengthForFourByFour) {
  std::mt19937_64 rng(1);
  const RowVec x = build_input(make_sample(random_cmat(4, 4, rng), RVec::Ones(4), 0.0));
  EXPECT_EQ(x.size(), 37);
  EXPECT_EQ(Architecture::standard(4, 4).input_size(), 37);
}

TEST(BuildInput, LayoutIsRealBlockThenImaginaryBlock) {
  std::mt19937_64 rng(2);
  const ChannelSet h = random_cmat(3, 2, rng);
  RVec eps(2);
  eps << 0.3, 0.7;
  const RowVec x = build_input(make_sample(h, eps, 20.0));
  for (Eigen::Index k = 0; k < 2; ++k)
    for (Eigen::Index m = 0; m < 3; ++m) {
      EXPECT_EQ(x(k * 3 + m), h(m, k).real());
      EXPECT_EQ(x(6 + k * 3 + m), h(m, k).imag());
    }
  EXPECT_EQ(x(12), 0.3);
  EXPECT_EQ(x(13), 0.7);
  EXPECT_NEAR(x(14), 20.0 / 30.0, 1e-15);
}

TEST(BuildInput, MaskingChangesOnlyErrorSlots) {
  std::mt19937_64 rng(3);
  RVec eps(4);
  eps << 0.1, 0.2, 0.3, 0.6;
  CsiSample full = make_sample(random_cmat(4, 4, rng), eps, 15.0);
  CsiSample none = full;
  none.known.assign(4, false);
  CsiSample some = full;
  some.known = {true, false, false, true};
  const RowVec a = build_input(full);
  const RowVec b = build_input(none);
  const RowVec c = build_input(some);
  EXPECT_EQ(a.head(32), b.head(32));
  EXPECT_EQ(a(36), b(36));
  EXPECT_NE(a.segment(32, 4), b.segment(32, 4));
  EXPECT_EQ(b.segment(32, 4), RowVec::Zero(4));
  // unknown entries take the mean of the known ones
  EXPECT_EQ(c(32), 0.1);
  EXPECT_NEAR(c(33), 0.35, 1e-15);
  EXPECT_NEAR(c(34), 0.35, 1e-15);
  EXPECT_EQ(c(35), 0.6);
}

TEST(NetParams, ArchitectureAndInitialization) {
  const Architecture arch = Architecture::standard(4, 4);
  EXPECT_EQ(arch.hidden, std::vector<int>(5, 320));
  const NetParams p = NetParams::init(arch, 9);
  ASSERT_EQ(p.layers.size(), 6u);
  EXPECT_EQ(p.layers.back().weight.cols(), 8);
  EXPECT_FALSE(p.layers.back().normalized());
  Eigen::Index fan_in = 37;
  for (const DenseLayer& l : p.layers) {
    EXPECT_LE(l.weight.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(static_cast<double>(fan_in)));
    EXPECT_EQ(l.bias, Tensor::Zero(1, l.weight.cols()));
    if (l.normalized()) {
      EXPECT_EQ(l.gamma, Tensor::Ones(1, l.weight.cols()));
      EXPECT_EQ(l.beta, Tensor::Zero(1, l.weight.cols()));
      EXPECT_EQ(l.running_mean, Tensor::Zero(1, l.weight.cols()));
      EXPECT_EQ(l.running_var, Tensor::Ones(1, l.weight.cols()));
    }
    fan_in = l.weight.cols();
  }
  EXPECT_TRUE(p.all_finite());
  EXPECT_EQ(NetParams::init(arch, 9).layers[2].weight, p.layers[2].weight);
  EXPECT_NE(NetParams::init(arch, 10).layers[2].weight, p.layers[2].weight);
}

TEST(ForwardMlp, ZeroNetworkOutputsZero) {
  NetParams p = NetParams::init(Architecture{2, 2, {16, 16}}, 1);
  for (DenseLayer& l : p.layers) l.weight.setZero();
  std::mt19937_64 rng(4);
  const Tensor z = forward_mlp(testing::random_tensor(5, 11, rng), p);
  EXPECT_EQ(z, Tensor::Zero(5, 4));
}

TEST(ForwardMlp, HandComputedSingleHiddenUnit) {
  NetParams p = NetParams::init(Architecture{1, 1, {1}}, 1);
  DenseLayer& hidden = p.layers[0];
  hidden.weight << 1.0, 0.0, 0.0, 0.0;  // selects Re(h)
  hidden.bias << 0.0;
  hidden.gamma << 2.0;
  hidden.beta << 0.5;
  hidden.running_mean << 0.25;
  hidden.running_var << 4.0;
  DenseLayer& out = p.layers[1];
  out.weight << 1.0, -1.0;
  out.bias << 0.1, 0.2;

  Tensor x(2, 4);
  x << 3.0, 9.0, 9.0, 9.0,   // positive pre-activation
      -5.0, 9.0, 9.0, 9.0;   // clipped by ReLU
  const Tensor z = forward_mlp(x, p);
  const double a = std::max(0.0, 2.0 * (3.0 - 0.25) / std::sqrt(4.0 + 1e-5) + 0.5);
  EXPECT_NEAR(z(0, 0), a + 0.1, 1e-15);
  EXPECT_NEAR(z(0, 1), -a + 0.2, 1e-15);
  EXPECT_NEAR(z(1, 0), 0.1, 1e-15);
  EXPECT_NEAR(z(1, 1), 0.2, 1e-15);
}

TEST(ForwardMlp, EvalModeIsBatchSizeIndependent) {
  std::mt19937_64 rng(5);
  const NetParams p = random_params(Architecture{2, 2, {32, 32}}, rng);
  const Tensor batch = testing::random_tensor(64, 11, rng);
  const Tensor all = forward_mlp(batch, p);
  for (Eigen::Index i : {0, 17, 63}) {
    const Tensor single = forward_mlp(Tensor(batch.row(i)), p);
    EXPECT_LE((single.row(0) - all.row(i)).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_EQ(forward_mlp(batch, p), all);
}

TEST(ForwardMlp, TrainModeMatchesEvalModeWithBatchStatistics) {
  std::mt19937_64 rng(6);
  NetParams p = random_params(Architecture{2, 2, {8, 8}}, rng);
  const Tensor x = testing::random_tensor(32, 11, rng);
  ad::Tape t;
  const BoundParams bound = bind_params(t, p);
  std::vector<ad::BatchStats> stats;
  const Tensor train = forward_mlp(t, bound, p, t.constant(x), &stats).value();
  ASSERT_EQ(stats.size(), 2u);
  NetParams frozen = p;
  for (std::size_t l = 0; l < 2; ++l) {
    frozen.layers[l].running_mean.row(0) = stats[l].mean;
    frozen.layers[l].running_var.row(0) = stats[l].var;
  }
  EXPECT_LE((forward_mlp(x, frozen) - train).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ForwardMlp, TrainModeUpdatesRunningStatistics) {
  std::mt19937_64 rng(7);
  NetParams p = NetParams::init(Architecture{1, 1, {3}}, 1);
  const Tensor x = testing::random_tensor(10, 4, rng);
  const Tensor pre = (x * p.layers[0].weight).rowwise() + p.layers[0].bias.row(0);
  const RowVec mean = pre.colwise().mean();
  const RowVec var = (pre.rowwise() - mean).cwiseAbs2().colwise().mean();
  forward_mlp_train(x, p);
  EXPECT_LE((p.layers[0].running_mean.row(0) - 0.1 * mean).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((p.layers[0].running_var.row(0) - (0.9 * RowVec::Ones(3) + 0.1 * var)).cwiseAbs().maxCoeff(),
            1e-14);
}

TEST(ForwardMlp, RejectsWrongInputWidth) {
  const NetParams p = NetParams::init(Architecture{2, 2, {4}}, 1);
  EXPECT_THROW(forward_mlp(Tensor::Zero(1, 10), p), ContractError);
}

TEST(PowerHeads, ZeroLogitsSplitEvenly) {
  const PowerSplit s = power_heads(RowVec::Zero(4), 4.0);
  EXPECT_EQ(s.p, RVec::Constant(2, 2.0));
  EXPECT_EQ(s.q, RVec::Constant(2, 2.0));
}

TEST(PowerHeads, SaturatedLogitTakesWholeBudget) {
  RowVec z(4);
  z << 1000.0, 0.0, 0.0, 0.0;
  const PowerSplit s = power_heads(z, 10.0);
  EXPECT_TRUE(s.p.allFinite());
  EXPECT_NEAR(s.p(0), 10.0, 1e-12);
  EXPECT_NEAR(s.p(1), 0.0, 1e-12);
}

TEST(PowerHeads, BudgetsAreExactForAnyLogits) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 20.0);
  for (int trial = 0; trial < 1000; ++trial) {
    RowVec z(8);
    for (Eigen::Index i = 0; i < 8; ++i) z(i) = n(rng);
    const double power = db_to_linear(std::uniform_real_distribution<double>(0, 30)(rng));
    const PowerSplit s = power_heads(z, power);
    EXPECT_NEAR(s.p.sum(), power, 1e-9 * power);
    EXPECT_NEAR(s.q.sum(), power, 1e-9 * power);
    EXPECT_GE(s.p.minCoeff(), 0.0);
    EXPECT_GE(s.q.minCoeff(), 0.0);
  }
}

TEST(ConstructBeams, SingleUserReducesToMaximumRatio) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const ChannelSet h = random_cmat(4, 1, rng);
    PowerSplit s{RVec::Constant(1, 7.0), RVec::Constant(1, 3.5), 7.0};
    const BeamSet v = construct_beams(h, s);
    EXPECT_LE((v - mrt(h, 7.0)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ConstructBeams, ZeroDualPowerGivesMatchedFilterDirections) {
  std::mt19937_64 rng(10);
  const ChannelSet h = random_cmat(4, 3, rng);
  RVec p(3);
  p << 1.0, 2.0, 3.0;
  const BeamSet v = construct_beams(h, PowerSplit{p, RVec::Zero(3), 6.0});
  for (Eigen::Index k = 0; k < 3; ++k) {
    const CVec expected = h.col(k) / h.col(k).norm();
    EXPECT_LE((v.col(k) / std::sqrt(p(k)) - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ConstructBeams, MatchesExplicitInverseOracle) {
  std::mt19937_64 rng(11);
  RVec q(2);
  q << 1.0, 2.0;
  RVec p(2);
  p << 0.75, 2.25;
  for (int trial = 0; trial < 20; ++trial) {
    const ChannelSet h = random_cmat(2, 2, rng);
    CMat a = CMat::Identity(2, 2);
    for (Eigen::Index j = 0; j < 2; ++j) a += q(j) * h.col(j) * h.col(j).adjoint();
    const CMat inv = testing::adjugate_inverse_2x2(a);
    const BeamSet v = construct_beams(h, PowerSplit{p, q, 3.0});
    for (Eigen::Index k = 0; k < 2; ++k) {
      const CVec u = inv * h.col(k);
      EXPECT_LE((v.col(k) - std::sqrt(p(k)) * u / u.norm()).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(ConstructBeams, RejectsVanishingChannel) {
  ChannelSet h = ChannelSet::Zero(2, 2);
  h(0, 0) = 1.0;
  EXPECT_THROW(construct_beams(h, PowerSplit{RVec::Ones(2), RVec::Ones(2), 2.0}),
               DegenerateChannelError);
}

TEST(ConstructBeams, RejectsNegativePower) {
  const ChannelSet h = ChannelSet::Identity(2, 2);
  RVec q(2);
  q << 1.0, -0.5;
  EXPECT_THROW(construct_beams(h, PowerSplit{RVec::Ones(2), q, 2.0}), ContractError);
}

TEST(Infer, SumPowerEqualsBudgetForRandomNetworks) {
  std::mt19937_64 rng(12);
  double worst = 0.0;
  for (int m : {2, 4}) {
    ScenarioConfig cfg;
    cfg.antennas = m;
    cfg.users = m;
    for (int net = 0; net < 10; ++net) {
      const NetParams p = random_params(Architecture{m, m, {16, 16}}, rng);
      cfg.seed = rng();
      const auto samples = sample_batch(cfg, 500, Stream::kTest);
      const auto beams = infer_batch(p, samples);
      for (std::size_t i = 0; i < samples.size(); ++i)
        worst = std::max(worst, std::abs(beams[i].squaredNorm() - samples[i].power) / samples[i].power);
    }
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(Infer, SingleUserCollapsesToFullPowerMaximumRatio) {
  std::mt19937_64 rng(13);
  ScenarioConfig cfg;
  cfg.antennas = 4;
  cfg.users = 1;
  const auto samples = sample_batch(cfg, 50, Stream::kTest);
  for (int net = 0; net < 5; ++net) {
    const NetParams p = random_params(Architecture{4, 1, {8}}, rng);
    for (const CsiSample& s : samples)
      EXPECT_LE((infer(p, s) - mrt(s.estimate, s.power)).cwiseAbs().maxCoeff(), 1e-10 * std::sqrt(s.power));
  }
}

TEST(Infer, BatchAndSingleAgree) {
  std::mt19937_64 rng(14);
  const NetParams p = random_params(Architecture{2, 2, {8, 8}}, rng);
  ScenarioConfig cfg;
  cfg.antennas = 2;
  cfg.users = 2;
  const auto samples = sample_batch(cfg, 20, Stream::kTest);
  const auto batch = infer_batch(p, samples);
  for (std::size_t i = 0; i < samples.size(); ++i)
    EXPECT_LE((infer(p, samples[i]) - batch[i]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BeamsNode, MatchesPlainConstruction) {
  std::mt19937_64 rng(15);
  ScenarioConfig cfg;
  cfg.antennas = 3;
  cfg.users = 2;
  const auto samples = sample_batch(cfg, 6, Stream::kTest);
  const Tensor z = testing::random_tensor(6, 4, rng);
  ad::Tape t;
  const Tensor v = beams_node(t.constant(z), samples, 3, 2).value();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const BeamSet expected = construct_beams(samples[i].estimate, power_heads(z.row(r), samples[i].power));
    EXPECT_LE((unpack_columns(v.row(r), 3, 2) - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(EndToEnd, ParameterGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(16);
  ScenarioConfig cfg;
  cfg.antennas = 2;
  cfg.users = 2;
  cfg.seed = 5;
  const auto batch = sample_batch(cfg, 8, Stream::kTrain);
  const NetParams params = NetParams::init(Architecture{2, 2, {8, 8}}, 3);

  BatchLoss l = batch_loss(params, batch);
  const std::vector<Tensor> grads = l.gradients();
  const std::size_t n_tensors = params.trainables().size();
  ASSERT_EQ(grads.size(), n_tensors);
  for (std::size_t i = 0; i < n_tensors; ++i) {
    auto f = [&](const Tensor& value) {
      NetParams shifted = params;
      *shifted.trainables()[i] = value;
      return batch_loss(shifted, batch).value();
    };
    const Tensor fd = testing::finite_difference(f, *params.trainables()[i]);
    EXPECT_LE(testing::gradient_error(grads[i], fd), 1e-4) << "tensor " << i;
  }
}

TEST(Checkpoint, SerializationRoundTripsBitExactly) {
  std::mt19937_64 rng(17);
  const NetParams p = random_params(Architecture{3, 2, {7, 5, 4}}, rng);
  const std::string bytes = serialize(p);
  const NetParams q = deserialize(bytes);
  EXPECT_EQ(q.arch, p.arch);
  ASSERT_EQ(q.layers.size(), p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    EXPECT_EQ(q.layers[l].weight, p.layers[l].weight);
    EXPECT_EQ(q.layers[l].bias, p.layers[l].bias);
    EXPECT_EQ(q.layers[l].gamma, p.layers[l].gamma);
    EXPECT_EQ(q.layers[l].beta, p.layers[l].beta);
    EXPECT_EQ(q.layers[l].running_mean, p.layers[l].running_mean);
    EXPECT_EQ(q.layers[l].running_var, p.layers[l].running_var);
  }
  EXPECT_EQ(serialize(q), bytes);
}

TEST(Checkpoint, PreservesSpecialValuesBitwise) {
  NetParams p = NetParams::init(Architecture{1, 1, {2}}, 1);
  p.layers[0].weight(0, 0) = -0.0;
  p.layers[0].weight(1, 0) = 5e-324;
  p.layers[0].weight(2, 0) = 0.1 + 0.2;
  const NetParams q = deserialize(serialize(p));
  for (Eigen::Index i = 0; i < 3; ++i)
    EXPECT_EQ(std::bit_cast<std::uint64_t>(q.layers[0].weight(i, 0)),
              std::bit_cast<std::uint64_t>(p.layers[0].weight(i, 0)));
}

TEST(Checkpoint, FileRoundTrip) {
  const NetParams p = NetParams::init(Architecture{2, 2, {6}}, 4);
  const std::filesystem::path path = std::filesystem::temp_directory_path() / "robustbf_ckpt_test.bin";
  save_checkpoint(p, path.string());
  const NetParams q = load_checkpoint(path.string());
  EXPECT_EQ(serialize(q), serialize(p));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path.string()), CheckpointError);
}

TEST(Checkpoint, RejectsCorruptInput) {
  const std::string bytes = serialize(NetParams::init(Architecture{2, 2, {6}}, 4));
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize(bad_magic), CheckpointError);
  EXPECT_THROW(deserialize(bytes.substr(0, bytes.size() - 3)), CheckpointError);
  EXPECT_THROW(deserialize(bytes + "x"), CheckpointError);
  EXPECT_THROW(deserialize(""), CheckpointError);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(deserialize(bad_version), CheckpointError);
}

}  // namespace
}  // namespace robustbf
