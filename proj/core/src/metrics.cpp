#include "robustbf/metrics.hpp"

#include <cmath>
#include <vector>

#include "robustbf/errors.hpp"

namespace robustbf {

namespace {

void check_dims(const ChannelSet& channels, const BeamSet& beams) {
  if (channels.rows() != beams.rows() || channels.cols() != beams.cols())
    throw ContractError("rate: channel and beam sets have different shapes");
}

}  // namespace

double user_rate(const CVec& channel, const BeamSet& beams, Eigen::Index user) {
  if (channel.size() != beams.rows()) throw ContractError("user_rate: antenna count mismatch");
  if (user < 0 || user >= beams.cols()) throw ContractError("user_rate: user index out of range");
  double signal = 0.0;
  double interference = 0.0;
  for (Eigen::Index j = 0; j < beams.cols(); ++j) {
    const double gain = std::norm(channel.dot(beams.col(j)));  // dot conjugates the left side
    (j == user ? signal : interference) += gain;
  }
  return std::log2(1.0 + signal / (interference + 1.0));
}

RateReport rate_report(const ChannelSet& channels, const BeamSet& beams) {
  check_dims(channels, beams);
  const Eigen::Index users = channels.cols();
  const CMat c = channels.adjoint() * beams;
  RateReport r{RVec(users), RVec(users), 0.0};
  for (Eigen::Index k = 0; k < users; ++k) {
    double interference = 0.0;
    for (Eigen::Index j = 0; j < users; ++j)
      if (j != k) interference += std::norm(c(k, j));
    r.sinr(k) = std::norm(c(k, k)) / (interference + 1.0);
    r.user_rate(k) = std::log2(1.0 + r.sinr(k));
  }
  r.sum_rate = r.user_rate.sum();
  return r;
}

double sum_rate(const ChannelSet& channels, const BeamSet& beams) {
  return rate_report(channels, beams).sum_rate;
}

ad::Var sum_rate_node(ad::Var beams, const Tensor& channels, Eigen::Index antennas) {
  if (antennas <= 0 || beams.cols() % (2 * antennas) != 0)
    throw ContractError("sum_rate_node: beam width is not a multiple of 2M");
  const Eigen::Index users = beams.cols() / (2 * antennas);
  ad::Var gains = ad::cross_gain(beams, channels, antennas);  // B x K^2, row-major in (k, j)

  std::vector<Eigen::Index> diagonal;
  for (Eigen::Index k = 0; k < users; ++k) diagonal.push_back(k * users + k);
  ad::Var signal = ad::gather_cols(gains, diagonal);
  ad::Var interference = ad::sub(ad::group_sum(gains, users), signal);
  ad::Var sinr = ad::div(signal, ad::add_scalar(interference, 1.0));
  ad::Var rates = ad::scale(ad::log(ad::add_scalar(sinr, 1.0)), 1.0 / kLn2);
  return ad::sum_rows(rates);
}

}  // namespace robustbf
