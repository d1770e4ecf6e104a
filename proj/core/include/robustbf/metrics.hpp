#pragma once

#include "robustbf/tape.hpp"
#include "robustbf/types.hpp"

namespace robustbf {

// Noise variance is fixed at 1 throughout, so the transmit SNR equals P.
struct RateReport {
  RVec user_rate;  // bits/s/Hz
  RVec sinr;       // linear
  double sum_rate = 0.0;
};

// log2(1 + |h_k^H v_k|^2 / (sum_{j != k} |h_k^H v_j|^2 + 1))
double user_rate(const CVec& channel, const BeamSet& beams, Eigen::Index user);
double sum_rate(const ChannelSet& channels, const BeamSet& beams);
RateReport rate_report(const ChannelSet& channels, const BeamSet& beams);

// Differentiable sum rate. `beams` is B x 2MK in the packed column layout,
// `channels` the matching constant actual channels. Returns B x 1.
ad::Var sum_rate_node(ad::Var beams, const Tensor& channels, Eigen::Index antennas);

}  // namespace robustbf
