#pragma once

#include <vector>

#include "robustbf/types.hpp"

namespace robustbf {

enum class RzfLoading {
  kPlain,   // beta = K / P
  kRobust,  // beta = K (1 + mean(eps)) / P
};

struct BaselineConfig {
  int wmmse_max_iterations = 200;
  double wmmse_tolerance = 1e-5;     // bits/s/Hz change between iterations
  double bisection_tolerance = 1e-9;  // relative to P
  RzfLoading rzf_loading = RzfLoading::kRobust;

  void validate() const;
};

// v_k = sqrt(P/K) h_k / ||h_k||
BeamSet mrt(const ChannelSet& estimate, double power);

// Normalized columns of the pseudo-inverse of the stacked K x M channel
// matrix, P/K per user. Requires K <= M and full row rank.
BeamSet zf(const ChannelSet& estimate, double power);

double rzf_loading(int users, double power, const RVec& error_var, RzfLoading mode);

// Directions (sum_j h_j h_j^H + beta I)^{-1} h_k normalized, P/K per user.
BeamSet rzf(const ChannelSet& estimate, double power, const RVec& error_var,
            RzfLoading mode = RzfLoading::kRobust);
BeamSet rzf_with_loading(const ChannelSet& estimate, double power, double loading);

struct WmmseResult {
  BeamSet beams;
  std::vector<double> sum_rates;  // one per iterate, starting with the MRT start
  int iterations = 0;
  bool converged = false;  // false: stopped at the iteration cap
};

// Iterative WMMSE started from MRT. Each iteration alternates MMSE receivers,
// MSE weights and the transmit update whose multiplier mu >= 0 is found by
// bisection so that sum ||v_k||^2 = P. Returns the best iterate.
WmmseResult wmmse(const ChannelSet& channels, double power, const BaselineConfig& cfg = {});

}  // namespace robustbf
