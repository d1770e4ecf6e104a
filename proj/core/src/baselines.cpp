#include "robustbf/baselines.hpp"

#include <cmath>
#include <string>

#include "robustbf/errors.hpp"
#include "robustbf/linalg.hpp"
#include "robustbf/metrics.hpp"

namespace robustbf {

namespace {

constexpr double kMinChannelNorm = 1e-14;
constexpr int kMaxBracketDoublings = 200;
constexpr int kMaxBisectionSteps = 200;

void check_power(double power, const char* who) {
  if (!(power > 0.0)) throw ContractError(std::string(who) + ": power budget must be > 0");
}

// Scales each column to unit norm, then to P/K.
BeamSet equal_power(CMat directions, double power) {
  const double per_user = std::sqrt(power / static_cast<double>(directions.cols()));
  for (Eigen::Index k = 0; k < directions.cols(); ++k) {
    const double n = directions.col(k).norm();
    if (n < kMinChannelNorm)
      throw DegenerateChannelError("vanishing beam direction for user " + std::to_string(k));
    directions.col(k) *= per_user / n;
  }
  return directions;
}

double total_power(const CMat& v) { return v.squaredNorm(); }

}  // namespace

void BaselineConfig::validate() const {
  if (wmmse_max_iterations < 1) throw ConfigError("WMMSE iteration cap must be >= 1");
  if (!(wmmse_tolerance > 0.0)) throw ConfigError("WMMSE tolerance must be > 0");
  if (!(bisection_tolerance > 0.0)) throw ConfigError("bisection tolerance must be > 0");
}

BeamSet mrt(const ChannelSet& estimate, double power) {
  check_power(power, "mrt");
  return equal_power(estimate, power);
}

BeamSet zf(const ChannelSet& estimate, double power) {
  check_power(power, "zf");
  if (estimate.cols() > estimate.rows())
    throw SolverError("zf: more users than antennas, channel matrix cannot have full row rank");
  const CMat gram = estimate.adjoint() * estimate;
  CMat directions;
  try {
    // pinv(H^H) = H (H^H H)^{-1}
    directions = estimate * Cholesky(gram).solve(CMat(CMat::Identity(gram.rows(), gram.cols())));
  } catch (const FactorizationError& e) {
    throw SolverError(std::string("zf: rank-deficient channel matrix (") + e.what() + ")");
  }
  return equal_power(std::move(directions), power);
}

double rzf_loading(int users, double power, const RVec& error_var, RzfLoading mode) {
  check_power(power, "rzf");
  const double k = static_cast<double>(users);
  if (mode == RzfLoading::kPlain || error_var.size() == 0) return k / power;
  return k * (1.0 + error_var.mean()) / power;
}

BeamSet rzf_with_loading(const ChannelSet& estimate, double power, double loading) {
  check_power(power, "rzf");
  if (!(loading > 0.0)) throw ContractError("rzf: loading must be > 0");
  const CMat a = weighted_gram(estimate, RVec::Ones(estimate.cols()), loading);
  return equal_power(Cholesky(a).solve(CMat(estimate)), power);
}

BeamSet rzf(const ChannelSet& estimate, double power, const RVec& error_var, RzfLoading mode) {
  return rzf_with_loading(estimate, power,
                          rzf_loading(static_cast<int>(estimate.cols()), power, error_var, mode));
}

WmmseResult wmmse(const ChannelSet& h, double power, const BaselineConfig& cfg) {
  cfg.validate();
  check_power(power, "wmmse");
  const Eigen::Index m = h.rows();
  const Eigen::Index users = h.cols();

  WmmseResult res;
  BeamSet v = mrt(h, power);
  double rate = sum_rate(h, v);
  res.beams = v;
  res.sum_rates.push_back(rate);
  double best = rate;

  RVec recv(users);
  RVec weight(users);
  CVec recv_c(users);
  for (int it = 1; it <= cfg.wmmse_max_iterations; ++it) {
    const CMat c = h.adjoint() * v;  // c(k, j) = h_k^H v_j
    for (Eigen::Index k = 0; k < users; ++k) {
      const double received = c.row(k).squaredNorm() + 1.0;
      recv_c(k) = c(k, k) / received;                                    // MMSE receiver
      weight(k) = 1.0 / (1.0 - (std::conj(recv_c(k)) * c(k, k)).real());  // inverse MSE
      recv(k) = std::norm(recv_c(k));
    }
    const CMat x = weighted_gram(h, weight.cwiseProduct(recv), 0.0);
    CMat rhs(m, users);
    for (Eigen::Index k = 0; k < users; ++k) rhs.col(k) = weight(k) * recv_c(k) * h.col(k);

    const double trace = x.trace().real();
    auto beams_at = [&](double mu) {
      return Cholesky(x + mu * CMat::Identity(m, m)).solve(rhs);
    };

    // Power is decreasing in mu. Start just above zero so singular x (K < M)
    // still factors; if even that power is below P the unconstrained update
    // is feasible and is scaled up, which raises every SINR.
    const double mu_floor = 1e-12 * (1.0 + trace / static_cast<double>(m));
    CMat next = beams_at(mu_floor);
    if (total_power(next) > power) {
      double lo = mu_floor;
      double hi = std::max(1.0, trace);
      int doublings = 0;
      CMat at_hi = beams_at(hi);
      while (total_power(at_hi) > power) {
        if (++doublings > kMaxBracketDoublings)
          throw SolverError("wmmse: could not bracket the power multiplier");
        lo = hi;
        hi *= 2.0;
        at_hi = beams_at(hi);
      }
      next = at_hi;
      for (int step = 0; step < kMaxBisectionSteps; ++step) {
        const double mid = 0.5 * (lo + hi);
        CMat trial = beams_at(mid);
        const double p = total_power(trial);
        if (p > power)
          lo = mid;
        else
          hi = mid;
        next = std::move(trial);
        if (std::abs(p - power) <= cfg.bisection_tolerance * power) break;
        if (hi - lo <= 1e-15 * hi) break;
      }
    }
    const double p = total_power(next);
    if (!(p > 0.0)) throw SolverError("wmmse: transmit update vanished");
    next *= std::sqrt(power / p);

    const double new_rate = sum_rate(h, next);
    res.sum_rates.push_back(new_rate);
    res.iterations = it;
    v = std::move(next);
    if (new_rate > best) {
      best = new_rate;
      res.beams = v;
    }
    if (std::abs(new_rate - rate) < cfg.wmmse_tolerance) {
      res.converged = true;
      break;
    }
    rate = new_rate;
  }
  return res;
}

}  // namespace robustbf
