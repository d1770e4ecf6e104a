#pragma once

#include "robustbf/types.hpp"

namespace robustbf {

// Cholesky factorization A = L L^H of a Hermitian positive-definite matrix.
// Only the lower triangle of A is read.
class Cholesky {
 public:
  static constexpr double kMinPivot = 1e-14;

  Cholesky() = default;
  // Throws FactorizationError when a pivot drops to kMinPivot or below.
  explicit Cholesky(const CMat& a);

  Eigen::Index size() const { return lower_.rows(); }
  const CMat& lower() const { return lower_; }

  CVec solve(const CVec& b) const;
  CMat solve(const CMat& b) const;
  // In-place multi-RHS solve.
  void solve_in_place(CMat& b) const;

 private:
  CMat lower_;
};

// Solves A x = b for Hermitian positive-definite A via Cholesky.
CVec hermitian_solve(const CMat& a, const CVec& b);
CMat hermitian_solve(const CMat& a, const CMat& b);

// diagonal * I + sum_j weights_j h_j h_j^H over the columns h_j of `channels`.
CMat weighted_gram(const ChannelSet& channels, const Eigen::Ref<const RVec>& weights,
                   double diagonal = 1.0);

}  // namespace robustbf
