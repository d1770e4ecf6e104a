#include "robustbf/linalg.hpp"

#include <cmath>
#include <string>

#include "robustbf/errors.hpp"

namespace robustbf {

bool all_finite(const CMat& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
  return true;
}

bool is_hermitian(const CMat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i <= j; ++i)
      if (std::abs(m(i, j) - std::conj(m(j, i))) > tol) return false;
  return true;
}

void pack_columns(const CMat& m, Eigen::Ref<RowVec> out) {
  const Eigen::Index rows = m.rows();
  if (out.size() != 2 * m.size()) throw ContractError("pack_columns: output length mismatch");
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      out(2 * (k * rows + i)) = m(i, k).real();
      out(2 * (k * rows + i) + 1) = m(i, k).imag();
    }
  }
}

CMat unpack_columns(const Eigen::Ref<const RowVec>& row, Eigen::Index rows, Eigen::Index cols) {
  if (row.size() != 2 * rows * cols) throw ContractError("unpack_columns: input length mismatch");
  CMat m(rows, cols);
  for (Eigen::Index k = 0; k < cols; ++k)
    for (Eigen::Index i = 0; i < rows; ++i)
      m(i, k) = cdouble(row(2 * (k * rows + i)), row(2 * (k * rows + i) + 1));
  return m;
}

Cholesky::Cholesky(const CMat& a) : lower_(CMat::Zero(a.rows(), a.cols())) {
  if (a.rows() != a.cols()) throw ContractError("Cholesky: matrix is not square");
  const Eigen::Index n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    double diag = a(j, j).real();
    for (Eigen::Index p = 0; p < j; ++p) diag -= std::norm(lower_(j, p));
    if (!(diag > kMinPivot)) {
      throw FactorizationError("Cholesky: pivot " + std::to_string(diag) + " at column " +
                               std::to_string(j) + " (matrix not positive definite)");
    }
    const double ljj = std::sqrt(diag);
    lower_(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      cdouble s = a(i, j);
      for (Eigen::Index p = 0; p < j; ++p) s -= lower_(i, p) * std::conj(lower_(j, p));
      lower_(i, j) = s / ljj;
    }
  }
}

void Cholesky::solve_in_place(CMat& b) const {
  const Eigen::Index n = lower_.rows();
  if (b.rows() != n) throw ContractError("Cholesky::solve: right-hand side has wrong length");
  for (Eigen::Index c = 0; c < b.cols(); ++c) {
    // L y = b
    for (Eigen::Index i = 0; i < n; ++i) {
      cdouble s = b(i, c);
      for (Eigen::Index p = 0; p < i; ++p) s -= lower_(i, p) * b(p, c);
      b(i, c) = s / lower_(i, i).real();
    }
    // L^H x = y
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      cdouble s = b(i, c);
      for (Eigen::Index p = i + 1; p < n; ++p) s -= std::conj(lower_(p, i)) * b(p, c);
      b(i, c) = s / lower_(i, i).real();
    }
  }
}

CMat Cholesky::solve(const CMat& b) const {
  CMat x = b;
  solve_in_place(x);
  return x;
}

CVec Cholesky::solve(const CVec& b) const {
  CMat x = b;
  solve_in_place(x);
  return x.col(0);
}

CVec hermitian_solve(const CMat& a, const CVec& b) { return Cholesky(a).solve(b); }

CMat hermitian_solve(const CMat& a, const CMat& b) { return Cholesky(a).solve(b); }

CMat weighted_gram(const ChannelSet& channels, const Eigen::Ref<const RVec>& weights,
                   double diagonal) {
  if (weights.size() != channels.cols()) throw ContractError("weighted_gram: weight count mismatch");
  const Eigen::Index m = channels.rows();
  CMat a = CMat::Identity(m, m) * diagonal;
  for (Eigen::Index j = 0; j < channels.cols(); ++j)
    a.noalias() += weights(j) * channels.col(j) * channels.col(j).adjoint();
  return a;
}

}  // namespace robustbf
