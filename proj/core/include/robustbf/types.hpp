#pragma once

#include <complex>

#include <Eigen/Core>

namespace robustbf {

using cdouble = std::complex<double>;

using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

// Real tensors carried by the differentiation tape. Row-major so that one row
// holds one sample of a mini-batch.
using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

// M x K matrix whose column k is the channel of user k.
using ChannelSet = CMat;
// M x K matrix whose column k is the beam of user k.
using BeamSet = CMat;

inline constexpr double kLn2 = 0.69314718055994530942;

bool all_finite(const CMat& m);
bool is_hermitian(const CMat& m, double tol = 1e-12);

// Packs column k of an M x K complex matrix into reals at 2*(k*M+m) (re) and
// 2*(k*M+m)+1 (im). This is the layout used for complex data on the tape.
void pack_columns(const CMat& m, Eigen::Ref<RowVec> out);
CMat unpack_columns(const Eigen::Ref<const RowVec>& row, Eigen::Index rows, Eigen::Index cols);

}  // namespace robustbf
