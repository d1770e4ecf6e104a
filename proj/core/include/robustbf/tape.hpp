#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "robustbf/types.hpp"

// Define-by-run reverse-mode differentiation over real row-major tensors.
//
// Nodes are appended in creation order, which is a topological order: every
// parent id is smaller than its child's. backward() walks ids downwards from
// the root so each reachable node is visited exactly once after all of its
// consumers have pushed their adjoints into it.
//
// Complex quantities live on the tape as interleaved (re, im) pairs. For a
// real loss L and complex z, the accumulated gradient pair is
// (dL/dRe z, dL/dIm z), which read as g = dL/dRe z + i dL/dIm z satisfies
// dL = Re(g^H dz).
namespace robustbf::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Receives the adjoint and the value of the node being processed and must
  // push adjoints into its parents via Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Tensor& grad, const Tensor& out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);
  Var constant(Tensor value);
  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn fn);

  // Seeds d(root)/d(root) = 1 and propagates. Returns the visit order.
  std::vector<std::size_t> backward(Var root);
  void zero_grad();

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  const Tensor& grad(std::size_t id) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Adds `g` into the adjoint of `v`; a no-op for constants.
  void accumulate(Var v, const Tensor& g);
  // Mutable adjoint of `v` (zero-initialized on first use). Only valid for
  // nodes that require a gradient.
  Tensor& adjoint(Var v);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check_owned(Var v) const;

  std::vector<Node> nodes_;
};

// ---- elementwise and dense ops --------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var relu(Var a);
Var log(Var a);
Var exp(Var a);
Var sqrt(Var a);

// x (B x n) + bias (1 x n) broadcast over rows.
Var add_bias(Var x, Var bias);
// Row i of x multiplied by the constant c(i).
Var scale_rows(Var x, const RVec& c);
Var matmul(Var a, Var b);
Var slice_cols(Var x, Eigen::Index start, Eigen::Index count);
Var gather_cols(Var x, const std::vector<Eigen::Index>& cols);
// Row-wise softmax, stabilized by subtracting the row maximum.
Var softmax_rows(Var x);
Var sum_rows(Var x);  // B x n -> B x 1
// Sums each run of `width` consecutive columns: B x (n*width) -> B x n.
Var group_sum(Var x, Eigen::Index width);
Var sum(Var x);       // -> 1 x 1
Var mean(Var x);      // -> 1 x 1

struct BatchStats {
  RowVec mean;
  RowVec var;  // biased batch variance
};

// Training-mode batch normalization over the rows of x:
// y = gamma * (x - mean) / sqrt(var + eps) + beta. Batch statistics are
// written to `stats` when non-null.
Var batch_norm(Var x, Var gamma, Var beta, double eps, BatchStats* stats = nullptr);

// ---- complex-layout ops (interleaved re/im, column-major users) -----------

// Per row: A = I_M + sum_j q_j c_j c_j^H where q is B x K and `channels` holds
// K packed length-M columns per row. Output rows hold the packed M x M matrix.
Var hermitian_gram(Var q, const Tensor& channels, Eigen::Index antennas);

// Per row: X = A^{-1} B with A packed M x M Hermitian positive definite and B
// packed M x R. Adjoints: gB = A^{-1} gX, gA = -gB X^H.
Var hermitian_solve(Var a, Var b, Eigen::Index antennas);

// Per row and group k of M complex entries: ||u_k||_2. B x 2MK -> B x K.
Var group_norm(Var u, Eigen::Index antennas);
// Per row: v_k = s_k u_k. u is B x 2MK, s is B x K.
Var group_scale(Var u, Var s, Eigen::Index antennas);
// Per row: G(k*K + j) = |h_k^H v_j|^2 with constant channels h.
Var cross_gain(Var v, const Tensor& channels, Eigen::Index antennas);

}  // namespace robustbf::ad
