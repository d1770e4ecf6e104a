#include "robustbf/tape.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <utility>

#include "robustbf/errors.hpp"
#include "robustbf/linalg.hpp"

namespace robustbf::ad {

const Tensor& Var::value() const {
  if (!tape_) throw GraphError("Var: not bound to a tape");
  return tape_->value(id_);
}

const Tensor& Var::grad() const {
  if (!tape_) throw GraphError("Var: not bound to a tape");
  return tape_->grad(id_);
}

void Tape::check_owned(Var v) const {
  if (v.tape() != this) throw GraphError("Var belongs to a different tape");
  if (v.id() >= nodes_.size()) throw GraphError("Var id out of range");
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  const std::size_t id = nodes_.size();
  for (const Var& p : parents) {
    check_owned(p);
    // A parent must already exist; anything else would close a cycle.
    if (p.id() >= id)
      throw GraphError("cycle: parent " + std::to_string(p.id()) + " is not older than node " +
                       std::to_string(id));
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, id);
}

const Tensor& Tape::grad(std::size_t id) const {
  static const Tensor kEmpty;
  const Node& n = nodes_.at(id);
  return n.grad.size() == 0 ? kEmpty : n.grad;
}

void Tape::accumulate(Var v, const Tensor& g) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (g.rows() != n.value.rows() || g.cols() != n.value.cols())
    throw GraphError("adjoint shape mismatch at node " + std::to_string(v.id()));
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

Tensor& Tape::adjoint(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::zero_grad() {
  for (Node& n : nodes_) n.grad.resize(0, 0);
}

std::vector<std::size_t> Tape::backward(Var root) {
  check_owned(root);
  if (root.value().size() != 1) throw ContractError("backward: root must be scalar");
  zero_grad();
  std::vector<std::size_t> order;
  if (!nodes_[root.id()].requires_grad) return order;
  nodes_[root.id()].grad = Tensor::Ones(1, 1);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    order.push_back(i);
    if (n.backward) n.backward(*this, n.grad, n.value);
  }
  return order;
}

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw GraphError("op on unbound Var");
  return *a.tape();
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.tape() != b.tape()) throw GraphError(std::string(op) + ": operands on different tapes");
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractError(std::string(op) + ": shape mismatch");
}

Eigen::Index groups_of(Eigen::Index width, Eigen::Index antennas, const char* op) {
  if (antennas <= 0 || width % (2 * antennas) != 0)
    throw ContractError(std::string(op) + ": width is not a multiple of 2M");
  return width / (2 * antennas);
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  return tape_of(a).record(a.value() + b.value(), {a, b},
                           [a, b](Tape& t, const Tensor& g, const Tensor&) {
                             t.accumulate(a, g);
                             t.accumulate(b, g);
                           });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  return tape_of(a).record(a.value() - b.value(), {a, b},
                           [a, b](Tape& t, const Tensor& g, const Tensor&) {
                             t.accumulate(a, g);
                             t.accumulate(b, -g);
                           });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  return tape_of(a).record(a.value().cwiseProduct(b.value()), {a, b},
                           [a, b](Tape& t, const Tensor& g, const Tensor&) {
                             t.accumulate(a, g.cwiseProduct(b.value()));
                             t.accumulate(b, g.cwiseProduct(a.value()));
                           });
}

Var div(Var a, Var b) {
  require_same_shape(a, b, "div");
  return tape_of(a).record(a.value().cwiseQuotient(b.value()), {a, b},
                           [a, b](Tape& t, const Tensor& g, const Tensor& out) {
                             const Tensor ga = g.cwiseQuotient(b.value());
                             t.accumulate(b, -ga.cwiseProduct(out));
                             t.accumulate(a, ga);
                           });
}

Var scale(Var a, double c) {
  return tape_of(a).record(a.value() * c, {a}, [a, c](Tape& t, const Tensor& g, const Tensor&) {
    t.accumulate(a, g * c);
  });
}

Var add_scalar(Var a, double c) {
  Tensor out = a.value().array() + c;
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Tensor& g, const Tensor&) {
    t.accumulate(a, g);
  });
}

Var relu(Var a) {
  return tape_of(a).record(a.value().cwiseMax(0.0), {a},
                           [a](Tape& t, const Tensor& g, const Tensor&) {
                             Tensor ga = (a.value().array() > 0.0).select(g, 0.0);
                             t.accumulate(a, ga);
                           });
}

Var log(Var a) {
  Tensor out = a.value().array().log();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Tensor& g, const Tensor&) {
    t.accumulate(a, g.cwiseQuotient(a.value()));
  });
}

Var exp(Var a) {
  Tensor out = a.value().array().exp();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Tensor& g, const Tensor& out) {
    t.accumulate(a, g.cwiseProduct(out));
  });
}

Var sqrt(Var a) {
  Tensor out = a.value().array().sqrt();
  return tape_of(a).record(std::move(out), {a}, [a](Tape& t, const Tensor& g, const Tensor& out) {
    Tensor ga = 0.5 * g.cwiseQuotient(out);
    t.accumulate(a, ga);
  });
}

Var add_bias(Var x, Var bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) throw ContractError("add_bias: shape mismatch");
  Tensor out = x.value().rowwise() + bias.value().row(0);
  return tape_of(x).record(std::move(out), {x, bias},
                           [x, bias](Tape& t, const Tensor& g, const Tensor&) {
                             t.accumulate(x, g);
                             if (t.requires_grad(bias)) t.accumulate(bias, g.colwise().sum());
                           });
}

Var scale_rows(Var x, const RVec& c) {
  if (c.size() != x.rows()) throw ContractError("scale_rows: factor count mismatch");
  Tensor out = c.asDiagonal() * x.value();
  return tape_of(x).record(std::move(out), {x}, [x, c](Tape& t, const Tensor& g, const Tensor&) {
    Tensor gx = c.asDiagonal() * g;
    t.accumulate(x, gx);
  });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ContractError("matmul: inner dimension mismatch");
  Tensor out;
  out.noalias() = a.value() * b.value();
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor&) {
    if (t.requires_grad(a)) {
      Tensor ga;
      ga.noalias() = g * b.value().transpose();
      t.accumulate(a, ga);
    }
    if (t.requires_grad(b)) {
      Tensor gb;
      gb.noalias() = a.value().transpose() * g;
      t.accumulate(b, gb);
    }
  });
}

Var slice_cols(Var x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.cols())
    throw ContractError("slice_cols: range out of bounds");
  Tensor out = x.value().middleCols(start, count);
  return tape_of(x).record(std::move(out), {x},
                           [x, start, count](Tape& t, const Tensor& g, const Tensor&) {
                             if (!t.requires_grad(x)) return;
                             t.adjoint(x).middleCols(start, count) += g;
                           });
}

Var gather_cols(Var x, const std::vector<Eigen::Index>& cols) {
  const Tensor& xv = x.value();
  Tensor out(xv.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c] < 0 || cols[c] >= xv.cols()) throw ContractError("gather_cols: index out of range");
    out.col(static_cast<Eigen::Index>(c)) = xv.col(cols[c]);
  }
  return tape_of(x).record(std::move(out), {x}, [x, cols](Tape& t, const Tensor& g, const Tensor&) {
    if (!t.requires_grad(x)) return;
    Tensor& gx = t.adjoint(x);
    for (std::size_t c = 0; c < cols.size(); ++c)
      gx.col(cols[c]) += g.col(static_cast<Eigen::Index>(c));
  });
}

Var softmax_rows(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const double shift = xv.row(i).maxCoeff();
    out.row(i) = (xv.row(i).array() - shift).exp();
    out.row(i) /= out.row(i).sum();
  }
  return tape_of(x).record(std::move(out), {x}, [x](Tape& t, const Tensor& g, const Tensor& y) {
    const Eigen::VectorXd inner = g.cwiseProduct(y).rowwise().sum();
    Tensor gx = y.cwiseProduct(g.colwise() - inner);
    t.accumulate(x, gx);
  });
}

Var sum_rows(Var x) {
  Tensor out = x.value().rowwise().sum();
  const Eigen::Index n = x.cols();
  return tape_of(x).record(std::move(out), {x}, [x, n](Tape& t, const Tensor& g, const Tensor&) {
    Tensor gx = g.col(0).replicate(1, n);
    t.accumulate(x, gx);
  });
}

Var group_sum(Var x, Eigen::Index width) {
  if (width <= 0 || x.cols() % width != 0) throw ContractError("group_sum: width does not divide");
  const Eigen::Index groups = x.cols() / width;
  const Tensor& xv = x.value();
  Tensor out(xv.rows(), groups);
  for (Eigen::Index k = 0; k < groups; ++k) out.col(k) = xv.middleCols(k * width, width).rowwise().sum();
  return tape_of(x).record(std::move(out), {x},
                           [x, groups, width](Tape& t, const Tensor& g, const Tensor&) {
                             Tensor gx(x.rows(), x.cols());
                             for (Eigen::Index k = 0; k < groups; ++k)
                               gx.middleCols(k * width, width) = g.col(k).replicate(1, width);
                             t.accumulate(x, gx);
                           });
}

Var sum(Var x) {
  Tensor out(1, 1);
  out(0, 0) = x.value().sum();
  return tape_of(x).record(std::move(out), {x}, [x](Tape& t, const Tensor& g, const Tensor&) {
    t.accumulate(x, Tensor::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Var mean(Var x) {
  if (x.value().size() == 0) throw ContractError("mean: empty tensor");
  const double n = static_cast<double>(x.value().size());
  Tensor out(1, 1);
  out(0, 0) = x.value().sum() / n;
  return tape_of(x).record(std::move(out), {x}, [x, n](Tape& t, const Tensor& g, const Tensor&) {
    t.accumulate(x, Tensor::Constant(x.rows(), x.cols(), g(0, 0) / n));
  });
}

Var batch_norm(Var x, Var gamma, Var beta, double eps, BatchStats* stats) {
  const Tensor& xv = x.value();
  const Eigen::Index n = xv.cols();
  if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n)
    throw ContractError("batch_norm: scale/shift shape mismatch");
  if (xv.rows() == 0) throw ContractError("batch_norm: empty batch");
  const double rows = static_cast<double>(xv.rows());

  RowVec mu = xv.colwise().sum() / rows;
  Tensor centered = xv.rowwise() - mu;
  RowVec var = centered.cwiseAbs2().colwise().sum() / rows;
  RowVec inv_std = (var.array() + eps).rsqrt();
  auto xhat = std::make_shared<Tensor>(centered * inv_std.asDiagonal());
  if (stats) {
    stats->mean = mu;
    stats->var = var;
  }
  Tensor out = ((*xhat) * gamma.value().row(0).asDiagonal()).rowwise() + beta.value().row(0);

  return tape_of(x).record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std, rows](Tape& t, const Tensor& g, const Tensor&) {
        if (t.requires_grad(gamma)) t.accumulate(gamma, g.cwiseProduct(*xhat).colwise().sum());
        if (t.requires_grad(beta)) t.accumulate(beta, g.colwise().sum());
        if (!t.requires_grad(x)) return;
        Tensor gxhat = g * gamma.value().row(0).asDiagonal();
        RowVec mean_g = gxhat.colwise().sum() / rows;
        RowVec mean_gx = gxhat.cwiseProduct(*xhat).colwise().sum() / rows;
        Tensor gx = (gxhat.rowwise() - mean_g) - (*xhat) * mean_gx.asDiagonal();
        gx = gx * inv_std.asDiagonal();
        t.accumulate(x, gx);
      });
}

Var hermitian_gram(Var q, const Tensor& channels, Eigen::Index antennas) {
  const Eigen::Index users = groups_of(channels.cols(), antennas, "hermitian_gram");
  if (q.cols() != users || q.rows() != channels.rows())
    throw ContractError("hermitian_gram: power/channel shape mismatch");
  const Tensor& qv = q.value();
  const Eigen::Index m = antennas;
  Tensor out(qv.rows(), 2 * m * m);
  for (Eigen::Index r = 0; r < qv.rows(); ++r) {
    const CMat c = unpack_columns(channels.row(r), m, users);
    const CMat a = weighted_gram(c, qv.row(r).transpose());
    pack_columns(a, out.row(r));
  }
  return tape_of(q).record(
      std::move(out), {q}, [q, channels, m, users](Tape& t, const Tensor& g, const Tensor&) {
        Tensor gq(channels.rows(), users);
        for (Eigen::Index r = 0; r < channels.rows(); ++r) {
          const CMat c = unpack_columns(channels.row(r), m, users);
          const CMat ga = unpack_columns(g.row(r), m, m);
          for (Eigen::Index j = 0; j < users; ++j)
            gq(r, j) = (c.col(j).adjoint() * ga * c.col(j))(0, 0).real();
        }
        t.accumulate(q, gq);
      });
}

Var hermitian_solve(Var a, Var b, Eigen::Index antennas) {
  const Eigen::Index m = antennas;
  if (a.cols() != 2 * m * m) throw ContractError("hermitian_solve: matrix width is not 2M^2");
  if (a.rows() != b.rows()) throw ContractError("hermitian_solve: batch size mismatch");
  const Eigen::Index rhs = groups_of(b.cols(), m, "hermitian_solve");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  auto factors = std::make_shared<std::vector<Cholesky>>();
  factors->reserve(static_cast<std::size_t>(av.rows()));
  Tensor out(bv.rows(), bv.cols());
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    factors->emplace_back(unpack_columns(av.row(r), m, m));
    CMat x = unpack_columns(bv.row(r), m, rhs);
    factors->back().solve_in_place(x);
    pack_columns(x, out.row(r));
  }
  return tape_of(a).record(
      std::move(out), {a, b},
      [a, b, m, rhs, factors](Tape& t, const Tensor& g, const Tensor& out) {
        const bool need_a = t.requires_grad(a);
        const bool need_b = t.requires_grad(b);
        Tensor ga = need_a ? Tensor(g.rows(), 2 * m * m) : Tensor();
        Tensor gb = need_b ? Tensor(g.rows(), g.cols()) : Tensor();
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          CMat grad_b = unpack_columns(g.row(r), m, rhs);
          (*factors)[static_cast<std::size_t>(r)].solve_in_place(grad_b);
          if (need_b) pack_columns(grad_b, gb.row(r));
          if (need_a) {
            const CMat x = unpack_columns(out.row(r), m, rhs);
            const CMat grad_a = -grad_b * x.adjoint();
            pack_columns(grad_a, ga.row(r));
          }
        }
        if (need_a) t.accumulate(a, ga);
        if (need_b) t.accumulate(b, gb);
      });
}

Var group_norm(Var u, Eigen::Index antennas) {
  const Eigen::Index groups = groups_of(u.cols(), antennas, "group_norm");
  const Eigen::Index width = 2 * antennas;
  const Tensor& uv = u.value();
  Tensor out(uv.rows(), groups);
  for (Eigen::Index r = 0; r < uv.rows(); ++r)
    for (Eigen::Index k = 0; k < groups; ++k)
      out(r, k) = uv.row(r).segment(k * width, width).norm();
  return tape_of(u).record(std::move(out), {u},
                           [u, groups, width](Tape& t, const Tensor& g, const Tensor& out) {
                             const Tensor& uv = u.value();
                             Tensor gu(uv.rows(), uv.cols());
                             for (Eigen::Index r = 0; r < uv.rows(); ++r)
                               for (Eigen::Index k = 0; k < groups; ++k) {
                                 const double n = out(r, k);
                                 const double s = n > 0.0 ? g(r, k) / n : 0.0;
                                 gu.row(r).segment(k * width, width) =
                                     s * uv.row(r).segment(k * width, width);
                               }
                             t.accumulate(u, gu);
                           });
}

Var group_scale(Var u, Var s, Eigen::Index antennas) {
  const Eigen::Index groups = groups_of(u.cols(), antennas, "group_scale");
  if (s.cols() != groups || s.rows() != u.rows())
    throw ContractError("group_scale: scale shape mismatch");
  const Eigen::Index width = 2 * antennas;
  const Tensor& uv = u.value();
  const Tensor& sv = s.value();
  Tensor out(uv.rows(), uv.cols());
  for (Eigen::Index r = 0; r < uv.rows(); ++r)
    for (Eigen::Index k = 0; k < groups; ++k)
      out.row(r).segment(k * width, width) = sv(r, k) * uv.row(r).segment(k * width, width);
  return tape_of(u).record(
      std::move(out), {u, s}, [u, s, groups, width](Tape& t, const Tensor& g, const Tensor&) {
        const Tensor& uv = u.value();
        const Tensor& sv = s.value();
        if (t.requires_grad(u)) {
          Tensor gu(uv.rows(), uv.cols());
          for (Eigen::Index r = 0; r < uv.rows(); ++r)
            for (Eigen::Index k = 0; k < groups; ++k)
              gu.row(r).segment(k * width, width) = sv(r, k) * g.row(r).segment(k * width, width);
          t.accumulate(u, gu);
        }
        if (t.requires_grad(s)) {
          Tensor gs(sv.rows(), groups);
          for (Eigen::Index r = 0; r < uv.rows(); ++r)
            for (Eigen::Index k = 0; k < groups; ++k)
              gs(r, k) = g.row(r).segment(k * width, width).dot(uv.row(r).segment(k * width, width));
          t.accumulate(s, gs);
        }
      });
}

Var cross_gain(Var v, const Tensor& channels, Eigen::Index antennas) {
  const Eigen::Index users = groups_of(v.cols(), antennas, "cross_gain");
  if (channels.cols() != v.cols() || channels.rows() != v.rows())
    throw ContractError("cross_gain: channel/beam shape mismatch");
  const Eigen::Index m = antennas;
  const Tensor& vv = v.value();
  Tensor out(vv.rows(), users * users);
  for (Eigen::Index r = 0; r < vv.rows(); ++r) {
    const CMat h = unpack_columns(channels.row(r), m, users);
    const CMat beams = unpack_columns(vv.row(r), m, users);
    const CMat c = h.adjoint() * beams;  // c(k, j) = h_k^H v_j
    for (Eigen::Index k = 0; k < users; ++k)
      for (Eigen::Index j = 0; j < users; ++j) out(r, k * users + j) = std::norm(c(k, j));
  }
  return tape_of(v).record(
      std::move(out), {v}, [v, channels, m, users](Tape& t, const Tensor& g, const Tensor&) {
        const Tensor& vv = v.value();
        Tensor gv(vv.rows(), vv.cols());
        for (Eigen::Index r = 0; r < vv.rows(); ++r) {
          const CMat h = unpack_columns(channels.row(r), m, users);
          const CMat beams = unpack_columns(vv.row(r), m, users);
          const CMat c = h.adjoint() * beams;
          // gv_j = sum_k 2 g_kj c_kj h_k
          CMat weights(users, users);
          for (Eigen::Index k = 0; k < users; ++k)
            for (Eigen::Index j = 0; j < users; ++j)
              weights(k, j) = 2.0 * g(r, k * users + j) * c(k, j);
          const CMat grad = h * weights;
          pack_columns(grad, gv.row(r));
        }
        t.accumulate(v, gv);
      });
}

}  // namespace robustbf::ad
