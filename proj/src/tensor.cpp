#include "deontic/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace deontic::tensor {

std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream os;
  os << "[" << rows << "x" << cols << "]";
  return os.str();
}

const Matrix& Var::value() const { return tape->value(id); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw DimensionError("expected a scalar, got " + shape_string(v));
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, nullptr, false});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::parameter(const Parameter& p) {
  nodes_.push_back(Node{p.value, {}, {}, nullptr, &p, p.trainable});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, nullptr, true});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Matrix value, std::vector<int> inputs, Backward backward) {
  bool needs = false;
  for (int in : inputs) needs = needs || nodes_[in].requires_grad;
  Node node{std::move(value), {}, std::move(inputs), nullptr, nullptr, needs};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record_external(Matrix value, bool requires_grad, Backward backward) {
  Node node{std::move(value), {}, {}, nullptr, nullptr, requires_grad};
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix Tape::gradient(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("loss belongs to another tape");
  const Matrix& lv = nodes_[loss.id].value;
  if (lv.size() != 1) throw DimensionError("backward needs a scalar loss, got " + shape_string(lv));
  for (Node& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[loss.id].requires_grad) return;
  grad(loss.id).setOnes();
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr && n.param->trainable) n.param->grad += n.grad;
  }
}

namespace {

void require_same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw std::invalid_argument("operands belong to different tapes");
}

Matrix broadcast_to(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  if (m.size() == 1) return Matrix::Constant(rows, cols, m(0, 0));
  if (m.rows() == 1) return m.replicate(rows, 1);
  return m.replicate(1, cols);
}

// Sums a broadcast gradient back to the operand's own shape.
Matrix reduce_to(const Matrix& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return Matrix::Constant(1, 1, g.sum());
  if (rows == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

bool broadcastable(Eigen::Index a, Eigen::Index b) { return a == b || a == 1 || b == 1; }

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows())
    throw DimensionError("matmul: inner dimensions differ: " + shape_string(av) + " x " +
                         shape_string(bv));
  Matrix out = av * bv;
  return a.tape->record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.grad(a).noalias() += g * t.value(b).transpose();
    if (t.requires_grad(b)) t.grad(b).noalias() += t.value(a).transpose() * g;
  });
}

Var transpose(Var x) {
  Matrix out = x.value().transpose();
  return x.tape->record(std::move(out), {x.id}, [x = x.id](Tape& t, int self) {
    t.grad(x) += t.grad(self).transpose();
  });
}

Var unary(UnaryKind kind, Var x) {
  const Matrix& xv = x.value();
  Matrix out;
  switch (kind) {
    case UnaryKind::Tanh:
      out = xv.array().tanh().matrix();
      break;
    case UnaryKind::Sigmoid:
      out = (1.0 / (1.0 + (-xv.array()).exp())).matrix();
      break;
    case UnaryKind::Neg:
      out = -xv;
      break;
    case UnaryKind::Exp:
      out = xv.array().exp().matrix();
      break;
    case UnaryKind::Log:
      for (Eigen::Index i = 0; i < xv.size(); ++i) {
        if (!(xv.data()[i] > 0.0)) {
          std::ostringstream os;
          os << "log of non-positive entry " << xv.data()[i] << " at flat index " << i;
          throw DomainError(os.str());
        }
      }
      out = xv.array().log().matrix();
      break;
  }
  return x.tape->record(std::move(out), {x.id}, [x = x.id, kind](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& gx = t.grad(x);
    switch (kind) {
      case UnaryKind::Tanh:
        gx.array() += g.array() * (1.0 - y.array().square());
        break;
      case UnaryKind::Sigmoid:
        gx.array() += g.array() * y.array() * (1.0 - y.array());
        break;
      case UnaryKind::Neg:
        gx -= g;
        break;
      case UnaryKind::Exp:
        gx.array() += g.array() * y.array();
        break;
      case UnaryKind::Log:
        gx.array() += g.array() / t.value(x).array();
        break;
    }
  });
}

Var binary(BinaryKind kind, Var a, Var b) {
  require_same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (!broadcastable(av.rows(), bv.rows()) || !broadcastable(av.cols(), bv.cols()))
    throw DimensionError("incompatible shapes " + shape_string(av) + " and " + shape_string(bv));
  const Eigen::Index rows = std::max(av.rows(), bv.rows());
  const Eigen::Index cols = std::max(av.cols(), bv.cols());
  const bool same = av.rows() == bv.rows() && av.cols() == bv.cols();
  Matrix out;
  if (same) {
    switch (kind) {
      case BinaryKind::Add: out = av + bv; break;
      case BinaryKind::Sub: out = av - bv; break;
      case BinaryKind::Mul: out = av.cwiseProduct(bv); break;
    }
  } else {
    Matrix ab = broadcast_to(av, rows, cols);
    Matrix bb = broadcast_to(bv, rows, cols);
    switch (kind) {
      case BinaryKind::Add: out = ab + bb; break;
      case BinaryKind::Sub: out = ab - bb; break;
      case BinaryKind::Mul: out = ab.cwiseProduct(bb); break;
    }
  }
  return a.tape->record(std::move(out), {a.id, b.id},
                        [a = a.id, b = b.id, kind, same](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& av = t.value(a);
    const Matrix& bv = t.value(b);
    if (same) {
      if (t.requires_grad(a)) {
        if (kind == BinaryKind::Mul) t.grad(a) += g.cwiseProduct(bv);
        else t.grad(a) += g;
      }
      if (t.requires_grad(b)) {
        if (kind == BinaryKind::Mul) t.grad(b) += g.cwiseProduct(av);
        else if (kind == BinaryKind::Sub) t.grad(b) -= g;
        else t.grad(b) += g;
      }
      return;
    }
    if (t.requires_grad(a)) {
      Matrix ga = kind == BinaryKind::Mul ? Matrix(g.cwiseProduct(broadcast_to(bv, g.rows(), g.cols())))
                                          : g;
      t.grad(a) += reduce_to(ga, av.rows(), av.cols());
    }
    if (t.requires_grad(b)) {
      Matrix gb;
      switch (kind) {
        case BinaryKind::Add: gb = g; break;
        case BinaryKind::Sub: gb = -g; break;
        case BinaryKind::Mul: gb = g.cwiseProduct(broadcast_to(av, g.rows(), g.cols())); break;
      }
      t.grad(b) += reduce_to(gb, bv.rows(), bv.cols());
    }
  });
}

Var scale(Var x, double factor) {
  Matrix out = x.value() * factor;
  return x.tape->record(std::move(out), {x.id}, [x = x.id, factor](Tape& t, int self) {
    t.grad(x) += t.grad(self) * factor;
  });
}

Var softmax(Var x) {
  const Matrix& xv = x.value();
  if (xv.size() == 0) throw DimensionError("softmax of an empty tensor");
  if (xv.rows() != 1 && xv.cols() != 1)
    throw DimensionError("softmax expects a vector, got " + shape_string(xv));
  Matrix out = (xv.array() - xv.maxCoeff()).exp().matrix();
  out /= out.sum();
  return x.tape->record(std::move(out), {x.id}, [x = x.id](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    const double dot = g.cwiseProduct(y).sum();
    t.grad(x).array() += y.array() * (g.array() - dot);
  });
}

Var softmax_rows(Var x, const Matrix& mask) {
  const Matrix& xv = x.value();
  if (xv.size() == 0) throw DimensionError("softmax of an empty tensor");
  const bool masked = mask.size() != 0;
  if (masked && (mask.rows() != xv.rows() || mask.cols() != xv.cols()))
    throw DimensionError("softmax mask " + shape_string(mask) + " does not match " +
                         shape_string(xv));
  Matrix out = Matrix::Zero(xv.rows(), xv.cols());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < xv.cols(); ++c)
      if (!masked || mask(r, c) != 0.0) mx = std::max(mx, xv(r, c));
    if (!std::isfinite(mx))
      throw std::invalid_argument("softmax row " + std::to_string(r) + " is fully masked");
    double total = 0.0;
    for (Eigen::Index c = 0; c < xv.cols(); ++c) {
      if (masked && mask(r, c) == 0.0) continue;
      out(r, c) = std::exp(xv(r, c) - mx);
      total += out(r, c);
    }
    out.row(r) /= total;
  }
  return x.tape->record(std::move(out), {x.id}, [x = x.id](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& gx = t.grad(x);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      gx.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat of zero parts");
  if (axis != 0 && axis != 1) throw DimensionError("concat axis must be 0 or 1");
  Tape* tape = parts.front().tape;
  Eigen::Index rows = 0, cols = 0;
  const Matrix& first = parts.front().value();
  std::vector<int> ids;
  ids.reserve(parts.size());
  for (const Var& p : parts) {
    if (p.tape != tape) throw std::invalid_argument("operands belong to different tapes");
    const Matrix& v = p.value();
    if (axis == 0) {
      if (v.cols() != first.cols())
        throw DimensionError("concat axis 0: column extents differ: " + shape_string(first) +
                             " vs " + shape_string(v));
      rows += v.rows();
      cols = v.cols();
    } else {
      if (v.rows() != first.rows())
        throw DimensionError("concat axis 1: row extents differ: " + shape_string(first) +
                             " vs " + shape_string(v));
      cols += v.cols();
      rows = v.rows();
    }
    ids.push_back(p.id);
  }
  Matrix out(rows, cols);
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    if (axis == 0) {
      out.middleRows(offset, v.rows()) = v;
      offset += v.rows();
    } else {
      out.middleCols(offset, v.cols()) = v;
      offset += v.cols();
    }
  }
  std::vector<int> inputs = ids;
  return tape->record(std::move(out), std::move(inputs), [ids, axis](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Eigen::Index offset = 0;
    for (int id : ids) {
      const Matrix& v = t.value(id);
      const Eigen::Index extent = axis == 0 ? v.rows() : v.cols();
      if (t.requires_grad(id)) {
        if (axis == 0) t.grad(id) += g.middleRows(offset, extent);
        else t.grad(id) += g.middleCols(offset, extent);
      }
      offset += extent;
    }
  });
}

Var slice(Var x, int axis, Eigen::Index start, Eigen::Index length) {
  const Matrix& xv = x.value();
  if (axis != 0 && axis != 1) throw DimensionError("slice axis must be 0 or 1");
  const Eigen::Index extent = axis == 0 ? xv.rows() : xv.cols();
  if (start < 0 || length < 0 || start + length > extent)
    throw DimensionError("slice [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") out of " + shape_string(xv));
  Matrix out = axis == 0 ? Matrix(xv.middleRows(start, length)) : Matrix(xv.middleCols(start, length));
  return x.tape->record(std::move(out), {x.id}, [x = x.id, axis, start, length](Tape& t, int self) {
    if (axis == 0) t.grad(x).middleRows(start, length) += t.grad(self);
    else t.grad(x).middleCols(start, length) += t.grad(self);
  });
}

Var gather_rows(Var x, const std::vector<int>& indices) {
  const Matrix& xv = x.value();
  Matrix out(static_cast<Eigen::Index>(indices.size()), xv.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= xv.rows())
      throw IndexError("gather_rows: index " + std::to_string(indices[i]) + " outside " +
                       shape_string(xv));
    out.row(static_cast<Eigen::Index>(i)) = xv.row(indices[i]);
  }
  return x.tape->record(std::move(out), {x.id}, [x = x.id, indices](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& gx = t.grad(x);
    for (std::size_t i = 0; i < indices.size(); ++i)
      gx.row(indices[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var reshape(Var x, Eigen::Index rows, Eigen::Index cols) {
  const Matrix& xv = x.value();
  if (rows * cols != xv.size())
    throw DimensionError("cannot reshape " + shape_string(xv) + " to " + shape_string(rows, cols));
  Matrix out = Eigen::Map<const Matrix>(xv.data(), rows, cols);
  return x.tape->record(std::move(out), {x.id}, [x = x.id](Tape& t, int self) {
    Matrix& gx = t.grad(x);
    const Matrix& g = t.grad(self);
    Eigen::Map<Matrix>(gx.data(), g.rows(), g.cols()) += g;
  });
}

Var sum(Var x) {
  Matrix out = Matrix::Constant(1, 1, x.value().sum());
  return x.tape->record(std::move(out), {x.id}, [x = x.id](Tape& t, int self) {
    t.grad(x).array() += t.grad(self)(0, 0);
  });
}

Var cross_entropy(Var probs, int gold) {
  const Matrix& pv = probs.value();
  if (pv.rows() != 1 && pv.cols() != 1)
    throw DimensionError("cross_entropy expects a probability vector, got " + shape_string(pv));
  if (gold < 0 || gold >= pv.size())
    throw IndexError("cross_entropy: gold class " + std::to_string(gold) + " outside [0, " +
                     std::to_string(pv.size()) + ")");
  const double p = pv.data()[gold];
  Matrix out = Matrix::Constant(1, 1, -std::log(std::max(p, kProbabilityFloor)));
  return probs.tape->record(std::move(out), {probs.id}, [probs = probs.id, gold](Tape& t, int self) {
    const double p = t.value(probs).data()[gold];
    if (p > kProbabilityFloor) t.grad(probs).data()[gold] -= t.grad(self)(0, 0) / p;
  });
}

Var cross_entropy_rows(Var probs, const std::vector<int>& gold) {
  const Matrix& pv = probs.value();
  if (static_cast<Eigen::Index>(gold.size()) != pv.rows())
    throw DimensionError("cross_entropy_rows: " + std::to_string(gold.size()) +
                         " labels for " + shape_string(pv));
  double total = 0.0;
  for (Eigen::Index r = 0; r < pv.rows(); ++r) {
    const int g = gold[static_cast<std::size_t>(r)];
    if (g < 0 || g >= pv.cols())
      throw IndexError("cross_entropy_rows: gold class " + std::to_string(g) + " outside [0, " +
                       std::to_string(pv.cols()) + ")");
    total -= std::log(std::max(pv(r, g), kProbabilityFloor));
  }
  return probs.tape->record(Matrix::Constant(1, 1, total), {probs.id},
                            [probs = probs.id, gold](Tape& t, int self) {
    const double up = t.grad(self)(0, 0);
    const Matrix& pv = t.value(probs);
    Matrix& gp = t.grad(probs);
    for (Eigen::Index r = 0; r < pv.rows(); ++r) {
      const int g = gold[static_cast<std::size_t>(r)];
      if (pv(r, g) > kProbabilityFloor) gp(r, g) -= up / pv(r, g);
    }
  });
}

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const double up = f(probe);
    probe.data()[i] = orig - h;
    const double down = f(probe);
    probe.data()[i] = orig;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace deontic::tensor
