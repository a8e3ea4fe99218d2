#pragma once

// Dense 2-D tensors with a recorded computation for reverse-mode
// differentiation. Every value is an Eigen row-major matrix of doubles;
// vectors are 1xn rows unless stated otherwise.

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace deontic::tensor {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

std::string shape_string(Eigen::Index rows, Eigen::Index cols);
inline std::string shape_string(const Matrix& m) { return shape_string(m.rows(), m.cols()); }

/// A named learnable array. Gradients from every tape it is bound to
/// accumulate into `grad` until zero_grad().
struct Parameter {
  std::string name;
  Matrix value;
  // Accumulator written by Tape::backward; not part of the logical value.
  mutable Matrix grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Matrix v, bool train = true)
      : name(std::move(n)), value(std::move(v)), trainable(train) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }
  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

class Tape;

/// Handle to one node of a Tape. Cheap to copy; valid while its tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
};

/// The computation record. Nodes are appended in evaluation order, so the
/// node list is topologically sorted by construction.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var scalar(double value);
  /// Leaf bound to a parameter; its gradient is added to `p.grad` by
  /// backward() when the parameter is trainable.
  Var parameter(const Parameter& p);
  /// Leaf that is differentiable but not bound to any parameter.
  Var variable(Matrix value);

  Var record(Matrix value, std::vector<int> inputs, Backward backward);
  /// Node computed from state outside the tape (e.g. lookup tables); its
  /// backward writes gradients to that state directly.
  Var record_external(Matrix value, bool requires_grad, Backward backward);

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, allocated as zeros on first use.
  Matrix& grad(int id);
  /// Gradient after backward(); zeros for nodes the loss does not reach.
  Matrix gradient(Var v) const;

  /// Reverse sweep from a 1x1 loss. Visits each node at most once, in
  /// reverse recording order, then flushes leaf gradients into parameters.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<int> inputs;
    Backward backward;
    const Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

enum class UnaryKind { Tanh, Sigmoid, Neg, Exp, Log };
enum class BinaryKind { Add, Sub, Mul };

Var matmul(Var a, Var b);
Var transpose(Var x);

Var unary(UnaryKind kind, Var x);
inline Var tanh(Var x) { return unary(UnaryKind::Tanh, x); }
inline Var sigmoid(Var x) { return unary(UnaryKind::Sigmoid, x); }
inline Var neg(Var x) { return unary(UnaryKind::Neg, x); }
inline Var exp(Var x) { return unary(UnaryKind::Exp, x); }
inline Var log(Var x) { return unary(UnaryKind::Log, x); }

/// Elementwise with broadcasting: each dimension must match or be 1 on
/// one side (scalars, rows and columns all broadcast).
Var binary(BinaryKind kind, Var a, Var b);
inline Var add(Var a, Var b) { return binary(BinaryKind::Add, a, b); }
inline Var sub(Var a, Var b) { return binary(BinaryKind::Sub, a, b); }
inline Var mul(Var a, Var b) { return binary(BinaryKind::Mul, a, b); }
Var scale(Var x, double factor);

/// Softmax of a vector (1xn or nx1) with max subtraction.
Var softmax(Var x);
/// Row-wise softmax. Entries whose mask is 0 are excluded and get
/// probability 0. An empty mask means all entries are active.
Var softmax_rows(Var x, const Matrix& mask = Matrix());

Var concat(const std::vector<Var>& parts, int axis);
Var slice(Var x, int axis, Eigen::Index start, Eigen::Index length);
/// Rows of x picked by index; repeated indices are allowed and their
/// gradients add up.
Var gather_rows(Var x, const std::vector<int>& indices);
/// Same data in row-major order with a new shape.
Var reshape(Var x, Eigen::Index rows, Eigen::Index cols);
Var sum(Var x);

/// -log(max(probs[gold], 1e-12)) for a probability vector.
Var cross_entropy(Var probs, int gold);
/// Sum over rows of -log(max(probs(r, gold[r]), 1e-12)).
Var cross_entropy_rows(Var probs, const std::vector<int>& gold);

inline constexpr double kProbabilityFloor = 1e-12;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& x,
                        double h = 1e-5);

}  // namespace deontic::tensor
