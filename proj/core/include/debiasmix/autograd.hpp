#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Every value is a 2-D matrix; column vectors are (n x 1).

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace debiasmix::ag {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(Node&)> backward_fn;
  std::string op;

  void ensure_grad();
};

class Var {
 public:
  Var();
  explicit Var(Matrix value, bool requires_grad = false);

  static Var scalar(double v, bool requires_grad = false);

  const Matrix& value() const { return node_->value; }
  // Mutable access is reserved for leaf parameters (optimizer updates,
  // checkpoint loading).
  Matrix& mutable_value() { return node_->value; }

  // Gradient accumulated by the last backward(); zero matrix if none.
  const Matrix& grad() const;
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad();

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double item() const;

  // Backpropagates from a scalar (1x1) value with seed 1.
  void backward() const;
  void backward(const Matrix& seed) const;

  const std::shared_ptr<Node>& node() const { return node_; }

  static Var from_op(Matrix value, std::vector<Var> parents, std::function<void(Node&)> backward_fn,
                     std::string op);

 private:
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

// Structural ops.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // element-wise
Var div(const Var& a, const Var& b);  // element-wise
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
// a (n x m) + row (1 x m) broadcast over rows.
Var add_row(const Var& a, const Var& row);
// Each row i of a (n x m) multiplied by col(i), col is (n x 1).
Var scale_rows(const Var& a, const Var& col);
Var concat_cols(const Var& a, const Var& b);
Var column(const Var& a, Index j);

// Element-wise nonlinearities.
Var relu(const Var& a);
Var softplus(const Var& a);
Var square(const Var& a);

// Reductions.
Var sum(const Var& a);
Var mean(const Var& a);

// Forward identity; backward negates the incoming gradient.
Var grl(const Var& a, double scale = 1.0);
// Forward identity; no gradient flows to the input.
Var stop_gradient(const Var& a);

// Mean over rows of -sum_j targets(i,j) * log_softmax(logits)(i,j).
// Targets are constant (soft labels); row weights optional (n x 1).
Var softmax_cross_entropy(const Var& logits, const Matrix& targets);
Var weighted_softmax_cross_entropy(const Var& logits, const Matrix& targets,
                                   const Eigen::VectorXd& row_weights);
// Soft targets that are themselves differentiable (mixed labels).
Var softmax_cross_entropy(const Var& logits, const Var& targets);

Matrix softmax(const Matrix& logits);
Matrix log_softmax(const Matrix& logits);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace debiasmix::ag
