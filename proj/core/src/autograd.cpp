#include "debiasmix/autograd.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace debiasmix::ag {

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void Node::ensure_grad() {
  if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }
}

Var::Var() : node_(std::make_shared<Node>()) {}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  node_->op = "leaf";
}

Var Var::scalar(double v, bool requires_grad) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Var(std::move(m), requires_grad);
}

const Matrix& Var::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

void Var::zero_grad() { node_->grad = Matrix::Zero(node_->value.rows(), node_->value.cols()); }

double Var::item() const {
  if (rows() != 1 || cols() != 1) throw std::logic_error("item() on non-scalar");
  return node_->value(0, 0);
}

void Var::backward() const {
  if (rows() != 1 || cols() != 1) throw std::logic_error("backward() without seed requires a scalar");
  backward(Matrix::Ones(1, 1));
}

void Var::backward(const Matrix& seed) const {
  if (!node_->requires_grad) return;
  // Iterative post-order DFS over nodes that require grad.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  // Interior nodes start from zero; leaves keep accumulating.
  for (Node* n : order) {
    if (!n->parents.empty()) n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
  }
  node_->ensure_grad();
  node_->grad += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

Var Var::from_op(Matrix value, std::vector<Var> parents, std::function<void(Node&)> backward_fn,
                 std::string op) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = std::move(op);
  for (auto& p : parents) {
    node->requires_grad = node->requires_grad || p.requires_grad();
    node->parents.push_back(p.node());
  }
  if (node->requires_grad) {
    node->backward_fn = std::move(backward_fn);
  } else {
    node->parents.clear();
  }
  return Var(std::move(node));
}

namespace {

// Accumulates g into parent k if that parent tracks gradients.
template <typename Expr>
void accumulate(Node& n, std::size_t k, const Expr& g) {
  Node& p = *n.parents[k];
  if (!p.requires_grad) return;
  p.ensure_grad();
  p.grad += g;
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix out = a.value() * b.value();
  return Var::from_op(
      std::move(out), {a, b},
      [](Node& n) {
        const Matrix& av = n.parents[0]->value;
        const Matrix& bv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) accumulate(n, 0, n.grad * bv.transpose());
        if (n.parents[1]->requires_grad) accumulate(n, 1, av.transpose() * n.grad);
      },
      "matmul");
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return Var::from_op(
      a.value() + b.value(), {a, b},
      [](Node& n) {
        accumulate(n, 0, n.grad);
        accumulate(n, 1, n.grad);
      },
      "add");
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return Var::from_op(
      a.value() - b.value(), {a, b},
      [](Node& n) {
        accumulate(n, 0, n.grad);
        accumulate(n, 1, -n.grad);
      },
      "sub");
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  return Var::from_op(
      a.value().cwiseProduct(b.value()), {a, b},
      [](Node& n) {
        accumulate(n, 0, n.grad.cwiseProduct(n.parents[1]->value));
        accumulate(n, 1, n.grad.cwiseProduct(n.parents[0]->value));
      },
      "mul");
}

Var div(const Var& a, const Var& b) {
  check_same_shape(a, b, "div");
  return Var::from_op(
      a.value().cwiseQuotient(b.value()), {a, b},
      [](Node& n) {
        const Matrix& av = n.parents[0]->value;
        const Matrix& bv = n.parents[1]->value;
        accumulate(n, 0, n.grad.cwiseQuotient(bv));
        if (n.parents[1]->requires_grad) {
          accumulate(n, 1, -n.grad.cwiseProduct(av).cwiseQuotient(bv.cwiseProduct(bv)));
        }
      },
      "div");
}

Var scale(const Var& a, double s) {
  return Var::from_op(
      a.value() * s, {a}, [s](Node& n) { accumulate(n, 0, n.grad * s); }, "scale");
}

Var add_scalar(const Var& a, double s) {
  Matrix out = a.value().array() + s;
  return Var::from_op(
      std::move(out), {a}, [](Node& n) { accumulate(n, 0, n.grad); }, "add_scalar");
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: row shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return Var::from_op(
      std::move(out), {a, row},
      [](Node& n) {
        accumulate(n, 0, n.grad);
        if (n.parents[1]->requires_grad) accumulate(n, 1, n.grad.colwise().sum());
      },
      "add_row");
}

Var scale_rows(const Var& a, const Var& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw std::invalid_argument("scale_rows: column shape mismatch");
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return Var::from_op(
      std::move(out), {a, col},
      [](Node& n) {
        const Matrix& av = n.parents[0]->value;
        const Matrix& cv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
          Matrix g = n.grad.array().colwise() * cv.col(0).array();
          accumulate(n, 0, g);
        }
        if (n.parents[1]->requires_grad) {
          Matrix g = n.grad.cwiseProduct(av).rowwise().sum();
          accumulate(n, 1, g);
        }
      },
      "scale_rows");
}

Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row count mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Index ac = a.cols();
  const Index bc = b.cols();
  return Var::from_op(
      std::move(out), {a, b},
      [ac, bc](Node& n) {
        if (n.parents[0]->requires_grad) accumulate(n, 0, n.grad.leftCols(ac));
        if (n.parents[1]->requires_grad) accumulate(n, 1, n.grad.rightCols(bc));
      },
      "concat_cols");
}

Var column(const Var& a, Index j) {
  if (j < 0 || j >= a.cols()) throw std::out_of_range("column: index out of range");
  Matrix out = a.value().col(j);
  return Var::from_op(
      std::move(out), {a},
      [j](Node& n) {
        Node& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        p.grad.col(j) += n.grad.col(0);
      },
      "column");
}

Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return Var::from_op(
      std::move(out), {a},
      [](Node& n) {
        Matrix mask = (n.parents[0]->value.array() > 0.0).cast<double>();
        accumulate(n, 0, n.grad.cwiseProduct(mask));
      },
      "relu");
}

Var softplus(const Var& a) {
  Matrix out = a.value().unaryExpr([](double x) { return stable_softplus(x); });
  return Var::from_op(
      std::move(out), {a},
      [](Node& n) {
        Matrix d = n.parents[0]->value.unaryExpr([](double x) { return sigmoid(x); });
        accumulate(n, 0, n.grad.cwiseProduct(d));
      },
      "softplus");
}

Var square(const Var& a) {
  return Var::from_op(
      a.value().cwiseAbs2(), {a},
      [](Node& n) { accumulate(n, 0, 2.0 * n.grad.cwiseProduct(n.parents[0]->value)); }, "square");
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return Var::from_op(
      std::move(out), {a},
      [](Node& n) {
        const Node& p = *n.parents[0];
        accumulate(n, 0, Matrix::Constant(p.value.rows(), p.value.cols(), n.grad(0, 0)));
      },
      "sum");
}

Var mean(const Var& a) {
  const double count = static_cast<double>(a.value().size());
  if (count == 0) throw std::invalid_argument("mean of empty matrix");
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / count;
  return Var::from_op(
      std::move(out), {a},
      [count](Node& n) {
        const Node& p = *n.parents[0];
        accumulate(n, 0, Matrix::Constant(p.value.rows(), p.value.cols(), n.grad(0, 0) / count));
      },
      "mean");
}

Var grl(const Var& a, double scale) {
  return Var::from_op(
      a.value(), {a}, [scale](Node& n) { accumulate(n, 0, -scale * n.grad); }, "grl");
}

Var stop_gradient(const Var& a) { return Var(a.value(), false); }

Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

Matrix softmax(const Matrix& logits) { return log_softmax(logits).array().exp(); }

Var weighted_softmax_cross_entropy(const Var& logits, const Matrix& targets, const Eigen::VectorXd& row_weights) {
  if (targets.rows() != logits.rows() || targets.cols() != logits.cols()) {
    throw std::invalid_argument("softmax_cross_entropy: target shape mismatch");
  }
  if (row_weights.size() != logits.rows()) throw std::invalid_argument("softmax_cross_entropy: weight size mismatch");
  const Index n_rows = logits.rows();
  if (n_rows == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");
  Matrix logp = log_softmax(logits.value());
  Eigen::VectorXd per_row = -(targets.cwiseProduct(logp)).rowwise().sum();
  Matrix out(1, 1);
  out(0, 0) = per_row.cwiseProduct(row_weights).sum() / static_cast<double>(n_rows);
  Matrix probs = logp.array().exp();
  return Var::from_op(
      std::move(out), {logits},
      [probs = std::move(probs), targets, row_weights, n_rows](Node& n) {
        // d/dz of -sum_j t_j log softmax(z)_j is softmax(z) * sum_j t_j - t.
        Eigen::VectorXd tsum = targets.rowwise().sum();
        Matrix g = (probs.array().colwise() * tsum.array()).matrix() - targets;
        g = g.array().colwise() * (row_weights.array() * (n.grad(0, 0) / static_cast<double>(n_rows)));
        accumulate(n, 0, g);
      },
      "softmax_cross_entropy");
}

Var softmax_cross_entropy(const Var& logits, const Matrix& targets) {
  return weighted_softmax_cross_entropy(logits, targets, Eigen::VectorXd::Ones(logits.rows()));
}

Var softmax_cross_entropy(const Var& logits, const Var& targets) {
  check_same_shape(logits, targets, "softmax_cross_entropy");
  const Index n_rows = logits.rows();
  if (n_rows == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");
  Matrix logp = log_softmax(logits.value());
  Matrix out(1, 1);
  out(0, 0) = -(targets.value().cwiseProduct(logp)).sum() / static_cast<double>(n_rows);
  return Var::from_op(
      std::move(out), {logits, targets},
      [logp = std::move(logp), n_rows](Node& n) {
        const double s = n.grad(0, 0) / static_cast<double>(n_rows);
        const Matrix& t = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
          Eigen::VectorXd tsum = t.rowwise().sum();
          Matrix probs = logp.array().exp();
          Matrix g = (probs.array().colwise() * tsum.array()).matrix() - t;
          accumulate(n, 0, g * s);
        }
        if (n.parents[1]->requires_grad) accumulate(n, 1, -logp * s);
      },
      "softmax_cross_entropy");
}

}  // namespace debiasmix::ag
