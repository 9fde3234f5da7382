#include "nondiss/autodiff.hpp"

#include <cmath>
#include <string>

#include "nondiss/errors.hpp"

namespace nondiss {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::kShapeMismatch,
          std::string(op) + ": " + shape(a) + " vs " + shape(b));
}

Tape& tape_of(Var a) {
  require(a.tape != nullptr, ErrorKind::kInvalidArgument, "variable is not on a tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  require(a.tape != nullptr && a.tape == b.tape, ErrorKind::kInvalidArgument,
          "variables live on different tapes");
  return *a.tape;
}

// tanh through the vectorized exp: sign(x) (1 - e) / (1 + e) with e = exp(-2|x|).
// Absolute error stays within a few ulps of 1; Eigen's own double tanh is scalar.
Matrix fast_tanh(const Matrix& x) {
  const Eigen::ArrayXXd e = (-2.0 * x.array().abs()).exp();
  return (x.array().sign() * (1.0 - e) / (1.0 + e)).matrix();
}

// out(to[i], j) += c[i] * x(from[i], j), column by column (storage order).
// from == nullptr means from[i] = i, to == nullptr means to[i] = i.
void scatter_rows(const Matrix& x, const int* from, const int* to, const double* c, std::size_t m,
                  Matrix& out) {
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double* xc = x.col(j).data();
    double* oc = out.col(j).data();
    for (std::size_t i = 0; i < m; ++i) {
      const double v = xc[from ? from[i] : i];
      oc[to ? to[i] : i] += c ? c[i] * v : v;
    }
  }
}

}  // namespace

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::push(Matrix value, std::vector<int> parents, BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  for (int p : parents) node.requires_grad = node.requires_grad || nodes_[p].requires_grad;
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::variable(Matrix value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(ParamStore& store, const std::string& name) {
  ParamEntry& entry = store.at(name);
  if (auto it = param_ids_.find(&entry); it != param_ids_.end()) return {this, it->second};
  Node node;
  node.value = entry.value;
  node.param = &entry;
  node.requires_grad = entry.trainable;
  nodes_.push_back(std::move(node));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_ids_.emplace(&entry, id);
  return {this, id};
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0 && n.value.size() != 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var root, RetainGraph retain) {
  require(value(root.id).size() == 1, ErrorKind::kShapeMismatch,
          "backward without a seed needs a scalar root, got " + shape(value(root.id)));
  backward(root, Matrix::Ones(1, 1), retain);
}

void Tape::backward(Var root, const Matrix& seed, RetainGraph retain) {
  require(root.tape == this, ErrorKind::kInvalidArgument, "root is not on this tape");
  require(!consumed_, ErrorKind::kStaleTape,
          "tape was already replayed; record a new forward pass");
  check_same_shape(value(root.id), seed, "backward seed");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (retain == RetainGraph::kNo) consumed_ = true;
  accumulate(root.id, seed);
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.param != nullptr) {
      if (n.param->grad.size() == 0) n.param->grad = Matrix::Zero(n.value.rows(), n.value.cols());
      n.param->grad += n.grad;
    } else if (n.backward) {
      n.backward(*this, id, n.grad);
    }
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kIdentity: return "identity";
    case Activation::kSin: return "sin";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  if (s == "identity") return Activation::kIdentity;
  if (s == "sin") return Activation::kSin;
  fail(ErrorKind::kInvalidArgument, "unknown activation '" + s + "'");
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kTanh: return std::tanh(x);
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
    case Activation::kIdentity: return x;
    case Activation::kSin: return std::sin(x);
  }
  return x;
}

double activate_derivative(Activation a, double x) {
  switch (a) {
    case Activation::kTanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::kRelu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::kIdentity: return 1.0;
    case Activation::kSin: return std::cos(x);
  }
  return 1.0;
}

double activate_antiderivative(Activation a, double x) {
  switch (a) {
    case Activation::kTanh: {
      // log cosh(x) = |x| + log1p(exp(-2|x|)) - log 2, stable for large |x|.
      const double ax = std::abs(x);
      return ax + std::log1p(std::exp(-2.0 * ax)) - std::log(2.0);
    }
    case Activation::kRelu: return x > 0.0 ? 0.5 * x * x : 0.0;
    case Activation::kIdentity: return 0.5 * x * x;
    case Activation::kSin: break;
  }
  fail(ErrorKind::kInvalidArgument, "sin has no monotone antiderivative for an energy");
}

namespace ad {

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.cols() == b.rows(), ErrorKind::kShapeMismatch,
          "matmul: " + shape(a.value()) + " * " + shape(b.value()));
  return t.push(a.value() * b.value(), {a.id, b.id}, [ia = a.id, ib = b.id](Tape& t, int, const Matrix& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  check_same_shape(a.value(), b.value(), "add");
  return t.push(a.value() + b.value(), {a.id, b.id}, [ia = a.id, ib = b.id](Tape& t, int, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  check_same_shape(a.value(), b.value(), "sub");
  return t.push(a.value() - b.value(), {a.id, b.id}, [ia = a.id, ib = b.id](Tape& t, int, const Matrix& g) {
    t.accumulate(ia, g);
    if (t.requires_grad(ib)) t.accumulate(ib, -g);
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  return t.push(s * a.value(), {a.id}, [ia = a.id, s](Tape& t, int, const Matrix& g) {
    t.accumulate(ia, s * g);
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a, b);
  check_same_shape(a.value(), b.value(), "hadamard");
  return t.push(a.value().cwiseProduct(b.value()), {a.id, b.id},
                [ia = a.id, ib = b.id](Tape& t, int, const Matrix& g) {
                  if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                  if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                });
}

Var add_row(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(b.rows() == 1 && b.cols() == a.cols(), ErrorKind::kShapeMismatch,
          "add_row: " + shape(a.value()) + " + " + shape(b.value()));
  Matrix out = a.value().rowwise() + b.value().row(0);
  return t.push(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape& t, int, const Matrix& g) {
    t.accumulate(ia, g);
    if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
  });
}

Var mul_row(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(b.rows() == 1 && b.cols() == a.cols(), ErrorKind::kShapeMismatch,
          "mul_row: " + shape(a.value()) + " * " + shape(b.value()));
  Matrix out = a.value().array().rowwise() * b.value().row(0).array();
  return t.push(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape& t, int, const Matrix& g) {
    if (t.requires_grad(ia)) {
      Matrix ga = g.array().rowwise() * t.value(ib).row(0).array();
      t.accumulate(ia, ga);
    }
    if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)).colwise().sum());
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  return t.push(a.value().transpose(), {a.id}, [ia = a.id](Tape& t, int, const Matrix& g) {
    t.accumulate(ia, g.transpose());
  });
}

Var antisym(Var a) {
  Tape& t = tape_of(a);
  return t.push(antisymmetrize(a.value()), {a.id}, [ia = a.id](Tape& t, int, const Matrix& g) {
    t.accumulate(ia, g - g.transpose());
  });
}

Var symm(Var a) {
  Tape& t = tape_of(a);
  return t.push(symmetrize(a.value()), {a.id}, [ia = a.id](Tape& t, int, const Matrix& g) {
    t.accumulate(ia, g + g.transpose());
  });
}

Var add_diag(Var a, double s) {
  Tape& t = tape_of(a);
  Matrix out = a.value();
  out.diagonal().array() += s;
  return t.push(std::move(out), {a.id}, [ia = a.id](Tape& t, int, const Matrix& g) {
    t.accumulate(ia, g);
  });
}

Var activation(Var a, Activation kind) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  switch (kind) {
    case Activation::kTanh: y = fast_tanh(x); break;
    case Activation::kRelu: y = x.array().max(0.0); break;
    case Activation::kIdentity: y = x; break;
    case Activation::kSin: y = x.array().sin(); break;
  }
  return t.push(std::move(y), {a.id}, [ia = a.id, kind](Tape& t, int self, const Matrix& g) {
    const Matrix& x = t.value(ia);
    switch (kind) {
      case Activation::kTanh: {
        const Matrix& y = t.value(self);
        t.accumulate(ia, (g.array() * (1.0 - y.array().square())).matrix());
        break;
      }
      case Activation::kRelu:
        t.accumulate(ia, (g.array() * (x.array() > 0.0).cast<double>()).matrix());
        break;
      case Activation::kIdentity: t.accumulate(ia, g); break;
      case Activation::kSin: t.accumulate(ia, (g.array() * x.array().cos()).matrix()); break;
    }
  });
}

Var spmm(std::shared_ptr<const SparseMatrix> s, Var x) {
  Tape& t = tape_of(x);
  require(s->cols() == x.rows(), ErrorKind::kShapeMismatch,
          "spmm: operator has " + std::to_string(s->cols()) + " columns, state has " +
              std::to_string(x.rows()) + " rows");
  Matrix out = (*s) * x.value();
  return t.push(std::move(out), {x.id}, [ix = x.id, s](Tape& t, int, const Matrix& g) {
    t.accumulate(ix, s->transpose() * g);
  });
}

Var edge_aggregate(Var coef, Var x, std::shared_ptr<const EdgeIndex> edges) {
  Tape& t = tape_of(coef, x);
  const auto m = static_cast<Eigen::Index>(edges->src.size());
  require(coef.rows() == m && coef.cols() == 1, ErrorKind::kShapeMismatch,
          "edge_aggregate: coefficients " + shape(coef.value()) + " for " + std::to_string(m) +
              " edges");
  require(x.rows() == edges->num_nodes, ErrorKind::kShapeMismatch,
          "edge_aggregate: state rows do not match node count");
  const Matrix& xv = x.value();
  const Matrix& c = coef.value();
  Matrix out = Matrix::Zero(edges->num_nodes, xv.cols());
  scatter_rows(xv, edges->src.data(), edges->dst.data(), c.data(), m, out);
  return t.push(std::move(out), {coef.id, x.id},
                [ic = coef.id, ix = x.id, edges](Tape& t, int, const Matrix& g) {
                  const auto m = static_cast<Eigen::Index>(edges->src.size());
                  const Matrix& xv = t.value(ix);
                  const Matrix& c = t.value(ic);
                  if (t.requires_grad(ix)) {
                    Matrix gx = Matrix::Zero(xv.rows(), xv.cols());
                    scatter_rows(g, edges->dst.data(), edges->src.data(), c.data(), m, gx);
                    t.accumulate(ix, gx);
                  }
                  if (t.requires_grad(ic)) {
                    Matrix gc = Matrix::Zero(m, 1);
                    for (Eigen::Index j = 0; j < g.cols(); ++j) {
                      const double* gcol = g.col(j).data();
                      const double* xcol = xv.col(j).data();
                      for (Eigen::Index e = 0; e < m; ++e) gc(e, 0) += gcol[edges->dst[e]] * xcol[edges->src[e]];
                    }
                    t.accumulate(ic, gc);
                  }
                });
}

Var gather_rows(Var x, std::shared_ptr<const std::vector<int>> index) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(index->size()), xv.cols());
  scatter_rows(xv, index->data(), nullptr, nullptr, index->size(), out);
  return t.push(std::move(out), {x.id}, [ix = x.id, index](Tape& t, int, const Matrix& g) {
    const Matrix& xv = t.value(ix);
    Matrix gx = Matrix::Zero(xv.rows(), xv.cols());
    scatter_rows(g, nullptr, index->data(), nullptr, index->size(), gx);
    t.accumulate(ix, gx);
  });
}

Var scatter_add_rows(Var x, std::shared_ptr<const std::vector<int>> index, int out_rows) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  require(static_cast<Eigen::Index>(index->size()) == xv.rows(), ErrorKind::kShapeMismatch,
          "scatter_add_rows: index length does not match rows");
  Matrix out = Matrix::Zero(out_rows, xv.cols());
  scatter_rows(xv, nullptr, index->data(), nullptr, index->size(), out);
  return t.push(std::move(out), {x.id}, [ix = x.id, index](Tape& t, int, const Matrix& g) {
    Matrix gx = Matrix::Zero(static_cast<Eigen::Index>(index->size()), g.cols());
    scatter_rows(g, index->data(), nullptr, nullptr, index->size(), gx);
    t.accumulate(ix, gx);
  });
}

Var hcat(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require(a.rows() == b.rows(), ErrorKind::kShapeMismatch,
          "hcat: " + shape(a.value()) + " | " + shape(b.value()));
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const auto ca = a.cols();
  const auto cb = b.cols();
  return t.push(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id, ca, cb](Tape& t, int, const Matrix& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g.leftCols(ca));
    if (t.requires_grad(ib)) t.accumulate(ib, g.rightCols(cb));
  });
}

Var cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  require(start >= 0 && count >= 0 && start + count <= a.cols(), ErrorKind::kShapeMismatch,
          "cols: slice out of range");
  Matrix out = a.value().middleCols(start, count);
  return t.push(std::move(out), {a.id}, [ia = a.id, start, count](Tape& t, int, const Matrix& g) {
    const Matrix& av = t.value(ia);
    Matrix ga = Matrix::Zero(av.rows(), av.cols());
    ga.middleCols(start, count) = g;
    t.accumulate(ia, ga);
  });
}

Var row_mean(Var a) {
  Tape& t = tape_of(a);
  const auto c = a.cols();
  require(c > 0, ErrorKind::kShapeMismatch, "row_mean of zero columns");
  Matrix out = a.value().rowwise().mean();
  return t.push(std::move(out), {a.id}, [ia = a.id, c](Tape& t, int, const Matrix& g) {
    Matrix ga = g.replicate(1, c) / static_cast<double>(c);
    t.accumulate(ia, ga);
  });
}

Var segment_mean(Var x, std::shared_ptr<const std::vector<int>> segment, int num_segments) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  require(static_cast<Eigen::Index>(segment->size()) == xv.rows(), ErrorKind::kShapeMismatch,
          "segment_mean: segment ids do not match rows");
  std::vector<double> counts(num_segments, 0.0);
  for (int s : *segment) counts[s] += 1.0;
  Matrix out = Matrix::Zero(num_segments, xv.cols());
  scatter_rows(xv, nullptr, segment->data(), nullptr, segment->size(), out);
  for (int s = 0; s < num_segments; ++s) {
    if (counts[s] > 0) out.row(s) /= counts[s];
  }
  return t.push(std::move(out), {x.id}, [ix = x.id, segment, counts](Tape& t, int, const Matrix& g) {
    Matrix gx(static_cast<Eigen::Index>(segment->size()), g.cols());
    for (std::size_t i = 0; i < segment->size(); ++i) {
      const int s = (*segment)[i];
      gx.row(static_cast<Eigen::Index>(i)) = g.row(s) / counts[s];
    }
    t.accumulate(ix, gx);
  });
}

Var safe_pow(Var a, double p) {
  Tape& t = tape_of(a);
  Matrix out = a.value().unaryExpr([p](double x) { return x > 0.0 ? std::pow(x, p) : 0.0; });
  return t.push(std::move(out), {a.id}, [ia = a.id, p](Tape& t, int, const Matrix& g) {
    Matrix d = t.value(ia).unaryExpr([p](double x) { return x > 0.0 ? p * std::pow(x, p - 1.0) : 0.0; });
    t.accumulate(ia, g.cwiseProduct(d));
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.push(std::move(out), {a.id}, [ia = a.id](Tape& t, int, const Matrix& g) {
    const Matrix& av = t.value(ia);
    t.accumulate(ia, Matrix::Constant(av.rows(), av.cols(), g(0, 0)));
  });
}

Var mse(Var pred, const Matrix& target, const Matrix* mask) {
  Tape& t = tape_of(pred);
  check_same_shape(pred.value(), target, "mse");
  Matrix w = mask ? *mask : Matrix::Ones(target.rows(), target.cols());
  if (mask) check_same_shape(*mask, target, "mse mask");
  const double count = w.sum();
  require(count > 0, ErrorKind::kEmpty, "mse over zero entries");
  Matrix diff = (pred.value() - target).cwiseProduct(w);
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / count;
  return t.push(std::move(out), {pred.id}, [ip = pred.id, diff = std::move(diff), w = std::move(w), count](Tape& t, int, const Matrix& g) {
    t.accumulate(ip, (2.0 * g(0, 0) / count) * diff.cwiseProduct(w));
  });
}

}  // namespace ad

}  // namespace nondiss
