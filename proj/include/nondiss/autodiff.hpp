#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "nondiss/graph.hpp"
#include "nondiss/linalg.hpp"
#include "nondiss/params.hpp"

namespace nondiss {

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

enum class RetainGraph { kNo, kYes };

// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
// order, so the reverse of insertion order is a valid reverse topological
// order. Parameter leaves are created once per tape and name; their adjoints
// are added into the owning ParamStore when the backward pass reaches them.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self, const Matrix& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf whose adjoint can be read back with grad().
  Var variable(Matrix value);
  Var param(ParamStore& store, const std::string& name);

  /// Scalar root, seed 1.
  void backward(Var root, RetainGraph retain = RetainGraph::kNo);
  void backward(Var root, const Matrix& seed, RetainGraph retain = RetainGraph::kNo);

  /// Adjoint from the last backward pass; zeros when none reached the node.
  Matrix grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  Var push(Matrix value, std::vector<int> parents, BackwardFn fn);
  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  void accumulate(int id, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    ParamEntry* param = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const ParamEntry*, int> param_ids_;
  bool consumed_ = false;
};

/// Edge endpoints shared by aggregation ops.
struct EdgeIndex {
  std::vector<int> src;
  std::vector<int> dst;
  int num_nodes = 0;
};

enum class Activation { kTanh, kRelu, kIdentity, kSin };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

double activate(Activation a, double x);
double activate_derivative(Activation a, double x);
/// Antiderivative with value 0 at 0: log cosh for tanh, x^2/2 for identity,
/// x^2/2 [x > 0] for relu. Throws invalid-argument for sin.
double activate_antiderivative(Activation a, double x);

namespace ad {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var hadamard(Var a, Var b);
/// a (r x c) plus row vector b (1 x c) broadcast over rows.
Var add_row(Var a, Var b);
/// a (r x c) times row vector b (1 x c) elementwise, broadcast over rows.
Var mul_row(Var a, Var b);
Var transpose(Var a);
/// a - a^T.
Var antisym(Var a);
/// a + a^T.
Var symm(Var a);
/// a + s I.
Var add_diag(Var a, double s);
Var activation(Var a, Activation kind);

/// S X for a constant sparse S.
Var spmm(std::shared_ptr<const SparseMatrix> s, Var x);
/// out[dst_e] += coef_e * x[src_e]; coef is m x 1.
Var edge_aggregate(Var coef, Var x, std::shared_ptr<const EdgeIndex> edges);

Var gather_rows(Var x, std::shared_ptr<const std::vector<int>> index);
Var scatter_add_rows(Var x, std::shared_ptr<const std::vector<int>> index, int out_rows);
Var hcat(Var a, Var b);
Var cols(Var a, Eigen::Index start, Eigen::Index count);
/// Mean over columns, r x 1.
Var row_mean(Var a);
/// Mean of rows per segment id; segment ids in [0, num_segments).
Var segment_mean(Var x, std::shared_ptr<const std::vector<int>> segment, int num_segments);
/// x^p where x > 0, 0 elsewhere.
Var safe_pow(Var a, double p);
Var sum(Var a);
/// Mean squared error over entries where mask (same shape, 0/1) is set.
Var mse(Var pred, const Matrix& target, const Matrix* mask = nullptr);

}  // namespace ad

}  // namespace nondiss
