#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>
#include <json.hpp>

#include "nondiss/linalg.hpp"

namespace nondiss {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Directed edge src -> dst. Messages flow along the edge, so src is an
/// in-neighbour of dst.
struct Edge {
  int src = 0;
  int dst = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Immutable static graph. Undirected graphs store both orientations of every
// edge. Construction validates the invariants: indices in range, no self
// loops, no duplicate directed edges, symmetric edge set when undirected, and
// feature row counts.
class Graph {
 public:
  Graph(int n, std::vector<Edge> edges, bool undirected, Matrix x = Matrix(),
        std::optional<Matrix> edge_features = std::nullopt);

  int num_nodes() const { return n_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  bool undirected() const { return undirected_; }
  const Matrix& x() const { return x_; }
  const std::optional<Matrix>& edge_features() const { return e_; }

  /// Each undirected edge once, as (min, max), in edge-list order.
  std::vector<std::pair<int, int>> undirected_pairs() const;

  std::vector<int> in_degree() const;
  std::vector<std::vector<int>> out_neighbors() const;

  Graph with_features(Matrix x) const;

  /// Relabels node u as perm[u]; features and edges move with their nodes.
  Graph permuted(const std::vector<int>& perm) const;

 private:
  int n_;
  std::vector<Edge> edges_;
  bool undirected_;
  Matrix x_;
  std::optional<Matrix> e_;
};

// Generators. All return undirected graphs with an n x 0 feature matrix.
Graph path_graph(int n);
Graph ring_graph(int n);
Graph crossed_ring_graph(int n);
Graph grid_graph(int rows, int cols);
Graph erdos_renyi(int n, double p, std::uint64_t seed);
Graph barabasi_albert(int n, int k, std::uint64_t seed);

/// Block-diagonal union; node ids of graph i are offset by the sizes of graphs
/// before it. Features are stacked and must share a width.
Graph disjoint_union(const std::vector<const Graph*>& graphs);

enum class ShiftOperatorKind {
  kAdjacency,
  kSymNormAdjacency,
  kRandomWalkAdjacency,
  kLaplacian,
  kSymNormLaplacian,
  kRandomWalkLaplacian,
  kLearned,
};

/// How degree-normalized operators treat nodes with zero in-degree.
enum class DegreePolicy { kZeroRow, kError };

/// Dense operator with the in-adjacency convention A(dst, src) = 1 and
/// D = diag(in-degree). kLearned is produced by swan_learn_operators and is
/// rejected here.
Matrix shift_operator(const Graph& g, ShiftOperatorKind kind,
                      DegreePolicy policy = DegreePolicy::kZeroRow);

SparseMatrix sparse_shift_operator(const Graph& g, ShiftOperatorKind kind,
                                   DegreePolicy policy = DegreePolicy::kZeroRow);

/// D^-1/2 (A + I) D^-1/2 with D the degree including the self loop.
SparseMatrix gcn_normalized_adjacency(const Graph& g);

inline constexpr int kUnreachable = -1;

/// Hop distances from source along edge direction; kUnreachable where no path.
std::vector<int> sssp(const Graph& g, int source);

/// Per-node eccentricity; kUnreachable for nodes that cannot reach every node.
std::vector<int> eccentricity(const Graph& g);

/// Max eccentricity, or kUnreachable if the graph is not strongly connected.
int diameter(const Graph& g);

bool is_connected(const Graph& g);

/// (1/n) sum_u sum_{v in N(u)} ||x_u - x_v||^2.
double dirichlet_energy(const Matrix& x, const Graph& g);

nlohmann::json graph_to_json(const Graph& g);
Graph graph_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace nondiss
