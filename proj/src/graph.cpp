#include "nondiss/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <string>

#include "nondiss/errors.hpp"
#include "nondiss/random.hpp"

namespace nondiss {

namespace {

void add_undirected(std::vector<Edge>& edges, int u, int v) {
  edges.push_back({u, v});
  edges.push_back({v, u});
}

std::string str(int v) { return std::to_string(v); }

}  // namespace

Graph::Graph(int n, std::vector<Edge> edges, bool undirected, Matrix x,
             std::optional<Matrix> edge_features)
    : n_(n), edges_(std::move(edges)), undirected_(undirected), x_(std::move(x)),
      e_(std::move(edge_features)) {
  require(n_ >= 1, ErrorKind::kInvalidSize, "graph needs at least one node, got " + str(n_));
  if (x_.size() == 0 && x_.rows() != n_) x_ = Matrix(n_, 0);
  require(x_.rows() == n_, ErrorKind::kShapeMismatch,
          "node features have " + str(static_cast<int>(x_.rows())) + " rows for " + str(n_) +
              " nodes");
  std::set<Edge> seen;
  for (const auto& e : edges_) {
    require(e.src >= 0 && e.src < n_ && e.dst >= 0 && e.dst < n_, ErrorKind::kInvalidArgument,
            "edge (" + str(e.src) + "," + str(e.dst) + ") out of range");
    require(e.src != e.dst, ErrorKind::kInvalidArgument, "self loop on node " + str(e.src));
    require(seen.insert(e).second, ErrorKind::kInvalidArgument,
            "duplicate edge (" + str(e.src) + "," + str(e.dst) + ")");
  }
  if (undirected_) {
    for (const auto& e : edges_) {
      require(seen.count({e.dst, e.src}) == 1, ErrorKind::kInvalidArgument,
              "undirected graph is missing reverse of (" + str(e.src) + "," + str(e.dst) + ")");
    }
  }
  if (e_) {
    require(e_->rows() == num_edges(), ErrorKind::kShapeMismatch,
            "edge features have " + str(static_cast<int>(e_->rows())) + " rows for " +
                str(num_edges()) + " edges");
  }
}

std::vector<std::pair<int, int>> Graph::undirected_pairs() const {
  std::set<std::pair<int, int>> seen;
  std::vector<std::pair<int, int>> out;
  for (const auto& e : edges_) {
    std::pair<int, int> p{std::min(e.src, e.dst), std::max(e.src, e.dst)};
    if (seen.insert(p).second) out.push_back(p);
  }
  return out;
}

std::vector<int> Graph::in_degree() const {
  std::vector<int> deg(n_, 0);
  for (const auto& e : edges_) ++deg[e.dst];
  return deg;
}

std::vector<std::vector<int>> Graph::out_neighbors() const {
  std::vector<std::vector<int>> adj(n_);
  for (const auto& e : edges_) adj[e.src].push_back(e.dst);
  return adj;
}

Graph Graph::with_features(Matrix x) const { return Graph(n_, edges_, undirected_, std::move(x), e_); }

Graph Graph::permuted(const std::vector<int>& perm) const {
  require(static_cast<int>(perm.size()) == n_, ErrorKind::kShapeMismatch,
          "permutation length does not match node count");
  std::vector<Edge> edges;
  edges.reserve(edges_.size());
  for (const auto& e : edges_) edges.push_back({perm[e.src], perm[e.dst]});
  Matrix x(x_.rows(), x_.cols());
  for (int u = 0; u < n_; ++u) x.row(perm[u]) = x_.row(u);
  return Graph(n_, std::move(edges), undirected_, std::move(x), e_);
}

Graph path_graph(int n) {
  require(n >= 2, ErrorKind::kInvalidSize, "path graph needs n >= 2, got " + str(n));
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) add_undirected(edges, i, i + 1);
  return Graph(n, std::move(edges), true);
}

Graph ring_graph(int n) {
  require(n >= 3, ErrorKind::kInvalidSize, "ring graph needs n >= 3, got " + str(n));
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) add_undirected(edges, i, i + 1);
  add_undirected(edges, n - 1, 0);
  return Graph(n, std::move(edges), true);
}

Graph crossed_ring_graph(int n) {
  require(n >= 6 && n % 2 == 0, ErrorKind::kInvalidSize,
          "crossed ring needs n = 2k with k >= 3, got " + str(n));
  const int k = n / 2;
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) add_undirected(edges, i, i + 1);
  add_undirected(edges, n - 1, 0);
  // 1-indexed {u_i, u_{n-i+1}} for i in [2, k).
  for (int i = 2; i < k; ++i) add_undirected(edges, i - 1, n - i);
  // 1-indexed {u_{n-j}, u_{3+j}} for j in [0, k-2).
  for (int j = 0; j < k - 2; ++j) add_undirected(edges, n - j - 1, 2 + j);
  return Graph(n, std::move(edges), true);
}

Graph grid_graph(int rows, int cols) {
  require(rows >= 1 && cols >= 1, ErrorKind::kInvalidSize,
          "grid needs positive dimensions, got " + str(rows) + "x" + str(cols));
  std::vector<Edge> edges;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int u = r * cols + c;
      if (c + 1 < cols) add_undirected(edges, u, u + 1);
      if (r + 1 < rows) add_undirected(edges, u, u + cols);
    }
  }
  return Graph(rows * cols, std::move(edges), true);
}

Graph erdos_renyi(int n, double p, std::uint64_t seed) {
  require(n >= 1, ErrorKind::kInvalidSize, "Erdos-Renyi needs n >= 1");
  require(p >= 0.0 && p <= 1.0, ErrorKind::kInvalidArgument,
          "edge probability must lie in [0, 1], got " + std::to_string(p));
  Rng rng(seed);
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (rng.uniform() < p) add_undirected(edges, u, v);
    }
  }
  return Graph(n, std::move(edges), true);
}

Graph barabasi_albert(int n, int k, std::uint64_t seed) {
  require(k >= 1 && k < n, ErrorKind::kInvalidArgument,
          "Barabasi-Albert needs 1 <= k < n, got k=" + str(k) + " n=" + str(n));
  Rng rng(seed);
  std::vector<Edge> edges;
  std::vector<int> degree(n, 0);
  for (int u = 0; u < k; ++u) {
    for (int v = u + 1; v < k; ++v) {
      add_undirected(edges, u, v);
      ++degree[u];
      ++degree[v];
    }
  }
  for (int u = k; u < n; ++u) {
    std::int64_t total = 0;
    for (int v = 0; v < u; ++v) total += degree[v];
    std::vector<int> targets;
    while (static_cast<int>(targets.size()) < k) {
      int pick = 0;
      if (total == 0) {
        pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(u)));
      } else {
        auto r = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(total)));
        while (r >= degree[pick]) r -= degree[pick++];
      }
      if (std::find(targets.begin(), targets.end(), pick) == targets.end()) targets.push_back(pick);
    }
    for (int v : targets) {
      add_undirected(edges, u, v);
      ++degree[u];
      ++degree[v];
    }
  }
  return Graph(n, std::move(edges), true);
}

namespace {

struct Triplets {
  std::vector<Eigen::Triplet<double>> t;
  void add(int r, int c, double v) { t.emplace_back(r, c, v); }
};

}  // namespace

Graph disjoint_union(const std::vector<const Graph*>& graphs) {
  require(!graphs.empty(), ErrorKind::kEmpty, "disjoint union of no graphs");
  int n = 0;
  std::size_t m = 0;
  const auto width = graphs.front()->x().cols();
  bool undirected = true;
  for (const Graph* g : graphs) {
    require(g->x().cols() == width, ErrorKind::kShapeMismatch, "feature widths differ in union");
    n += g->num_nodes();
    m += g->edges().size();
    undirected = undirected && g->undirected();
  }
  std::vector<Edge> edges;
  edges.reserve(m);
  Matrix x(n, width);
  int offset = 0;
  for (const Graph* g : graphs) {
    for (const auto& e : g->edges()) edges.push_back({e.src + offset, e.dst + offset});
    x.middleRows(offset, g->num_nodes()) = g->x();
    offset += g->num_nodes();
  }
  return Graph(n, std::move(edges), undirected, std::move(x));
}

namespace {

std::vector<double> inverse_power(const Graph& g, double power, DegreePolicy policy) {
  const auto deg = g.in_degree();
  std::vector<double> out(deg.size());
  for (std::size_t u = 0; u < deg.size(); ++u) {
    if (deg[u] == 0) {
      require(policy == DegreePolicy::kZeroRow, ErrorKind::kDegenerateDegree,
              "node " + std::to_string(u) + " has zero degree");
      out[u] = 0.0;
    } else {
      out[u] = std::pow(static_cast<double>(deg[u]), -power);
    }
  }
  return out;
}

}  // namespace

SparseMatrix sparse_shift_operator(const Graph& g, ShiftOperatorKind kind, DegreePolicy policy) {
  const int n = g.num_nodes();
  Triplets trip;
  const auto deg = g.in_degree();
  switch (kind) {
    case ShiftOperatorKind::kAdjacency:
      for (const auto& e : g.edges()) trip.add(e.dst, e.src, 1.0);
      break;
    case ShiftOperatorKind::kSymNormAdjacency: {
      const auto s = inverse_power(g, 0.5, policy);
      for (const auto& e : g.edges()) trip.add(e.dst, e.src, s[e.dst] * s[e.src]);
      break;
    }
    case ShiftOperatorKind::kRandomWalkAdjacency: {
      const auto s = inverse_power(g, 1.0, policy);
      for (const auto& e : g.edges()) trip.add(e.dst, e.src, s[e.dst]);
      break;
    }
    case ShiftOperatorKind::kLaplacian:
      for (int u = 0; u < n; ++u) trip.add(u, u, deg[u]);
      for (const auto& e : g.edges()) trip.add(e.dst, e.src, -1.0);
      break;
    case ShiftOperatorKind::kSymNormLaplacian: {
      const auto s = inverse_power(g, 0.5, policy);
      for (int u = 0; u < n; ++u) trip.add(u, u, deg[u] * s[u] * s[u]);
      for (const auto& e : g.edges()) trip.add(e.dst, e.src, -s[e.dst] * s[e.src]);
      break;
    }
    case ShiftOperatorKind::kRandomWalkLaplacian: {
      const auto s = inverse_power(g, 1.0, policy);
      for (int u = 0; u < n; ++u) trip.add(u, u, deg[u] * s[u]);
      for (const auto& e : g.edges()) trip.add(e.dst, e.src, -s[e.dst]);
      break;
    }
    case ShiftOperatorKind::kLearned:
      fail(ErrorKind::kInvalidArgument,
           "learned operators carry trainable weights; build them with swan_learn_operators");
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(trip.t.begin(), trip.t.end());
  return m;
}

Matrix shift_operator(const Graph& g, ShiftOperatorKind kind, DegreePolicy policy) {
  return Matrix(sparse_shift_operator(g, kind, policy));
}

SparseMatrix gcn_normalized_adjacency(const Graph& g) {
  const int n = g.num_nodes();
  auto deg = g.in_degree();
  std::vector<double> s(n);
  for (int u = 0; u < n; ++u) s[u] = 1.0 / std::sqrt(deg[u] + 1.0);
  Triplets trip;
  for (int u = 0; u < n; ++u) trip.add(u, u, s[u] * s[u]);
  for (const auto& e : g.edges()) trip.add(e.dst, e.src, s[e.dst] * s[e.src]);
  SparseMatrix m(n, n);
  m.setFromTriplets(trip.t.begin(), trip.t.end());
  return m;
}

std::vector<int> sssp(const Graph& g, int source) {
  require(source >= 0 && source < g.num_nodes(), ErrorKind::kInvalidArgument,
          "source " + str(source) + " out of range");
  const auto adj = g.out_neighbors();
  std::vector<int> dist(g.num_nodes(), kUnreachable);
  std::deque<int> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : adj[u]) {
      if (dist[v] == kUnreachable) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

std::vector<int> eccentricity(const Graph& g) {
  std::vector<int> ecc(g.num_nodes());
  for (int u = 0; u < g.num_nodes(); ++u) {
    const auto d = sssp(g, u);
    ecc[u] = std::find(d.begin(), d.end(), kUnreachable) != d.end()
                 ? kUnreachable
                 : *std::max_element(d.begin(), d.end());
  }
  return ecc;
}

int diameter(const Graph& g) {
  const auto ecc = eccentricity(g);
  if (std::find(ecc.begin(), ecc.end(), kUnreachable) != ecc.end()) return kUnreachable;
  return *std::max_element(ecc.begin(), ecc.end());
}

bool is_connected(const Graph& g) {
  const auto d = sssp(g, 0);
  if (std::find(d.begin(), d.end(), kUnreachable) != d.end()) return false;
  return g.undirected() || diameter(g) != kUnreachable;
}

double dirichlet_energy(const Matrix& x, const Graph& g) {
  require(x.rows() == g.num_nodes(), ErrorKind::kShapeMismatch,
          "state has " + str(static_cast<int>(x.rows())) + " rows for " + str(g.num_nodes()) +
              " nodes");
  double total = 0.0;
  for (const auto& e : g.edges()) total += (x.row(e.dst) - x.row(e.src)).squaredNorm();
  return total / g.num_nodes();
}

nlohmann::json matrix_to_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  require(j.is_array(), ErrorKind::kParse, "matrix must be an array of rows");
  if (j.empty()) return Matrix(0, 0);
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    require(j[r].is_array() && static_cast<Eigen::Index>(j[r].size()) == cols, ErrorKind::kParse,
            "ragged matrix row " + std::to_string(r));
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = j[r][c].get<double>();
  }
  return m;
}

nlohmann::json graph_to_json(const Graph& g) {
  nlohmann::json j;
  j["n"] = g.num_nodes();
  j["undirected"] = g.undirected();
  auto edges = nlohmann::json::array();
  for (const auto& e : g.edges()) edges.push_back({e.src, e.dst});
  j["edges"] = std::move(edges);
  j["x"] = matrix_to_json(g.x());
  if (g.edge_features()) j["e"] = matrix_to_json(*g.edge_features());
  return j;
}

Graph graph_from_json(const nlohmann::json& j) {
  try {
    const int n = j.at("n").get<int>();
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    Matrix x = j.contains("x") ? matrix_from_json(j.at("x")) : Matrix(n, 0);
    if (x.rows() == 0 && n > 0) x = Matrix(n, 0);
    std::optional<Matrix> ef;
    if (j.contains("e")) ef = matrix_from_json(j.at("e"));
    return Graph(n, std::move(edges), j.at("undirected").get<bool>(), std::move(x), std::move(ef));
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorKind::kParse, std::string("graph json: ") + ex.what());
  }
}

}  // namespace nondiss
