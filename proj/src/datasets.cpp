#include "nondiss/datasets.hpp"

#include <cmath>
#include <fstream>

#include "nondiss/errors.hpp"
#include "nondiss/random.hpp"

namespace nondiss {

namespace {

constexpr const char* kFormat = "nondiss-dataset";
constexpr int kVersion = 1;

Graph transfer_topology(TaskKind kind, int k) {
  switch (kind) {
    case TaskKind::kTransferLine: return path_graph(k + 1);
    case TaskKind::kTransferRing: return ring_graph(2 * k);
    case TaskKind::kTransferCrossedRing: return crossed_ring_graph(2 * k);
    default: fail(ErrorKind::kInvalidArgument, std::string("not a transfer task: ") + to_string(kind));
  }
}

std::vector<Sample>& split_of(Dataset& ds, std::size_t index, std::size_t n_train, std::size_t n_val) {
  if (index < n_train) return ds.train;
  if (index < n_train + n_val) return ds.val;
  return ds.test;
}

void require_counts(int a, int b, int c) {
  require(a >= 0 && b >= 0 && c >= 0, ErrorKind::kInvalidSize, "split sizes must be non-negative");
  require(a + b + c > 0, ErrorKind::kEmpty, "dataset with no samples");
}

}  // namespace

const char* to_string(TaskKind t) {
  switch (t) {
    case TaskKind::kTransferLine: return "transfer-line";
    case TaskKind::kTransferRing: return "transfer-ring";
    case TaskKind::kTransferCrossedRing: return "transfer-crossed-ring";
    case TaskKind::kDiameter: return "diameter";
    case TaskKind::kSssp: return "sssp";
    case TaskKind::kEccentricity: return "eccentricity";
  }
  return "?";
}

TaskKind task_from_string(const std::string& s) {
  for (auto t : {TaskKind::kTransferLine, TaskKind::kTransferRing, TaskKind::kTransferCrossedRing,
                 TaskKind::kDiameter, TaskKind::kSssp, TaskKind::kEccentricity}) {
    if (s == to_string(t)) return t;
  }
  fail(ErrorKind::kInvalidArgument, "unknown task '" + s + "'");
}

bool is_transfer(TaskKind t) {
  return t == TaskKind::kTransferLine || t == TaskKind::kTransferRing || t == TaskKind::kTransferCrossedRing;
}

bool is_graph_level(TaskKind t) { return t == TaskKind::kDiameter; }

Matrix Dataset::loss_target(const Sample& s) const {
  if (!standardized) return s.target;
  Matrix out = s.target;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (s.mask.data()[i] != 0.0) out.data()[i] = (out.data()[i] - target_mean) / target_std;
  }
  return out;
}

Dataset gen_transfer(TaskKind kind, int k, int n_train, int n_val, int n_test, std::uint64_t seed) {
  require(is_transfer(kind), ErrorKind::kInvalidArgument, std::string("not a transfer task: ") + to_string(kind));
  require(k >= 1, ErrorKind::kInvalidSize, "transfer distance k must be >= 1");
  require_counts(n_train, n_val, n_test);
  const Graph topo = transfer_topology(kind, k);
  const int n = topo.num_nodes();
  const int source = 0;
  const int target = k;

  Dataset ds;
  ds.task = kind;
  ds.k = k;
  ds.seed = seed;
  const auto total = static_cast<std::size_t>(n_train + n_val + n_test);
  for (std::size_t i = 0; i < total; ++i) {
    Rng rng(derive_seed(seed, i));
    Matrix x(n, 1);
    for (int u = 0; u < n; ++u) x(u, 0) = rng.uniform(0.0, 0.5);
    x(source, 0) = 1.0;
    x(target, 0) = 0.0;
    Matrix y = x;
    std::swap(y(source, 0), y(target, 0));
    split_of(ds, i, n_train, n_val).push_back({topo.with_features(std::move(x)), std::move(y), Matrix::Ones(n, 1)});
  }
  return ds;
}

Graph sample_property_graph(std::uint64_t seed, int min_nodes, int max_nodes, int* resamples) {
  require(min_nodes >= 4 && max_nodes >= min_nodes, ErrorKind::kInvalidSize, "property graphs need 4 <= min <= max nodes");
  Rng rng(seed);
  const int n = static_cast<int>(rng.between(min_nodes, max_nodes));
  const int family = static_cast<int>(rng.between(0, 4));
  int tries = 0;
  for (;;) {
    Graph g = [&] {
      switch (family) {
        case 0: {
          const double p = rng.uniform(0.15, 0.35);
          return erdos_renyi(n, p, rng.next());
        }
        case 1: {
          const int k = static_cast<int>(rng.between(2, 3));
          return barabasi_albert(n, k, rng.next());
        }
        case 2: {
          const int rows = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))));
          return grid_graph(rows, n / rows);
        }
        case 3: return ring_graph(n);
        default: return path_graph(n);
      }
    }();
    if (is_connected(g)) {
      if (resamples) *resamples = tries;
      return g;
    }
    ++tries;
  }
}

Dataset gen_graph_property(TaskKind kind, int n_train, int n_val, int n_test, std::uint64_t seed,
                           bool standardize, int min_nodes, int max_nodes) {
  require(!is_transfer(kind), ErrorKind::kInvalidArgument, std::string("not a property task: ") + to_string(kind));
  require_counts(n_train, n_val, n_test);
  Dataset ds;
  ds.task = kind;
  ds.seed = seed;
  const auto total = static_cast<std::size_t>(n_train + n_val + n_test);
  for (std::size_t i = 0; i < total; ++i) {
    const std::uint64_t sample_seed = derive_seed(seed, i);
    int tries = 0;
    Graph g = sample_property_graph(sample_seed, min_nodes, max_nodes, &tries);
    ds.resamples += tries;
    const int n = g.num_nodes();
    // Feature draws use a stream separate from the topology draws.
    Rng rng(derive_seed(sample_seed, 1));
    Matrix x(n, kind == TaskKind::kSssp ? 2 : 1);
    for (int u = 0; u < n; ++u) x(u, 0) = rng.uniform();
    Matrix y;
    Matrix mask;
    if (kind == TaskKind::kDiameter) {
      y = Matrix::Constant(1, 1, diameter(g));
      mask = Matrix::Ones(1, 1);
    } else if (kind == TaskKind::kEccentricity) {
      const auto ecc = eccentricity(g);
      y.resize(n, 1);
      for (int u = 0; u < n; ++u) y(u, 0) = ecc[u];
      mask = Matrix::Ones(n, 1);
    } else {
      const int source = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      x.col(1).setZero();
      x(source, 1) = 1.0;
      const auto dist = sssp(g, source);
      y.resize(n, 1);
      mask.resize(n, 1);
      for (int u = 0; u < n; ++u) {
        y(u, 0) = dist[u];
        mask(u, 0) = dist[u] == kUnreachable ? 0.0 : 1.0;
      }
    }
    split_of(ds, i, n_train, n_val).push_back({g.with_features(std::move(x)), std::move(y), std::move(mask)});
  }
  if (standardize) {
    const auto& stats_split = ds.train.empty() ? (ds.val.empty() ? ds.test : ds.val) : ds.train;
    double sum = 0.0;
    double count = 0.0;
    for (const auto& s : stats_split) {
      sum += s.target.cwiseProduct(s.mask).sum();
      count += s.mask.sum();
    }
    require(count > 0, ErrorKind::kEmpty, "no target entries to standardize");
    const double mean = sum / count;
    double sq = 0.0;
    for (const auto& s : stats_split) {
      sq += ((s.target.array() - mean).square() * s.mask.array()).sum();
    }
    const double std = std::sqrt(sq / count);
    ds.standardized = true;
    ds.target_mean = mean;
    ds.target_std = std > 0 ? std : 1.0;
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::kInvalidArgument, "cannot write " + path.string());
  nlohmann::json header = {{"format", kFormat},
                           {"version", kVersion},
                           {"task", to_string(ds.task)},
                           {"k", ds.k},
                           {"seed", ds.seed},
                           {"counts", {ds.train.size(), ds.val.size(), ds.test.size()}},
                           {"standardized", ds.standardized},
                           {"target_mean", ds.target_mean},
                           {"target_std", ds.target_std},
                           {"resamples", ds.resamples}};
  out << header.dump() << '\n';
  auto write_split = [&](const std::vector<Sample>& samples, const char* name) {
    for (const auto& s : samples) {
      nlohmann::json line = {{"split", name},
                             {"graph", graph_to_json(s.graph)},
                             {"target", matrix_to_json(s.target)},
                             {"mask", matrix_to_json(s.mask)}};
      out << line.dump() << '\n';
    }
  };
  write_split(ds.train, "train");
  write_split(ds.val, "val");
  write_split(ds.test, "test");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kInvalidArgument, "cannot open dataset " + path.string());
  std::string line;
  int line_no = 0;
  Dataset ds;
  std::size_t expected = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        require(j.is_object() && j.value("format", "") == kFormat, ErrorKind::kParse,
                "not a dataset header");
        require(j.at("version").get<int>() == kVersion, ErrorKind::kParse, "unsupported dataset version");
        ds.task = task_from_string(j.at("task").get<std::string>());
        ds.k = j.at("k").get<int>();
        ds.seed = j.at("seed").get<std::uint64_t>();
        const auto counts = j.at("counts").get<std::vector<std::size_t>>();
        require(counts.size() == 3, ErrorKind::kParse, "counts must have three entries");
        expected = counts[0] + counts[1] + counts[2];
        ds.standardized = j.at("standardized").get<bool>();
        ds.target_mean = j.at("target_mean").get<double>();
        ds.target_std = j.at("target_std").get<double>();
        ds.resamples = j.at("resamples").get<int>();
        have_header = true;
        continue;
      }
      Sample s{graph_from_json(j.at("graph")), matrix_from_json(j.at("target")), matrix_from_json(j.at("mask"))};
      require(s.target.rows() == s.mask.rows() && s.target.cols() == s.mask.cols(), ErrorKind::kParse,
              "target and mask shapes differ");
      const auto split = j.at("split").get<std::string>();
      if (split == "train") {
        ds.train.push_back(std::move(s));
      } else if (split == "val") {
        ds.val.push_back(std::move(s));
      } else if (split == "test") {
        ds.test.push_back(std::move(s));
      } else {
        fail(ErrorKind::kParse, "unknown split '" + split + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kParse, where + e.what());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kParse || e.kind() == ErrorKind::kInvalidArgument) {
        fail(ErrorKind::kParse, where + e.what());
      }
      throw;
    }
  }
  require(have_header, ErrorKind::kEmpty, path.string() + ": empty dataset file");
  require(ds.size() > 0, ErrorKind::kEmpty, path.string() + ": dataset has no samples");
  require(ds.size() == expected, ErrorKind::kParse,
          path.string() + ": header announces " + std::to_string(expected) + " samples, found " +
              std::to_string(ds.size()));
  return ds;
}

std::map<int, int> node_size_histogram(const Dataset& ds) {
  std::map<int, int> hist;
  for (const auto* split : {&ds.train, &ds.val, &ds.test}) {
    for (const auto& s : *split) ++hist[s.graph.num_nodes()];
  }
  return hist;
}

}  // namespace nondiss
