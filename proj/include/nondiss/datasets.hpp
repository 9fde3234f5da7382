#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nondiss/graph.hpp"

namespace nondiss {

enum class TaskKind { kTransferLine, kTransferRing, kTransferCrossedRing, kDiameter, kSssp, kEccentricity };

const char* to_string(TaskKind t);
TaskKind task_from_string(const std::string& s);
bool is_transfer(TaskKind t);
bool is_graph_level(TaskKind t);

struct Sample {
  Graph graph;
  Matrix target;  // n x 1 for node tasks, 1 x 1 for graph tasks; raw (unstandardized)
  Matrix mask;    // same shape as target; 1 where the entry enters the loss
};

struct Dataset {
  TaskKind task = TaskKind::kTransferRing;
  int k = 0;
  std::uint64_t seed = 0;
  bool standardized = false;
  double target_mean = 0.0;
  double target_std = 1.0;
  int resamples = 0;
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;

  /// Target as fed to the loss: standardized where masked in, raw elsewhere.
  Matrix loss_target(const Sample& s) const;
  std::size_t size() const { return train.size() + val.size() + test.size(); }
};

/// Source feature 1, target feature 0, others U[0, 0.5); the regression
/// target swaps the source and target values.
Dataset gen_transfer(TaskKind kind, int k, int n_train, int n_val, int n_test, std::uint64_t seed);

/// Connected graphs of min_nodes..max_nodes nodes drawn uniformly from
/// {Erdős–Rényi p∈[0.15,0.35], Barabási–Albert k∈{2,3}, grid, ring, path};
/// features are a U[0,1) identifier (plus a source indicator for SSSP).
Dataset gen_graph_property(TaskKind kind, int n_train, int n_val, int n_test, std::uint64_t seed,
                           bool standardize = true, int min_nodes = 25, int max_nodes = 35);

/// The graph drawn for sample index i of a property dataset, before features.
/// Returns the number of resamples needed to reach a connected graph.
Graph sample_property_graph(std::uint64_t seed, int min_nodes, int max_nodes, int* resamples = nullptr);

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Node-count histogram over all splits.
std::map<int, int> node_size_histogram(const Dataset& ds);

}  // namespace nondiss
