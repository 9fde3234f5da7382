#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nondiss/linalg.hpp"
#include "nondiss/random.hpp"

namespace nondiss {

struct ParamEntry {
  Matrix value;
  Matrix grad;
  bool trainable = true;
};

// Named dense parameters with gradient slots. Iteration order is the sorted
// name order, which keeps optimizers and serialization deterministic.
class ParamStore {
 public:
  ParamEntry& add(const std::string& name, Matrix value, bool trainable = true);
  ParamEntry& at(const std::string& name);
  const ParamEntry& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  void zero_grads();
  std::size_t num_scalars(bool trainable_only = true) const;
  std::vector<std::string> names() const;

  /// Copies values (not gradients) from another store with identical names.
  void assign_values(const ParamStore& other);

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, ParamEntry> entries_;
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, int fan_in, Rng& rng);

}  // namespace nondiss
