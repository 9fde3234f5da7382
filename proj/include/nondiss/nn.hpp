#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nondiss/autodiff.hpp"
#include "nondiss/params.hpp"

namespace nondiss {

/// Dense stack x -> act(x W0 + b0) -> ... -> x Wk + bk.
struct MlpSpec {
  std::vector<int> dims;  // input, hidden..., output
  Activation act = Activation::kTanh;
  bool activate_last = false;
  bool bias = true;
};

/// Registers prefix.w<i> (dims[i] x dims[i+1]) and prefix.b<i> (1 x dims[i+1]).
void init_mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec, Rng& rng);

Var mlp_forward(Tape& tape, ParamStore& store, const std::string& prefix, const MlpSpec& spec, Var x);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  /// One update of every trainable entry; missing gradients count as zero.
  void step(ParamStore& store);
  int steps() const { return t_; }

 private:
  struct Moments {
    Matrix m;
    Matrix v;
  };
  AdamConfig cfg_;
  int t_ = 0;
  std::map<std::string, Moments> moments_;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_grad = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = true;
};

using LossFn = std::function<Var(Tape&, ParamStore&)>;

/// Compares reverse-mode gradients of every trainable entry against central
/// differences. Relative error is |g_ad - g_fd| / max(1, |g_fd|); an entry
/// passes when its error is strictly below tol.
GradCheckReport grad_check(const LossFn& loss, ParamStore& store, double h = 1e-5, double tol = 1e-4);

}  // namespace nondiss
