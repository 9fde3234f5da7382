#include "nondiss/nn.hpp"

#include <algorithm>
#include <cmath>

#include "nondiss/errors.hpp"

namespace nondiss {

ParamEntry& ParamStore::add(const std::string& name, Matrix value, bool trainable) {
  require(!contains(name), ErrorKind::kInvalidArgument, "duplicate parameter '" + name + "'");
  ParamEntry& e = entries_[name];
  e.grad = Matrix::Zero(value.rows(), value.cols());
  e.value = std::move(value);
  e.trainable = trainable;
  return e;
}

ParamEntry& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  require(it != entries_.end(), ErrorKind::kInvalidArgument, "unknown parameter '" + name + "'");
  return it->second;
}

const ParamEntry& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  require(it != entries_.end(), ErrorKind::kInvalidArgument, "unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) e.grad = Matrix::Zero(e.value.rows(), e.value.cols());
}

std::size_t ParamStore::num_scalars(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) {
    if (!trainable_only || e.trainable) n += static_cast<std::size_t>(e.value.size());
  }
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

void ParamStore::assign_values(const ParamStore& other) {
  require(other.size() == size(), ErrorKind::kShapeMismatch, "parameter stores differ in size");
  for (auto& [name, e] : entries_) {
    const ParamEntry& o = other.at(name);
    require(o.value.rows() == e.value.rows() && o.value.cols() == e.value.cols(),
            ErrorKind::kShapeMismatch, "parameter '" + name + "' changed shape");
    e.value = o.value;
  }
}

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, int fan_in, Rng& rng) {
  require(fan_in > 0, ErrorKind::kInvalidSize, "fan_in must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix m(rows, cols);
  // Fill row by row so the draw order does not depend on storage order.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

void init_mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec, Rng& rng) {
  require(spec.dims.size() >= 2, ErrorKind::kInvalidSize, "mlp needs at least input and output dims");
  for (std::size_t i = 0; i + 1 < spec.dims.size(); ++i) {
    const int in = spec.dims[i];
    const int out = spec.dims[i + 1];
    require(in > 0 && out > 0, ErrorKind::kInvalidSize, "mlp dims must be positive");
    store.add(prefix + ".w" + std::to_string(i), uniform_init(in, out, in, rng));
    if (spec.bias) store.add(prefix + ".b" + std::to_string(i), uniform_init(1, out, in, rng));
  }
}

Var mlp_forward(Tape& tape, ParamStore& store, const std::string& prefix, const MlpSpec& spec, Var x) {
  require(x.cols() == spec.dims.front(), ErrorKind::kShapeMismatch,
          prefix + ": input width " + std::to_string(x.cols()) + ", expected " +
              std::to_string(spec.dims.front()));
  const std::size_t layers = spec.dims.size() - 1;
  for (std::size_t i = 0; i < layers; ++i) {
    x = ad::matmul(x, tape.param(store, prefix + ".w" + std::to_string(i)));
    if (spec.bias) x = ad::add_row(x, tape.param(store, prefix + ".b" + std::to_string(i)));
    if (i + 1 < layers || spec.activate_last) x = ad::activation(x, spec.act);
  }
  return x;
}

void Adam::step(ParamStore& store) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (auto& [name, e] : store) {
    if (!e.trainable) continue;
    auto [it, fresh] = moments_.try_emplace(name);
    Moments& mo = it->second;
    if (fresh) {
      mo.m = Matrix::Zero(e.value.rows(), e.value.cols());
      mo.v = Matrix::Zero(e.value.rows(), e.value.cols());
    }
    Matrix g = e.grad.size() == 0 ? Matrix::Zero(e.value.rows(), e.value.cols()) : e.grad;
    if (cfg_.weight_decay != 0.0) g += cfg_.weight_decay * e.value;
    mo.m = cfg_.beta1 * mo.m + (1.0 - cfg_.beta1) * g;
    mo.v = cfg_.beta2 * mo.v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const Matrix mhat = mo.m / c1;
    const Matrix vhat = mo.v / c2;
    e.value.array() -= cfg_.lr * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
  }
}

GradCheckReport grad_check(const LossFn& loss, ParamStore& store, double h, double tol) {
  require(h > 0, ErrorKind::kInvalidArgument, "finite-difference step must be positive");
  GradCheckReport report;

  store.zero_grads();
  {
    Tape tape;
    Var l = loss(tape, store);
    tape.backward(l);
  }
  std::map<std::string, Matrix> analytic;
  for (auto& [name, e] : store) {
    if (e.trainable) analytic[name] = e.grad;
  }

  auto eval = [&] {
    Tape tape;
    return loss(tape, store).value()(0, 0);
  };

  for (auto& [name, e] : store) {
    if (!e.trainable) continue;
    GradCheckEntry entry;
    entry.name = name;
    const Matrix& ga = analytic[name];
    for (Eigen::Index i = 0; i < e.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < e.value.cols(); ++j) {
        const double orig = e.value(i, j);
        e.value(i, j) = orig + h;
        const double up = eval();
        e.value(i, j) = orig - h;
        const double down = eval();
        e.value(i, j) = orig;
        const double fd = (up - down) / (2.0 * h);
        const double rel = std::abs(ga(i, j) - fd) / std::max(1.0, std::abs(fd));
        entry.max_rel_error = std::max(entry.max_rel_error, rel);
        entry.max_abs_grad = std::max(entry.max_abs_grad, std::abs(ga(i, j)));
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    if (!(entry.max_rel_error < tol)) report.passed = false;
    report.entries.push_back(std::move(entry));
  }
  store.zero_grads();
  return report;
}

}  // namespace nondiss
