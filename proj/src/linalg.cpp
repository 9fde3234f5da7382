#include "nondiss/linalg.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "nondiss/errors.hpp"

namespace nondiss {

namespace {

void require_square(const Matrix& a, const char* op) {
  require(a.rows() == a.cols(), ErrorKind::kShapeMismatch,
          std::string(op) + " needs a square matrix, got " + std::to_string(a.rows()) + "x" +
              std::to_string(a.cols()));
}

}  // namespace

Matrix antisymmetrize(const Matrix& w) {
  require_square(w, "antisymmetrize");
  return w - w.transpose();
}

Matrix symmetrize(const Matrix& w) {
  require_square(w, "symmetrize");
  return w + w.transpose();
}

std::vector<Complex> eig_general(const Matrix& a) {
  require_square(a, "eig_general");
  require(a.allFinite(), ErrorKind::kNumericFailure, "eig_general: non-finite entries");
  const auto n = a.rows();
  if (n == 0) return {};
  Eigen::EigenSolver<Matrix> solver;
  solver.setMaxIterations(kTolerances.qr_sweeps_per_dim * n);
  solver.compute(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    fail(ErrorKind::kNumericFailure,
         "eig_general: QR iteration did not converge within " +
             std::to_string(kTolerances.qr_sweeps_per_dim * n) + " sweeps");
  }
  const auto& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

double max_abs_real(const std::vector<Complex>& eigenvalues) {
  double m = 0.0;
  for (const auto& l : eigenvalues) m = std::max(m, std::abs(l.real()));
  return m;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Vector vec(const Matrix& x) { return Eigen::Map<const Vector>(x.data(), x.size()); }

Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  require(v.size() == rows * cols, ErrorKind::kShapeMismatch,
          "unvec: length " + std::to_string(v.size()) + " does not match " +
              std::to_string(rows) + "x" + std::to_string(cols));
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

Matrix expm(const Matrix& a, double t) {
  require_square(a, "expm");
  if (a.rows() == 0) return a;
  Matrix scaled = t * a;
  Matrix out = scaled.exp();
  require(out.allFinite(), ErrorKind::kNumericOverflow, "expm: result is not finite");
  return out;
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

double fro_norm(const Matrix& a) { return a.norm(); }

double induced_one_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace nondiss
