#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace nondiss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Complex = std::complex<double>;

/// Numerical tolerances shared by the library and its tests.
struct Tolerances {
  double antisymmetry = 1e-14;
  double imaginary_spectrum = 1e-10;
  double kron_identity = 1e-12;
  double expm_relative = 1e-8;
  double norm_relative = 1e-8;
  int qr_sweeps_per_dim = 100;
};

inline constexpr Tolerances kTolerances{};

/// Returns W - W^T. Throws shape-mismatch for non-square input.
Matrix antisymmetrize(const Matrix& w);

/// Returns W + W^T.
Matrix symmetrize(const Matrix& w);

/// All eigenvalues (with multiplicity) of a real square matrix. Real Schur
/// form via Hessenberg reduction and shifted QR sweeps; throws
/// numeric-failure if the sweep cap is exhausted.
std::vector<Complex> eig_general(const Matrix& a);

double max_abs_real(const std::vector<Complex>& eigenvalues);

Matrix kron(const Matrix& a, const Matrix& b);

/// Column-stacking vectorization.
Vector vec(const Matrix& x);
Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols);

/// e^{tA} by scaling and squaring with a Pade approximant.
Matrix expm(const Matrix& a, double t = 1.0);

double spectral_norm(const Matrix& a);
double fro_norm(const Matrix& a);

/// Max absolute column sum.
double induced_one_norm(const Matrix& a);

}  // namespace nondiss
