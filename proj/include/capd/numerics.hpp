#pragma once

#include <span>

#include "capd/linalg.hpp"

namespace capd {

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kPsdTolerance = 1e-8;
inline constexpr double kRankTolerance = 1e-12;

/// Symmetric positive semidefinite matrix. Construction checks symmetry
/// (max-abs asymmetry <= 1e-10) and the smallest eigenvalue (>= -1e-8).
class PsdMatrix {
 public:
  explicit PsdMatrix(Matrix m);

  static PsdMatrix identity(Eigen::Index d);

  const Matrix& matrix() const { return m_; }
  Eigen::Index dimension() const { return m_.rows(); }

 private:
  Matrix m_;
};

// Throws ValidationError naming `what` if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

double min_eigenvalue(const Matrix& symmetric);

/// Minimizes (E c - t)^T M (E c - t) + (lambda / 2) ||c||^2 through its normal
/// equations (E^T M E + (lambda / 2) I) c = E^T M t.
///
/// Uses a Cholesky factorization and falls back to an eigen-based
/// pseudo-inverse (relative cutoff 1e-12) if the factorization fails. With
/// lambda = 0 a numerically singular system raises SolverError instead.
Vector ridge_solve_metric(const Matrix& E, const PsdMatrix& M, const Vector& target, double lambda);

/// Frobenius-nearest PSD matrix: eigenvalues clipped at zero.
PsdMatrix psd_project(const Matrix& a);

double standard_normal_pdf(double z);

/// Gaussian kernel density estimate at `query`.
double gaussian_kde(std::span<const double> points, double bandwidth, double query);

/// -tau * log(sum exp(-v_i / tau)); lies in [min - tau log n, min].
double softmin(std::span<const double> values, double temperature);

// Softmax weights exp(-v_i / tau) / sum, the gradient of softmin w.r.t. values.
Vector softmin_weights(std::span<const double> values, double temperature);

}  // namespace capd
