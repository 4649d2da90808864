#include "capd/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "capd/error.hpp"

namespace capd {

namespace {

double asymmetry(const Matrix& a) { return (a - a.transpose()).cwiseAbs().maxCoeff(); }

}  // namespace

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw ValidationError(fmt::format("{} contains NaN or infinite entries", what));
  }
}

double min_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

PsdMatrix::PsdMatrix(Matrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() < 1) {
    throw ValidationError(fmt::format("PSD matrix must be square, got {}x{}", m_.rows(), m_.cols()));
  }
  require_finite(m_, "PSD matrix");
  const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
  if (asymmetry(m_) > kSymmetryTolerance * scale) {
    throw ValidationError("PSD matrix is not symmetric");
  }
  if (min_eigenvalue(m_) < -kPsdTolerance * scale) {
    throw ValidationError("PSD matrix has a negative eigenvalue");
  }
}

PsdMatrix PsdMatrix::identity(Eigen::Index d) { return PsdMatrix(Matrix::Identity(d, d)); }

Vector ridge_solve_metric(const Matrix& E, const PsdMatrix& M, const Vector& target, double lambda) {
  const auto d = E.rows();
  if (M.dimension() != d || target.size() != d) {
    throw ValidationError(fmt::format("ridge solve shape mismatch: E {}x{}, M {}x{}, target {}", d,
                                      E.cols(), M.dimension(), M.dimension(), target.size()));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("ridge lambda must be finite and >= 0");
  }
  require_finite(E, "ridge design matrix");
  require_finite(target, "ridge target");

  const Matrix ME = M.matrix() * E;
  Matrix A = E.transpose() * ME;
  A = 0.5 * (A + A.transpose());
  A.diagonal().array() += 0.5 * lambda;
  const Vector rhs = ME.transpose() * target;

  Eigen::SelfAdjointEigenSolver<Matrix> eig;
  if (lambda == 0.0) {
    eig.compute(A);
    const auto& values = eig.eigenvalues();
    const double top = std::max(values.cwiseAbs().maxCoeff(), 0.0);
    if (top == 0.0 || values.minCoeff() <= kRankTolerance * top) {
      throw SolverError("ridge system is singular at lambda = 0; use a positive lambda");
    }
  }

  Eigen::LLT<Matrix> llt(A);
  if (llt.info() == Eigen::Success) {
    Vector c = llt.solve(rhs);
    if (c.allFinite()) {
      return c;
    }
  }

  if (lambda != 0.0) {
    eig.compute(A);
  }
  const auto& values = eig.eigenvalues();
  const double cutoff = kRankTolerance * values.cwiseAbs().maxCoeff();
  Vector inverted = Vector::Zero(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] > cutoff) {
      inverted[i] = 1.0 / values[i];
    }
  }
  const Matrix& V = eig.eigenvectors();
  Vector c = V * inverted.asDiagonal() * (V.transpose() * rhs);
  if (!c.allFinite()) {
    throw SolverError("ridge solve produced non-finite coefficients");
  }
  return c;
}

PsdMatrix psd_project(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw ValidationError("psd_project needs a square matrix");
  }
  require_finite(a, "psd_project input");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if (asymmetry(a) > kSymmetryTolerance * scale) {
    throw ValidationError("psd_project input is not symmetric");
  }
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.eigenvalues().minCoeff() >= 0.0) {
    return PsdMatrix(sym);
  }
  const Vector clipped = eig.eigenvalues().cwiseMax(0.0);
  const Matrix& V = eig.eigenvectors();
  Matrix out = V * clipped.asDiagonal() * V.transpose();
  out = 0.5 * (out + out.transpose());
  return PsdMatrix(std::move(out));
}

double standard_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double gaussian_kde(std::span<const double> points, double bandwidth, double query) {
  if (points.empty()) {
    throw ValidationError("gaussian_kde needs at least one point");
  }
  if (!(bandwidth > 0.0)) {
    throw ValidationError("gaussian_kde bandwidth must be positive");
  }
  double sum = 0.0;
  for (const double p : points) {
    sum += standard_normal_pdf((query - p) / bandwidth);
  }
  return sum / (static_cast<double>(points.size()) * bandwidth);
}

double softmin(std::span<const double> values, double temperature) {
  if (values.empty()) {
    throw ValidationError("softmin needs at least one value");
  }
  if (!(temperature > 0.0)) {
    throw ValidationError("softmin temperature must be positive");
  }
  const double lo = *std::min_element(values.begin(), values.end());
  double sum = 0.0;
  for (const double v : values) {
    sum += std::exp(-(v - lo) / temperature);
  }
  return lo - temperature * std::log(sum);
}

Vector softmin_weights(std::span<const double> values, double temperature) {
  if (values.empty()) {
    throw ValidationError("softmin needs at least one value");
  }
  if (!(temperature > 0.0)) {
    throw ValidationError("softmin temperature must be positive");
  }
  const double lo = *std::min_element(values.begin(), values.end());
  Vector w(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    w[static_cast<Eigen::Index>(i)] = std::exp(-(values[i] - lo) / temperature);
  }
  return w / w.sum();
}

}  // namespace capd
