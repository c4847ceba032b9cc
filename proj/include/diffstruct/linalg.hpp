#pragma once

// Dense linear algebra for the small symmetric problems behind local and
// global PCA: covariance, cyclic Jacobi eigendecomposition, and PCA.

#include <cstddef>
#include <span>
#include <vector>

namespace diffstruct::linalg {

using Vector = std::vector<double>;

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> entries() const noexcept { return data_; }
  Vector column(std::size_t c) const;

  Matrix transpose() const;
  Matrix operator*(const Matrix& rhs) const;
  Vector operator*(std::span<const double> v) const;

  /// Max absolute row sum.
  double norm_inf() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Spectral decomposition of a symmetric matrix. `vectors` holds one
/// orthonormal eigenvector per column, matching the ascending `values`.
struct EigResult {
  Vector values;
  Matrix vectors;

  Vector vector(std::size_t i) const { return vectors.column(i); }
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

/// Sample covariance (divide by count - 1) of mean-centered points.
Matrix covariance(std::span<const Vector> points);

/// Centroid of the points.
Vector mean(std::span<const Vector> points);

inline constexpr double kJacobiTolerance = 1e-12;
inline constexpr int kJacobiMaxSweeps = 100;
inline constexpr std::size_t kMaxEigDim = 64;

/// Cyclic Jacobi eigendecomposition. Eigenvalues ascend; each eigenvector is
/// signed so that its largest-magnitude component is positive.
EigResult sym_eig(const Matrix& m);

struct Pca {
  Vector mean;
  EigResult eig;

  /// Eigenvector of the largest eigenvalue.
  Vector principal() const { return eig.vector(eig.values.size() - 1); }
  /// Eigenvector of the smallest eigenvalue.
  Vector normal() const { return eig.vector(0); }
};

Pca pca(std::span<const Vector> points);

/// Flip `v` so its largest-magnitude component is positive (first index wins ties).
void canonical_sign(std::span<double> v);

}  // namespace diffstruct::linalg
