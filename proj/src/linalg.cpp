#include "diffstruct/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "diffstruct/error.hpp"

namespace diffstruct::linalg {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows * cols) {
    throw Error(Errc::shape, "matrix entries do not match " + std::to_string(rows) + "x" +
                                 std::to_string(cols));
  }
  for (double x : data_) {
    if (!std::isfinite(x)) throw Error(Errc::numeric, "matrix entry is not finite");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vector Matrix::column(std::size_t c) const {
  Vector out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
  if (cols_ != rhs.rows_) throw Error(Errc::shape, "matrix product shape mismatch");
  Matrix out(rows_, rhs.cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = 0; k < cols_; ++k) {
      const double a = (*this)(r, k);
      for (std::size_t c = 0; c < rhs.cols_; ++c) out(r, c) += a * rhs(k, c);
    }
  return out;
}

Vector Matrix::operator*(std::span<const double> v) const {
  if (cols_ != v.size()) throw Error(Errc::shape, "matrix-vector shape mismatch");
  Vector out(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out[r] += (*this)(r, c) * v[c];
  return out;
}

double Matrix::norm_inf() const {
  double best = 0.0;
  for (std::size_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols_; ++c) s += std::abs((*this)(r, c));
    best = std::max(best, s);
  }
  return best;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::shape, "dot product length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

namespace {

std::size_t checked_dimension(std::span<const Vector> points) {
  if (points.size() < 2) {
    throw Error(Errc::insufficient_data,
                "need at least 2 points, got " + std::to_string(points.size()));
  }
  const std::size_t n = points.front().size();
  if (n == 0) throw Error(Errc::shape, "points must have dimension >= 1");
  for (const auto& p : points) {
    if (p.size() != n) throw Error(Errc::shape, "points have mixed dimensions");
  }
  return n;
}

}  // namespace

Vector mean(std::span<const Vector> points) {
  const std::size_t n = checked_dimension(points);
  Vector mu(n, 0.0);
  for (const auto& p : points)
    for (std::size_t j = 0; j < n; ++j) mu[j] += p[j];
  for (double& x : mu) x /= static_cast<double>(points.size());
  return mu;
}

Matrix covariance(std::span<const Vector> points) {
  const std::size_t n = checked_dimension(points);
  const Vector mu = mean(points);
  Matrix cov(n, n);
  for (const auto& p : points) {
    for (std::size_t r = 0; r < n; ++r) {
      const double dr = p[r] - mu[r];
      for (std::size_t c = r; c < n; ++c) cov(r, c) += dr * (p[c] - mu[c]);
    }
  }
  const double denom = static_cast<double>(points.size() - 1);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = r; c < n; ++c) {
      cov(r, c) /= denom;
      cov(c, r) = cov(r, c);
    }
  }
  return cov;
}

void canonical_sign(std::span<double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (!v.empty() && v[best] < 0.0) {
    for (double& x : v) x = -x;
  }
}

EigResult sym_eig(const Matrix& m) {
  const std::size_t n = m.rows();
  if (n != m.cols()) throw Error(Errc::shape, "eigendecomposition needs a square matrix");
  if (n == 0 || n > kMaxEigDim) {
    throw Error(Errc::shape, "eigendecomposition supports sizes 1.." + std::to_string(kMaxEigDim));
  }

  double scale = 0.0;
  for (double x : m.entries()) {
    if (!std::isfinite(x)) throw Error(Errc::numeric, "matrix entry is not finite");
    scale = std::max(scale, std::abs(x));
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = r + 1; c < n; ++c) {
      if (std::abs(m(r, c) - m(c, r)) > 1e-10 * std::max(scale, 1e-300)) {
        throw Error(Errc::symmetry, "matrix is not symmetric at (" + std::to_string(r) + "," +
                                        std::to_string(c) + ")");
      }
    }

  Matrix a = m;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = r + 1; c < n; ++c) a(c, r) = a(r, c) = 0.5 * (m(r, c) + m(c, r));
  Matrix v = Matrix::identity(n);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = r + 1; c < n; ++c) s += 2.0 * a(r, c) * a(r, c);
    return std::sqrt(s);
  };
  double frob = 0.0;
  for (double x : a.entries()) frob += x * x;
  frob = std::sqrt(frob);

  int sweep = 0;
  while (off_norm() > kJacobiTolerance * frob) {
    if (sweep++ == kJacobiMaxSweeps) {
      throw Error(Errc::convergence, "Jacobi eigensolver did not converge in " +
                                         std::to_string(kJacobiMaxSweeps) + " sweeps");
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

  EigResult out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    Vector col = v.column(order[k]);
    canonical_sign(col);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = col[r];
  }
  return out;
}

Pca pca(std::span<const Vector> points) {
  return Pca{mean(points), sym_eig(covariance(points))};
}

}  // namespace diffstruct::linalg
