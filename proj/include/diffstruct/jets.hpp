#pragma once

// Derivative estimation from raw samples: k-nearest-neighbour local PCA and a
// finite-difference reference on non-uniform grids.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace diffstruct {

/// Ordered observations (t_i, u_i) of a scalar function.
class SampleSeries {
 public:
  SampleSeries() = default;
  /// Validates: equal lengths >= 3, finite, t strictly increasing.
  SampleSeries(std::vector<double> t, std::vector<double> u);

  std::span<const double> t() const noexcept { return t_; }
  std::span<const double> u() const noexcept { return u_; }
  std::size_t size() const noexcept { return t_.size(); }

 private:
  std::vector<double> t_;
  std::vector<double> u_;
};

/// Per-point jets [u, u', u''] alongside their abscissae.
struct JetSeries {
  std::vector<double> t, u, u1, u2;

  std::size_t size() const noexcept { return t.size(); }
  std::array<double, 3> jet(std::size_t i) const { return {u[i], u1[i], u2[i]}; }
  /// Drops `count` points from each end.
  JetSeries trimmed(std::size_t count) const;
  void validate() const;
};

/// Indices of the k points closest to point i in the (t, u) plane, including
/// i itself, ordered by distance with ties broken by lower index.
std::vector<std::size_t> knn(const SampleSeries& series, std::size_t i, std::size_t k);

/// Slope dy/dx of the principal PCA direction through the points.
double local_slope(std::span<const std::array<double, 2>> points);

struct JetOptions {
  std::size_t k = 7;
  /// Scale ordinates to unit variance before neighbour search and PCA.
  bool normalize = false;
};

/// u' from local PCA over (t, u) neighbourhoods, u'' from the same procedure
/// on (t, u').
JetSeries estimate_jets(const SampleSeries& series, const JetOptions& options = {});

/// Local-PCA slopes of every point of a series.
std::vector<double> local_slopes(const SampleSeries& series, const JetOptions& options);

/// Three-point central differences inside, one-sided second-order stencils at the ends.
JetSeries finite_diff_jets(const SampleSeries& series);

/// Finite-difference weights for derivatives 0..max_order at `x0` over the nodes.
/// Row d of the result holds the weights for the d-th derivative.
std::vector<std::vector<double>> fd_weights(double x0, std::span<const double> nodes,
                                            std::size_t max_order);

}  // namespace diffstruct
