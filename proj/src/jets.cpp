#include "diffstruct/jets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "diffstruct/error.hpp"
#include "diffstruct/linalg.hpp"

namespace diffstruct {

SampleSeries::SampleSeries(std::vector<double> t, std::vector<double> u)
    : t_(std::move(t)), u_(std::move(u)) {
  if (t_.size() != u_.size()) throw Error(Errc::shape, "t and u differ in length");
  if (t_.size() < 3) {
    throw Error(Errc::insufficient_data,
                "a series needs at least 3 samples, got " + std::to_string(t_.size()));
  }
  for (std::size_t i = 0; i < t_.size(); ++i) {
    if (!std::isfinite(t_[i]) || !std::isfinite(u_[i])) {
      throw Error(Errc::numeric, "sample " + std::to_string(i) + " is not finite");
    }
    if (i > 0 && !(t_[i] > t_[i - 1])) {
      throw Error(Errc::shape, "t must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
}

JetSeries JetSeries::trimmed(std::size_t count) const {
  if (2 * count >= size()) {
    throw Error(Errc::insufficient_data, "trimming " + std::to_string(count) +
                                             " points from each end leaves nothing");
  }
  auto cut = [count](const std::vector<double>& v) {
    return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(count),
                               v.end() - static_cast<std::ptrdiff_t>(count));
  };
  return {cut(t), cut(u), cut(u1), cut(u2)};
}

void JetSeries::validate() const {
  const std::size_t n = t.size();
  if (u.size() != n || u1.size() != n || u2.size() != n) {
    throw Error(Errc::shape, "jet columns differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(t[i]) || !std::isfinite(u[i]) || !std::isfinite(u1[i]) ||
        !std::isfinite(u2[i])) {
      throw Error(Errc::numeric, "jet " + std::to_string(i) + " is not finite");
    }
  }
}

std::vector<std::size_t> knn(const SampleSeries& series, std::size_t i, std::size_t k) {
  const std::size_t n = series.size();
  if (k < 2 || k >= n) {
    throw Error(Errc::parameter, "k must satisfy 2 <= k < " + std::to_string(n) + ", got " +
                                     std::to_string(k));
  }
  if (i >= n) throw Error(Errc::parameter, "query index out of range");
  const auto t = series.t();
  const auto u = series.u();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double dt = t[j] - t[i];
    const double du = u[j] - u[i];
    dist[j] = {dt * dt + du * du, j};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out(k);
  for (std::size_t j = 0; j < k; ++j) out[j] = dist[j].second;
  return out;
}

double local_slope(std::span<const std::array<double, 2>> points) {
  std::vector<linalg::Vector> pts;
  pts.reserve(points.size());
  for (const auto& p : points) pts.push_back({p[0], p[1]});
  const auto dir = linalg::pca(pts).principal();
  if (std::abs(dir[0]) < 1e-9) {
    throw Error(Errc::vertical_tangent, "principal direction is vertical; slope undefined");
  }
  return dir[1] / dir[0];
}

namespace {

double sample_std(std::span<const double> x) {
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - mu) * (v - mu);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

}  // namespace

std::vector<double> local_slopes(const SampleSeries& series, const JetOptions& options) {
  double scale = 1.0;
  SampleSeries work = series;
  if (options.normalize) {
    const double sd = sample_std(series.u());
    if (sd > 0.0) {
      scale = sd;
      std::vector<double> scaled(series.u().begin(), series.u().end());
      for (double& v : scaled) v /= sd;
      work = SampleSeries({series.t().begin(), series.t().end()}, std::move(scaled));
    }
  }
  const std::size_t n = work.size();
  const auto t = work.t();
  const auto u = work.u();
  std::vector<double> slopes(n);
  std::vector<std::array<double, 2>> nbhd(options.k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = knn(work, i, options.k);
    for (std::size_t j = 0; j < idx.size(); ++j) nbhd[j] = {t[idx[j]], u[idx[j]]};
    try {
      slopes[i] = local_slope(nbhd) * scale;
    } catch (const Error& e) {
      if (e.code() != Errc::vertical_tangent) throw;
      throw Error(Errc::vertical_tangent,
                  std::string(e.what()) + " at index " + std::to_string(i));
    }
  }
  return slopes;
}

JetSeries estimate_jets(const SampleSeries& series, const JetOptions& options) {
  if (options.k < 3 || options.k >= series.size()) {
    throw Error(Errc::parameter, "k must satisfy 3 <= k < " + std::to_string(series.size()) +
                                     ", got " + std::to_string(options.k));
  }
  std::vector<double> t(series.t().begin(), series.t().end());
  std::vector<double> u(series.u().begin(), series.u().end());
  auto u1 = local_slopes(series, options);
  auto u2 = local_slopes(SampleSeries(t, u1), options);
  return {std::move(t), std::move(u), std::move(u1), std::move(u2)};
}

std::vector<std::vector<double>> fd_weights(double x0, std::span<const double> nodes,
                                            std::size_t max_order) {
  // Fornberg's recursion for arbitrarily spaced nodes.
  const std::size_t n = nodes.size();
  std::vector<std::vector<double>> c(max_order + 1, std::vector<double>(n, 0.0));
  c[0][0] = 1.0;
  double c1 = 1.0;
  double c4 = nodes[0] - x0;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t mn = std::min(i, max_order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - x0;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (std::size_t k = mn; k >= 1; --k) {
          c[k][i] = c1 * (static_cast<double>(k) * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        }
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (std::size_t k = mn; k >= 1; --k) {
        c[k][j] = (c4 * c[k][j] - static_cast<double>(k) * c[k - 1][j]) / c3;
      }
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

JetSeries finite_diff_jets(const SampleSeries& series) {
  const std::size_t n = series.size();
  const auto t = series.t();
  const auto u = series.u();
  JetSeries out{{t.begin(), t.end()}, {u.begin(), u.end()}, std::vector<double>(n),
                std::vector<double>(n)};

  auto apply = [&](std::size_t at, std::size_t first, std::size_t count, std::size_t order) {
    const auto w = fd_weights(t[at], t.subspan(first, count), order);
    double s = 0.0;
    for (std::size_t j = 0; j < count; ++j) s += w[order][j] * u[first + j];
    return s;
  };

  const std::size_t wide = n >= 4 ? 4 : 3;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      out.u1[i] = apply(i, 0, 3, 1);
      out.u2[i] = apply(i, 0, wide, 2);
    } else if (i == n - 1) {
      out.u1[i] = apply(i, n - 3, 3, 1);
      out.u2[i] = apply(i, n - wide, wide, 2);
    } else {
      out.u1[i] = apply(i, i - 1, 3, 1);
      out.u2[i] = apply(i, i - 1, 3, 2);
    }
  }
  return out;
}

}  // namespace diffstruct
