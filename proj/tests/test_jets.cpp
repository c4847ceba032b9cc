#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "diffstruct/error.hpp"
#include "diffstruct/jets.hpp"
#include "oracles.hpp"

using namespace diffstruct;

namespace {

SampleSeries grid_series(std::size_t n, double a, double b, double (*f)(double)) {
  std::vector<double> t(n), u(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    u[i] = f(t[i]);
  }
  return SampleSeries(t, u);
}

double sine(double t) { return std::sin(t); }
double affine(double t) { return 2.0 * t + 1.0; }
double square(double t) { return t * t; }

}  // namespace

TEST_CASE("series validation") {
  CHECK_THROWS_AS(SampleSeries({0, 1}, {0, 1}), Error);
  CHECK_THROWS_AS(SampleSeries({0, 1, 1}, {0, 1, 2}), Error);
  CHECK_THROWS_AS(SampleSeries({0, 1, 2}, {0, 1}), Error);
  CHECK_THROWS_AS(SampleSeries({0, 1, 2}, {0, std::nan(""), 2}), Error);
}

TEST_CASE("knn on a uniform grid") {
  const auto s = grid_series(20, 0.0, 1.0, affine);
  auto mid = knn(s, 5, 3);
  std::sort(mid.begin(), mid.end());
  CHECK(mid == std::vector<std::size_t>{4, 5, 6});
  auto first = knn(s, 0, 3);
  std::sort(first.begin(), first.end());
  CHECK(first == std::vector<std::size_t>{0, 1, 2});
  // Equidistant neighbours: the lower index wins the tie.
  CHECK(knn(s, 5, 2) == std::vector<std::size_t>{5, 4});

  try {
    knn(s, 0, 20);
    FAIL("expected parameter error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::parameter);
  }
  CHECK_THROWS_AS(knn(s, 0, 1), Error);
}

TEST_CASE("knn matches exhaustive distance sort") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> t(60), u(60);
    double acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      acc += 0.01 + d(rng);
      t[i] = acc;
      u[i] = 5.0 * d(rng);
    }
    const SampleSeries s(t, u);
    for (std::size_t i : {0u, 17u, 59u}) {
      std::vector<std::pair<double, std::size_t>> all;
      for (std::size_t j = 0; j < t.size(); ++j)
        all.push_back({std::hypot(t[j] - t[i], u[j] - u[i]), j});
      std::sort(all.begin(), all.end());
      const auto got = knn(s, i, 9);
      for (std::size_t k = 0; k < 9; ++k) CHECK(got[k] == all[k].second);
    }
  }
}

TEST_CASE("local_slope on exact lines and near a sine point") {
  std::vector<std::array<double, 2>> line, flat, vertical;
  for (int i = 0; i < 6; ++i) {
    line.push_back({0.1 * i, 2 * 0.1 * i + 1});
    flat.push_back({0.1 * i, -3.0});
    vertical.push_back({1.0, 0.1 * i});
  }
  CHECK(std::abs(local_slope(line) - 2.0) < 1e-10);
  CHECK(std::abs(local_slope(flat)) < 1e-15);
  try {
    local_slope(vertical);
    FAIL("expected vertical-tangent error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::vertical_tangent);
  }

  std::vector<std::array<double, 2>> near;
  for (int i = -3; i <= 3; ++i) near.push_back({0.3 + 0.02 * i, std::sin(0.3 + 0.02 * i)});
  CHECK(std::abs(local_slope(near) - std::cos(0.3)) < 1e-3);
}

TEST_CASE("estimate_jets on affine data") {
  const auto j = estimate_jets(grid_series(40, -1.0, 3.0, affine));
  for (std::size_t i = 0; i < j.size(); ++i) {
    CHECK(std::abs(j.u1[i] - 2.0) < 1e-10);
    CHECK(std::abs(j.u2[i]) < 1e-10);
  }
}

TEST_CASE("estimate_jets on sine within frozen thresholds") {
  // Thresholds from the closed-form oracle at this resolution (measured
  // 4.6e-3 and 7.7e-3), rounded up.
  const auto j = estimate_jets(grid_series(200, 0.0, 4 * oracle::kPi, sine), {7, false});
  double e1 = 0.0, e2 = 0.0;
  for (std::size_t i = 7; i + 7 < j.size(); ++i) {
    e1 = std::max(e1, std::abs(j.u1[i] - std::cos(j.t[i])));
    e2 = std::max(e2, std::abs(j.u2[i] + std::sin(j.t[i])));
  }
  CHECK(e1 < 0.02);
  CHECK(e2 < 0.08);
}

TEST_CASE("estimate_jets on a parabola") {
  const auto j = estimate_jets(grid_series(101, 0.0, 2.0, square));
  for (std::size_t i = 7; i + 7 < j.size(); ++i) CHECK(std::abs(j.u2[i] - 2.0) < 0.05);
}

TEST_CASE("estimate_jets parameter checks") {
  const auto s = grid_series(10, 0.0, 1.0, sine);
  CHECK_THROWS_AS(estimate_jets(s, {2, false}), Error);
  CHECK_THROWS_AS(estimate_jets(s, {10, false}), Error);
}

TEST_CASE("estimate_jets is affine-equivariant with normalisation") {
  const auto base = grid_series(150, 0.0, 6.0, sine);
  const JetOptions opts{7, true};
  const auto j0 = estimate_jets(base, opts);
  for (auto [a, b] : {std::pair{3.0, -2.0}, std::pair{-0.5, 10.0}, std::pair{1e3, 1.0}}) {
    std::vector<double> u(base.u().begin(), base.u().end());
    for (double& v : u) v = a * v + b;
    const auto j = estimate_jets(SampleSeries({base.t().begin(), base.t().end()}, u), opts);
    for (std::size_t i = 0; i < j.size(); ++i) {
      CHECK(std::abs(j.u1[i] - a * j0.u1[i]) <= 1e-9 * std::abs(a));
      CHECK(std::abs(j.u2[i] - a * j0.u2[i]) <= 1e-9 * std::abs(a));
    }
  }
}

TEST_CASE("estimate_jets on affine data is equivariant without normalisation") {
  const auto base = grid_series(30, 0.0, 1.0, affine);
  std::vector<double> u(base.u().begin(), base.u().end());
  for (double& v : u) v = -4.0 * v + 0.5;
  const auto j = estimate_jets(SampleSeries({base.t().begin(), base.t().end()}, u));
  for (std::size_t i = 0; i < j.size(); ++i) CHECK(std::abs(j.u1[i] + 8.0) < 1e-9);
}

TEST_CASE("estimate_jets is invariant to shifting t") {
  const auto base = grid_series(200, 0.0, 4 * oracle::kPi, sine);
  const auto j0 = estimate_jets(base);
  std::vector<double> t(base.t().begin(), base.t().end());
  for (double& v : t) v += 3.0;
  const auto j = estimate_jets(SampleSeries(t, {base.u().begin(), base.u().end()}));
  double worst = 0.0;
  for (std::size_t i = 0; i < j.size(); ++i)
    worst = std::max({worst, std::abs(j.u1[i] - j0.u1[i]), std::abs(j.u2[i] - j0.u2[i])});
  CHECK(worst < 1e-12);
}

TEST_CASE("finite_diff_jets exactness") {
  const auto lin = finite_diff_jets(grid_series(12, -1.0, 2.0, affine));
  for (double d : lin.u1) CHECK(std::abs(d - 2.0) < 1e-12);
  const auto sq = finite_diff_jets(grid_series(12, 0.0, 2.0, square));
  for (double d : sq.u2) CHECK(std::abs(d - 2.0) < 1e-9);

  // Non-uniform grid: second-order stencils stay exact on quadratics.
  std::vector<double> t{0.0, 0.1, 0.35, 0.4, 0.9, 1.0, 1.7};
  std::vector<double> u;
  for (double x : t) u.push_back(3 * x * x - x + 2);
  const auto nu = finite_diff_jets(SampleSeries(t, u));
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(std::abs(nu.u1[i] - (6 * t[i] - 1)) < 1e-9);
    CHECK(std::abs(nu.u2[i] - 6.0) < 1e-9);
  }
}

TEST_CASE("finite_diff_jets accuracy on sine") {
  const auto j = finite_diff_jets(grid_series(400, 0.0, 4 * oracle::kPi, sine));
  double e1 = 0.0;
  for (std::size_t i = 1; i + 1 < j.size(); ++i) e1 = std::max(e1, std::abs(j.u1[i] - std::cos(j.t[i])));
  CHECK(e1 < 1e-3);
}

TEST_CASE("local PCA agrees with finite differences on dense smooth data") {
  const auto s = grid_series(800, 0.0, 4 * oracle::kPi, sine);
  const auto fd = finite_diff_jets(s);
  const auto pc = estimate_jets(s, {5, false});
  double truncation = 0.0, gap = 0.0;
  for (std::size_t i = 5; i + 5 < s.size(); ++i) {
    truncation = std::max(truncation, std::abs(fd.u1[i] - std::cos(fd.t[i])));
    gap = std::max(gap, std::abs(pc.u1[i] - fd.u1[i]));
  }
  CHECK(gap < 5.0 * truncation);
}

TEST_CASE("jet series trimming") {
  const auto j = finite_diff_jets(grid_series(20, 0.0, 1.0, sine));
  const auto t = j.trimmed(7);
  CHECK(t.size() == 6);
  CHECK(t.t.front() == j.t[7]);
  CHECK_THROWS_AS(j.trimmed(10), Error);
}
