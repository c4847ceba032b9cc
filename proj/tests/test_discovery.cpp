#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "diffstruct/discovery.hpp"
#include "diffstruct/error.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace diffstruct;

namespace {

JetSeries exact_jets(std::size_t n, double a, double b, int kind) {
  JetSeries j;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    j.t.push_back(t);
    if (kind == 0) {
      j.u.push_back(std::sin(t));
      j.u1.push_back(std::cos(t));
      j.u2.push_back(-std::sin(t));
    } else {
      j.u.push_back(std::exp(t));
      j.u1.push_back(std::exp(t));
      j.u2.push_back(std::exp(t));
    }
  }
  return j;
}

std::vector<double> as_vec(const Jet3& v) { return {v[0], v[1], v[2]}; }

const std::vector<double> kHarmonic{1.0, 0.0, 1.0};

std::vector<oracle::PlainLayer> plain_layers(const Mlp& net) {
  std::vector<oracle::PlainLayer> out;
  const auto sizes = net.sizes();
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    oracle::PlainLayer layer;
    layer.w.assign(sizes[l + 1], std::vector<double>(sizes[l]));
    layer.b.assign(sizes[l + 1], 0.0);
    for (std::size_t r = 0; r < sizes[l + 1]; ++r) {
      for (std::size_t c = 0; c < sizes[l]; ++c) layer.w[r][c] = net.weight(l, r, c);
      layer.b[r] = net.bias(l, r);
    }
    out.push_back(std::move(layer));
  }
  return out;
}

}  // namespace

TEST_CASE("normal vector of exact sine jets") {
  const auto nv = fit_normal_vector(exact_jets(200, 0.0, 4 * oracle::kPi, 0));
  CHECK(oracle::angle_deg(as_vec(nv.v), kHarmonic) < 0.1);
  CHECK(std::abs(std::hypot(nv.v[0], nv.v[1], nv.v[2]) - 1.0) < 1e-12);
  // Largest-magnitude component positive.
  const auto big = std::max_element(nv.v.begin(), nv.v.end(),
                                    [](double a, double b) { return std::abs(a) < std::abs(b); });
  CHECK(*big > 0.0);
  CHECK(std::abs(nv.offset) < 1e-9);
}

TEST_CASE("exponential jets are degenerate") {
  try {
    fit_normal_vector(exact_jets(50, 0.0, 2.0, 1));
    FAIL("expected degenerate spectrum");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_spectrum);
    CHECK(std::string(e.what()).find("multiplicity 2") != std::string::npos);
  }
}

TEST_CASE("fit_normal_vector input checks") {
  CHECK_THROWS_AS(fit_normal_vector(exact_jets(3, 0.0, 1.0, 0)), Error);
  auto j = exact_jets(10, 0.0, 1.0, 0);
  j.u2[4] = std::nan("");
  CHECK_THROWS_AS(fit_normal_vector(j), Error);
}

TEST_CASE("normal vector from estimated sine jets") {
  const auto nv = fit_normal_vector(estimate_jets(fixture::sine_series()));
  CHECK(oracle::angle_deg(as_vec(nv.v), kHarmonic) < 5.0);

  // Chebyshev: at most a ninth of the residuals lie beyond three standard
  // deviations along the normal.
  const auto jets = fixture::sine_jets();
  const auto spec = jet_spectrum(jets);
  const auto trimmed_nv = fit_normal_vector(jets);
  double mean[3] = {0, 0, 0};
  for (std::size_t i = 0; i < jets.size(); ++i)
    for (int c = 0; c < 3; ++c) mean[c] += jets.jet(i)[c] / static_cast<double>(jets.size());
  std::size_t beyond = 0;
  for (std::size_t i = 0; i < jets.size(); ++i) {
    const auto x = jets.jet(i);
    double r = 0.0;
    for (int c = 0; c < 3; ++c) r += trimmed_nv.v[c] * (x[c] - mean[c]);
    if (std::abs(r) > 3.0 * std::sqrt(spec[0])) ++beyond;
  }
  CHECK(9 * beyond <= jets.size());
}

TEST_CASE("fit_normal_vector invariances") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.01);
  auto j = exact_jets(120, 0.0, 4 * oracle::kPi, 0);
  for (auto* ch : {&j.u, &j.u1, &j.u2})
    for (double& x : *ch) x += noise(rng);
  const auto base = fit_normal_vector(j);

  SUBCASE("common scaling") {
    for (double s : {1e-3, 0.5, 7.0, 1e4}) {
      JetSeries k = j;
      for (auto* ch : {&k.u, &k.u1, &k.u2})
        for (double& x : *ch) x *= s;
      const auto nv = fit_normal_vector(k);
      for (int c = 0; c < 3; ++c) CHECK(std::abs(nv.v[c] - base.v[c]) < 1e-9);
    }
  }
  SUBCASE("point order") {
    std::vector<std::size_t> perm(j.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (int trial = 0; trial < 5; ++trial) {
      std::shuffle(perm.begin(), perm.end(), rng);
      JetSeries k;
      for (std::size_t i : perm) {
        k.t.push_back(j.t[i]);
        k.u.push_back(j.u[i]);
        k.u1.push_back(j.u1[i]);
        k.u2.push_back(j.u2[i]);
      }
      const auto nv = fit_normal_vector(k);
      for (int c = 0; c < 3; ++c) CHECK(nv.v[c] == base.v[c]);
      CHECK(nv.offset == base.offset);
    }
  }
}

TEST_CASE("zero-weight implicit model is constant") {
  ImplicitModel m{Mlp({3, 4, 1}), {0.5, -1.0, 2.0}, {1.0, 2.0, 3.0}};
  m.net.bias(1, 0) = 0.25;
  for (const Jet3& x : {Jet3{0, 0, 0}, Jet3{10, -3, 1e3}, Jet3{-1, 1, -1}})
    CHECK(eval_implicit(m, x) == 0.25);
}

TEST_CASE("probe sampler keeps away from the data") {
  std::vector<Jet3> data;
  for (int i = 0; i < 30; ++i) data.push_back({std::cos(i * 0.2), std::sin(i * 0.2), 0.0});
  ProbeSampler s(data, 1.5, 0.1, 11);
  for (const auto& p : s.draw(500)) {
    CHECK(s.distance_to_data(p) >= 0.1);
    for (int c = 0; c < 3; ++c) {
      CHECK(p[c] >= s.lo()[c]);
      CHECK(p[c] <= s.hi()[c]);
    }
  }
  // x channel spans about [-1, 1]; the box extends 1.5 ranges either side.
  CHECK(s.lo()[0] < -3.9);
  CHECK(s.hi()[0] > 3.9);
}

TEST_CASE("implicit level set on sine jets") {
  const auto& fit = fixture::sine_fit();
  const auto& r = fit.report;
  CHECK(r.iterations >= 1);
  CHECK(r.mean_abs_data < 0.05);
  CHECK(std::isfinite(r.loss));

  const auto jets = fixture::sine_jets();
  std::vector<Jet3> data;
  for (std::size_t i = 0; i < jets.size(); ++i) data.push_back(fit.model.normalize(jets.jet(i)));

  // Far probes, measured in normalised units.
  ProbeSampler far(data, 1.5, 0.5, 99);
  double mean_far = 0.0;
  const auto probes = far.draw(2000);
  for (const auto& p : probes) {
    const std::vector<double> in{p[0], p[1], p[2]};
    mean_far += fit.model.net.forward(in)[0] / static_cast<double>(probes.size());
  }
  CHECK(mean_far > 0.5);

  double worst_data = 0.0;
  for (std::size_t i = 0; i < jets.size(); ++i)
    worst_data = std::max(worst_data, std::abs(eval_implicit(fit.model, jets.jet(i))));
  CHECK(worst_data < 0.1);

  // A corner of the probe box, mapped back to raw units.
  Jet3 corner;
  for (int c = 0; c < 3; ++c) corner[c] = r.probe_hi[c] * fit.model.scale[c] + fit.model.mean[c];
  CHECK(eval_implicit(fit.model, corner) > 0.3);
}

TEST_CASE("reported implicit loss matches an independent recomputation") {
  const auto& fit = fixture::sine_fit();
  const auto layers = plain_layers(fit.model.net);

  const auto jets = fixture::sine_jets();
  long double data_sq = 0.0L, probe_sq = 0.0L;
  for (std::size_t i = 0; i < jets.size(); ++i) {
    const auto x = fit.model.normalize(jets.jet(i));
    const double f = oracle::evaluate(layers, {x[0], x[1], x[2]})[0];
    data_sq += static_cast<long double>(f) * f;
  }
  for (const auto& p : fit.report.last_probes) {
    const double f = oracle::evaluate(layers, {p[0], p[1], p[2]})[0];
    probe_sq += static_cast<long double>(f - 1.0) * (f - 1.0);
  }
  REQUIRE(fit.report.last_probes.size() == jets.size());
  const double expected = static_cast<double>(
      data_sq / jets.size() + 0.1L * probe_sq / fit.report.last_probes.size());
  CHECK(std::abs(fit.report.loss - expected) < 1e-12);
}

TEST_CASE("train_implicit is reproducible and validates input") {
  std::vector<double> t, u;
  for (std::size_t i = 0; i < 40; ++i) {
    t.push_back(0.2 * static_cast<double>(i));
    u.push_back(std::sin(t.back()));
  }
  const auto jets = estimate_jets(SampleSeries(t, u));
  ImplicitConfig cfg;
  cfg.max_iterations = 50;
  const auto a = train_implicit(jets, cfg);
  const auto b = train_implicit(jets, cfg);
  CHECK(std::equal(a.model.net.params().begin(), a.model.net.params().end(),
                   b.model.net.params().begin()));
  CHECK(a.report.loss == b.report.loss);
  CHECK(a.report.iterations == 50);
  CHECK(a.report.seed == 1);

  CHECK_THROWS_AS(train_implicit(jets.trimmed(16), cfg), Error);
}

TEST_CASE("implicit fit of a single repeated jet") {
  JetSeries j;
  for (int i = 0; i < 12; ++i) {
    j.t.push_back(i);
    j.u.push_back(0.3);
    j.u1.push_back(-0.2);
    j.u2.push_back(0.7);
  }
  ImplicitConfig cfg;
  cfg.max_iterations = 2000;
  const auto fit = train_implicit(j, cfg);
  CHECK(std::abs(eval_implicit(fit.model, {0.3, -0.2, 0.7})) < 0.05);
}
