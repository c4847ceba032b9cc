#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "diffstruct/dae.hpp"
#include "diffstruct/error.hpp"
#include "oracles.hpp"

using namespace diffstruct;

namespace {

std::vector<std::vector<double>> circle(std::size_t n) {
  std::vector<std::vector<double>> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double th = 2.0 * oracle::kPi * static_cast<double>(i) / static_cast<double>(n);
    pts.push_back({std::cos(th), std::sin(th)});
  }
  return pts;
}

const std::vector<double> kHarmonic{1.0, 0.0, 1.0};
const std::vector<double> kReported{0.6761, -0.0328, 0.7360};

// The default circle run used by several cases (about 15 s).
const DaeResult& circle_run() {
  static const DaeResult r = [] {
    DaeConfig cfg;
    cfg.seed = 7;
    return train_dae(circle(256), cfg);
  }();
  return r;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("coefficient dimension") {
  CHECK(v_dimension(1, 2) == 3);
  CHECK(v_dimension(1, 0) == 1);
  CHECK(v_dimension(3, 2) == 13);
  CHECK(v_dimension(2, 3) == 15);
}

TEST_CASE("coefficient tensor") {
  const auto a = CoeffTensor::random_unit(1, 2, 9);
  const auto b = CoeffTensor::random_unit(1, 2, 9);
  CHECK(a.coefficients == b.coefficients);
  CHECK(std::abs(norm(a.coefficients) - 1.0) < 1e-12);
  CHECK(a.coefficients.size() == 3);
  CHECK(CoeffTensor::random_unit(1, 2, 10).coefficients != a.coefficients);

  auto c = CoeffTensor::from(1, 2, {-3.0, 0.0, 4.0});
  CHECK(c.coefficients == std::vector<double>{-0.6, 0.0, 0.8});
  c.canonical_sign();
  CHECK(c.coefficients == std::vector<double>{0.6, -0.0, -0.8});

  CHECK_THROWS_AS(CoeffTensor::from(1, 2, {1.0, 2.0}), Error);
  try {
    CoeffTensor::from(1, 1, {0.0, 1e-13});
    FAIL("expected degenerate coefficients");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_coefficients);
  }
}

TEST_CASE("random unit coefficients cover the sphere evenly") {
  // Mean of each coordinate over many draws is near zero, second moment near 1/3.
  double m[3] = {0, 0, 0}, q[3] = {0, 0, 0};
  const int draws = 4000;
  for (int s = 0; s < draws; ++s) {
    const auto v = CoeffTensor::random_unit(1, 2, static_cast<std::uint64_t>(s)).coefficients;
    for (int k = 0; k < 3; ++k) {
      m[k] += v[k] / draws;
      q[k] += v[k] * v[k] / draws;
    }
  }
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(m[k]) < 0.05);
    CHECK(std::abs(q[k] - 1.0 / 3.0) < 0.03);
  }
}

TEST_CASE("unsupported configurations are rejected") {
  for (auto [d, n] : {std::pair{2, 2}, std::pair{1, 3}}) {
    try {
      check_supported(d, n);
      FAIL("expected unsupported");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unsupported);
    }
  }
  check_supported(1, 0);
  check_supported(1, 2);
  const auto ae = AutoEncoder::glorot(2, 1, {4}, {4}, 1);
  const double rho = 0.2;
  CHECK_THROWS_AS(decoder_jets(ae, std::span<const double>(&rho, 1), 3), Error);
  CHECK_THROWS_AS(AutoEncoder(Mlp({2, 3, 1}), Mlp({2, 3, 2})), Error);
  CHECK_THROWS_AS(AutoEncoder(Mlp({2, 3, 2}), Mlp({2, 3, 2})), Error);
}

TEST_CASE("decoder jets of a nearly affine decoder") {
  // 1 -> 1 -> 2 with a tiny first weight is affine to O(eps^2).
  const double eps = 1e-4, a0 = 1.5, a1 = -0.5, b0 = 0.25, b1 = 2.0;
  Mlp dec({1, 1, 2});
  dec.weight(0, 0, 0) = eps;
  dec.weight(1, 0, 0) = a0 / eps;
  dec.weight(1, 1, 0) = a1 / eps;
  dec.bias(1, 0) = b0;
  dec.bias(1, 1) = b1;
  const AutoEncoder ae(Mlp({2, 1, 1}), dec);
  for (double rho : {-1.0, 0.0, 0.7}) {
    const auto j = decoder_jets(ae, std::span<const double>(&rho, 1), 2);
    REQUIRE(j.components.size() == 2);
    CHECK(std::abs(j.components[0][0] - (a0 * rho + b0)) < 1e-6);
    CHECK(std::abs(j.components[1][0] - (a1 * rho + b1)) < 1e-6);
    CHECK(std::abs(j.components[0][1] - a0) < 1e-6);
    CHECK(std::abs(j.components[1][1] - a1) < 1e-6);
    CHECK(std::abs(j.components[0][2]) < 1e-6);
  }
}

TEST_CASE("decoder jets match finite differences") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto ae = AutoEncoder::glorot(3, 1, {8}, {8, 8}, seed);
    for (double rho : {-0.8, 0.1, 1.3}) {
      const auto j = decoder_jets(ae, std::span<const double>(&rho, 1), 2);
      for (std::size_t d = 0; d < 3; ++d) {
        const auto f = [&](double r) { return ae.decode(std::vector<double>{r})[d]; };
        const auto df = [&](double r) { return oracle::central_diff(f, r, 1e-5); };
        CHECK(oracle::rel_err(j.components[d][1], df(rho), 1e-4) < 1e-5);
        CHECK(oracle::rel_err(j.components[d][2], oracle::central_diff(df, rho, 1e-3), 1e-3) < 1e-5);
      }
    }
  }
}

TEST_CASE("relation residual") {
  const auto v = CoeffTensor::from(1, 2, {1.0, 0.0, 1.0});
  for (double rho : {0.0, 0.4, 2.0}) {
    const JacobianStack j{2, 1, {{std::sin(rho), std::cos(rho), -std::sin(rho)}}};
    CHECK(std::abs(residual(v, j)[0]) < 1e-15);
  }
  const auto top = CoeffTensor::from(1, 2, {0.0, 0.0, 1.0});
  CHECK(residual(top, {2, 1, {{5.0, 6.0, 0.3}, {1.0, 1.0, -2.0}}}) == std::vector<double>{0.3, -2.0});
  CHECK_THROWS_AS(residual(top, {1, 1, {{1.0, 2.0}}}), Error);
}

TEST_CASE("rescaling the latent keeps decoded points") {
  auto ae = AutoEncoder::glorot(2, 1, {6}, {6}, 4);
  const auto data = circle(40);
  const auto before = ae;
  rescale_latent(ae, 2.5);
  for (const auto& x : data) {
    CHECK(std::abs(ae.encode(x)[0] - 2.5 * before.encode(x)[0]) < 1e-12);
    const auto y0 = before.decode(before.encode(x));
    const auto y1 = ae.decode(ae.encode(x));
    for (int d = 0; d < 2; ++d) CHECK(std::abs(y0[d] - y1[d]) < 1e-12);
  }
  CHECK(std::abs(rms_speed(ae, data) - rms_speed(before, data) / 2.5) < 1e-12);
  CHECK_THROWS_AS(rescale_latent(ae, 0.0), Error);
}

TEST_CASE("phase objective gradients match finite differences") {
  const auto data = circle(32);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto ae = AutoEncoder::glorot(2, 1, {5}, {5}, seed);
    auto v = CoeffTensor::random_unit(1, 2, seed + 100);
    for (const CoeffTensor* vp : {static_cast<const CoeffTensor*>(nullptr), static_cast<const CoeffTensor*>(&v)}) {
      DaeGradients g;
      phase_loss(ae, vp, data, 1.0, &g);
      const double h = 1e-5;
      auto fd = [&](double& p) {
        const double keep = p;
        p = keep + h;
        const double up = phase_loss(ae, vp, data);
        p = keep - h;
        const double dn = phase_loss(ae, vp, data);
        p = keep;
        return (up - dn) / (2.0 * h);
      };
      for (std::size_t i = 0; i < g.encoder.size(); ++i)
        CHECK(oracle::rel_err(g.encoder[i], fd(ae.encoder.params()[i]), 1e-6) < 1e-4);
      for (std::size_t i = 0; i < g.decoder.size(); ++i)
        CHECK(oracle::rel_err(g.decoder[i], fd(ae.decoder.params()[i]), 1e-6) < 1e-4);
      if (vp) {
        for (std::size_t i = 0; i < 3; ++i)
          CHECK(oracle::rel_err(g.coefficients[i], fd(v.coefficients[i]), 1e-6) < 1e-4);
      }
    }
  }
}

TEST_CASE("phase 1 input checks") {
  const auto ae = AutoEncoder::glorot(2, 1, {4}, {4}, 1);
  CHECK_THROWS_AS(train_phase1(ae, {}), Error);
  try {
    train_phase1(ae, circle(31));
    FAIL("expected insufficient data");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::insufficient_data);
  }
}

TEST_CASE("phase 1 on a line segment") {
  std::vector<std::vector<double>> line;
  for (int i = 0; i < 64; ++i) {
    const double t = -1.0 + 2.0 * i / 63.0;
    line.push_back({0.6 * t, 0.8 * t});
  }
  DaeConfig cfg;
  cfg.phase1_threshold = 1e-4;
  const auto r = train_phase1(AutoEncoder::glorot(2, 1, {4}, {4}, 3), line, cfg);
  CHECK(r.report.reconstruction < 1e-3);
  CHECK(r.report.iterations == r.report.loss_history.size());
}

TEST_CASE("phase 1 on the circle") {
  DaeConfig cfg;
  const auto r = train_phase1(AutoEncoder::glorot(2, 1, {16, 16}, {16, 16}, 7), circle(256), cfg);
  CHECK(r.report.reconstruction < 1e-2);
  CHECK(r.report.iterations <= cfg.phase1_max_iterations);
}

TEST_CASE("circle run recovers the harmonic relation") {
  const auto& r = circle_run();
  const auto data = circle(256);
  const auto& v = r.v.coefficients;
  CHECK(std::abs(norm(v) - 1.0) < 1e-12);
  CHECK(v[0] > 0.0);
  CHECK(oracle::angle_deg(v, kHarmonic) < 15.0);
  CHECK(oracle::angle_deg(v, kReported) < 15.0);

  CHECK(r.phase2.reconstruction <= 2.0 * r.phase1.reconstruction);
  CHECK(std::abs(r.phase2.speed - 1.0) < 1e-3);

  double lo = 1e300, hi = -1e300;
  for (const auto& x : data) {
    const double rho = r.ae.encode(x)[0];
    lo = std::min(lo, rho);
    hi = std::max(hi, rho);
  }
  CHECK(hi - lo >= 3.0);

  // Decoded sweep: on the unit circle, at most one turn.
  const auto sweep = latent_sweep(r.ae, data, 400);
  double dev = 0.0, turn = 0.0;
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    const auto& p = sweep.points[i];
    dev = std::max(dev, std::abs(std::hypot(p[0], p[1]) - 1.0));
    if (i > 0) {
      const auto& q = sweep.points[i - 1];
      turn += std::remainder(std::atan2(p[1], p[0]) - std::atan2(q[1], q[0]), 2.0 * oracle::kPi);
    }
  }
  CHECK(dev < 0.05);
  CHECK(std::abs(turn) <= 2.0 * oracle::kPi + 0.1);
}

TEST_CASE("phase 2 loss trend on the circle run") {
  // 100-step moving average does not rise, up to the oscillation of a
  // fixed-step optimiser near convergence.
  const auto& h = circle_run().phase2.loss_history;
  REQUIRE(h.size() >= 200);
  auto window = [&](std::size_t end) {
    double s = 0.0;
    for (std::size_t i = end - 100; i < end; ++i) s += h[i];
    return s / 100.0;
  };
  const double first = window(100);
  for (std::size_t end = 200; end <= h.size(); end += 100)
    CHECK(window(end) <= window(end - 100) + 1e-3 * first);
}

TEST_CASE("reported coefficients against the trained decoder") {
  // A nonzero first-derivative term cannot vanish on a circle, so the
  // residual is bounded by that term rather than by the training threshold.
  const auto& r = circle_run();
  const auto data = circle(256);
  const auto reported = CoeffTensor::from(1, 2, kReported);
  CHECK(residual_mse(r.ae, reported, data) < 1e-2);
  CHECK(residual_mse(r.ae, r.v, data) < residual_mse(r.ae, reported, data));
}

TEST_CASE("harmonic V on the trained circle decoder is a fixed point") {
  const auto& r = circle_run();
  const auto data = circle(256);
  const auto start = CoeffTensor::from(1, 2, kHarmonic);
  DaeConfig cfg;
  cfg.phase2_max_iterations = 1;
  // Threshold just above the current loss: training stops before stepping.
  cfg.phase2_threshold = 1.01 * phase_loss(r.ae, &start, data);
  const auto out = train_phase2(r.ae, start, data, cfg);
  CHECK(out.report.iterations == 1);
  CHECK(oracle::angle_deg(out.v.coefficients, start.coefficients) < 0.5);

  // The harmonic direction is (near) optimal for this decoder: the V
  // gradient is almost parallel to V, so its tangential part is small.
  DaeGradients g;
  phase_loss(r.ae, &start, data, 1.0, &g);
  double along = 0.0;
  for (int k = 0; k < 3; ++k) along += g.coefficients[k] * start.coefficients[k];
  double tangential = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double t = g.coefficients[k] - along * start.coefficients[k];
    tangential += t * t;
  }
  CHECK(std::sqrt(tangential) < 1e-2);
}

TEST_CASE("phase 2 is deterministic and keeps V on the sphere") {
  const auto data = circle(64);
  DaeConfig cfg;
  cfg.phase1_max_iterations = 200;
  cfg.phase2_max_iterations = 25;
  cfg.seed = 3;
  const auto a = train_dae(data, cfg);
  const auto b = train_dae(data, cfg);
  CHECK(a.v.coefficients == b.v.coefficients);
  CHECK(std::equal(a.ae.decoder.params().begin(), a.ae.decoder.params().end(),
                   b.ae.decoder.params().begin()));
  CHECK(std::abs(norm(a.v.coefficients) - 1.0) < 1e-12);
  for (std::size_t k = 1; k <= 5; ++k) {
    cfg.phase2_max_iterations = k;
    CHECK(std::abs(norm(train_phase2(a.ae, a.v, data, cfg).v.coefficients) - 1.0) < 1e-12);
  }
}

TEST_CASE("first-order relation on a line through the origin") {
  std::vector<std::vector<double>> line;
  for (int i = 0; i < 64; ++i) {
    const double t = -1.0 + 2.0 * i / 63.0;
    line.push_back({0.6 * t, 0.8 * t});
  }
  DaeConfig cfg;
  cfg.order = 1;
  const auto r = train_dae(line, cfg);
  CHECK(r.v.coefficients.size() == 2);
  CHECK(r.phase2.residual < 1e-3);
}
