#include "diffstruct/decode.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "diffstruct/error.hpp"

namespace diffstruct {

const char* to_string(DecodeMethod method) noexcept {
  switch (method) {
    case DecodeMethod::pinn: return "pinn";
    case DecodeMethod::integrate: return "integrate";
    case DecodeMethod::closed_form: return "closed-form";
  }
  return "unknown";
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

// g(w) = f(u, u1, w) of an implicit model with dg/dw and d2g/dw2.
Jet2 implicit_section(const ImplicitModel& m, double u, double u1, double w) {
  const Jet3 x = m.normalize({u, u1, w});
  const std::vector<Jet2> in{Jet2::constant(x[0]), Jet2::constant(x[1]),
                             Jet2{x[2], 1.0 / m.scale[2], 0.0}};
  return m.net.forward_jet(in)[0];
}

double newton_root(const ImplicitModel& m, double u, double u1, double guess, bool& ok) {
  double w = guess;
  ok = false;
  for (int it = 0; it < 50; ++it) {
    const Jet2 g = implicit_section(m, u, u1, w);
    if (std::abs(g.value) < 1e-8) {
      ok = true;
      return w;
    }
    if (std::abs(g.d1) < 1e-10 || !std::isfinite(g.value)) return w;
    w -= g.value / g.d1;
  }
  ok = std::abs(implicit_section(m, u, u1, w).value) < 1e-8;
  return w;
}

// Minimise g(w)^2 by Newton steps with backtracking.
double valley_floor(const ImplicitModel& m, double u, double u1, double guess) {
  double w = guess;
  Jet2 g = implicit_section(m, u, u1, w);
  for (int it = 0; it < 100; ++it) {
    const double grad = g.value * g.d1;
    if (std::abs(grad) < 1e-14) break;
    const double curv = g.d1 * g.d1 + g.value * g.d2;
    double step = curv > 0.0 ? -grad / curv : -std::copysign(0.1, grad);
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Jet2 trial = implicit_section(m, u, u1, w + step);
      if (trial.value * trial.value < g.value * g.value) {
        w += step;
        g = trial;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved || std::abs(step) < 1e-14) break;
  }
  return w;
}

double solve_implicit(const ImplicitModel& m, double u, double u1, double guess) {
  bool ok = false;
  const double w = newton_root(m, u, u1, guess, ok);
  if (ok) return w;
  const double floor = valley_floor(m, u, u1, guess);
  const double g = implicit_section(m, u, u1, floor).value;
  if (std::abs(g) <= kValleyTolerance) return floor;
  throw Error(Errc::root_find, "no root of F(u, u', w) near guess " + std::to_string(guess) +
                                   " (best |F| = " + std::to_string(std::abs(g)) + ")");
}

}  // namespace

double relation_residual(const RelationModel& model, const Jet3& jet) {
  return std::visit(overloaded{[&](const NormalVector& n) { return n.residual(jet); },
                               [&](const ImplicitModel& m) { return eval_implicit(m, jet); }},
                    model);
}

double fd_relation_residual(const RelationModel& model, const SampleSeries& series) {
  const auto jets = finite_diff_jets(series);
  double s = 0.0;
  for (std::size_t i = 0; i < jets.size(); ++i) {
    const double r = relation_residual(model, jets.jet(i));
    s += r * r;
  }
  return s / static_cast<double>(jets.size());
}

double solve_u2(const RelationModel& model, double u, double u1, double guess) {
  return std::visit(
      overloaded{[&](const NormalVector& n) {
                   if (std::abs(n.v[2]) <= 1e-9) {
                     throw Error(Errc::not_solvable,
                                 "relation has no u'' term (|v2| <= 1e-9); cannot solve for u''");
                   }
                   return (n.offset - n.v[0] * u - n.v[1] * u1) / n.v[2];
                 },
                 [&](const ImplicitModel& m) { return solve_implicit(m, u, u1, guess); }},
      model);
}

DecodeResult integrate(const RelationModel& model, const InitialCondition& ic, double t_end,
                       double h) {
  if (!(h > 0.0)) throw Error(Errc::parameter, "step size must be positive");
  if (!(t_end > ic.t0)) throw Error(Errc::parameter, "t_end must exceed t0");
  const double span = t_end - ic.t0;
  const auto steps = static_cast<std::size_t>(std::ceil(span / h - 1e-9));
  if (steps < 2) throw Error(Errc::parameter, "integration needs at least 2 steps");

  std::vector<double> ts{ic.t0}, us{ic.u0};
  double u = ic.u0, p = ic.du0;
  double last = 0.0;
  double t = ic.t0;
  auto accel = [&](double uu, double pp) {
    try {
      last = solve_u2(model, uu, pp, last);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " at t = " + std::to_string(t));
    }
    return last;
  };
  // Seed the guess from the initial state.
  last = accel(u, p);
  for (std::size_t i = 1; i <= steps; ++i) {
    const double tn = i == steps ? t_end : ic.t0 + static_cast<double>(i) * h;
    const double dt = tn - t;
    const double k1u = p, k1p = accel(u, p);
    const double k2u = p + 0.5 * dt * k1p, k2p = accel(u + 0.5 * dt * k1u, p + 0.5 * dt * k1p);
    const double k3u = p + 0.5 * dt * k2p, k3p = accel(u + 0.5 * dt * k2u, p + 0.5 * dt * k2p);
    const double k4u = p + dt * k3p, k4p = accel(u + dt * k3u, p + dt * k3p);
    u += dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    p += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    t = tn;
    if (!std::isfinite(u) || !std::isfinite(p)) {
      throw Error(Errc::numeric, "integration blew up at t = " + std::to_string(t));
    }
    ts.push_back(t);
    us.push_back(u);
  }
  SampleSeries series(std::move(ts), std::move(us));
  const double residual = fd_relation_residual(model, series);
  return {std::move(series), residual, DecodeMethod::integrate};
}

SampleSeries closed_form_linear(const NormalVector& model, const InitialCondition& ic,
                                std::span<const double> ts) {
  const double a = model.v[2], b = model.v[1], c = model.v[0];
  if (std::abs(a) <= 1e-9) {
    throw Error(Errc::not_solvable, "relation has no u'' term (|v2| <= 1e-9)");
  }
  double particular = 0.0;
  if (model.offset != 0.0) {
    if (std::abs(c) <= 1e-12) {
      throw Error(Errc::unsupported,
                  "inhomogeneous relation without a u term has no constant particular solution");
    }
    particular = model.offset / c;
  }
  const double y0 = ic.u0 - particular;
  const double dy0 = ic.du0;

  const double disc = b * b - 4.0 * a * c;
  const double disc_scale = b * b + 4.0 * std::abs(a * c);
  std::vector<double> us;
  us.reserve(ts.size());
  if (std::abs(disc) <= 1e-12 * disc_scale) {
    const double r = -b / (2.0 * a);
    const double c1 = y0, c2 = dy0 - r * y0;
    for (double t : ts) {
      const double tau = t - ic.t0;
      us.push_back(particular + (c1 + c2 * tau) * std::exp(r * tau));
    }
  } else if (disc > 0.0) {
    // Cancellation-free pair of real roots.
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    const double r1 = q / a;
    const double r2 = q != 0.0 ? c / q : -r1;
    const double c1 = (dy0 - r2 * y0) / (r1 - r2);
    const double c2 = y0 - c1;
    for (double t : ts) {
      const double tau = t - ic.t0;
      us.push_back(particular + c1 * std::exp(r1 * tau) + c2 * std::exp(r2 * tau));
    }
  } else {
    const double alpha = -b / (2.0 * a);
    const double beta = std::sqrt(-disc) / (2.0 * std::abs(a));
    const double c1 = y0, c2 = (dy0 - alpha * y0) / beta;
    for (double t : ts) {
      const double tau = t - ic.t0;
      us.push_back(particular +
                   std::exp(alpha * tau) * (c1 * std::cos(beta * tau) + c2 * std::sin(beta * tau)));
    }
  }
  return SampleSeries({ts.begin(), ts.end()}, std::move(us));
}

std::vector<double> uniform_grid(double a, double b, std::size_t count) {
  if (count < 2) throw Error(Errc::parameter, "a grid needs at least 2 points");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  out.back() = b;
  return out;
}

namespace {

// Loss of one PINN iteration and its gradient in the scaled input coordinate.
struct PinnObjective {
  const RelationModel& model;
  const InitialCondition& ic;
  double center;
  double half_width;
  double ic_weight;

  JetTrace u_trace;
  JetTrace f_trace;
  std::vector<double> f_grads;

  Jet2 seed(double t) const { return {(t - center) / half_width, 1.0 / half_width, 0.0}; }

  // Residual R at a solution jet, filling dR/d(u, u', u'').
  double residual(const Jet2& y, Jet3& dr) {
    return std::visit(
        overloaded{[&](const NormalVector& n) {
                     dr = n.v;
                     return n.residual({y.value, y.d1, y.d2});
                   },
                   [&](const ImplicitModel& m) {
                     const Jet3 x = m.normalize({y.value, y.d1, y.d2});
                     const std::vector<Jet2> in{Jet2::constant(x[0]), Jet2::constant(x[1]),
                                                Jet2::constant(x[2])};
                     const double f = forward_traced(m.net, in, f_trace)[0].value;
                     f_grads.assign(m.net.param_count(), 0.0);
                     std::vector<Jet2> gin(3);
                     const Jet2 one{1.0, 0.0, 0.0};
                     backward(m.net, f_trace, std::span<const Jet2>(&one, 1), f_grads, gin);
                     for (std::size_t k = 0; k < 3; ++k) dr[k] = gin[k].value / m.scale[k];
                     return f;
                   }},
        model);
  }

  double evaluate(const Mlp& net, std::span<const double> ts, std::vector<double>& grads,
                  double* residual_out = nullptr) {
    grads.assign(net.param_count(), 0.0);
    const double inv_m = 1.0 / static_cast<double>(ts.size());
    double res_sum = 0.0;
    Jet3 dr{};
    for (double t : ts) {
      const Jet2 s = seed(t);
      const Jet2 y = forward_traced(net, std::span<const Jet2>(&s, 1), u_trace)[0];
      const double r = residual(y, dr);
      res_sum += r * r;
      const double g = 2.0 * r * inv_m;
      const Jet2 adj{g * dr[0], g * dr[1], g * dr[2]};
      backward(net, u_trace, std::span<const Jet2>(&adj, 1), grads);
    }
    const double res_mean = res_sum * inv_m;
    if (residual_out) *residual_out = res_mean;

    const Jet2 s0 = seed(ic.t0);
    const Jet2 y0 = forward_traced(net, std::span<const Jet2>(&s0, 1), u_trace)[0];
    const double ev = y0.value - ic.u0;
    const double es = y0.d1 - ic.du0;
    const Jet2 adj0{2.0 * ic_weight * ev, 2.0 * ic_weight * es, 0.0};
    backward(net, u_trace, std::span<const Jet2>(&adj0, 1), grads);
    return res_mean + ic_weight * (ev * ev + es * es);
  }
};

}  // namespace

PinnResult decode_pinn(const RelationModel& model, const InitialCondition& ic,
                       std::span<const double> t_grid, const PinnConfig& config) {
  if (t_grid.size() < 16) {
    throw Error(Errc::insufficient_data, "PINN decoding needs at least 16 collocation points, got " +
                                             std::to_string(t_grid.size()));
  }
  // Validates ordering and finiteness of the grid.
  SampleSeries(std::vector<double>(t_grid.begin(), t_grid.end()),
               std::vector<double>(t_grid.size(), 0.0));
  const double lo = t_grid.front(), hi = t_grid.back();
  PinnObjective objective{model, ic, 0.5 * (lo + hi), 0.5 * (hi - lo), config.ic_weight, {}, {}, {}};

  std::vector<std::size_t> sizes{1};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(1);
  Mlp net = Mlp::glorot(sizes, config.seed);
  auto state = OptimState::for_params(net.param_count(), config.step_size);

  std::mt19937_64 rng(config.seed ^ 0x2545f4914f6cdd1dULL);
  std::uniform_real_distribution<double> draw(lo, hi);
  std::vector<double> colloc(t_grid.begin(), t_grid.end());
  std::vector<double> grads;

  PinnResult out{{SampleSeries(), 0.0, DecodeMethod::pinn}, Mlp(), 0.0, 0, 0.0, 0.0};
  std::size_t it = 0;
  while (it < std::max<std::size_t>(config.max_iterations, 1)) {
    if (config.random_collocation) {
      for (double& t : colloc) t = draw(rng);
    }
    const double loss = objective.evaluate(net, colloc, grads);
    ++it;
    if (!std::isfinite(loss) || loss > config.divergence_limit) {
      throw Error(Errc::training_diverged,
                  "PINN loss diverged at iteration " + std::to_string(it - 1));
    }
    if (loss < config.loss_threshold) break;
    opt_step(net, grads, state);
  }

  double residual = 0.0;
  out.loss = objective.evaluate(net, t_grid, grads, &residual);
  out.iterations = it;

  // Fold the input scaling into the first layer so the network takes raw t.
  const double inv = 1.0 / objective.half_width;
  for (std::size_t r = 0; r < net.sizes()[1]; ++r) {
    const double w = net.weight(0, r, 0);
    net.weight(0, r, 0) = w * inv;
    net.bias(0, r) -= w * objective.center * inv;
  }

  std::vector<double> us;
  us.reserve(t_grid.size());
  for (double t : t_grid) us.push_back(net.forward(std::vector<double>{t})[0]);
  const auto at0 = net.forward_jet(ic.t0)[0];
  out.ic_value_error = std::abs(at0.value - ic.u0);
  out.ic_slope_error = std::abs(at0.d1 - ic.du0);
  out.result = {SampleSeries({t_grid.begin(), t_grid.end()}, std::move(us)), residual,
                DecodeMethod::pinn};
  out.net = std::move(net);
  return out;
}

}  // namespace diffstruct
