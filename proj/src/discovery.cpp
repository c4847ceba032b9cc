#include "diffstruct/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "diffstruct/error.hpp"
#include "diffstruct/linalg.hpp"

namespace diffstruct {

namespace {

std::vector<linalg::Vector> sorted_latents(const JetSeries& jets) {
  jets.validate();
  std::vector<linalg::Vector> pts;
  pts.reserve(jets.size());
  for (std::size_t i = 0; i < jets.size(); ++i) pts.push_back({jets.u[i], jets.u1[i], jets.u2[i]});
  // Fixed accumulation order regardless of input order.
  std::sort(pts.begin(), pts.end());
  return pts;
}

std::vector<Jet2> as_input(const Jet3& x) {
  return {Jet2::constant(x[0]), Jet2::constant(x[1]), Jet2::constant(x[2])};
}

}  // namespace

std::array<double, 3> jet_spectrum(const JetSeries& jets) {
  const auto pts = sorted_latents(jets);
  const auto fit = linalg::pca(pts);
  return {fit.eig.values[0], fit.eig.values[1], fit.eig.values[2]};
}

NormalVector fit_normal_vector(const JetSeries& jets) {
  if (jets.size() < 4) {
    throw Error(Errc::insufficient_data,
                "need at least 4 jets to fit a normal vector, got " + std::to_string(jets.size()));
  }
  const auto pts = sorted_latents(jets);
  const auto fit = linalg::pca(pts);
  const auto& values = fit.eig.values;
  const double top = std::max(values[2], std::numeric_limits<double>::min());
  int multiplicity = 1;
  for (std::size_t i = 1; i < 3; ++i) {
    if (values[i] - values[0] <= kDegeneracyTolerance * top) ++multiplicity;
  }
  if (multiplicity > 1) {
    throw Error(Errc::degenerate_spectrum,
                "smallest covariance eigenvalue has multiplicity " + std::to_string(multiplicity) +
                    ": the jets satisfy more than one independent linear relation");
  }
  const auto v = fit.normal();
  NormalVector out;
  out.v = {v[0], v[1], v[2]};
  out.offset = linalg::dot(v, fit.mean);
  return out;
}

Jet3 ImplicitModel::normalize(const Jet3& jet) const {
  return {(jet[0] - mean[0]) / scale[0], (jet[1] - mean[1]) / scale[1],
          (jet[2] - mean[2]) / scale[2]};
}

double eval_implicit(const ImplicitModel& model, const Jet3& jet) {
  const Jet3 x = model.normalize(jet);
  return model.net.forward(x)[0];
}

ProbeSampler::ProbeSampler(std::vector<Jet3> data, double margin, double exclusion,
                           std::uint64_t seed)
    : data_(std::move(data)), exclusion_(exclusion), rng_(seed) {
  if (data_.empty()) throw Error(Errc::insufficient_data, "probe sampler needs data");
  for (std::size_t c = 0; c < 3; ++c) {
    double lo = data_[0][c], hi = data_[0][c];
    for (const auto& p : data_) {
      lo = std::min(lo, p[c]);
      hi = std::max(hi, p[c]);
    }
    // A flat channel still gets a box of unit width.
    const double range = hi - lo > 0.0 ? hi - lo : 1.0;
    lo_[c] = lo - margin * range;
    hi_[c] = hi + margin * range;
  }
}

double ProbeSampler::distance_to_data(const Jet3& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& d : data_) {
    const double dx = p[0] - d[0], dy = p[1] - d[1], dz = p[2] - d[2];
    best = std::min(best, dx * dx + dy * dy + dz * dz);
  }
  return std::sqrt(best);
}

std::vector<Jet3> ProbeSampler::draw(std::size_t count) {
  std::vector<Jet3> out;
  out.reserve(count);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr int kMaxTries = 10000;
  while (out.size() < count) {
    int tries = 0;
    for (;;) {
      Jet3 p;
      for (std::size_t c = 0; c < 3; ++c) p[c] = lo_[c] + (hi_[c] - lo_[c]) * unit(rng_);
      if (distance_to_data(p) >= exclusion_) {
        out.push_back(p);
        break;
      }
      if (++tries == kMaxTries) {
        throw Error(Errc::numeric, "probe box is covered by data; cannot place probes");
      }
    }
  }
  return out;
}

ImplicitLoss implicit_loss(const Mlp& net, std::span<const Jet3> data, std::span<const Jet3> probes,
                           double probe_weight) {
  ImplicitLoss out;
  for (const auto& x : data) {
    const double f = net.forward(x)[0];
    out.data_term += f * f;
  }
  for (const auto& x : probes) {
    const double r = net.forward(x)[0] - 1.0;
    out.probe_term += r * r;
  }
  out.data_term /= static_cast<double>(data.size());
  out.probe_term /= static_cast<double>(probes.size());
  out.total = out.data_term + probe_weight * out.probe_term;
  return out;
}

ImplicitFit train_implicit(const JetSeries& jets, const ImplicitConfig& config) {
  if (jets.size() < 10) {
    throw Error(Errc::insufficient_data,
                "implicit training needs at least 10 jets, got " + std::to_string(jets.size()));
  }
  jets.validate();
  const std::size_t n = jets.size();

  ImplicitModel model;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto& col = c == 0 ? jets.u : c == 1 ? jets.u1 : jets.u2;
    double mu = 0.0;
    for (double v : col) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : col) var += (v - mu) * (v - mu);
    const double sd = std::sqrt(var / static_cast<double>(n - 1));
    model.mean[c] = mu;
    model.scale[c] = sd > 0.0 ? sd : 1.0;
  }
  std::vector<Jet3> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = model.normalize(jets.jet(i));

  std::vector<std::size_t> sizes{3};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(1);
  model.net = Mlp::glorot(sizes, config.seed);

  ProbeSampler sampler(data, config.probe_margin, config.probe_exclusion,
                       config.seed ^ 0x5bd1e9955bd1e995ULL);
  auto state = OptimState::for_params(model.net.param_count(), config.step_size);

  std::vector<std::vector<Jet2>> batch(2 * n);
  for (std::size_t i = 0; i < n; ++i) batch[i] = as_input(data[i]);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double weight = config.probe_weight;
  auto head = [&](std::size_t i, std::span<const Jet2> y, std::span<Jet2> adj) {
    if (i < n) {
      adj[0].value = 2.0 * y[0].value * inv_n;
      return y[0].value * y[0].value * inv_n;
    }
    const double r = y[0].value - 1.0;
    adj[0].value = 2.0 * weight * r * inv_n;
    return weight * r * r * inv_n;
  };

  TrainReport report;
  report.seed = config.seed;
  report.probe_lo = sampler.lo();
  report.probe_hi = sampler.hi();
  std::size_t it = 0;
  while (it < std::max<std::size_t>(config.max_iterations, 1)) {
    report.last_probes = sampler.draw(n);
    for (std::size_t i = 0; i < n; ++i) batch[n + i] = as_input(report.last_probes[i]);
    LossGrad lg;
    try {
      lg = grad(model.net, batch, head);
    } catch (const Error&) {
      throw Error(Errc::numeric, "implicit training loss not finite at iteration " + std::to_string(it));
    }
    ++it;
    if (lg.loss < config.loss_threshold) break;
    opt_step(model.net, lg.grads, state);
  }

  report.iterations = it;
  const auto final_loss = implicit_loss(model.net, data, report.last_probes, weight);
  if (!std::isfinite(final_loss.total)) {
    throw Error(Errc::numeric, "implicit training loss not finite after iteration " + std::to_string(it));
  }
  report.loss = final_loss.total;
  for (const auto& x : data) report.mean_abs_data += std::abs(model.net.forward(x)[0]);
  report.mean_abs_data /= static_cast<double>(n);
  for (const auto& x : report.last_probes) report.mean_probe += model.net.forward(x)[0];
  report.mean_probe /= static_cast<double>(n);
  return {std::move(model), std::move(report)};
}

}  // namespace diffstruct
