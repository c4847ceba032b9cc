#include "diffstruct/dae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "diffstruct/error.hpp"

namespace diffstruct {

std::size_t v_dimension(std::size_t latent_dim, std::size_t order) {
  std::size_t total = 0, block = 1;
  for (std::size_t j = 0; j <= order; ++j) {
    total += block;
    block *= latent_dim;
  }
  return total;
}

void check_supported(std::size_t latent_dim, std::size_t order) {
  if (latent_dim != 1 || order > 2) {
    throw Error(Errc::unsupported, "unsupported configuration: latent_dim " +
                                       std::to_string(latent_dim) + ", order " +
                                       std::to_string(order) +
                                       " (only latent_dim 1 with order <= 2 is implemented)");
  }
}

AutoEncoder::AutoEncoder(Mlp enc, Mlp dec) : encoder(std::move(enc)), decoder(std::move(dec)) {
  if (encoder.output_dim() != decoder.input_dim() || decoder.output_dim() != encoder.input_dim()) {
    throw Error(Errc::shape, "encoder and decoder dimensions do not match");
  }
  if (!(latent_dim() < ambient_dim())) {
    throw Error(Errc::shape, "latent dimension must be below the ambient dimension");
  }
}

AutoEncoder AutoEncoder::glorot(std::size_t ambient, std::size_t latent,
                                const std::vector<std::size_t>& encoder_hidden,
                                const std::vector<std::size_t>& decoder_hidden,
                                std::uint64_t seed) {
  std::vector<std::size_t> enc{ambient}, dec{latent};
  enc.insert(enc.end(), encoder_hidden.begin(), encoder_hidden.end());
  enc.push_back(latent);
  dec.insert(dec.end(), decoder_hidden.begin(), decoder_hidden.end());
  dec.push_back(ambient);
  return AutoEncoder(Mlp::glorot(enc, seed), Mlp::glorot(dec, seed ^ 0xa0761d6478bd642fULL));
}

CoeffTensor CoeffTensor::random_unit(std::size_t latent_dim, std::size_t order,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  CoeffTensor v{order, latent_dim, std::vector<double>(v_dimension(latent_dim, order))};
  for (double& x : v.coefficients) x = gauss(rng);
  v.normalize();
  return v;
}

CoeffTensor CoeffTensor::from(std::size_t latent_dim, std::size_t order,
                              std::vector<double> values) {
  if (values.size() != v_dimension(latent_dim, order)) {
    throw Error(Errc::shape, "coefficient count " + std::to_string(values.size()) +
                                 " does not match latent_dim/order");
  }
  CoeffTensor v{order, latent_dim, std::move(values)};
  v.normalize();
  return v;
}

void CoeffTensor::normalize() {
  double n = 0.0;
  for (double x : coefficients) n += x * x;
  n = std::sqrt(n);
  if (!(n >= 1e-12)) {
    throw Error(Errc::degenerate_coefficients, "coefficient vector collapsed to zero length");
  }
  for (double& x : coefficients) x /= n;
}

void CoeffTensor::canonical_sign() {
  // Block 0 is the single coefficient A.
  if (!coefficients.empty() && coefficients[0] < 0.0) {
    for (double& x : coefficients) x = -x;
  }
}

JacobianStack decoder_jets(const AutoEncoder& ae, std::span<const double> rho, std::size_t order) {
  check_supported(ae.latent_dim(), order);
  if (rho.size() != ae.latent_dim()) throw Error(Errc::shape, "latent point has wrong dimension");
  const auto jets = ae.decoder.forward_jet(rho[0]);
  JacobianStack out{order, 1, {}};
  for (const Jet2& j : jets) {
    std::vector<double> c{j.value, j.d1, j.d2};
    c.resize(order + 1);
    out.components.push_back(std::move(c));
  }
  return out;
}

std::vector<double> residual(const CoeffTensor& v, const JacobianStack& jac) {
  if (v.order != jac.order || v.latent_dim != jac.latent_dim) {
    throw Error(Errc::shape, "coefficient and Jacobian orders differ");
  }
  std::vector<double> out;
  out.reserve(jac.components.size());
  for (const auto& c : jac.components) {
    if (c.size() != v.coefficients.size()) throw Error(Errc::shape, "Jacobian block size mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) s += v.coefficients[k] * c[k];
    out.push_back(s);
  }
  return out;
}

namespace {

void check_data(const AutoEncoder& ae, std::span<const std::vector<double>> data) {
  if (data.size() < 32) {
    throw Error(Errc::insufficient_data,
                "autoencoder training needs at least 32 points, got " + std::to_string(data.size()));
  }
  for (const auto& x : data) {
    if (x.size() != ae.ambient_dim()) throw Error(Errc::shape, "data point has wrong dimension");
    for (double v : x) {
      if (!std::isfinite(v)) throw Error(Errc::numeric, "data point is not finite");
    }
  }
}

std::vector<Jet2> constants(std::span<const double> x) {
  std::vector<Jet2> out;
  out.reserve(x.size());
  for (double v : x) out.push_back(Jet2::constant(v));
  return out;
}

// One pass over the data: loss, gradients for both networks and V.
struct DaeObjective {
  std::size_t order;
  double residual_weight;
  bool with_relation;

  JetTrace enc_trace, dec_trace;
  std::vector<double> enc_grads, dec_grads, v_grads;
  double reconstruction = 0.0;
  double relation = 0.0;

  double evaluate(const AutoEncoder& ae, const CoeffTensor* v,
                  std::span<const std::vector<double>> data) {
    enc_grads.assign(ae.encoder.param_count(), 0.0);
    dec_grads.assign(ae.decoder.param_count(), 0.0);
    v_grads.assign(v ? v->coefficients.size() : 0, 0.0);
    const std::size_t amb = ae.ambient_dim();
    const double inv_m = 1.0 / static_cast<double>(data.size() * amb);
    reconstruction = relation = 0.0;
    std::vector<Jet2> y_adj(amb);
    Jet2 rho_adj;
    for (const auto& x : data) {
      const auto xin = constants(x);
      const double rho = forward_traced(ae.encoder, xin, enc_trace)[0].value;
      const Jet2 seed{rho, with_relation ? 1.0 : 0.0, 0.0};
      const auto y = forward_traced(ae.decoder, std::span<const Jet2>(&seed, 1), dec_trace);
      for (std::size_t d = 0; d < amb; ++d) {
        const double e = y[d].value - x[d];
        reconstruction += e * e * inv_m;
        y_adj[d] = {2.0 * e * inv_m, 0.0, 0.0};
        if (with_relation) {
          const double jac[3] = {y[d].value, y[d].d1, y[d].d2};
          double r = 0.0;
          for (std::size_t k = 0; k <= order; ++k) r += v->coefficients[k] * jac[k];
          relation += r * r * inv_m;
          const double g = 2.0 * residual_weight * r * inv_m;
          y_adj[d].value += g * v->coefficients[0];
          if (order >= 1) y_adj[d].d1 = g * v->coefficients[1];
          if (order >= 2) y_adj[d].d2 = g * v->coefficients[2];
          for (std::size_t k = 0; k <= order; ++k) v_grads[k] += g * jac[k];
        }
      }
      backward(ae.decoder, dec_trace, y_adj, dec_grads, std::span<Jet2>(&rho_adj, 1));
      const Jet2 enc_adj{rho_adj.value, 0.0, 0.0};
      backward(ae.encoder, enc_trace, std::span<const Jet2>(&enc_adj, 1), enc_grads);
    }
    return reconstruction + residual_weight * relation;
  }
};

void check_loss(double loss, double limit, std::size_t it, const char* phase) {
  if (!std::isfinite(loss) || loss > limit) {
    throw Error(Errc::training_diverged,
                std::string(phase) + " loss diverged at iteration " + std::to_string(it));
  }
}

}  // namespace

double phase_loss(const AutoEncoder& ae, const CoeffTensor* v,
                  std::span<const std::vector<double>> data, double residual_weight,
                  DaeGradients* grads) {
  check_data(ae, data);
  const std::size_t order = v ? v->order : 0;
  if (v) {
    check_supported(ae.latent_dim(), order);
    if (v->latent_dim != ae.latent_dim()) throw Error(Errc::shape, "coefficients use another latent dimension");
  }
  DaeObjective obj{order, residual_weight, v != nullptr, {}, {}, {}, {}, {}};
  const double loss = obj.evaluate(ae, v, data);
  if (grads) {
    grads->encoder = std::move(obj.enc_grads);
    grads->decoder = std::move(obj.dec_grads);
    grads->coefficients = std::move(obj.v_grads);
  }
  return loss;
}

double reconstruction_mse(const AutoEncoder& ae, std::span<const std::vector<double>> data) {
  double s = 0.0;
  for (const auto& x : data) {
    const auto y = ae.decode(ae.encode(x));
    for (std::size_t d = 0; d < x.size(); ++d) s += (y[d] - x[d]) * (y[d] - x[d]);
  }
  return s / static_cast<double>(data.size() * ae.ambient_dim());
}

double residual_mse(const AutoEncoder& ae, const CoeffTensor& v,
                    std::span<const std::vector<double>> data) {
  double s = 0.0;
  for (const auto& x : data) {
    const auto rho = ae.encode(x);
    for (double r : residual(v, decoder_jets(ae, rho, v.order))) s += r * r;
  }
  return s / static_cast<double>(data.size() * ae.ambient_dim());
}

double rms_speed(const AutoEncoder& ae, std::span<const std::vector<double>> data) {
  double s = 0.0;
  for (const auto& x : data) {
    for (const auto& c : decoder_jets(ae, ae.encode(x), 1).components) s += c[1] * c[1];
  }
  return std::sqrt(s / static_cast<double>(data.size()));
}

void rescale_latent(AutoEncoder& ae, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw Error(Errc::numeric, "latent rescale factor must be positive and finite");
  }
  const std::size_t last = ae.encoder.layer_count() - 1;
  const auto& es = ae.encoder.sizes();
  for (std::size_t r = 0; r < es[last + 1]; ++r) {
    for (std::size_t c = 0; c < es[last]; ++c) ae.encoder.weight(last, r, c) *= factor;
    ae.encoder.bias(last, r) *= factor;
  }
  const auto& ds = ae.decoder.sizes();
  for (std::size_t r = 0; r < ds[1]; ++r) {
    for (std::size_t c = 0; c < ds[0]; ++c) ae.decoder.weight(0, r, c) /= factor;
  }
}

LatentSweep latent_sweep(const AutoEncoder& ae, std::span<const std::vector<double>> data,
                         std::size_t count) {
  if (data.empty()) throw Error(Errc::insufficient_data, "latent sweep needs data");
  if (count < 2) throw Error(Errc::parameter, "latent sweep needs at least 2 points");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& x : data) {
    const double r = ae.encode(x)[0];
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  LatentSweep out;
  for (std::size_t i = 0; i < count; ++i) {
    const double r = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    out.rho.push_back(r);
    out.points.push_back(ae.decode(std::vector<double>{r}));
  }
  return out;
}

Phase1Result train_phase1(AutoEncoder ae, std::span<const std::vector<double>> data,
                          const DaeConfig& config) {
  check_data(ae, data);
  DaeObjective obj{config.order, config.residual_weight, false, {}, {}, {}, {}, {}};
  auto enc_state = OptimState::for_params(ae.encoder.param_count(), config.step_size);
  auto dec_state = OptimState::for_params(ae.decoder.param_count(), config.step_size);
  PhaseReport report;
  std::size_t it = 0;
  while (it < std::max<std::size_t>(config.phase1_max_iterations, 1)) {
    const double loss = obj.evaluate(ae, nullptr, data);
    check_loss(loss, config.divergence_limit, it, "phase-1");
    ++it;
    report.loss_history.push_back(loss);
    if (loss < config.phase1_threshold) break;
    opt_step(ae.encoder, obj.enc_grads, enc_state);
    opt_step(ae.decoder, obj.dec_grads, dec_state);
  }
  report.iterations = it;
  report.reconstruction = reconstruction_mse(ae, data);
  report.loss = report.reconstruction;
  return {std::move(ae), std::move(report)};
}

Phase2Result train_phase2(AutoEncoder ae, CoeffTensor v, std::span<const std::vector<double>> data,
                          const DaeConfig& config) {
  check_data(ae, data);
  check_supported(ae.latent_dim(), v.order);
  if (v.latent_dim != ae.latent_dim()) throw Error(Errc::shape, "coefficients use another latent dimension");
  DaeObjective obj{v.order, config.residual_weight, true, {}, {}, {}, {}, {}};
  if (config.unit_speed) rescale_latent(ae, rms_speed(ae, data));
  auto enc_state = OptimState::for_params(ae.encoder.param_count(), config.step_size);
  auto dec_state = OptimState::for_params(ae.decoder.param_count(), config.step_size);
  auto v_state = OptimState::for_params(v.coefficients.size(), config.coefficient_step_size);
  PhaseReport report;
  std::size_t it = 0;
  while (it < std::max<std::size_t>(config.phase2_max_iterations, 1)) {
    const double loss = obj.evaluate(ae, &v, data);
    check_loss(loss, config.divergence_limit, it, "phase-2");
    ++it;
    report.loss_history.push_back(loss);
    if (loss < config.phase2_threshold) break;
    opt_step(ae.encoder, obj.enc_grads, enc_state);
    opt_step(ae.decoder, obj.dec_grads, dec_state);
    adam_step(v.coefficients, obj.v_grads, v_state);
    v.normalize();
    if (config.unit_speed) rescale_latent(ae, rms_speed(ae, data));
  }
  v.canonical_sign();
  report.iterations = it;
  report.reconstruction = reconstruction_mse(ae, data);
  report.residual = residual_mse(ae, v, data);
  report.speed = rms_speed(ae, data);
  report.loss = report.reconstruction + config.residual_weight * report.residual;
  return {std::move(ae), std::move(v), std::move(report)};
}

DaeResult train_dae(std::span<const std::vector<double>> data, const DaeConfig& config) {
  check_supported(config.latent_dim, config.order);
  if (data.empty()) throw Error(Errc::insufficient_data, "autoencoder training needs data");
  auto ae = AutoEncoder::glorot(data.front().size(), config.latent_dim, config.encoder_hidden,
                                config.decoder_hidden, config.seed);
  auto p1 = train_phase1(std::move(ae), data, config);
  auto v = CoeffTensor::random_unit(config.latent_dim, config.order,
                                    config.seed ^ kCoefficientSeedMix);
  auto p2 = train_phase2(std::move(p1.ae), std::move(v), data, config);
  return {std::move(p2.ae), std::move(p2.v), std::move(p1.report), std::move(p2.report)};
}

}  // namespace diffstruct
