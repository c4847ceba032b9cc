#include "diffstruct/autodiff.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "diffstruct/error.hpp"
#include "diffstruct/io.hpp"

namespace diffstruct {

namespace {

void check_sizes(const std::vector<std::size_t>& sizes) {
  if (sizes.size() < 3) throw Error(Errc::shape, "network needs at least one hidden layer");
  for (std::size_t s : sizes) {
    if (s == 0) throw Error(Errc::shape, "layer sizes must be positive");
  }
}

struct TanhDerivs {
  double s, s1, s2, s3;
};

TanhDerivs tanh_derivs(double z) {
  const double s = std::tanh(z);
  const double s1 = 1.0 - s * s;
  const double s2 = -2.0 * s * s1;
  const double s3 = -2.0 * (s1 * s1 + s * s2);
  return {s, s1, s2, s3};
}

void affine_jet(const Mlp& net, std::size_t layer, std::span<const Jet2> in, std::span<Jet2> out,
                bool value_only) {
  const std::size_t n_in = net.sizes()[layer];
  const std::size_t n_out = net.sizes()[layer + 1];
  const auto params = net.params();
  const double* w = params.data() + net.weight_offset(layer);
  const double* b = params.data() + net.bias_offset(layer);
  for (std::size_t r = 0; r < n_out; ++r) {
    const double* row = w + r * n_in;
    double z0 = b[r], z1 = 0.0, z2 = 0.0;
    if (value_only) {
      for (std::size_t c = 0; c < n_in; ++c) z0 += row[c] * in[c].value;
      out[r] = {z0, 0.0, 0.0};
      continue;
    }
    for (std::size_t c = 0; c < n_in; ++c) {
      z0 += row[c] * in[c].value;
      z1 += row[c] * in[c].d1;
      z2 += row[c] * in[c].d2;
    }
    out[r] = {z0, z1, z2};
  }
}

Jet2 tanh_jet(const Jet2& z) {
  const auto t = tanh_derivs(z.value);
  return {t.s, t.s1 * z.d1, t.s2 * z.d1 * z.d1 + t.s1 * z.d2};
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  check_sizes(sizes_);
  build_offsets();
  params_.assign(offsets_.back(), 0.0);
}

Mlp::Mlp(std::vector<std::size_t> sizes, std::vector<double> params)
    : sizes_(std::move(sizes)), params_(std::move(params)) {
  check_sizes(sizes_);
  build_offsets();
  if (params_.size() != offsets_.back()) {
    throw Error(Errc::shape, "parameter count " + std::to_string(params_.size()) +
                                 " does not match layer sizes (" +
                                 std::to_string(offsets_.back()) + ")");
  }
  for (double p : params_) {
    if (!std::isfinite(p)) throw Error(Errc::numeric, "network parameter is not finite");
  }
}

void Mlp::build_offsets() {
  offsets_.clear();
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(off);
    off += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  offsets_.push_back(off);
}

Mlp Mlp::glorot(std::vector<std::size_t> sizes, std::uint64_t seed) {
  Mlp net(std::move(sizes));
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const double fan_in = static_cast<double>(net.sizes_[l]);
    const double fan_out = static_cast<double>(net.sizes_[l + 1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    const std::size_t count = net.sizes_[l] * net.sizes_[l + 1];
    for (std::size_t i = 0; i < count; ++i) net.params_[net.offsets_[l] + i] = dist(rng);
  }
  return net;
}

double Mlp::weight(std::size_t layer, std::size_t out, std::size_t in) const {
  return params_[offsets_[layer] + out * sizes_[layer] + in];
}
double& Mlp::weight(std::size_t layer, std::size_t out, std::size_t in) {
  return params_[offsets_[layer] + out * sizes_[layer] + in];
}
double Mlp::bias(std::size_t layer, std::size_t out) const {
  return params_[bias_offset(layer) + out];
}
double& Mlp::bias(std::size_t layer, std::size_t out) { return params_[bias_offset(layer) + out]; }

std::vector<double> Mlp::forward(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw Error(Errc::shape, "network expects input dimension " + std::to_string(input_dim()) +
                                 ", got " + std::to_string(x.size()));
  }
  std::vector<double> a(x.begin(), x.end());
  std::vector<double> z;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const std::size_t n_in = sizes_[l];
    const std::size_t n_out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = params_.data() + bias_offset(l);
    z.assign(n_out, 0.0);
    for (std::size_t r = 0; r < n_out; ++r) {
      double s = b[r];
      for (std::size_t c = 0; c < n_in; ++c) s += w[r * n_in + c] * a[c];
      z[r] = l + 1 < layer_count() ? std::tanh(s) : s;
    }
    a.swap(z);
  }
  return a;
}

std::vector<Jet2> Mlp::forward_jet(double x0) const {
  if (input_dim() != 1) {
    throw Error(Errc::unsupported, "scalar jet seeding needs input dimension 1, network has " +
                                       std::to_string(input_dim()));
  }
  const Jet2 seed = Jet2::variable(x0);
  return forward_jet(std::span<const Jet2>(&seed, 1));
}

std::vector<Jet2> Mlp::forward_jet(std::span<const Jet2> x) const {
  JetTrace trace;
  const auto out = forward_traced(*this, x, trace);
  return {out.begin(), out.end()};
}

std::span<const Jet2> forward_traced(const Mlp& net, std::span<const Jet2> x, JetTrace& trace) {
  if (x.size() != net.input_dim()) {
    throw Error(Errc::shape, "network expects input dimension " +
                                 std::to_string(net.input_dim()) + ", got " +
                                 std::to_string(x.size()));
  }
  const std::size_t layers = net.layer_count();
  trace.acts_.resize(layers + 1);
  trace.pre_.resize(layers);
  trace.acts_[0].assign(x.begin(), x.end());
  trace.value_only_ = std::all_of(x.begin(), x.end(),
                                  [](const Jet2& j) { return j.d1 == 0.0 && j.d2 == 0.0; });
  const bool value_only = trace.value_only_;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t n_out = net.sizes()[l + 1];
    trace.pre_[l].resize(n_out);
    trace.acts_[l + 1].resize(n_out);
    affine_jet(net, l, trace.acts_[l], trace.pre_[l], value_only);
    if (l + 1 < layers) {
      for (std::size_t r = 0; r < n_out; ++r) {
        trace.acts_[l + 1][r] = value_only ? Jet2::constant(std::tanh(trace.pre_[l][r].value))
                                           : tanh_jet(trace.pre_[l][r]);
      }
    } else {
      trace.acts_[l + 1] = trace.pre_[l];
    }
  }
  return trace.acts_.back();
}

void backward(const Mlp& net, const JetTrace& trace, std::span<const Jet2> output_adjoint,
              std::span<double> grads, std::span<Jet2> input_adjoint) {
  const std::size_t layers = net.layer_count();
  if (output_adjoint.size() != net.output_dim() || grads.size() != net.param_count()) {
    throw Error(Errc::shape, "adjoint or gradient buffer does not match the network");
  }
  if (!input_adjoint.empty() && input_adjoint.size() != net.input_dim()) {
    throw Error(Errc::shape, "input adjoint buffer does not match the network");
  }
  const auto params = net.params();
  // Without seeds or derivative-channel adjoints every d1/d2 term is zero.
  const bool value_only =
      trace.value_only_ && std::all_of(output_adjoint.begin(), output_adjoint.end(),
                                       [](const Jet2& g) { return g.d1 == 0.0 && g.d2 == 0.0; });
  std::vector<Jet2> dz(output_adjoint.begin(), output_adjoint.end());
  std::vector<Jet2> da;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t n_in = net.sizes()[l];
    const std::size_t n_out = net.sizes()[l + 1];
    if (l + 1 < layers) {
      // dz currently holds adjoints of the tanh outputs; pull them through tanh.
      for (std::size_t r = 0; r < n_out; ++r) {
        const Jet2& z = trace.pre_[l][r];
        if (value_only) {
          const double s = trace.acts_[l + 1][r].value;
          dz[r] = {dz[r].value * (1.0 - s * s), 0.0, 0.0};
          continue;
        }
        const auto t = tanh_derivs(z.value);
        const Jet2 g = dz[r];
        dz[r] = {g.value * t.s1 + (g.d1 * z.d1 + g.d2 * z.d2) * t.s2 + g.d2 * z.d1 * z.d1 * t.s3,
                 g.d1 * t.s1 + 2.0 * g.d2 * t.s2 * z.d1, g.d2 * t.s1};
      }
    }
    const std::vector<Jet2>& a = trace.acts_[l];
    const double* w = params.data() + net.weight_offset(l);
    double* gw = grads.data() + net.weight_offset(l);
    double* gb = grads.data() + net.bias_offset(l);
    const bool need_input = l > 0 || !input_adjoint.empty();
    da.assign(need_input ? n_in : 0, Jet2{});
    for (std::size_t r = 0; r < n_out; ++r) {
      const Jet2 g = dz[r];
      gb[r] += g.value;
      double* gw_row = gw + r * n_in;
      const double* w_row = w + r * n_in;
      if (value_only) {
        for (std::size_t c = 0; c < n_in; ++c) gw_row[c] += g.value * a[c].value;
        if (need_input) {
          for (std::size_t c = 0; c < n_in; ++c) da[c].value += w_row[c] * g.value;
        }
        continue;
      }
      for (std::size_t c = 0; c < n_in; ++c) {
        gw_row[c] += g.value * a[c].value + g.d1 * a[c].d1 + g.d2 * a[c].d2;
      }
      if (need_input) {
        for (std::size_t c = 0; c < n_in; ++c) {
          da[c].value += w_row[c] * g.value;
          da[c].d1 += w_row[c] * g.d1;
          da[c].d2 += w_row[c] * g.d2;
        }
      }
    }
    if (l == 0) {
      if (!input_adjoint.empty()) std::copy(da.begin(), da.end(), input_adjoint.begin());
    } else {
      dz.swap(da);
    }
  }
}

LossGrad grad(const Mlp& net, std::span<const std::vector<Jet2>> inputs, const SampleLoss& loss) {
  LossGrad out{0.0, std::vector<double>(net.param_count(), 0.0)};
  JetTrace trace;
  std::vector<Jet2> adjoint(net.output_dim());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto y = forward_traced(net, inputs[i], trace);
    std::fill(adjoint.begin(), adjoint.end(), Jet2{});
    out.loss += loss(i, y, adjoint);
    backward(net, trace, adjoint, out.grads);
  }
  if (!std::isfinite(out.loss)) throw Error(Errc::numeric, "loss is not finite");
  return out;
}

OptimState OptimState::for_params(std::size_t n, double step_size) {
  OptimState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  s.step_size = step_size;
  return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, OptimState& state) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw Error(Errc::shape, "optimizer state, gradients and parameters differ in size");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= state.step_size * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

void opt_step(Mlp& net, std::span<const double> grads, OptimState& state) {
  adam_step(net.params(), grads, state);
}

void write_mlp(std::ostream& out, const Mlp& net) {
  out << "diffstruct-mlp 1\nlayers";
  for (std::size_t s : net.sizes()) out << ' ' << s;
  out << '\n';
  const auto p = net.params();
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const std::size_t nw = net.sizes()[l] * net.sizes()[l + 1];
    out << 'W' << ' ' << l;
    for (std::size_t i = 0; i < nw; ++i) out << ' ' << format_number(p[net.weight_offset(l) + i]);
    out << "\nb " << l;
    for (std::size_t i = 0; i < net.sizes()[l + 1]; ++i)
      out << ' ' << format_number(p[net.bias_offset(l) + i]);
    out << '\n';
  }
}

Mlp read_mlp(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "diffstruct-mlp 1") {
    throw Error(Errc::parse, "not a diffstruct-mlp version 1 file");
  }
  if (!std::getline(in, line)) throw Error(Errc::parse, "missing layers line");
  std::istringstream header(line);
  std::string tag;
  header >> tag;
  if (tag != "layers") throw Error(Errc::parse, "expected 'layers' line");
  std::vector<std::size_t> sizes;
  for (std::size_t s; header >> s;) sizes.push_back(s);
  Mlp shape(sizes);
  std::vector<double> params(shape.param_count());
  for (std::size_t l = 0; l < shape.layer_count(); ++l) {
    for (char expected : {'W', 'b'}) {
      if (!std::getline(in, line)) throw Error(Errc::parse, "truncated network file");
      std::istringstream row(line);
      std::string kind;
      std::size_t index = 0;
      row >> kind >> index;
      if (kind.size() != 1 || kind[0] != expected || index != l) {
        throw Error(Errc::parse, "unexpected tensor line for layer " + std::to_string(l));
      }
      const std::size_t count =
          expected == 'W' ? sizes[l] * sizes[l + 1] : sizes[l + 1];
      const std::size_t base = expected == 'W' ? shape.weight_offset(l) : shape.bias_offset(l);
      for (std::size_t i = 0; i < count; ++i) {
        std::string tok;
        if (!(row >> tok)) throw Error(Errc::parse, "tensor line has too few values");
        const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), params[base + i]);
        if (ec != std::errc{} || end != tok.data() + tok.size()) {
          throw Error(Errc::parse, "bad number '" + tok + "' in network file");
        }
      }
      std::string extra;
      if (row >> extra) throw Error(Errc::parse, "tensor line has too many values");
    }
  }
  return Mlp(std::move(sizes), std::move(params));
}

}  // namespace diffstruct
