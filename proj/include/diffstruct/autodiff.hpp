#pragma once

// Small tanh multilayer perceptrons with forward second-order jets and a
// reverse pass that carries parameter gradients through those jets.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace diffstruct {

/// Value with first and second derivative along one seed direction.
struct Jet2 {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;

  static constexpr Jet2 constant(double x) { return {x, 0.0, 0.0}; }
  static constexpr Jet2 variable(double x) { return {x, 1.0, 0.0}; }

  bool operator==(const Jet2&) const = default;
};

/// Fully-connected network: tanh on hidden layers, identity on the output.
/// Parameters live in one flat vector, layer by layer, weights (row-major,
/// out x in) followed by biases.
class Mlp {
 public:
  Mlp() = default;
  /// Zero-initialised network with the given layer sizes (>= 1 hidden layer).
  explicit Mlp(std::vector<std::size_t> sizes);
  Mlp(std::vector<std::size_t> sizes, std::vector<double> params);

  /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
  static Mlp glorot(std::vector<std::size_t> sizes, std::uint64_t seed);

  std::span<const std::size_t> sizes() const noexcept { return sizes_; }
  std::size_t input_dim() const noexcept { return sizes_.front(); }
  std::size_t output_dim() const noexcept { return sizes_.back(); }
  std::size_t layer_count() const noexcept { return sizes_.size() - 1; }
  std::size_t param_count() const noexcept { return params_.size(); }

  std::span<const double> params() const noexcept { return params_; }
  std::span<double> params() noexcept { return params_; }

  double weight(std::size_t layer, std::size_t out, std::size_t in) const;
  double& weight(std::size_t layer, std::size_t out, std::size_t in);
  double bias(std::size_t layer, std::size_t out) const;
  double& bias(std::size_t layer, std::size_t out);

  /// Offset of a layer's weight block inside `params()`; biases follow it.
  std::size_t weight_offset(std::size_t layer) const noexcept { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const noexcept {
    return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
  }

  std::vector<double> forward(std::span<const double> x) const;

  /// Output jets for a scalar input seeded as (x0, 1, 0).
  std::vector<Jet2> forward_jet(double x0) const;
  /// Output jets for arbitrary input jets (one per input dimension).
  std::vector<Jet2> forward_jet(std::span<const Jet2> x) const;

  bool operator==(const Mlp&) const = default;

 private:
  void build_offsets();

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Intermediate values of one jet forward pass, kept for the reverse pass.
class JetTrace {
 public:
  std::span<const Jet2> output() const noexcept { return acts_.back(); }

 private:
  friend std::span<const Jet2> forward_traced(const Mlp&, std::span<const Jet2>, JetTrace&);
  friend void backward(const Mlp&, const JetTrace&, std::span<const Jet2>, std::span<double>,
                       std::span<Jet2>);

  // acts_[l] is the input to layer l; acts_.back() the network output.
  // pre_[l] is the pre-activation of layer l.
  std::vector<std::vector<Jet2>> acts_;
  std::vector<std::vector<Jet2>> pre_;
  // Inputs carried no derivative seeds, so only value channels were computed.
  bool value_only_ = false;
};

/// Jet forward pass recording what `backward` needs. Returns the output jets.
std::span<const Jet2> forward_traced(const Mlp& net, std::span<const Jet2> x, JetTrace& trace);

/// Reverse pass for one traced sample. `output_adjoint` holds dL/d(value,d1,d2)
/// of each output; parameter gradients are accumulated into `grads`. When
/// `input_adjoint` is non-empty it receives dL/d(value,d1,d2) of each input.
void backward(const Mlp& net, const JetTrace& trace, std::span<const Jet2> output_adjoint,
              std::span<double> grads, std::span<Jet2> input_adjoint = {});

/// Per-sample loss head: given sample index and output jets, return the
/// sample's loss contribution and write dLoss/d(output jets) into `adjoint`.
using SampleLoss =
    std::function<double(std::size_t sample, std::span<const Jet2> output, std::span<Jet2> adjoint)>;

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grads;
};

/// Loss summed over a batch of input jets and its gradient with respect to
/// every parameter. Throws a numeric error on a non-finite loss.
LossGrad grad(const Mlp& net, std::span<const std::vector<Jet2>> inputs, const SampleLoss& loss);

/// Adaptive-moment optimizer state over a flat parameter vector.
struct OptimState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimState for_params(std::size_t n, double step_size = 1e-3);
};

/// One bias-corrected adaptive-moment update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, OptimState& state);

/// `adam_step` on a network's parameters.
void opt_step(Mlp& net, std::span<const double> grads, OptimState& state);

// Plain-text network format: a `diffstruct-mlp 1` header, a `layers` line with
// the sizes, then one `W`/`b` line per parameter tensor at 17 significant digits.
void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);

}  // namespace diffstruct
