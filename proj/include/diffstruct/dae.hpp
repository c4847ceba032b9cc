#pragma once

// Differential-equation-informed autoencoder: an encoder/decoder pair whose
// decoder Jacobians satisfy a learned linear relation sum_j A_j J^j = 0.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "diffstruct/autodiff.hpp"

namespace diffstruct {

/// Length of the flattened coefficient vector: sum_{j=0}^{order} latent_dim^j.
std::size_t v_dimension(std::size_t latent_dim, std::size_t order);

struct AutoEncoder {
  Mlp encoder;  // ambient -> latent
  Mlp decoder;  // latent -> ambient

  AutoEncoder() = default;
  AutoEncoder(Mlp enc, Mlp dec);

  std::size_t ambient_dim() const noexcept { return encoder.input_dim(); }
  std::size_t latent_dim() const noexcept { return encoder.output_dim(); }

  static AutoEncoder glorot(std::size_t ambient, std::size_t latent,
                           const std::vector<std::size_t>& encoder_hidden,
                           const std::vector<std::size_t>& decoder_hidden, std::uint64_t seed);

  std::vector<double> encode(std::span<const double> x) const { return encoder.forward(x); }
  std::vector<double> decode(std::span<const double> rho) const { return decoder.forward(rho); }
};

/// Unit coefficient vector {A, A_d, A_{d1 d2}, ...} in order-block layout:
/// the j = 0 block, then j = 1 in latent-index lexicographic order, and so on.
struct CoeffTensor {
  std::size_t order = 0;
  std::size_t latent_dim = 1;
  std::vector<double> coefficients;

  /// Uniform on the unit sphere.
  static CoeffTensor random_unit(std::size_t latent_dim, std::size_t order, std::uint64_t seed);
  static CoeffTensor from(std::size_t latent_dim, std::size_t order, std::vector<double> values);

  /// Rescale to unit length; degenerate-coefficients error below 1e-12.
  void normalize();
  /// Largest-magnitude entry of the j = 0 block made positive.
  void canonical_sign();
};

/// Per ambient component, decoder derivatives of every order in the same
/// flat layout as CoeffTensor.
struct JacobianStack {
  std::size_t order = 0;
  std::size_t latent_dim = 1;
  std::vector<std::vector<double>> components;
};

/// Exact decoder derivatives at a latent point (latent_dim 1, order <= 2).
JacobianStack decoder_jets(const AutoEncoder& ae, std::span<const double> rho, std::size_t order);

/// sum_j <A-block_j, J-block_j(delta)> for each ambient component.
std::vector<double> residual(const CoeffTensor& v, const JacobianStack& jac);

struct DaeConfig {
  std::vector<std::size_t> encoder_hidden{16, 16};
  std::vector<std::size_t> decoder_hidden{16, 16};
  std::size_t latent_dim = 1;
  std::size_t order = 2;
  double step_size = 1e-3;
  double coefficient_step_size = 1e-1;
  std::size_t phase1_max_iterations = 5000;
  double phase1_threshold = 1e-2;
  std::size_t phase2_max_iterations = 10000;
  double phase2_threshold = 1e-5;
  double residual_weight = 1.0;
  // Reconstruction is invariant under rescaling the latent, but the relation
  // coefficients are not. When set, phase 2 rescales the latent after every
  // step so the decoder has unit RMS speed over the data.
  bool unit_speed = true;
  double divergence_limit = 1e6;
  std::uint64_t seed = 1;
};

/// Rejects configurations outside latent_dim 1 and order <= 2.
void check_supported(std::size_t latent_dim, std::size_t order);

struct PhaseReport {
  double loss = 0.0;
  double reconstruction = 0.0;
  double residual = 0.0;
  double speed = 0.0;  // RMS decoder speed |dy/drho| over the data
  std::size_t iterations = 0;
  std::vector<double> loss_history;
};

struct Phase1Result {
  AutoEncoder ae;
  PhaseReport report;
};

struct Phase2Result {
  AutoEncoder ae;
  CoeffTensor v;
  PhaseReport report;
};

struct DaeGradients {
  std::vector<double> encoder, decoder, coefficients;
};

/// Training objective: reconstruction MSE, plus residual_weight times the
/// relation residual MSE when `v` is given. Optionally returns gradients
/// with respect to both networks' parameters and the raw coefficients.
double phase_loss(const AutoEncoder& ae, const CoeffTensor* v,
                  std::span<const std::vector<double>> data, double residual_weight = 1.0,
                  DaeGradients* grads = nullptr);

/// Mean squared reconstruction error over all points and components.
double reconstruction_mse(const AutoEncoder& ae, std::span<const std::vector<double>> data);

/// Mean squared Jacobian-relation residual over all points and components.
double residual_mse(const AutoEncoder& ae, const CoeffTensor& v,
                    std::span<const std::vector<double>> data);

/// RMS over points of |dy/drho|.
double rms_speed(const AutoEncoder& ae, std::span<const std::vector<double>> data);

/// Rescales the latent coordinate by `factor` without changing the decoded
/// points: encoder outputs are multiplied by it, decoder inputs divided.
void rescale_latent(AutoEncoder& ae, double factor);

struct LatentSweep {
  std::vector<double> rho;
  std::vector<std::vector<double>> points;  // decoded ambient points
};

/// Decodes `count` evenly spaced latent values spanning the encoded data.
LatentSweep latent_sweep(const AutoEncoder& ae, std::span<const std::vector<double>> data,
                         std::size_t count);

Phase1Result train_phase1(AutoEncoder ae, std::span<const std::vector<double>> data,
                          const DaeConfig& config = {});

Phase2Result train_phase2(AutoEncoder ae, CoeffTensor v, std::span<const std::vector<double>> data,
                          const DaeConfig& config = {});

struct DaeResult {
  AutoEncoder ae;
  CoeffTensor v;
  PhaseReport phase1;
  PhaseReport phase2;
};

/// Both phases from a seeded Glorot start.
/// V starts uniform on the unit sphere, drawn from seed ^ kCoefficientSeedMix.
inline constexpr std::uint64_t kCoefficientSeedMix = 77;
DaeResult train_dae(std::span<const std::vector<double>> data, const DaeConfig& config = {});

}  // namespace diffstruct
