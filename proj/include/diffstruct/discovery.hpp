#pragma once

// Recovering a second-order relation F(u, u', u'') = 0 from a jet cloud:
// either a linear normal vector or a trained implicit level-set network.

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "diffstruct/autodiff.hpp"
#include "diffstruct/jets.hpp"

namespace diffstruct {

using Jet3 = std::array<double, 3>;

/// Linear relation v . (u, u', u'') = offset with unit v.
struct NormalVector {
  Jet3 v{};
  double offset = 0.0;

  double residual(const Jet3& jet) const { return v[0] * jet[0] + v[1] * jet[1] + v[2] * jet[2] - offset; }
};

/// Two smallest eigenvalues of the jet covariance within this fraction of the
/// largest one mean the cloud satisfies more than one linear relation.
inline constexpr double kDegeneracyTolerance = 1e-6;

/// Smallest-variance direction of the (u, u', u'') cloud.
NormalVector fit_normal_vector(const JetSeries& jets);

/// Covariance eigenvalues (ascending) of the jet cloud, as used by the fit.
std::array<double, 3> jet_spectrum(const JetSeries& jets);

struct ImplicitModel {
  Mlp net;
  Jet3 mean{};
  Jet3 scale{1.0, 1.0, 1.0};

  Jet3 normalize(const Jet3& jet) const;
};

/// Level-set network value at a raw (unnormalised) jet.
double eval_implicit(const ImplicitModel& model, const Jet3& jet);

struct ImplicitConfig {
  std::vector<std::size_t> hidden{32, 32};
  std::size_t max_iterations = 5000;
  double loss_threshold = 1e-4;
  double step_size = 1e-3;
  /// Probe box spans [min - margin*range, max + margin*range] per normalised channel.
  double probe_margin = 1.5;
  /// Probes closer than this to a data jet (normalised units) are re-drawn.
  double probe_exclusion = 0.1;
  double probe_weight = 0.1;
  std::uint64_t seed = 1;
};

struct TrainReport {
  double loss = 0.0;
  double mean_abs_data = 0.0;
  double mean_probe = 0.0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  Jet3 probe_lo{};
  Jet3 probe_hi{};
  /// Probe batch (normalised) behind the reported loss.
  std::vector<Jet3> last_probes;
};

struct ImplicitFit {
  ImplicitModel model;
  TrainReport report;
};

/// Draws probes uniformly in a box, rejecting those near the data.
class ProbeSampler {
 public:
  ProbeSampler(std::vector<Jet3> data, double margin, double exclusion, std::uint64_t seed);

  Jet3 lo() const noexcept { return lo_; }
  Jet3 hi() const noexcept { return hi_; }
  std::vector<Jet3> draw(std::size_t count);
  /// Euclidean distance from `p` to the nearest data point.
  double distance_to_data(const Jet3& p) const;

 private:
  std::vector<Jet3> data_;
  Jet3 lo_{};
  Jet3 hi_{};
  double exclusion_;
  std::mt19937_64 rng_;
};

struct ImplicitLoss {
  double total = 0.0;
  double data_term = 0.0;
  double probe_term = 0.0;
};

/// MSE(f(data), 0) + weight * MSE(f(probes), 1) on normalised inputs.
ImplicitLoss implicit_loss(const Mlp& net, std::span<const Jet3> data, std::span<const Jet3> probes,
                           double probe_weight = 0.1);

/// Trains f ~ 0 on the jets and f ~ 1 on fresh random probes each step.
ImplicitFit train_implicit(const JetSeries& jets, const ImplicitConfig& config = {});

}  // namespace diffstruct
