#pragma once

// Generating new solutions of a discovered relation under user initial
// conditions: RK4 on the explicit form, a physics-informed network, and a
// closed form for constant-coefficient linear relations.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "diffstruct/autodiff.hpp"
#include "diffstruct/discovery.hpp"
#include "diffstruct/jets.hpp"

namespace diffstruct {

using RelationModel = std::variant<NormalVector, ImplicitModel>;

struct InitialCondition {
  double t0 = 0.0;
  double u0 = 0.0;
  double du0 = 0.0;
};

enum class DecodeMethod { pinn, integrate, closed_form };

const char* to_string(DecodeMethod method) noexcept;

struct DecodeResult {
  SampleSeries series;
  /// Mean squared relation residual along the solution.
  double residual = 0.0;
  DecodeMethod method = DecodeMethod::integrate;
};

/// F(u, u', u'') for either model kind: v.x - offset, or the level-set value.
double relation_residual(const RelationModel& model, const Jet3& jet);

/// Mean squared relation residual of a series, derivatives by finite differences.
double fd_relation_residual(const RelationModel& model, const SampleSeries& series);

/// |F| accepted at the floor of an implicit model's zero valley when no exact root exists.
inline constexpr double kValleyTolerance = 0.05;

/// u'' such that F(u, u', u'') = 0. Exact for linear models; Newton from
/// `guess` for implicit ones, falling back to the valley floor of |F|.
double solve_u2(const RelationModel& model, double u, double u1, double guess);

/// Classical RK4 on (u, u') from ic.t0 to t_end with step h (the last step
/// is shortened to land on t_end).
DecodeResult integrate(const RelationModel& model, const InitialCondition& ic, double t_end,
                       double h);

/// Exact solution of v0 u + v1 u' + v2 u'' = offset through characteristic roots.
SampleSeries closed_form_linear(const NormalVector& model, const InitialCondition& ic,
                                std::span<const double> ts);

struct PinnConfig {
  std::vector<std::size_t> hidden{32, 32};
  std::size_t max_iterations = 10000;
  double loss_threshold = 1e-7;
  double ic_weight = 10.0;
  double step_size = 1e-3;
  double divergence_limit = 1e6;
  /// Re-draw collocation points uniformly in the grid's span each iteration.
  bool random_collocation = false;
  std::uint64_t seed = 1;
};

struct PinnResult {
  DecodeResult result;
  /// Trained u(t); takes raw t as input.
  Mlp net;
  double loss = 0.0;
  std::size_t iterations = 0;
  double ic_value_error = 0.0;
  double ic_slope_error = 0.0;
};

/// Trains u(t) to satisfy the relation on the collocation grid plus a
/// penalised initial condition, then samples it on the grid.
PinnResult decode_pinn(const RelationModel& model, const InitialCondition& ic,
                       std::span<const double> t_grid, const PinnConfig& config = {});

/// `count` evenly spaced abscissae on [a, b], both ends included.
std::vector<double> uniform_grid(double a, double b, std::size_t count);

}  // namespace diffstruct
