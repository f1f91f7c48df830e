#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ncs/numerics.hpp"
#include "ncs/rng.hpp"

namespace ncs {

/// Which one-step map the controller-side predictor uses.
enum class Predictor { Exact, Euler, Rk4 };

/// A linear one-step map x' = A x + B u, kept next to the callable form so
/// the solver can use exact Jacobians.
struct LinearStep {
  Mat A;
  Mat B;
};

/// Plant description: the exact perturbed one-step map, the approximate
/// predictor map, and optional extras (continuous-time vector field for
/// quadrature refinement, linear form for solver Jacobians).
struct PlantModel {
  int state_dim = 0;
  int input_dim = 0;

  /// Per-step Lipschitz constant of the exact map in x (||A||_2 for the
  /// linear plants built here). Informational; bound parameters are always
  /// supplied per scenario, never inferred from this.
  double step_lipschitz = 0.0;

  std::function<Vec(const Vec&, const Vec&, const Vec&)> exact_step;  // (x, u, w)
  std::function<Vec(const Vec&, const Vec&)> approx_step;             // (x, u)
  std::optional<LinearStep> approx_linear;
  std::function<Vec(const Vec&, const Vec&)> rhs;  // continuous-time f(x, u), optional
};

struct Trajectory {
  std::int64_t start_time = 0;
  std::vector<Vec> states;  // length = steps + 1
  std::vector<Vec> inputs;  // length = steps
};

/// Iterate the exact perturbed map from (n0, x0) to time n.
Trajectory iterate_exact(const PlantModel& model, std::int64_t n0, const Vec& x0,
                         std::span<const Vec> u, std::span<const Vec> w, std::int64_t n);

/// Iterate the approximate predictor map from (n0, x0) to time n.
Trajectory iterate_approx(const PlantModel& model, std::int64_t n0, const Vec& x0,
                          std::span<const Vec> u, std::int64_t n);

/// One i.i.d. uniform draw per component on [-bound, bound].
Vec uniform_disturbance(Rng& rng, double bound, int dim);

/// Classic fixed-step RK4 for a vector field with held input.
Vec rk4_step(const std::function<Vec(const Vec&, const Vec&)>& rhs, const Vec& x,
             const Vec& u, double h);

/// Two decoupled double integrators (state x1..x4, input u1 u2) sampled with
/// zero-order hold at period T. The exact map is the closed-form ZOH
/// discretization; disturbances enter additively after the nominal update.
PlantModel make_double_integrator_plant(double T, Predictor predictor);

/// Scalar plant  xdot = a x + u  sampled at period h; exact map is the
/// closed-form ZOH discretization.
PlantModel make_scalar_plant(double a, double h, Predictor predictor);

}  // namespace ncs
