#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ncs/dynamics.hpp"
#include "ncs/numerics.hpp"

namespace ncs {

/// Stage cost with analytic gradient. Costs that are sums of squares can
/// expose their residual structure, which unlocks the Gauss-Newton path of
/// the solver: value(x) == ||residuals(x)||^2 and residual_jacobian is the
/// residuals' Jacobian in x.
struct StageCost {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<Vec(const Vec&)> residuals;
  std::function<Mat(const Vec&)> residual_jacobian;
};

/// Cost that is zero exactly on the counterclockwise orbit of radius `radius`
/// at speed `speed` in the (x1, x3) plane:
///   w_r (x1^2 + x3^2 - radius^2)^2
///   + w_t (x2 + speed x3 / r)^2 + w_t (x4 - speed x1 / r)^2,  r = ||(x1,x3)||.
/// States with r below `guard` raise SingularityError.
StageCost make_circle_tracking_cost(double radius = 6.0, double speed = 10.0,
                                    double w_radial = 100.0, double w_tangential = 0.05,
                                    double guard = 1e-6);

/// Quadratic-penalty state constraint  sum_i x[i]^2 <= bound  over the listed
/// components.
struct StateConstraint {
  bool enabled = false;
  std::vector<int> indices;  // 0-based state components
  double bound = 30.0;
  double penalty_weight = 1000.0;
};

struct SolverConfig {
  int max_iterations = 500;
  double tolerance = 1e-6;        // unit-step projected-gradient norm
  double armijo_sigma = 1e-4;
  double step_initial = 1e-2;
  double step_min = 1e-14;
  double step_max = 1e3;
  double feasibility_tol = 1e-6;  // allowed state-constraint residual when converged
  int stall_window = 60;          // stop when the best cost has not improved this long
};

struct MpcConfig {
  int horizon = 10;
  double sample_time = 0.1;
  double terminal_weight = 20.0;  // terminal cost = terminal_weight * stage cost
  double input_radius = 10.0;     // ||u||_2 <= input_radius; 0 disables
  StateConstraint state_constraint;
  int quad_substeps = 1;          // quadrature refinement; solver requires 1
  SolverConfig solver;
  StageCost cost;
};

struct OcpSolution {
  std::vector<Vec> controls;          // horizon entries
  std::vector<Vec> predicted_states;  // horizon + 1 entries, rolled with approx_step
  double cost = 0.0;
  double constraint_violation = 0.0;  // max state-constraint residual over nodes
  int iterations = 0;
  bool converged = false;
};

/// Euclidean projection onto ||u||_2 <= radius. Guarantees dot(u, u) <=
/// radius^2 exactly after rounding. radius <= 0 is a no-op.
void project_to_ball(Vec& u, double radius);

/// Objective: trapezoid quadrature of the stage cost along the predicted
/// trajectory over [0, N T], plus terminal cost, plus the state-constraint
/// penalty. quad_substeps > 1 refines the quadrature between nodes by
/// integrating the plant's continuous vector field.
double trajectory_cost(const MpcConfig& config, const PlantModel& model, const Vec& x0,
                       std::span<const Vec> u);

/// Gradient of trajectory_cost w.r.t. the stacked controls, by the adjoint
/// recursion. Requires quad_substeps == 1.
std::vector<Vec> cost_gradient(const MpcConfig& config, const PlantModel& model, const Vec& x0,
                               std::span<const Vec> u);

/// Finite-horizon solve. Input constraint is handled by exact projection,
/// the state constraint by quadratic penalty, warm start by the shifted
/// previous solution. When the stage cost exposes residuals and the model a
/// linear step, damped Gauss-Newton steps are used (the cost's curvature
/// spread leaves plain gradient descent crawling); otherwise spectral
/// projected gradient with Armijo backtracking.
OcpSolution solve_ocp(const MpcConfig& config, const PlantModel& model, const Vec& x0,
                      std::span<const Vec> warm_start = {});

}  // namespace ncs
