#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ncs/dynamics.hpp"
#include "ncs/errors.hpp"
#include "ncs/mpc.hpp"
#include "ncs/rng.hpp"
#include "oracles.hpp"

using namespace ncs;

namespace {

MpcConfig default_config(int horizon = 10) {
  MpcConfig c;
  c.horizon = horizon;
  c.sample_time = 0.1;
  c.terminal_weight = 20.0;
  c.input_radius = 10.0;
  c.state_constraint.enabled = true;
  c.state_constraint.indices = {1, 3};
  c.state_constraint.bound = 900.0;
  c.state_constraint.penalty_weight = 1000.0;
  c.cost = make_circle_tracking_cost();
  return c;
}

/// Inputs that keep the continuous-time orbit: centripetal acceleration
/// v^2 / r pointed at the origin, evaluated at each predicted node.
std::vector<Vec> centripetal_controls(const PlantModel& model, const Vec& x0, int n) {
  std::vector<Vec> u;
  Vec x = x0;
  for (int k = 0; k < n; ++k) {
    const double r2 = x[0] * x[0] + x[2] * x[2];
    Vec uk{-100.0 / r2 * x[0], -100.0 / r2 * x[2]};
    u.push_back(uk);
    x = model.approx_step(x, uk);
  }
  return u;
}

Vec orbit_point(double theta) {
  return Vec{6.0 * std::cos(theta), -10.0 * std::sin(theta), 6.0 * std::sin(theta),
             10.0 * std::cos(theta)};
}

}  // namespace

TEST_CASE("stage cost values from the formula") {
  const StageCost c = make_circle_tracking_cost();
  CHECK(c.value(Vec{6, 0, 0, 10}) == 0.0);
  // on the circle but moving radially: both velocity terms fire
  CHECK(c.value(Vec{0, 0, 6, -10}) == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(c.value(Vec{7, 0, 0, 0}) == doctest::Approx(16905.0).epsilon(1e-13));
  // cost is nonnegative everywhere sampled
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    Vec x{rng.uniform(-9, 9), rng.uniform(-12, 12), rng.uniform(-9, 9), rng.uniform(-12, 12)};
    if (std::hypot(x[0], x[2]) < 1e-3) continue;
    CHECK(c.value(x) >= 0.0);
  }
}

TEST_CASE("stage cost gradient matches central differences") {
  const StageCost c = make_circle_tracking_cost();
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Vec x{rng.uniform(2, 8), rng.uniform(-12, 12), rng.uniform(2, 8), rng.uniform(-12, 12)};
    const Vec g = c.gradient(x);
    for (int i = 0; i < 4; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (c.value(xp) - c.value(xm)) / (2.0 * h);
      // central differences of a cost this large carry ~1e-6 absolute noise
      CHECK(std::abs(g[i] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("stage cost residual structure is consistent") {
  const StageCost c = make_circle_tracking_cost();
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    Vec x{rng.uniform(2, 8), rng.uniform(-12, 12), rng.uniform(2, 8), rng.uniform(-12, 12)};
    const Vec r = c.residuals(x);
    REQUIRE(r.size() == 3);
    CHECK(c.value(x) == doctest::Approx(dot(r, r)).epsilon(1e-12));
    const Mat J = c.residual_jacobian(x);
    for (int i = 0; i < 4; ++i) {
      const double h = 1e-7 * std::max(1.0, std::abs(x[i]));
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const Vec rp = c.residuals(xp);
      const Vec rm = c.residuals(xm);
      for (int q = 0; q < 3; ++q) {
        const double fd = (rp[q] - rm[q]) / (2.0 * h);
        CHECK(std::abs(J(q, i) - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("stage cost singularity guard") {
  const StageCost c = make_circle_tracking_cost();
  CHECK_THROWS_AS(c.value(Vec{0, 0, 0, 0}), SingularityError);
  CHECK_THROWS_AS(c.value(Vec{1e-9, 0, 1e-9, 0}), SingularityError);
}

TEST_CASE("projection onto the input disc") {
  Vec inside{3, 4};
  project_to_ball(inside, 10.0);
  CHECK(inside == Vec{3, 4});

  Rng rng(21);
  for (int i = 0; i < 500; ++i) {
    Vec u{rng.uniform(-40, 40), rng.uniform(-40, 40)};
    const Vec orig = u;
    project_to_ball(u, 10.0);
    CHECK(u[0] * u[0] + u[1] * u[1] <= 100.0);  // exact, no tolerance
    if (norm2(orig) > 10.0) {
      CHECK(norm2(u) == doctest::Approx(10.0).epsilon(1e-12));
      // closest-point property against random feasible points
      for (int j = 0; j < 10; ++j) {
        Vec y{rng.uniform(-10, 10), rng.uniform(-10, 10)};
        project_to_ball(y, 10.0);
        CHECK(norm2(sub(Vec(orig), u)) <= norm2(sub(Vec(orig), y)) + 1e-9);
      }
    }
  }
}

TEST_CASE("trajectory cost: orbit-following inputs are near zero, passivity is not") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  const MpcConfig c = default_config();
  const Vec x0 = orbit_point(0.0);
  const auto u_orbit = centripetal_controls(m, x0, c.horizon);
  const std::vector<Vec> u_zero(10, Vec{0, 0});
  const double j_orbit = trajectory_cost(c, m, x0, u_orbit);
  const double j_zero = trajectory_cost(c, m, x0, u_zero);
  CHECK(j_orbit >= 0.0);
  CHECK(j_zero > j_orbit);
  CHECK(j_orbit < 0.02 * j_zero);
}

TEST_CASE("degenerate horizon: cost is the terminal term only") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  MpcConfig c = default_config(0);
  const Vec x0{7, 0, 0, 0};
  CHECK(trajectory_cost(c, m, x0, {}) == doctest::Approx(20.0 * 16905.0).epsilon(1e-13));
}

TEST_CASE("quadrature refinement converges as the grid shrinks") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  MpcConfig c = default_config();
  c.state_constraint.enabled = false;
  const Vec x0 = orbit_point(0.3);
  std::vector<Vec> u(10, Vec{1.0, -2.0});

  c.quad_substeps = 1;
  const double j1 = trajectory_cost(c, m, x0, u);
  c.quad_substeps = 2;
  const double j2 = trajectory_cost(c, m, x0, u);
  c.quad_substeps = 4;
  const double j4 = trajectory_cost(c, m, x0, u);
  c.quad_substeps = 8;
  const double j8 = trajectory_cost(c, m, x0, u);

  const double d12 = std::abs(j1 - j2);
  const double d24 = std::abs(j2 - j4);
  const double d48 = std::abs(j4 - j8);
  CHECK(d24 < d12);
  CHECK(d48 < d24);
  CHECK(d48 <= 0.5 * d24 + 1e-9);  // at least first-order shrinkage
}

TEST_CASE("objective gradient matches central finite differences") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Euler);
  const MpcConfig c = default_config();
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec x0 = orbit_point(rng.uniform(0, 6.28));
    std::vector<Vec> u;
    for (int k = 0; k < c.horizon; ++k) {
      Vec uk{rng.uniform(-9, 9), rng.uniform(-9, 9)};
      project_to_ball(uk, 9.0);
      u.push_back(uk);
    }
    const auto g = cost_gradient(c, m, x0, u);
    double num = 0.0, den = 0.0;
    for (int k = 0; k < c.horizon; ++k) {
      for (int i = 0; i < 2; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(u[k][i]));
        auto up = u, um = u;
        up[k][i] += h;
        um[k][i] -= h;
        const double fd = (trajectory_cost(c, m, x0, up) - trajectory_cost(c, m, x0, um)) /
                          (2.0 * h);
        num += (g[k][i] - fd) * (g[k][i] - fd);
        den += std::max(std::abs(g[k][i]), std::abs(fd)) *
               std::max(std::abs(g[k][i]), std::abs(fd));
      }
    }
    CHECK(std::sqrt(num) <= 1e-5 * std::max(1.0, std::sqrt(den)));
  }
}

TEST_CASE("solver output never beats its warm start and stays feasible") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  const MpcConfig c = default_config();
  const Vec x0 = orbit_point(1.0);
  // holding the orbit needs ||u|| = 100/6, above the input bound; the solver
  // starts from the projected sequence, so that is the cost it must not exceed
  const auto warm = centripetal_controls(m, x0, c.horizon);
  auto projected = warm;
  for (Vec& uk : projected) project_to_ball(uk, c.input_radius);
  const double j_warm = trajectory_cost(c, m, x0, projected);
  const OcpSolution sol = solve_ocp(c, m, x0, warm);
  CHECK(sol.cost <= j_warm);
  CHECK(sol.cost >= 0.0);
  for (const Vec& uk : sol.controls) CHECK(uk[0] * uk[0] + uk[1] * uk[1] <= 100.0);
  // internal prediction is the approximate-model rollout of the controls
  Vec x = x0;
  for (std::size_t k = 0; k < sol.controls.size(); ++k) {
    CHECK(sol.predicted_states[k] == x);
    x = m.approx_step(x, sol.controls[k]);
  }
  CHECK(sol.predicted_states.back() == x);
}

TEST_CASE("controls are exactly feasible from a far start") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  const MpcConfig c = default_config();
  const Vec x0{12, 0, -9, 2};
  const OcpSolution sol = solve_ocp(c, m, x0);
  for (const Vec& uk : sol.controls) CHECK(uk[0] * uk[0] + uk[1] * uk[1] <= 100.0);
  const std::vector<Vec> u_zero(10, Vec{0, 0});
  CHECK(sol.cost < trajectory_cost(c, m, x0, u_zero));
}

TEST_CASE("near-orbit solve reaches a near-zero cost") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  const MpcConfig c = default_config();
  const Vec x0 = orbit_point(0.0);
  const OcpSolution sol = solve_ocp(c, m, x0, centripetal_controls(m, x0, c.horizon));
  const std::vector<Vec> u_zero(10, Vec{0, 0});
  const double j_zero = trajectory_cost(c, m, x0, u_zero);
  CHECK(sol.cost < 0.01 * j_zero);
}

TEST_CASE("receding-horizon shift keeps the tail cost") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  const MpcConfig c = default_config();
  const Vec x0 = orbit_point(2.0);
  const OcpSolution first = solve_ocp(c, m, x0, centripetal_controls(m, x0, c.horizon));

  std::vector<Vec> shifted(first.controls.begin() + 1, first.controls.end());
  shifted.push_back(shifted.back());
  const Vec x1 = first.predicted_states[1];
  const double j_shifted = trajectory_cost(c, m, x1, shifted);
  const OcpSolution second = solve_ocp(c, m, x1, shifted);
  CHECK(second.cost <= j_shifted + 1e-12);
}

TEST_CASE("state-constraint penalty pushes the violation down") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  MpcConfig c = default_config();
  c.state_constraint.bound = 16.0;  // speed <= 4, violated by drifting fast
  const Vec x0{6, 5, 0, 5};
  std::vector<Vec> hold(10, Vec{0, 0});
  const double viol_before = [&] {
    double v = 0.0;
    Vec x = x0;
    for (const Vec& uk : hold) {
      x = m.approx_step(x, uk);
      v = std::max(v, std::max(0.0, x[1] * x[1] + x[3] * x[3] - 16.0));
    }
    return v;
  }();
  const OcpSolution sol = solve_ocp(c, m, x0);
  CHECK(viol_before > 0.0);
  CHECK(sol.constraint_violation < viol_before);
}

TEST_CASE("solver configuration guards") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  MpcConfig c = default_config();
  c.quad_substeps = 2;
  CHECK_THROWS_AS(solve_ocp(c, m, Vec{6, 0, 0, 10}), ConfigError);
  CHECK_THROWS_AS(cost_gradient(c, m, Vec{6, 0, 0, 10}, std::vector<Vec>(10, Vec{0, 0})),
                  ConfigError);
  MpcConfig c2 = default_config();
  CHECK_THROWS_AS(trajectory_cost(c2, m, Vec{6, 0, 0, 10}, std::vector<Vec>(3, Vec{0, 0})),
                  ConfigError);
}
