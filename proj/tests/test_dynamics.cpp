#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ncs/bounds.hpp"
#include "ncs/dynamics.hpp"
#include "ncs/errors.hpp"
#include "oracles.hpp"

using namespace ncs;

namespace {

std::vector<Vec> constant_seq(const Vec& v, int n) { return std::vector<Vec>(n, v); }

}  // namespace

TEST_CASE("integrator chain stays at the origin") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  const auto u = constant_seq(Vec{0, 0}, 5);
  const auto w = constant_seq(Vec{0, 0, 0, 0}, 5);
  const Trajectory tr = iterate_exact(m, 0, Vec{0, 0, 0, 0}, u, w, 5);
  REQUIRE(tr.states.size() == 6);
  for (const Vec& x : tr.states)
    for (double v : x) CHECK(v == 0.0);
}

TEST_CASE("one exact step matches hand computation and a dense integrator") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  const Vec x0{1, 2, 0, 0};
  const auto u = constant_seq(Vec{0, 0}, 1);
  const auto w = constant_seq(Vec{0, 0, 0, 0}, 1);
  const Trajectory tr = iterate_exact(m, 0, x0, u, w, 1);
  CHECK(tr.states[1][0] == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(tr.states[1][1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(tr.states[1][2] == 0.0);
  CHECK(tr.states[1][3] == 0.0);

  const Vec ref = oracle::integrate_held(m.rhs, x0, Vec{0, 0}, 0.1);
  for (int i = 0; i < 4; ++i) CHECK(tr.states[1][i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("one exact step with input matches a dense integrator") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  const Vec x0{1, -1, 2, 0.5};
  const Vec u0{3, -7};
  const Trajectory tr =
      iterate_exact(m, 0, x0, constant_seq(u0, 1), constant_seq(Vec{0, 0, 0, 0}, 1), 1);
  const Vec ref = oracle::integrate_held(m.rhs, x0, u0, 0.1);
  for (int i = 0; i < 4; ++i) CHECK(tr.states[1][i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("disturbances accumulate like the hand-rolled recursion") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  const Vec w0{0.1, 0.1, 0.1, 0.1};
  const auto u = constant_seq(Vec{0, 0}, 3);
  const auto w = constant_seq(w0, 3);
  const Trajectory tr = iterate_exact(m, 0, Vec{0, 0, 0, 0}, u, w, 3);

  // reference: x' = A x + w applied step by step with plain loops
  Vec x{0, 0, 0, 0};
  for (int k = 0; k < 3; ++k) {
    Vec nx(4);
    nx[0] = x[0] + 0.1 * x[1];
    nx[1] = x[1];
    nx[2] = x[2] + 0.1 * x[3];
    nx[3] = x[3];
    for (int i = 0; i < 4; ++i) nx[i] += w0[i];
    x = nx;
  }
  for (int i = 0; i < 4; ++i) CHECK(tr.states[3][i] == x[i]);
  CHECK(norm_inf(tr.states[3]) > 0.0);
}

TEST_CASE("semigroup property on random instances") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 12;
    const int k = static_cast<int>(rng.uniform_int(0, n));
    std::vector<Vec> u, w;
    Vec x0(4);
    for (auto& v : x0) v = rng.uniform(-2, 2);
    for (int i = 0; i < n; ++i) {
      u.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5)});
      w.push_back(
          {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1),
           rng.uniform(-0.1, 0.1)});
    }
    const Trajectory full = iterate_exact(m, 0, x0, u, w, n);
    const Trajectory head = iterate_exact(m, 0, x0, u, w, k);
    const std::vector<Vec> utail(u.begin() + k, u.end());
    const std::vector<Vec> wtail(w.begin() + k, w.end());
    const Trajectory tail = iterate_exact(m, k, head.states.back(), utail, wtail, n);
    for (int i = 0; i < 4; ++i) CHECK(full.states.back()[i] == tail.states.back()[i]);
  }
}

TEST_CASE("approximate model agrees with the exact one for the exact predictor") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  Rng rng(7);
  Vec x0(4);
  for (auto& v : x0) v = rng.uniform(-3, 3);
  std::vector<Vec> u;
  for (int i = 0; i < 10; ++i) u.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5)});
  const auto w = constant_seq(Vec{0, 0, 0, 0}, 10);
  const Trajectory te = iterate_exact(m, 0, x0, u, w, 10);
  const Trajectory ta = iterate_approx(m, 0, x0, u, 10);
  for (std::size_t s = 0; s < te.states.size(); ++s)
    for (int i = 0; i < 4; ++i) CHECK(te.states[s][i] == ta.states[s][i]);
}

TEST_CASE("euler predictor: position update matches the exact chain without input") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Euler);
  const Trajectory tr = iterate_approx(m, 0, Vec{1, 2, 0, 0}, constant_seq(Vec{0, 0}, 1), 1);
  CHECK(tr.states[1][0] == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(tr.states[1][1] == 2.0);
}

TEST_CASE("zero initial state and input gives a zero approximate trajectory") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Euler);
  const Trajectory tr = iterate_approx(m, 0, Vec{0, 0, 0, 0}, constant_seq(Vec{0, 0}, 4), 4);
  for (const Vec& x : tr.states)
    for (double v : x) CHECK(v == 0.0);
}

TEST_CASE("scalar euler error is covered by the prediction bound") {
  const PlantModel m = make_scalar_plant(1.0, 0.1, Predictor::Euler);
  ErrorBound b;
  b.lipschitz = 0.1;
  b.step_error_coeff = 1.0;
  b.step_size = 0.1;
  b.order = 1;
  b.growth = GrowthMode::Exponential;

  for (int k = 1; k <= 10; ++k) {
    const double approx = oracle::scalar_euler(1.0, 0.1, 1.0, k);
    const double exact = oracle::scalar_exact(1.0, 0.1, 1.0, k);
    const double observed = std::abs(approx - exact);
    CHECK(observed <= b.prediction(k, 0.0));

    // the library path must agree with the closed forms
    const Trajectory ta = iterate_approx(m, 0, Vec{1.0}, constant_seq(Vec{0.0}, k), k);
    const auto ue = constant_seq(Vec{0.0}, k);
    const auto we = constant_seq(Vec{0.0}, k);
    const Trajectory te = iterate_exact(m, 0, Vec{1.0}, ue, we, k);
    CHECK(ta.states.back()[0] == doctest::Approx(approx).epsilon(1e-14));
    CHECK(te.states.back()[0] == doctest::Approx(exact).epsilon(1e-14));
  }
}

TEST_CASE("prediction bound covers initial offsets too") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Euler);
  ErrorBound b;
  b.lipschitz = 0.1;
  b.step_error_coeff = 5.0;  // per-step error (T^2/2)||u||, ||u|| <= 10
  b.step_size = 0.1;
  b.order = 1;
  b.growth = GrowthMode::Exponential;

  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    Vec x0(4), offset(4);
    for (auto& v : x0) v = rng.uniform(-3, 3);
    for (auto& v : offset) v = rng.uniform(-0.3, 0.3);
    Vec x0_off = add(x0, offset);
    const int k = static_cast<int>(rng.uniform_int(1, 8));
    std::vector<Vec> u;
    for (int i = 0; i < k; ++i) {
      Vec ui{rng.uniform(-10, 10), rng.uniform(-10, 10)};
      const double n = norm2(ui);
      if (n > 10.0) ui = scale(ui, 10.0 / n);
      u.push_back(ui);
    }
    const auto w = constant_seq(Vec{0, 0, 0, 0}, k);
    const Trajectory te = iterate_exact(m, 0, x0, u, w, k);
    const Trajectory ta = iterate_approx(m, 0, x0_off, u, k);
    const double observed = norm2(sub(ta.states.back(), te.states.back()));
    CHECK(observed <= b.prediction(k, norm2(offset)));
  }
}

TEST_CASE("rk4 predictor reproduces the exact chain map") {
  const PlantModel me = make_double_integrator_plant(0.1, Predictor::Exact);
  const PlantModel mr = make_double_integrator_plant(0.1, Predictor::Rk4);
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Vec x(4);
    for (auto& v : x) v = rng.uniform(-5, 5);
    const Vec u{rng.uniform(-10, 10), rng.uniform(-10, 10)};
    const Vec a = me.approx_step(x, u);
    const Vec b = mr.approx_step(x, u);
    for (int i = 0; i < 4; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-13));
  }
}

TEST_CASE("disturbance sampling: bounds, determinism, statistics") {
  Rng z(3);
  const Vec zero = uniform_disturbance(z, 0.0, 4);
  for (double v : zero) CHECK(v == 0.0);

  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) {
    const Vec wa = uniform_disturbance(a, 0.1, 4);
    const Vec wb = uniform_disturbance(b, 0.1, 4);
    CHECK(wa == wb);
  }

  Rng r(2718);
  double max_abs = 0.0, mean = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Vec w = uniform_disturbance(r, 0.1, 1);
    max_abs = std::max(max_abs, std::abs(w[0]));
    mean += w[0];
  }
  mean /= n;
  CHECK(max_abs <= 0.1);
  // sigma of the mean is 0.1/sqrt(3 n); allow 3 sigma
  CHECK(std::abs(mean) <= 3.0 * 0.1 / std::sqrt(3.0 * n));
}

TEST_CASE("dimension and finiteness guards") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  CHECK_THROWS_AS(iterate_exact(m, 0, Vec{1, 2}, {}, {}, 0), ConfigError);
  const auto u = constant_seq(Vec{0, 0}, 1);
  CHECK_THROWS_AS(iterate_exact(m, 0, Vec{0, 0, 0, 0}, u, {}, 1), ConfigError);

  PlantModel bad = m;
  bad.exact_step = [](const Vec& x, const Vec&, const Vec&) {
    Vec y = x;
    y[0] = std::numeric_limits<double>::infinity();
    return y;
  };
  const auto w = constant_seq(Vec{0, 0, 0, 0}, 3);
  try {
    iterate_exact(bad, 0, Vec{0, 0, 0, 0}, constant_seq(Vec{0, 0}, 3), w, 3);
    FAIL("expected NumericsError");
  } catch (const NumericsError& e) {
    CHECK(e.step() == 1);
  }
}

TEST_CASE("declared step lipschitz matches the chain's spectral norm") {
  const PlantModel m = make_double_integrator_plant(0.1, Predictor::Exact);
  // ln of the one-step norm must be below the 0.1 used in scenario files
  CHECK(std::log(m.step_lipschitz) <= 0.1);
  CHECK(m.step_lipschitz > 1.0);
}
