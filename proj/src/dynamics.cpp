#include "ncs/dynamics.hpp"

#include <cmath>

#include "ncs/errors.hpp"

namespace ncs {

namespace {

void check_dims(const PlantModel& model, const Vec& x0, std::span<const Vec> u,
                std::span<const Vec> w, std::int64_t n0, std::int64_t n, bool with_w) {
  if (n < n0) throw ConfigError("iterate: n < n0");
  const auto steps = static_cast<std::size_t>(n - n0);
  if (static_cast<int>(x0.size()) != model.state_dim)
    throw ConfigError("iterate: x0 dimension mismatch");
  if (u.size() < steps) throw ConfigError("iterate: input sequence too short");
  if (with_w && w.size() < steps) throw ConfigError("iterate: disturbance sequence too short");
  for (std::size_t k = 0; k < steps; ++k) {
    if (static_cast<int>(u[k].size()) != model.input_dim)
      throw ConfigError("iterate: input dimension mismatch");
    if (with_w && static_cast<int>(w[k].size()) != model.state_dim)
      throw ConfigError("iterate: disturbance dimension mismatch");
  }
}

}  // namespace

Trajectory iterate_exact(const PlantModel& model, std::int64_t n0, const Vec& x0,
                         std::span<const Vec> u, std::span<const Vec> w, std::int64_t n) {
  check_dims(model, x0, u, w, n0, n, true);
  Trajectory tr;
  tr.start_time = n0;
  tr.states.reserve(static_cast<std::size_t>(n - n0) + 1);
  tr.states.push_back(x0);
  Vec x = x0;
  for (std::int64_t k = n0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k - n0);
    x = model.exact_step(x, u[i], w[i]);
    if (!all_finite(x)) throw NumericsError("iterate_exact: non-finite state", k + 1);
    tr.states.push_back(x);
    tr.inputs.push_back(u[i]);
  }
  return tr;
}

Trajectory iterate_approx(const PlantModel& model, std::int64_t n0, const Vec& x0,
                          std::span<const Vec> u, std::int64_t n) {
  check_dims(model, x0, u, {}, n0, n, false);
  Trajectory tr;
  tr.start_time = n0;
  tr.states.reserve(static_cast<std::size_t>(n - n0) + 1);
  tr.states.push_back(x0);
  Vec x = x0;
  for (std::int64_t k = n0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k - n0);
    x = model.approx_step(x, u[i]);
    if (!all_finite(x)) throw NumericsError("iterate_approx: non-finite state", k + 1);
    tr.states.push_back(x);
    tr.inputs.push_back(u[i]);
  }
  return tr;
}

Vec uniform_disturbance(Rng& rng, double bound, int dim) {
  if (bound < 0.0) throw ConfigError("disturbance bound must be >= 0");
  Vec w(static_cast<std::size_t>(dim), 0.0);
  for (auto& e : w) e = rng.uniform(-bound, bound);
  return w;
}

Vec rk4_step(const std::function<Vec(const Vec&, const Vec&)>& rhs, const Vec& x,
             const Vec& u, double h) {
  const Vec k1 = rhs(x, u);
  Vec x2 = x;
  axpy(x2, 0.5 * h, k1);
  const Vec k2 = rhs(x2, u);
  Vec x3 = x;
  axpy(x3, 0.5 * h, k2);
  const Vec k3 = rhs(x3, u);
  Vec x4 = x;
  axpy(x4, h, k3);
  const Vec k4 = rhs(x4, u);
  Vec out = x;
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

namespace {

/// Recover the matrices of a linear one-step map by probing basis vectors.
/// Exact (up to the map's own rounding) because the map is linear.
LinearStep probe_linear(const std::function<Vec(const Vec&, const Vec&)>& step, int nx, int nu) {
  LinearStep ls;
  ls.A = Mat(nx, nx);
  ls.B = Mat(nx, nu);
  const Vec zx(static_cast<std::size_t>(nx), 0.0);
  const Vec zu(static_cast<std::size_t>(nu), 0.0);
  for (int j = 0; j < nx; ++j) {
    Vec e = zx;
    e[static_cast<std::size_t>(j)] = 1.0;
    const Vec col = step(e, zu);
    for (int i = 0; i < nx; ++i) ls.A(i, j) = col[static_cast<std::size_t>(i)];
  }
  for (int j = 0; j < nu; ++j) {
    Vec e = zu;
    e[static_cast<std::size_t>(j)] = 1.0;
    const Vec col = step(zx, e);
    for (int i = 0; i < nx; ++i) ls.B(i, j) = col[static_cast<std::size_t>(i)];
  }
  return ls;
}

std::function<Vec(const Vec&, const Vec&)> linear_apply(Mat A, Mat B) {
  return [A = std::move(A), B = std::move(B)](const Vec& x, const Vec& u) {
    Vec y = mat_vec(A, x);
    const Vec bu = mat_vec(B, u);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bu[i];
    return y;
  };
}

}  // namespace

PlantModel make_double_integrator_plant(double T, Predictor predictor) {
  if (T <= 0.0) throw ConfigError("sample time must be > 0");
  PlantModel m;
  m.state_dim = 4;
  m.input_dim = 2;

  Mat A(4, 4);
  A(0, 0) = 1.0; A(0, 1) = T;
  A(1, 1) = 1.0;
  A(2, 2) = 1.0; A(2, 3) = T;
  A(3, 3) = 1.0;
  Mat B(4, 2);
  B(0, 0) = 0.5 * T * T;
  B(1, 0) = T;
  B(2, 1) = 0.5 * T * T;
  B(3, 1) = T;

  m.step_lipschitz = spectral_norm(A);
  m.rhs = [](const Vec& x, const Vec& u) { return Vec{x[1], u[0], x[3], u[1]}; };

  const auto nominal = linear_apply(A, B);
  m.exact_step = [nominal](const Vec& x, const Vec& u, const Vec& w) {
    Vec y = nominal(x, u);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += w[i];
    return y;
  };

  switch (predictor) {
    case Predictor::Exact: {
      m.approx_step = nominal;
      m.approx_linear = LinearStep{A, B};
      break;
    }
    case Predictor::Euler: {
      Mat Be(4, 2);
      Be(1, 0) = T;
      Be(3, 1) = T;
      m.approx_step = linear_apply(A, Be);  // I + T*Ac equals A for this chain
      m.approx_linear = LinearStep{A, Be};
      break;
    }
    case Predictor::Rk4: {
      auto rhs = m.rhs;
      m.approx_step = [rhs, T](const Vec& x, const Vec& u) { return rk4_step(rhs, x, u, T); };
      m.approx_linear = probe_linear(m.approx_step, 4, 2);
      break;
    }
  }
  return m;
}

PlantModel make_scalar_plant(double a, double h, Predictor predictor) {
  if (h <= 0.0) throw ConfigError("sample time must be > 0");
  if (a == 0.0) throw ConfigError("scalar plant needs a != 0");
  PlantModel m;
  m.state_dim = 1;
  m.input_dim = 1;

  const double ad = std::exp(a * h);
  const double bd = std::expm1(a * h) / a;
  m.step_lipschitz = std::abs(ad);
  m.rhs = [a](const Vec& x, const Vec& u) { return Vec{a * x[0] + u[0]}; };

  m.exact_step = [ad, bd](const Vec& x, const Vec& u, const Vec& w) {
    return Vec{ad * x[0] + bd * u[0] + w[0]};
  };

  switch (predictor) {
    case Predictor::Exact: {
      m.approx_step = [ad, bd](const Vec& x, const Vec& u) { return Vec{ad * x[0] + bd * u[0]}; };
      Mat A(1, 1), B(1, 1);
      A(0, 0) = ad;
      B(0, 0) = bd;
      m.approx_linear = LinearStep{A, B};
      break;
    }
    case Predictor::Euler: {
      const double ae = 1.0 + a * h;
      m.approx_step = [ae, h](const Vec& x, const Vec& u) { return Vec{ae * x[0] + h * u[0]}; };
      Mat A(1, 1), B(1, 1);
      A(0, 0) = ae;
      B(0, 0) = h;
      m.approx_linear = LinearStep{A, B};
      break;
    }
    case Predictor::Rk4: {
      auto rhs = m.rhs;
      m.approx_step = [rhs, h](const Vec& x, const Vec& u) { return rk4_step(rhs, x, u, h); };
      m.approx_linear = probe_linear(m.approx_step, 1, 1);
      break;
    }
  }
  return m;
}

}  // namespace ncs
