#include "ncs/mpc.hpp"

#include <algorithm>
#include <cmath>

#include "ncs/errors.hpp"

namespace ncs {

StageCost make_circle_tracking_cost(double radius, double speed, double w_radial,
                                    double w_tangential, double guard) {
  if (radius <= 0.0 || guard <= 0.0) throw ConfigError("circle cost: bad radius/guard");
  const double r2t = radius * radius;

  auto parts = [=](const Vec& x, double& r, double& a, double& t2, double& t4) {
    r = std::sqrt(x[0] * x[0] + x[2] * x[2]);
    if (r < guard) throw SingularityError("circle cost: state too close to the origin");
    a = x[0] * x[0] + x[2] * x[2] - r2t;
    t2 = x[1] + speed * x[2] / r;
    t4 = x[3] - speed * x[0] / r;
  };

  StageCost c;
  c.value = [=](const Vec& x) {
    double r, a, t2, t4;
    parts(x, r, a, t2, t4);
    return w_radial * a * a + w_tangential * t2 * t2 + w_tangential * t4 * t4;
  };
  c.gradient = [=](const Vec& x) {
    double r, a, t2, t4;
    parts(x, r, a, t2, t4);
    const double r3 = r * r * r;
    Vec g(4, 0.0);
    g[0] = 4.0 * w_radial * a * x[0]
           + 2.0 * w_tangential * t2 * (-speed * x[0] * x[2] / r3)
           + 2.0 * w_tangential * t4 * (-speed * x[2] * x[2] / r3);
    g[1] = 2.0 * w_tangential * t2;
    g[2] = 4.0 * w_radial * a * x[2]
           + 2.0 * w_tangential * t2 * (speed * x[0] * x[0] / r3)
           + 2.0 * w_tangential * t4 * (speed * x[0] * x[2] / r3);
    g[3] = 2.0 * w_tangential * t4;
    return g;
  };
  const double sr = std::sqrt(w_radial);
  const double st = std::sqrt(w_tangential);
  c.residuals = [=](const Vec& x) {
    double r, a, t2, t4;
    parts(x, r, a, t2, t4);
    return Vec{sr * a, st * t2, st * t4};
  };
  c.residual_jacobian = [=](const Vec& x) {
    double r, a, t2, t4;
    parts(x, r, a, t2, t4);
    const double r3 = r * r * r;
    Mat J(3, 4);
    J(0, 0) = sr * 2.0 * x[0];
    J(0, 2) = sr * 2.0 * x[2];
    J(1, 0) = st * (-speed * x[0] * x[2] / r3);
    J(1, 1) = st;
    J(1, 2) = st * (speed * x[0] * x[0] / r3);
    J(2, 0) = st * (-speed * x[2] * x[2] / r3);
    J(2, 2) = st * (speed * x[0] * x[2] / r3);
    J(2, 3) = st;
    return J;
  };
  return c;
}

void project_to_ball(Vec& u, double radius) {
  if (radius <= 0.0) return;
  const double r2 = radius * radius;
  double n2 = dot(u, u);
  if (n2 <= r2) return;
  const double s = radius / std::sqrt(n2);
  for (double& v : u) v *= s;
  // rounding can leave the squared norm a few ulp above the bound; nudge down
  // until the constraint holds exactly
  while (dot(u, u) > r2) {
    for (double& v : u) v = std::nextafter(v, 0.0);
  }
}

namespace {

double constraint_residual(const StateConstraint& sc, const Vec& x) {
  if (!sc.enabled) return 0.0;
  double s = 0.0;
  for (int i : sc.indices) s += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
  return std::max(0.0, s - sc.bound);
}

Vec constraint_penalty_gradient(const StateConstraint& sc, const Vec& x) {
  Vec g(x.size(), 0.0);
  const double res = constraint_residual(sc, x);
  if (res > 0.0) {
    for (int i : sc.indices)
      g[static_cast<std::size_t>(i)] =
          sc.penalty_weight * 2.0 * res * 2.0 * x[static_cast<std::size_t>(i)];
  }
  return g;
}

void check_inputs(const MpcConfig& config, const PlantModel& model, const Vec& x0,
                  std::span<const Vec> u) {
  if (config.horizon < 0) throw ConfigError("mpc: horizon must be >= 0");
  if (config.sample_time <= 0.0) throw ConfigError("mpc: sample_time must be > 0");
  if (static_cast<int>(x0.size()) != model.state_dim) throw ConfigError("mpc: x0 dimension");
  if (static_cast<int>(u.size()) != config.horizon) throw ConfigError("mpc: control count");
  if (!config.cost.value) throw ConfigError("mpc: no stage cost configured");
}

std::vector<Vec> rollout(const PlantModel& model, const Vec& x0, std::span<const Vec> u) {
  std::vector<Vec> xs;
  xs.reserve(u.size() + 1);
  xs.push_back(x0);
  for (const Vec& uk : u) {
    Vec next = model.approx_step(xs.back(), uk);
    if (!all_finite(next))
      throw SolverError("mpc: non-finite state in internal prediction");
    xs.push_back(std::move(next));
  }
  return xs;
}

/// Trapezoid over one sampling interval, optionally refined by integrating
/// the continuous vector field from the left node. The right endpoint value
/// is pinned to the predictor node so refinement stays anchored to the
/// discrete trajectory.
double interval_quadrature(const MpcConfig& config, const PlantModel& model, const Vec& xk,
                           const Vec& xk1, const Vec& uk) {
  const double T = config.sample_time;
  const int s = config.quad_substeps;
  const auto& l = config.cost.value;
  if (s <= 1) return 0.5 * T * (l(xk) + l(xk1));
  if (!model.rhs) throw ConfigError("mpc: quad_substeps > 1 needs a continuous-time model");
  const double h = T / s;
  double acc = 0.0;
  Vec y = xk;
  double left = l(y);
  for (int j = 0; j < s; ++j) {
    double right;
    if (j + 1 == s) {
      right = l(xk1);
    } else {
      y = rk4_step(model.rhs, y, uk, h);
      right = l(y);
    }
    acc += 0.5 * h * (left + right);
    left = right;
  }
  return acc;
}

double cost_of_states(const MpcConfig& config, const PlantModel& model,
                      const std::vector<Vec>& xs, std::span<const Vec> u) {
  const int N = config.horizon;
  const auto& l = config.cost.value;
  if (N == 0) return config.terminal_weight * l(xs[0]);
  double J = 0.0;
  for (int k = 0; k < N; ++k)
    J += interval_quadrature(config, model, xs[static_cast<std::size_t>(k)],
                             xs[static_cast<std::size_t>(k) + 1], u[static_cast<std::size_t>(k)]);
  J += config.terminal_weight * l(xs.back());
  if (config.state_constraint.enabled) {
    for (int k = 1; k <= N; ++k) {
      const double res = constraint_residual(config.state_constraint, xs[static_cast<std::size_t>(k)]);
      J += config.state_constraint.penalty_weight * res * res;
    }
  }
  return J;
}

void step_jacobians(const PlantModel& model, const Vec& x, const Vec& u, Mat& A, Mat& B) {
  if (model.approx_linear) {
    A = model.approx_linear->A;
    B = model.approx_linear->B;
    return;
  }
  // central-difference fallback for plants without a linear form
  const int nx = model.state_dim;
  const int nu = model.input_dim;
  A = Mat(nx, nx);
  B = Mat(nx, nu);
  const double h = 1e-6;
  for (int j = 0; j < nx; ++j) {
    Vec xp = x, xm = x;
    xp[static_cast<std::size_t>(j)] += h;
    xm[static_cast<std::size_t>(j)] -= h;
    const Vec fp = model.approx_step(xp, u);
    const Vec fm = model.approx_step(xm, u);
    for (int i = 0; i < nx; ++i) A(i, j) = (fp[static_cast<std::size_t>(i)] - fm[static_cast<std::size_t>(i)]) / (2.0 * h);
  }
  for (int j = 0; j < nu; ++j) {
    Vec up = u, um = u;
    up[static_cast<std::size_t>(j)] += h;
    um[static_cast<std::size_t>(j)] -= h;
    const Vec fp = model.approx_step(x, up);
    const Vec fm = model.approx_step(x, um);
    for (int i = 0; i < nx; ++i) B(i, j) = (fp[static_cast<std::size_t>(i)] - fm[static_cast<std::size_t>(i)]) / (2.0 * h);
  }
}

}  // namespace

double trajectory_cost(const MpcConfig& config, const PlantModel& model, const Vec& x0,
                       std::span<const Vec> u) {
  check_inputs(config, model, x0, u);
  const std::vector<Vec> xs = rollout(model, x0, u);
  return cost_of_states(config, model, xs, u);
}

std::vector<Vec> cost_gradient(const MpcConfig& config, const PlantModel& model, const Vec& x0,
                               std::span<const Vec> u) {
  check_inputs(config, model, x0, u);
  if (config.quad_substeps > 1)
    throw ConfigError("mpc: gradient requires quad_substeps == 1");
  const int N = config.horizon;
  const double T = config.sample_time;
  const auto& gl = config.cost.gradient;
  if (!gl) throw ConfigError("mpc: stage cost has no gradient");

  const std::vector<Vec> xs = rollout(model, x0, u);

  // node weights of the trapezoid rule plus the terminal term
  auto node_weight = [&](int k) {
    if (N == 0) return config.terminal_weight;
    if (k == 0) return 0.5 * T;
    if (k == N) return 0.5 * T + config.terminal_weight;
    return T;
  };

  std::vector<Vec> grad(static_cast<std::size_t>(N), Vec(static_cast<std::size_t>(model.input_dim), 0.0));
  // adjoint state at node k+1 while walking k = N-1 .. 0
  Vec lambda = scale(gl(xs.back()), node_weight(N));
  if (config.state_constraint.enabled)
    lambda = add(std::move(lambda), constraint_penalty_gradient(config.state_constraint, xs.back()));

  Mat A, B;
  for (int k = N - 1; k >= 0; --k) {
    step_jacobians(model, xs[static_cast<std::size_t>(k)], u[static_cast<std::size_t>(k)], A, B);
    grad[static_cast<std::size_t>(k)] = mat_tvec(B, lambda);
    Vec next = mat_tvec(A, lambda);
    next = add(std::move(next), scale(gl(xs[static_cast<std::size_t>(k)]), node_weight(k)));
    if (k > 0 && config.state_constraint.enabled)
      next = add(std::move(next),
                 constraint_penalty_gradient(config.state_constraint, xs[static_cast<std::size_t>(k)]));
    lambda = std::move(next);
  }
  return grad;
}

namespace {

double pg_mapping_norm(const MpcConfig& config, const std::vector<Vec>& u,
                       const std::vector<Vec>& g) {
  double pg2 = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    Vec p = sub(Vec(u[k]), g[k]);
    project_to_ball(p, config.input_radius);
    const Vec d = sub(std::move(p), u[k]);
    pg2 += dot(d, d);
  }
  return std::sqrt(pg2);
}

/// Spectral projected gradient with a nonmonotone Armijo safeguard; used for
/// plants or costs without the least-squares structure.
void optimize_spg(const MpcConfig& config, const PlantModel& model, const Vec& x0,
                  std::vector<Vec>& u, double& J, int& iter, bool& converged) {
  const SolverConfig& sc = config.solver;
  double alpha = sc.step_initial;
  int stagnant = 0;
  std::vector<Vec> prev_u, prev_g;
  std::vector<Vec> best_u = u;
  double best_J = J;
  // nonmonotone (GLL) reference window; spectral steps need slack to work
  std::vector<double> recent{J};

  auto project_all = [&](std::vector<Vec> c) {
    for (auto& ck : c) project_to_ball(ck, config.input_radius);
    return c;
  };

  for (; iter < sc.max_iterations; ++iter) {
    const std::vector<Vec> g = cost_gradient(config, model, x0, u);
    if (pg_mapping_norm(config, u, g) < sc.tolerance) {
      converged = true;
      break;
    }

    // Barzilai-Borwein step; a fixed step crawls on badly scaled costs
    if (!prev_u.empty()) {
      double ss = 0.0, sy = 0.0;
      for (std::size_t k = 0; k < u.size(); ++k) {
        const Vec s = sub(Vec(u[k]), prev_u[k]);
        const Vec y = sub(Vec(g[k]), prev_g[k]);
        ss += dot(s, s);
        sy += dot(s, y);
      }
      alpha = (sy > 1e-300) ? std::clamp(ss / sy, sc.step_min, sc.step_max)
                            : std::min(alpha * 2.0, sc.step_max);
    } else {
      alpha = std::min(alpha * 2.0, sc.step_max);
    }

    prev_u = u;
    prev_g = g;

    const double J_ref = *std::max_element(recent.begin(), recent.end());
    bool accepted = false;
    while (alpha >= sc.step_min) {
      std::vector<Vec> cand = u;
      for (std::size_t k = 0; k < cand.size(); ++k) cand[k] = sub(cand[k], scale(Vec(g[k]), alpha));
      cand = project_all(std::move(cand));
      double move2 = 0.0;
      for (std::size_t k = 0; k < cand.size(); ++k) {
        const Vec d = sub(Vec(cand[k]), u[k]);
        move2 += dot(d, d);
      }
      if (move2 == 0.0) break;  // projection pinned every coordinate
      const double Jc = trajectory_cost(config, model, x0, cand);
      if (Jc <= J_ref - sc.armijo_sigma / alpha * move2) {
        u = std::move(cand);
        J = Jc;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // line search stalled; return best iterate

    const bool improved = J < best_J - std::max(1e-10, 1e-7 * std::abs(best_J));
    if (J < best_J) {
      best_J = J;
      best_u = u;
    }
    if (improved) {
      stagnant = 0;
    } else if (++stagnant >= sc.stall_window) {
      break;  // no measurable progress; the best iterate is as good as it gets
    }
    recent.push_back(J);
    if (recent.size() > 10) recent.erase(recent.begin());
  }

  u = std::move(best_u);
  J = best_J;
}

/// Levenberg-Marquardt damped Gauss-Newton on the stacked controls. The cost
/// is a weighted sum of squared residuals along the rollout, so the normal
/// equations capture its curvature; projection keeps the inputs feasible.
void optimize_lm(const MpcConfig& config, const PlantModel& model, const Vec& x0,
                 std::vector<Vec>& u, double& J, int& iter, bool& converged) {
  const SolverConfig& sc = config.solver;
  const int N = config.horizon;
  const int nx = model.state_dim;
  const int nu = model.input_dim;
  const int nv = N * nu;  // decision variables
  const Mat& A = model.approx_linear->A;
  const Mat& B = model.approx_linear->B;
  const StateConstraint& scon = config.state_constraint;

  auto node_weight = [&](int k) {
    if (k == 0) return 0.5 * config.sample_time;
    if (k == N) return 0.5 * config.sample_time + config.terminal_weight;
    return config.sample_time;
  };

  double lambda = 1e-3;
  double alpha_fb = sc.step_initial;  // projected-gradient fallback step
  int stagnant = 0;
  std::vector<Vec> best_u = u;
  double best_J = J;

  // sens[k][j] = d x_k / d u_j, built incrementally: S_{k+1,j} = A S_{k,j},
  // S_{j+1,j} = B. Constant per solve for linear models.
  std::vector<std::vector<Mat>> sens(static_cast<std::size_t>(N) + 1);
  for (int k = 1; k <= N; ++k) {
    sens[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
      Mat& S = sens[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
      S = (j == k - 1) ? B : mat_mul(A, sens[static_cast<std::size_t>(k) - 1][static_cast<std::size_t>(j)]);
    }
  }

  for (; iter < sc.max_iterations; ++iter) {
    const std::vector<Vec> xs = rollout(model, x0, u);
    const std::vector<Vec> g = cost_gradient(config, model, x0, u);
    if (pg_mapping_norm(config, u, g) < sc.tolerance) {
      converged = true;
      break;
    }

    // assemble the normal equations J_r^T J_r and J_r^T r over all residual
    // blocks: per node k >= 1 the weighted stage residuals and, when active,
    // the state-constraint penalty residual
    Mat H(nv, nv);
    Vec rhs(static_cast<std::size_t>(nv), 0.0);
    for (int k = 1; k <= N; ++k) {
      const Vec& xk = xs[static_cast<std::size_t>(k)];
      const double w = node_weight(k);
      const double sw = std::sqrt(w);
      Vec r = config.cost.residuals(xk);
      Mat Jx = config.cost.residual_jacobian(xk);
      for (double& v : r) v *= sw;
      for (double& v : Jx.data) v *= sw;
      if (scon.enabled) {
        const double res = constraint_residual(scon, xk);
        if (res > 0.0) {
          const double sp = std::sqrt(scon.penalty_weight);
          r.push_back(sp * res);
          Mat row(1, nx);
          for (int i : scon.indices) row(0, i) = 2.0 * xk[static_cast<std::size_t>(i)] * sp;
          Mat ext(Jx.rows + 1, nx);
          std::copy(Jx.data.begin(), Jx.data.end(), ext.data.begin());
          std::copy(row.data.begin(), row.data.end(),
                    ext.data.begin() + static_cast<std::ptrdiff_t>(Jx.rows) * nx);
          Jx = std::move(ext);
        }
      }
      // per control j < k: block J_u = Jx * sens[k][j]
      std::vector<Mat> ju(static_cast<std::size_t>(k));
      for (int j = 0; j < k; ++j)
        ju[static_cast<std::size_t>(j)] = mat_mul(Jx, sens[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)]);
      for (int j = 0; j < k; ++j) {
        const Mat& Jj = ju[static_cast<std::size_t>(j)];
        // rhs_j += J_j^T r
        for (int c = 0; c < nu; ++c) {
          double s = 0.0;
          for (int q = 0; q < Jj.rows; ++q) s += Jj(q, c) * r[static_cast<std::size_t>(q)];
          rhs[static_cast<std::size_t>(j * nu + c)] += s;
        }
        // H_{j,l} += J_j^T J_l (symmetric, fill both halves)
        for (int l = 0; l <= j; ++l) {
          const Mat& Jl = ju[static_cast<std::size_t>(l)];
          for (int c = 0; c < nu; ++c) {
            for (int d = 0; d < nu; ++d) {
              double s = 0.0;
              for (int q = 0; q < Jj.rows; ++q) s += Jj(q, c) * Jl(q, d);
              H(j * nu + c, l * nu + d) += s;
              if (l != j) H(l * nu + d, j * nu + c) += s;
            }
          }
        }
      }
    }

    bool accepted = false;
    for (int tries = 0; tries < 40 && !accepted; ++tries) {
      Mat Hd = H;
      for (int d = 0; d < nv; ++d) Hd(d, d) += lambda * (1.0 + H(d, d));
      Vec delta;
      if (!cholesky_solve(Hd, rhs, delta)) {
        lambda *= 4.0;
        continue;
      }
      std::vector<Vec> cand = u;
      for (int j = 0; j < N; ++j) {
        for (int c = 0; c < nu; ++c)
          cand[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)] -=
              delta[static_cast<std::size_t>(j * nu + c)];
        project_to_ball(cand[static_cast<std::size_t>(j)], config.input_radius);
      }
      double move2 = 0.0;
      for (std::size_t k = 0; k < cand.size(); ++k) {
        const Vec d = sub(Vec(cand[k]), u[k]);
        move2 += dot(d, d);
      }
      if (move2 == 0.0) break;
      const double Jc = trajectory_cost(config, model, x0, cand);
      if (Jc < J) {
        u = std::move(cand);
        J = Jc;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
      } else {
        lambda *= 4.0;
      }
    }
    if (!accepted) {
      // the damped step is pinned by the input constraint; slide along the
      // boundary with a projected gradient step instead
      alpha_fb = std::min(alpha_fb * 2.0, sc.step_max);
      while (alpha_fb >= sc.step_min) {
        std::vector<Vec> cand = u;
        for (std::size_t k = 0; k < cand.size(); ++k) {
          cand[k] = sub(cand[k], scale(Vec(g[k]), alpha_fb));
          project_to_ball(cand[k], config.input_radius);
        }
        double move2 = 0.0;
        for (std::size_t k = 0; k < cand.size(); ++k) {
          const Vec d = sub(Vec(cand[k]), u[k]);
          move2 += dot(d, d);
        }
        if (move2 == 0.0) break;
        const double Jc = trajectory_cost(config, model, x0, cand);
        if (Jc <= J - sc.armijo_sigma / alpha_fb * move2) {
          u = std::move(cand);
          J = Jc;
          accepted = true;
          break;
        }
        alpha_fb *= 0.5;
      }
    }
    if (!accepted) break;  // no feasible descent found; the iterate is final

    const bool improved = J < best_J - std::max(1e-12, 1e-9 * std::abs(best_J));
    if (J < best_J) {
      best_J = J;
      best_u = u;
    }
    if (improved) {
      stagnant = 0;
    } else if (++stagnant >= sc.stall_window) {
      break;
    }
  }

  u = std::move(best_u);
  J = best_J;
}

}  // namespace

OcpSolution solve_ocp(const MpcConfig& config, const PlantModel& model, const Vec& x0,
                      std::span<const Vec> warm_start) {
  if (config.quad_substeps > 1)
    throw ConfigError("mpc: solver requires quad_substeps == 1");
  const int N = config.horizon;
  const std::size_t nu = static_cast<std::size_t>(model.input_dim);

  std::vector<Vec> u(static_cast<std::size_t>(N), Vec(nu, 0.0));
  for (std::size_t k = 0; k < u.size() && k < warm_start.size(); ++k) {
    if (warm_start[k].size() != nu) throw ConfigError("mpc: warm start dimension");
    u[k] = warm_start[k];
  }
  for (auto& uk : u) project_to_ball(uk, config.input_radius);

  double J = trajectory_cost(config, model, x0, u);
  int iter = 0;
  bool converged = false;
  if (N > 0) {
    const bool least_squares =
        config.cost.residuals && config.cost.residual_jacobian && model.approx_linear;
    if (least_squares) {
      optimize_lm(config, model, x0, u, J, iter, converged);
    } else {
      optimize_spg(config, model, x0, u, J, iter, converged);
    }
  } else {
    converged = true;
  }

  OcpSolution sol;
  sol.controls = std::move(u);
  sol.predicted_states = rollout(model, x0, sol.controls);
  sol.cost = J;
  sol.iterations = iter;
  double viol = 0.0;
  for (std::size_t k = 1; k < sol.predicted_states.size(); ++k)
    viol = std::max(viol, constraint_residual(config.state_constraint, sol.predicted_states[k]));
  sol.constraint_violation = viol;
  sol.converged = converged && viol <= config.solver.feasibility_tol;
  return sol;
}

}  // namespace ncs
