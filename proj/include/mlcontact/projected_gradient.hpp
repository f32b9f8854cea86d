#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <vector>

namespace mlc {

struct PgConfig {
  double tol = 1e-8;
  int max_iter = 50000;
  bool adaptive_restart = true;
  int power_iterations = 50;
};

struct PgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double pg_norm = 0.0;   // ||x - P(x - grad/L)|| * L at the returned iterate
  double objective = 0.0; // 1/2 x'Cx + lin'x
  bool converged = false;
  int restarts = 0;
  std::vector<double> objective_history;
};

/// Accelerated projected gradient (FISTA with adaptive restart on objective
/// increase) for  min 1/2 x'Cx + lin'x  over a convex set given by its
/// Euclidean projection. One operator application per iteration; the
/// gradient at the extrapolated point is formed from the affine identity
/// grad(y) = (1+beta) grad(x_k) - beta grad(x_{k-1}).
template <typename ApplyC, typename Project>
PgResult accelerated_projected_gradient(const Eigen::VectorXd& x0, ApplyC&& applyC,
                                        const Eigen::VectorXd& lin, Project&& project,
                                        double lipschitz, const PgConfig& cfg) {
  PgResult res;
  const double stop_scale = cfg.tol * std::max(lin.norm(), 1.0);

  auto grad_at = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return applyC(x) + lin; };
  auto objective_of = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
    // g = Cx + lin  =>  1/2 x'Cx + lin'x = 1/2 x'(g + lin)
    return 0.5 * x.dot(g + lin);
  };

  double L = std::max(lipschitz, 1e-300);
  Eigen::VectorXd x = x0;
  project(x);
  Eigen::VectorXd gx = grad_at(x);
  double fx = objective_of(x, gx);
  res.objective_history.push_back(fx);

  Eigen::VectorXd x_prev = x, g_prev = gx;
  double f_prev = fx;
  Eigen::VectorXd y = x, gy = gx;
  double t = 1.0;
  bool momentum_active = false;

  for (int k = 1; k <= cfg.max_iter; ++k) {
    Eigen::VectorXd x_new = y - gy / L;
    project(x_new);
    const Eigen::VectorXd g_new = grad_at(x_new);
    const double f_new = objective_of(x_new, g_new);
    res.iterations = k;

    // Stationarity residual at the new iterate.
    Eigen::VectorXd step = x_new - g_new / L;
    project(step);
    const double pgn = (x_new - step).norm() * L;

    if (pgn <= stop_scale) {
      res.objective_history.push_back(f_new);
      res.x = x_new;
      res.pg_norm = pgn;
      res.objective = f_new;
      res.converged = true;
      return res;
    }

    if (cfg.adaptive_restart && f_new > f_prev) {
      if (momentum_active) {
        // Drop the momentum and redo a plain step from the previous iterate.
        y = x_prev;
        gy = g_prev;
        t = 1.0;
        momentum_active = false;
        ++res.restarts;
      } else {
        // A plain 1/L step increased the objective: the Lipschitz estimate
        // is too small.
        L *= 2.0;
      }
      continue;
    }

    res.objective_history.push_back(f_new);
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_new;
    y = x_new + beta * (x_new - x_prev);
    gy = (1.0 + beta) * g_new - beta * g_prev;
    x_prev = x_new;
    g_prev = g_new;
    f_prev = f_new;
    t = t_new;
    momentum_active = beta > 0.0;
  }

  res.x = x_prev;
  Eigen::VectorXd step = x_prev - g_prev / L;
  project(step);
  res.pg_norm = (x_prev - step).norm() * L;
  res.objective = f_prev;
  res.converged = false;
  return res;
}

/// Largest eigenvalue of a symmetric PSD operator by power iteration with a
/// fixed deterministic start.
template <typename ApplyC>
double power_iteration_lmax(int dim, ApplyC&& applyC, int steps) {
  if (dim == 0) return 0.0;
  Eigen::VectorXd v(dim);
  // Deterministic pseudo-random start (xorshift), independent of libc rand.
  std::uint64_t s = 0x9e3779b97f4a7c15ull;
  for (int i = 0; i < dim; ++i) {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    v[i] = static_cast<double>(s % 2000003) / 1000001.5 - 1.0;
  }
  v.normalize();
  double lmax = 0.0;
  for (int it = 0; it < steps; ++it) {
    Eigen::VectorXd w = applyC(v);
    const double n = w.norm();
    if (n <= 0.0) return 0.0;
    lmax = v.dot(w);
    v = w / n;
  }
  return lmax;
}

}  // namespace mlc
