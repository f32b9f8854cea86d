#include "mlcontact/solver_mfem.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>

namespace mlc {

CholeskyFactor::CholeskyFactor(const SparseSymmetric& K) : dofs_(K.dofs), dim_(K.dim()) {
  const int n_layers = static_cast<int>(dofs_->layer_dof_offset.size()) - 1;
  blocks_.reserve(n_layers);
  for (int li = 0; li < n_layers; ++li) {
    SpMat block = K.layer_block(li);
    auto llt = std::make_unique<Eigen::SimplicialLLT<SpMat>>();
    llt->compute(block);
    if (llt->info() != Eigen::Success)
      throw NotPositiveDefinite("stiffness block for layer " + std::to_string(li + 1) +
                                " is not positive definite (missing Dirichlet constraints?)");
    // A singular block can slip through with tiny positive pivots; verify by
    // a probe solve.
    if (block.rows() > 0) {
      Eigen::VectorXd probe = Eigen::VectorXd::Ones(block.rows());
      Eigen::VectorXd x = llt->solve(probe);
      const double resid = (block * x - probe).norm() / probe.norm();
      if (!std::isfinite(resid) || resid > 1e-8)
        throw NotPositiveDefinite("stiffness block for layer " + std::to_string(li + 1) +
                                  " is numerically singular");
    }
    blocks_.push_back(std::move(llt));
  }
}

Eigen::VectorXd CholeskyFactor::solve(const Eigen::VectorXd& b) const {
  if (b.size() != dim_) throw std::invalid_argument("CholeskyFactor::solve: size mismatch");
  Eigen::VectorXd x(dim_);
  for (std::size_t li = 0; li < blocks_.size(); ++li) {
    const int off = dofs_->layer_dof_offset[li];
    const int n = dofs_->layer_dof_count(static_cast<int>(li));
    if (n > 0) x.segment(off, n) = blocks_[li]->solve(b.segment(off, n));
  }
  return x;
}

Eigen::VectorXd CholeskyFactor::solve_layer(int layer, const Eigen::VectorXd& b) const {
  if (b.size() != dofs_->layer_dof_count(layer))
    throw std::invalid_argument("CholeskyFactor::solve_layer: size mismatch");
  return blocks_[layer]->solve(b);
}

CholeskyFactor factorize(const SparseSymmetric& K) { return CholeskyFactor(K); }

Eigen::VectorXd DualQp::apply_C(const Eigen::VectorXd& mu) const {
  if (explicit_C) return C_dense.selfadjointView<Eigen::Lower>() * mu;
  return ops->apply(factor->solve(ops->apply_transpose(mu)));
}

DualQp build_dual(const CholeskyFactor& factor, const CouplingOperators& ops,
                  const Eigen::VectorXd& f, int power_iterations) {
  DualQp qp;
  qp.factor = &factor;
  qp.ops = &ops;
  qp.d = ops.apply(factor.solve(f));
  const int dim = 3 * ops.n_points;
  qp.explicit_C = dim <= kExplicitSchurLimit;
  if (qp.explicit_C) {
    Eigen::MatrixXd X(factor.dim(), dim);
    for (int j = 0; j < dim; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
      e[j] = 1.0;
      X.col(j) = factor.solve(ops.apply_transpose(e));
    }
    Eigen::MatrixXd C(dim, dim);
    for (int j = 0; j < dim; ++j) C.col(j) = ops.apply(X.col(j));
    qp.C_dense = 0.5 * (C + C.transpose());
  }
  qp.lipschitz_estimate = power_iteration_lmax(
      dim, [&](const Eigen::VectorXd& v) { return qp.apply_C(v); }, power_iterations);
  qp.lipschitz = 1.05 * qp.lipschitz_estimate;
  return qp;
}

std::pair<MultiplierVector, SolveReport> solve_dual(const DualQp& qp, const FrictionField& g,
                                                    const SolverConfig& cfg) {
  if (!(cfg.tol > 0.0) || cfg.max_iter < 1)
    throw std::invalid_argument("solver config: tol must be positive, max_iter >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  const int n_points = qp.ops->n_points;

  PgConfig pg;
  pg.tol = cfg.tol;
  pg.max_iter = cfg.max_iter;
  pg.adaptive_restart = cfg.adaptive_restart;

  PgResult res = accelerated_projected_gradient(
      Eigen::VectorXd::Zero(qp.dim()).eval(),
      [&](const Eigen::VectorXd& mu) { return qp.apply_C(mu); }, (-qp.d).eval(),
      [&](Eigen::VectorXd& x) { project_feasible_stacked(x, n_points, g); }, qp.lipschitz, pg);

  SolveReport report;
  report.status = res.converged ? SolveStatus::Converged : SolveStatus::MaxIterReached;
  report.iterations = res.iterations == 0 ? 1 : res.iterations;
  report.restarts = res.restarts;
  report.pg_norm = res.pg_norm;
  report.dual_objective = res.objective;
  report.objective_history = std::move(res.objective_history);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  MultiplierVector lambda = MultiplierVector::from_stacked(*qp.ops, res.x);
  return {std::move(lambda), std::move(report)};
}

DisplacementField recover_displacement(const CholeskyFactor& factor, const Eigen::VectorXd& f,
                                       const CouplingOperators& ops,
                                       const MultiplierVector& lambda) {
  DisplacementField u;
  u.dofs = factor.dofs();
  u.values = factor.solve(f - ops.apply_transpose(lambda.stacked()));
  return u;
}

KktResiduals kkt_report(const TetMesh& mesh, const DisplacementField& u,
                        const MultiplierVector& lambda, const CouplingOperators& ops,
                        const FrictionField& g, const std::vector<ContactPairing>& pairings) {
  KktResiduals r;
  const Eigen::VectorXd gap_moments = ops.G_N * u.values;

  // Penetration: normal-gap moments converted to displacement units by the
  // basis weights.
  for (int p = 0; p < ops.n_points; ++p) {
    const double w = ops.point_weight[p];
    if (w > 0.0) r.penetration = std::max(r.penetration, gap_moments[p] / w);
  }
  r.penetration = std::max(0.0, r.penetration);

  r.complementarity = std::abs(lambda.normal.dot(gap_moments));

  // Friction law defect per multiplier point, on the basis-weighted average
  // slip (the slip moment divided by the point weight). The discrete
  // optimality conditions live on these moments, like the complementarity
  // above; raw nodal slips would fold an O(h^2) interpolation gap into the
  // residual.
  const Eigen::VectorXd slip_moments = ops.G_T * u.values;
  for (int p = 0; p < ops.n_points; ++p) {
    const double w = ops.point_weight[p];
    if (w <= 0.0) continue;
    const Eigen::Vector2d slip(slip_moments[2 * p] / w, slip_moments[2 * p + 1] / w);
    const Eigen::Vector2d lt(lambda.tangential[2 * p], lambda.tangential[2 * p + 1]);
    r.friction_consistency += std::abs(g.bound[p] * slip.norm() - lt.dot(slip));
  }
  (void)mesh;
  (void)pairings;

  for (int p = 0; p < ops.n_points; ++p) {
    const double tmag =
        std::hypot(lambda.tangential[2 * p], lambda.tangential[2 * p + 1]);
    r.bound_excess = std::max(r.bound_excess, tmag - g.bound[p]);
  }
  r.bound_excess = std::max(0.0, r.bound_excess);
  return r;
}

double estimate_infsup(const CholeskyFactor& factor, const CouplingOperators& ops) {
  const int dim = 3 * ops.n_points;
  if (dim == 0) return 0.0;

  // Block-diagonal Gram: M_c for the normal part and per component of the
  // tangential part.
  SpMat M(dim, dim);
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (int kcol = 0; kcol < ops.M_c.outerSize(); ++kcol)
      for (SpMat::InnerIterator it(ops.M_c, kcol); it; ++it) {
        trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        for (int c = 0; c < 2; ++c)
          trip.emplace_back(ops.n_points + 2 * static_cast<int>(it.row()) + c,
                            ops.n_points + 2 * static_cast<int>(it.col()) + c, it.value());
      }
    M.setFromTriplets(trip.begin(), trip.end());
  }

  auto applyC = [&](const Eigen::VectorXd& v) {
    return ops.apply(factor.solve(ops.apply_transpose(v)));
  };

  if (dim <= 1500) {
    Eigen::MatrixXd C(dim, dim);
    for (int j = 0; j < dim; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
      e[j] = 1.0;
      C.col(j) = applyC(e);
    }
    C = 0.5 * (C + C.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(C, Eigen::MatrixXd(M));
    if (es.info() != Eigen::Success) return 0.0;
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (lmin <= 1e-10 * std::max(lmax, 0.0)) return 0.0;  // singular on the multiplier space
    return std::sqrt(lmin);
  }

  // Large case: inverse power iteration on the pencil (C, M); C applications
  // are inverted with conjugate gradients. Stagnation of CG signals a
  // (near-)singular C and reports zero.
  Eigen::SimplicialLLT<SpMat> mllt(M);
  const double lmax = power_iteration_lmax(dim, applyC, 50);
  if (lmax <= 0.0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(dim);
  v /= std::sqrt(v.dot(M * v));
  double lmin = 0.0;
  for (int outer = 0; outer < 30; ++outer) {
    // Solve C x = M v by CG.
    Eigen::VectorXd b = M * v;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd res = b, p = res;
    double rr = res.squaredNorm();
    const double rr0 = rr;
    int it = 0;
    for (; it < 400 && rr > 1e-24 * rr0; ++it) {
      Eigen::VectorXd Cp = applyC(p);
      const double pCp = p.dot(Cp);
      if (pCp <= 1e-14 * lmax * p.squaredNorm()) return 0.0;
      const double alpha = rr / pCp;
      x += alpha * p;
      res -= alpha * Cp;
      const double rr_new = res.squaredNorm();
      p = res + (rr_new / rr) * p;
      rr = rr_new;
    }
    if (it == 400 && rr > 1e-12 * rr0) return 0.0;
    const double nrm = std::sqrt(x.dot(M * x));
    if (!(nrm > 0.0)) return 0.0;
    v = x / nrm;
    lmin = v.dot(applyC(v));
  }
  return lmin > 1e-10 * lmax ? std::sqrt(lmin) : 0.0;
}

MfemSolution solve_mfem(const TetMesh& mesh, const SparseSymmetric& K,
                        const CholeskyFactor& factor, const Eigen::VectorXd& f,
                        const CouplingOperators& ops, const FrictionField& g,
                        const std::vector<ContactPairing>& pairings, const SolverConfig& cfg) {
  MfemSolution sol;
  DualQp qp = build_dual(factor, ops, f, cfg.power_iterations);
  auto [lambda, report] = solve_dual(qp, g, cfg);
  sol.u = recover_displacement(factor, f, ops, lambda);
  report.kkt = kkt_report(mesh, sol.u, lambda, ops, g, pairings);
  const double fn = f.norm();
  sol.equilibrium_residual =
      (K.mat * sol.u.values + ops.apply_transpose(lambda.stacked()) - f).norm() /
      (fn > 0.0 ? fn : 1.0);
  sol.lambda = std::move(lambda);
  sol.report = std::move(report);
  return sol;
}

}  // namespace mlc
