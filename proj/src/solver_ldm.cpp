#include "mlcontact/solver_ldm.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace mlc {

namespace {

// Layer-local dof indices (3 per node) of the free contact pairs of one
// interface, on the requested side.
std::vector<int> contact_dofs(const DofMap& dofs, const ContactPairing& pr, int layer,
                              bool above_side) {
  std::vector<int> out;
  const int off = dofs.layer_dof_offset[layer];
  for (std::size_t p = 0; p < pr.node_pairs.size(); ++p) {
    if (!pr.pair_free[p]) continue;
    const int local = above_side ? pr.node_pairs[p].first : pr.node_pairs[p].second;
    for (int c = 0; c < 3; ++c) {
      const int dof = dofs.dof(layer, local, c);
      if (dof < 0) throw std::logic_error("free contact pair maps to a clamped dof");
      out.push_back(dof - off);
    }
  }
  return out;
}

}  // namespace

Eigen::VectorXd LayerDualQp::apply_B(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim());
  for (int r = 0; r < m_lower; ++r) {
    out[r] = -v[lower_dofs[3 * r + 2]];                    // normal rows, beta = (0,0,-1)
    out[m_lower + 3 * r + 0] = v[lower_dofs[3 * r + 0]];   // tangential rows
    out[m_lower + 3 * r + 1] = v[lower_dofs[3 * r + 1]];
    // z tangential row is identically zero on a horizontal interface
  }
  for (int r = 0; r < 3 * m_upper; ++r) out[4 * m_lower + r] = v[upper_dofs[r]];
  return out;
}

Eigen::VectorXd LayerDualQp::apply_B_transpose(const Eigen::VectorXd& omega) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(u0.size());
  for (int r = 0; r < m_lower; ++r) {
    v[lower_dofs[3 * r + 2]] -= omega[r];
    v[lower_dofs[3 * r + 0]] += omega[m_lower + 3 * r + 0];
    v[lower_dofs[3 * r + 1]] += omega[m_lower + 3 * r + 1];
  }
  for (int r = 0; r < 3 * m_upper; ++r) v[upper_dofs[r]] += omega[4 * m_lower + r];
  return v;
}

LayerDualQp build_layer_dual(const TetMesh& mesh, const CholeskyFactor& factor,
                             const std::vector<ContactPairing>& pairings,
                             const FrictionField& nodal_friction, const Eigen::VectorXd& f,
                             int layer) {
  const DofMap& dofs = *factor.dofs();
  const int n = mesh.num_layers();
  LayerDualQp qp;
  qp.layer = layer;

  if (layer < n - 1) {
    const ContactPairing& pr = pairings.at(layer);
    qp.lower_dofs = contact_dofs(dofs, pr, layer, /*above_side=*/true);
    qp.m_lower = static_cast<int>(qp.lower_dofs.size()) / 3;

    // Lumped friction bound per node: g(node) * integral of its hat
    // function over the interface.
    std::vector<double> weight(pr.node_pairs.size(), 0.0);
    std::vector<int> above_pair(mesh.layers[pr.layer_above].node_count(), -1);
    for (std::size_t p = 0; p < pr.node_pairs.size(); ++p)
      above_pair[pr.node_pairs[p].first] = static_cast<int>(p);
    for (const auto& tp : pr.tri_pairs)
      for (int v = 0; v < 3; ++v) weight[above_pair[tp.above[v]]] += tp.area / 3.0;

    qp.g_lumped.resize(qp.m_lower);
    const int goff = nodal_friction.interface_offset.at(layer);
    int r = 0;
    for (std::size_t p = 0; p < pr.node_pairs.size(); ++p) {
      if (!pr.pair_free[p]) continue;
      qp.g_lumped[r] = nodal_friction.bound[goff + r] * weight[p];
      ++r;
    }
  }
  if (layer > 0) {
    const ContactPairing& pr = pairings.at(layer - 1);
    qp.upper_dofs = contact_dofs(dofs, pr, layer, /*above_side=*/false);
    qp.m_upper = static_cast<int>(qp.upper_dofs.size()) / 3;
  }

  const int off = dofs.layer_dof_offset[layer];
  const int nd = dofs.layer_dof_count(layer);
  qp.b = f.segment(off, nd);
  qp.u0 = factor.solve_layer(layer, qp.b);

  const int dim = qp.dim();
  qp.explicit_C = dim <= kExplicitSchurLimit;
  if (qp.explicit_C) {
    Eigen::MatrixXd C(dim, dim);
    for (int j = 0; j < dim; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
      e[j] = 1.0;
      C.col(j) = qp.apply_B(factor.solve_layer(layer, qp.apply_B_transpose(e)));
    }
    qp.C = 0.5 * (C + C.transpose());
  }
  auto applyC = [&](const Eigen::VectorXd& w) {
    return qp.explicit_C
               ? Eigen::VectorXd(qp.C.selfadjointView<Eigen::Lower>() * w)
               : Eigen::VectorXd(qp.apply_B(factor.solve_layer(layer, qp.apply_B_transpose(w))));
  };
  qp.lipschitz = 1.05 * power_iteration_lmax(dim, applyC, 50);
  return qp;
}

Eigen::VectorXd layer_dual_linear_term(const LayerDualQp& qp, const Eigen::VectorXd& trace_lower,
                                       const Eigen::VectorXd& trace_upper) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(qp.dim());
  for (int r = 0; r < qp.m_lower; ++r) {
    const double lx = trace_lower[3 * r + 0], ly = trace_lower[3 * r + 1],
                 lz = trace_lower[3 * r + 2];
    d[r] = -(lz - qp.u0[qp.lower_dofs[3 * r + 2]]);
    d[qp.m_lower + 3 * r + 0] = lx - qp.u0[qp.lower_dofs[3 * r + 0]];
    d[qp.m_lower + 3 * r + 1] = ly - qp.u0[qp.lower_dofs[3 * r + 1]];
  }
  for (int r = 0; r < 3 * qp.m_upper; ++r)
    d[4 * qp.m_lower + r] = trace_upper[r] - qp.u0[qp.upper_dofs[r]];
  return d;
}

namespace {

// Feasible set of the layer dual: nonnegative normal forces and per-node
// tangential forces inside the ball of radius g * (hat-function weight).
// The tangential block keeps the supplement's 3-component layout; the
// normal (z) component pairs against a zero row and stays at zero.
void project_layer_feasible(Eigen::VectorXd& w, const LayerDualQp& qp) {
  for (int r = 0; r < qp.m_lower; ++r) {
    w[r] = std::max(0.0, w[r]);
    double& tx = w[qp.m_lower + 3 * r + 0];
    double& ty = w[qp.m_lower + 3 * r + 1];
    double& tz = w[qp.m_lower + 3 * r + 2];
    tz = 0.0;
    const double bound = qp.g_lumped[r];
    for (int pass = 0; pass < 4; ++pass) {
      const double mag = std::hypot(tx, ty);
      if (mag <= bound) break;
      const double s = bound > 0.0 ? bound / mag : 0.0;
      tx *= s;
      ty *= s;
    }
  }
  // upper coupling multipliers are unconstrained
}

}  // namespace

LdmSolution solve_ldm(const TetMesh& mesh, const SparseSymmetric& K, const CholeskyFactor& factor,
                      const Eigen::VectorXd& f, const std::vector<ContactPairing>& pairings,
                      const FrictionField& nodal_friction, const LdmConfig& cfg) {
  if (mesh.num_layers() < 2) throw std::invalid_argument("layer decomposition needs >= 2 layers");
  if (!(cfg.theta > 0.0)) throw std::invalid_argument("relaxation theta must be positive");
  if (!(cfg.tol > 0.0)) throw std::invalid_argument("ldm tol must be positive");
  const auto t0 = std::chrono::steady_clock::now();

  const int n = mesh.num_layers();
  const int n_iface = n - 1;

  std::vector<LayerDualQp> qps;
  qps.reserve(n);
  for (int li = 0; li < n; ++li)
    qps.push_back(build_layer_dual(mesh, factor, pairings, nodal_friction, f, li));

  InterfaceTraces traces;
  traces.lambda.resize(n_iface);
  for (int i = 0; i < n_iface; ++i)
    traces.lambda[i] = Eigen::VectorXd::Zero(3 * qps[i].m_lower);

  std::vector<Eigen::VectorXd> omega(n), bt(n), u_layer(n);
  for (int li = 0; li < n; ++li) omega[li] = Eigen::VectorXd::Zero(qps[li].dim());

  LdmReport report;
  const Eigen::VectorXd empty;

  for (int k = 1; k <= cfg.max_outer; ++k) {
    int inner_total = 0;
    for (int li = 0; li < n; ++li) {
      const LayerDualQp& qp = qps[li];
      const Eigen::VectorXd& tl = (li < n_iface) ? traces.lambda[li] : empty;
      const Eigen::VectorXd& tu = (li > 0) ? traces.lambda[li - 1] : empty;
      const Eigen::VectorXd d = layer_dual_linear_term(qp, tl, tu);
      auto applyC = [&](const Eigen::VectorXd& w) {
        return qp.explicit_C ? Eigen::VectorXd(qp.C.selfadjointView<Eigen::Lower>() * w)
                             : Eigen::VectorXd(qp.apply_B(
                                   factor.solve_layer(li, qp.apply_B_transpose(w))));
      };
      PgResult res = accelerated_projected_gradient(
          omega[li], applyC, d, [&](Eigen::VectorXd& w) { project_layer_feasible(w, qp); },
          qp.lipschitz, cfg.inner);
      omega[li] = std::move(res.x);
      inner_total += res.iterations;
      bt[li] = qp.apply_B_transpose(omega[li]);
      u_layer[li] = qp.u0 - factor.solve_layer(li, bt[li]);
    }

    // Relaxed trace update from the interface residuals of the two one-sided
    // solutions.
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n_iface; ++i) {
      const LayerDualQp& up = qps[i];
      const LayerDualQp& lo = qps[i + 1];
      const int m = up.m_lower;
      Eigen::VectorXd r(3 * m);
      for (int idx = 0; idx < 3 * m; ++idx)
        r[idx] = bt[i + 1][lo.upper_dofs[idx]] + bt[i][up.lower_dofs[idx]];

      Eigen::VectorXd rhs_p = Eigen::VectorXd::Zero(lo.u0.size());
      for (int idx = 0; idx < 3 * m; ++idx) rhs_p[lo.upper_dofs[idx]] = -0.5 * r[idx];
      const Eigen::VectorXd p = factor.solve_layer(i + 1, rhs_p);

      Eigen::VectorXd rhs_q = Eigen::VectorXd::Zero(up.u0.size());
      for (int idx = 0; idx < 3 * m; ++idx) rhs_q[up.lower_dofs[idx]] = -0.5 * r[idx];
      const Eigen::VectorXd q = factor.solve_layer(i, rhs_q);

      Eigen::VectorXd lam_new(3 * m);
      for (int idx = 0; idx < 3 * m; ++idx)
        lam_new[idx] =
            traces.lambda[i][idx] - cfg.theta * (p[lo.upper_dofs[idx]] + q[up.lower_dofs[idx]]);
      num += (lam_new - traces.lambda[i]).norm();
      den += lam_new.norm();
      traces.lambda[i] = std::move(lam_new);
    }

    const double eps = den > 0.0 ? num / den : 0.0;
    report.eps_history.push_back(eps);
    report.inner_iterations.push_back(inner_total);
    report.outer_iterations = k;

    if (eps <= cfg.tol) {
      report.status = LdmStatus::Converged;
      break;
    }
    const int w = cfg.oscillation_window;
    if (k >= w && static_cast<int>(report.eps_history.size()) > w) {
      const double before = report.eps_history[report.eps_history.size() - 1 - w];
      if (eps >= before) {
        report.status = LdmStatus::Oscillating;
        break;
      }
    }
    if (k == cfg.max_outer) report.status = LdmStatus::MaxOuterReached;
  }

  LdmSolution sol;
  sol.u = DisplacementField::zero(factor.dofs());
  for (int li = 0; li < n; ++li)
    sol.u.values.segment(factor.dofs()->layer_dof_offset[li], u_layer[li].size()) = u_layer[li];
  sol.traces = std::move(traces);
  sol.omega = std::move(omega);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  sol.report = std::move(report);
  (void)K;
  return sol;
}

LdmSolution solve_ldm(const TetMesh& mesh, const std::vector<IsotropicMaterial>& materials,
                      const LoadSpec& loads, const std::vector<double>& g_per_interface,
                      const LdmConfig& cfg) {
  const SparseSymmetric K = assemble_stiffness(mesh, materials);
  const CholeskyFactor factor(K);
  const Eigen::VectorXd f = assemble_loads(mesh, loads, *K.dofs);
  const auto pairings = extract_all_pairings(mesh);
  const CouplingOperators p1_ops =
      assemble_coupling(mesh, pairings, ContactSpaceKind::NodalLinear, *K.dofs);
  const FrictionField g = FrictionField::constant_per_interface(p1_ops, g_per_interface);
  return solve_ldm(mesh, K, factor, f, pairings, g, cfg);
}

}  // namespace mlc
