#include "mlcontact/contact.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mlc {

namespace {

// Degree-2 triangle rule: edge midpoints with equal weights. Exact for the
// P1 x P1 products in the coupling integrals.
struct QuadPoint {
  double w0, w1, w2;  // barycentric
};
constexpr std::array<QuadPoint, 3> kMidpointRule = {
    QuadPoint{0.5, 0.5, 0.0}, QuadPoint{0.0, 0.5, 0.5}, QuadPoint{0.5, 0.0, 0.5}};

}  // namespace

int CouplingOperators::interface_of_point(int p) const {
  for (int i = 0; i + 1 < static_cast<int>(interface_offset.size()); ++i)
    if (p < interface_offset[i + 1]) return i;
  throw std::out_of_range("multiplier point index out of range");
}

Eigen::VectorXd CouplingOperators::apply(const Eigen::VectorXd& u_free) const {
  Eigen::VectorXd out(3 * n_points);
  out.head(n_points) = G_N * u_free;
  out.tail(2 * n_points) = G_T * u_free;
  return out;
}

Eigen::VectorXd CouplingOperators::apply_transpose(const Eigen::VectorXd& mu) const {
  return G_N.transpose() * mu.head(n_points) + G_T.transpose() * mu.tail(2 * n_points);
}

CouplingOperators assemble_coupling(const TetMesh& mesh,
                                    const std::vector<ContactPairing>& pairings,
                                    ContactSpaceKind kind, const DofMap& dofs) {
  CouplingOperators ops;
  ops.kind = kind;
  ops.interface_offset.push_back(0);

  // Multiplier point numbering per interface. For the nodal space this maps
  // the free node pairs (in lexicographic pairing order) to point ids; for
  // the elementwise space every triangle pair is a point.
  struct IfaceLayout {
    std::vector<int> pair_to_point;  // -1 when not a multiplier point (nodal space)
  };
  std::vector<IfaceLayout> layouts(pairings.size());
  for (std::size_t k = 0; k < pairings.size(); ++k) {
    const ContactPairing& pr = pairings[k];
    if (pr.interface != static_cast<int>(k) + 1)
      throw std::invalid_argument("pairings must be ordered by interface");
    int count = 0;
    if (kind == ContactSpaceKind::NodalLinear) {
      layouts[k].pair_to_point.assign(pr.node_pairs.size(), -1);
      for (std::size_t p = 0; p < pr.node_pairs.size(); ++p)
        if (pr.pair_free[p]) layouts[k].pair_to_point[p] = ops.interface_offset.back() + count++;
    } else {
      count = pr.tri_count();
    }
    ops.interface_offset.push_back(ops.interface_offset.back() + count);
  }
  ops.n_points = ops.interface_offset.back();

  std::vector<Eigen::Triplet<double>> tN, tT, tNf, tTf, tM;
  ops.point_weight = Eigen::VectorXd::Zero(ops.n_points);
  ops.point_xy.assign(ops.n_points, Vec2::Zero());

  const int full_cols = 3 * mesh.total_nodes();
  for (std::size_t k = 0; k < pairings.size(); ++k) {
    const ContactPairing& pr = pairings[k];
    const LayerMesh& up = mesh.layers[pr.layer_above];
    const LayerMesh& lo = mesh.layers[pr.layer_below];

    // Local-node -> pairing index on both sides, for nodal multipliers.
    std::vector<int> above_pair(up.node_count(), -1), below_pair(lo.node_count(), -1);
    for (std::size_t p = 0; p < pr.node_pairs.size(); ++p) {
      above_pair[pr.node_pairs[p].first] = static_cast<int>(p);
      below_pair[pr.node_pairs[p].second] = static_cast<int>(p);
    }

    auto add_entry = [&](int row_point, int comp_row, int layer, int local, int comp_col,
                         double val) {
      // comp_row: -1 for the normal operator, 0/1 for tangential x/y.
      const int gfull = 3 * mesh.global_node(layer, local) + comp_col;
      const int gfree = dofs.dof(layer, local, comp_col);
      if (comp_row < 0) {
        tNf.emplace_back(row_point, gfull, val);
        if (gfree >= 0) tN.emplace_back(row_point, gfree, val);
      } else {
        tTf.emplace_back(2 * row_point + comp_row, gfull, val);
        if (gfree >= 0) tT.emplace_back(2 * row_point + comp_row, gfree, val);
      }
    };

    for (int tix = 0; tix < pr.tri_count(); ++tix) {
      const auto& tp = pr.tri_pairs[tix];
      const Vec3 verts[3] = {up.nodes[tp.above[0]], up.nodes[tp.above[1]], up.nodes[tp.above[2]]};
      const double area = tp.area;

      // Quadrature of psi_p * phi_q over this triangle, for all multiplier
      // points p supported here and the three displacement trace nodes q on
      // each side. [v_N] = v_below.z - v_above.z, [v_T] = v_above - v_below.
      auto accumulate = [&](int point, auto&& psi_at) {
        for (const auto& qp : kMidpointRule) {
          const double w[3] = {qp.w0, qp.w1, qp.w2};
          const double psi = psi_at(w);
          const double scale = psi * area / 3.0;  // equal-weight 3-point rule
          if (scale == 0.0) continue;
          for (int q = 0; q < 3; ++q) {
            const double m = scale * w[q];
            if (m == 0.0) continue;
            // normal: +z on the lower layer, -z on the upper layer
            add_entry(point, -1, pr.layer_below, tp.below[q], 2, m);
            add_entry(point, -1, pr.layer_above, tp.above[q], 2, -m);
            // tangential: + on the upper layer, - on the lower layer
            add_entry(point, 0, pr.layer_above, tp.above[q], 0, m);
            add_entry(point, 0, pr.layer_below, tp.below[q], 0, -m);
            add_entry(point, 1, pr.layer_above, tp.above[q], 1, m);
            add_entry(point, 1, pr.layer_below, tp.below[q], 1, -m);
          }
        }
      };

      if (kind == ContactSpaceKind::ElementwiseConstant) {
        const int point = ops.interface_offset[k] + tix;
        accumulate(point, [](const double*) { return 1.0; });
        ops.point_weight[point] += area;
        const Vec3 ctr = (verts[0] + verts[1] + verts[2]) / 3.0;
        ops.point_xy[point] = Vec2(ctr.x(), ctr.y());
        tM.emplace_back(point, point, area);
      } else {
        for (int v = 0; v < 3; ++v) {
          const int pair = above_pair[tp.above[v]];
          const int point = layouts[k].pair_to_point[pair];
          if (point < 0) continue;
          accumulate(point, [v](const double* w) { return w[v]; });
          ops.point_weight[point] += area / 3.0;
          ops.point_xy[point] = Vec2(verts[v].x(), verts[v].y());
          // Gram of the nodal basis restricted to multiplier points.
          for (int u2 = 0; u2 < 3; ++u2) {
            const int pair2 = above_pair[tp.above[u2]];
            const int point2 = layouts[k].pair_to_point[pair2];
            if (point2 < 0) continue;
            tM.emplace_back(point, point2, area * (v == u2 ? 1.0 : 0.5) / 6.0);
          }
        }
      }
    }
  }

  ops.G_N.resize(ops.n_points, dofs.n_dof);
  ops.G_N.setFromTriplets(tN.begin(), tN.end());
  ops.G_T.resize(2 * ops.n_points, dofs.n_dof);
  ops.G_T.setFromTriplets(tT.begin(), tT.end());
  ops.G_N_full.resize(ops.n_points, full_cols);
  ops.G_N_full.setFromTriplets(tNf.begin(), tNf.end());
  ops.G_T_full.resize(2 * ops.n_points, full_cols);
  ops.G_T_full.setFromTriplets(tTf.begin(), tTf.end());
  ops.M_c.resize(ops.n_points, ops.n_points);
  ops.M_c.setFromTriplets(tM.begin(), tM.end());
  ops.G_N.makeCompressed();
  ops.G_T.makeCompressed();
  ops.G_N_full.makeCompressed();
  ops.G_T_full.makeCompressed();
  ops.M_c.makeCompressed();
  return ops;
}

FrictionField FrictionField::constant_per_interface(const CouplingOperators& ops,
                                                    const std::vector<double>& g) {
  if (g.size() + 1 != ops.interface_offset.size())
    throw std::invalid_argument("need one friction bound per interface");
  FrictionField f;
  f.interface_offset = ops.interface_offset;
  f.bound.resize(ops.n_points);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] < 0.0) throw std::invalid_argument("friction bound must be nonnegative");
    for (int p = ops.interface_offset[i]; p < ops.interface_offset[i + 1]; ++p)
      f.bound[p] = g[i];
  }
  return f;
}

FrictionField nodal_friction(const std::vector<ContactPairing>& pairings,
                             const std::vector<double>& g) {
  if (g.size() != pairings.size())
    throw std::invalid_argument("need one friction bound per interface");
  FrictionField f;
  f.interface_offset.push_back(0);
  std::vector<double> values;
  for (std::size_t i = 0; i < pairings.size(); ++i) {
    if (g[i] < 0.0) throw std::invalid_argument("friction bound must be nonnegative");
    int count = 0;
    for (auto free : pairings[i].pair_free)
      if (free) ++count;
    values.insert(values.end(), count, g[i]);
    f.interface_offset.push_back(f.interface_offset.back() + count);
  }
  f.bound = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return f;
}

MultiplierVector MultiplierVector::zero(const CouplingOperators& ops) {
  MultiplierVector mu;
  mu.kind = ops.kind;
  mu.interface_offset = ops.interface_offset;
  mu.normal = Eigen::VectorXd::Zero(ops.n_points);
  mu.tangential = Eigen::VectorXd::Zero(2 * ops.n_points);
  return mu;
}

Eigen::VectorXd MultiplierVector::stacked() const {
  Eigen::VectorXd x(normal.size() + tangential.size());
  x << normal, tangential;
  return x;
}

MultiplierVector MultiplierVector::from_stacked(const CouplingOperators& ops,
                                                const Eigen::VectorXd& x) {
  MultiplierVector mu = zero(ops);
  mu.normal = x.head(ops.n_points);
  mu.tangential = x.tail(2 * ops.n_points);
  return mu;
}

bool MultiplierVector::feasible(const FrictionField& g, double tol) const {
  for (int p = 0; p < normal.size(); ++p) {
    if (normal[p] < -tol) return false;
    const double tmag = std::hypot(tangential[2 * p], tangential[2 * p + 1]);
    if (tmag > g.bound[p] + tol) return false;
  }
  return true;
}

JumpValues jump_values_full(const TetMesh& mesh, const Eigen::VectorXd& full_nodal,
                            const ContactPairing& pr) {
  JumpValues jv;
  const int np = pr.pair_count();
  jv.normal.resize(np);
  jv.tangential.resize(np, 2);
  for (int p = 0; p < np; ++p) {
    const int ga = 3 * mesh.global_node(pr.layer_above, pr.node_pairs[p].first);
    const int gb = 3 * mesh.global_node(pr.layer_below, pr.node_pairs[p].second);
    jv.normal[p] = full_nodal[gb + 2] - full_nodal[ga + 2];
    jv.tangential(p, 0) = full_nodal[ga + 0] - full_nodal[gb + 0];
    jv.tangential(p, 1) = full_nodal[ga + 1] - full_nodal[gb + 1];
  }
  return jv;
}

JumpValues jump_values(const TetMesh& mesh, const DisplacementField& u,
                       const ContactPairing& pr) {
  return jump_values_full(mesh, scatter_full(mesh, u), pr);
}

double friction_functional(const TetMesh& mesh, const DisplacementField& u,
                           const std::vector<ContactPairing>& pairings,
                           const std::vector<double>& g_per_interface) {
  return friction_functional_full(mesh, scatter_full(mesh, u), pairings, g_per_interface);
}

double friction_functional_full(const TetMesh& mesh, const Eigen::VectorXd& full,
                                const std::vector<ContactPairing>& pairings,
                                const std::vector<double>& g_per_interface) {
  if (g_per_interface.size() != pairings.size())
    throw std::invalid_argument("need one friction bound per interface");
  double j = 0.0;
  for (std::size_t k = 0; k < pairings.size(); ++k) {
    const ContactPairing& pr = pairings[k];
    const double g = g_per_interface[k];
    if (g == 0.0) continue;
    const JumpValues jv = jump_values_full(mesh, full, pr);
    std::vector<int> above_pair(mesh.layers[pr.layer_above].node_count(), -1);
    for (std::size_t p = 0; p < pr.node_pairs.size(); ++p)
      above_pair[pr.node_pairs[p].first] = static_cast<int>(p);
    for (const auto& tp : pr.tri_pairs) {
      const int pa = above_pair[tp.above[0]], pb = above_pair[tp.above[1]],
                pc = above_pair[tp.above[2]];
      for (const auto& qp : kMidpointRule) {
        const double sx = qp.w0 * jv.tangential(pa, 0) + qp.w1 * jv.tangential(pb, 0) +
                          qp.w2 * jv.tangential(pc, 0);
        const double sy = qp.w0 * jv.tangential(pa, 1) + qp.w1 * jv.tangential(pb, 1) +
                          qp.w2 * jv.tangential(pc, 1);
        j += g * std::hypot(sx, sy) * tp.area / 3.0;
      }
    }
  }
  return j;
}

void project_feasible_stacked(Eigen::VectorXd& x, int n_points, const FrictionField& g) {
  for (int p = 0; p < n_points; ++p) x[p] = std::max(0.0, x[p]);
  for (int p = 0; p < n_points; ++p) {
    double& tx = x[n_points + 2 * p];
    double& ty = x[n_points + 2 * p + 1];
    const double bound = g.bound[p];
    // Rescale until the recomputed magnitude is within the bound; rounding
    // of the first rescale can leave it one ulp above.
    for (int pass = 0; pass < 4; ++pass) {
      const double mag = std::hypot(tx, ty);
      if (mag <= bound) break;
      const double s = bound > 0.0 ? bound / mag : 0.0;
      tx *= s;
      ty *= s;
    }
  }
}

MultiplierVector project_feasible(const MultiplierVector& mu, const FrictionField& g) {
  MultiplierVector out = mu;
  Eigen::VectorXd x = mu.stacked();
  project_feasible_stacked(x, static_cast<int>(mu.normal.size()), g);
  out.normal = x.head(mu.normal.size());
  out.tangential = x.tail(mu.tangential.size());
  return out;
}

}  // namespace mlc
