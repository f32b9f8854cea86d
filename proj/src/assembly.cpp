#include "mlcontact/assembly.hpp"

#include <cmath>
#include <stdexcept>

namespace mlc {

std::pair<double, double> lame_parameters(double E, double nu) {
  if (!(E > 0.0)) throw std::invalid_argument("elastic modulus must be positive");
  if (!(nu > -1.0) || !(nu < 0.5))
    throw std::invalid_argument("Poisson ratio must lie in (-1, 0.5)");
  const double mu = E / (2.0 * (1.0 + nu));
  const double lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  return {lambda, mu};
}

IsotropicMaterial::IsotropicMaterial(double E_, double nu_) : E(E_), nu(nu_) {
  std::tie(lame_lambda, lame_mu) = lame_parameters(E_, nu_);
}

std::shared_ptr<const DofMap> make_dof_map(const TetMesh& mesh) {
  auto dm = std::make_shared<DofMap>();
  const int n = mesh.num_layers();
  dm->free_nodes.resize(n);
  dm->node_to_free.resize(n);
  dm->layer_dof_offset.assign(n + 1, 0);
  for (int li = 0; li < n; ++li) {
    const LayerMesh& lm = mesh.layers[li];
    dm->node_to_free[li].assign(lm.node_count(), -1);
    for (int v = 0; v < lm.node_count(); ++v) {
      if (!lm.node_dirichlet[v]) {
        dm->node_to_free[li][v] = static_cast<int>(dm->free_nodes[li].size());
        dm->free_nodes[li].push_back(v);
      }
    }
    dm->layer_dof_offset[li + 1] =
        dm->layer_dof_offset[li] + 3 * static_cast<int>(dm->free_nodes[li].size());
  }
  dm->n_dof = dm->layer_dof_offset[n];
  return dm;
}

std::shared_ptr<const DofMap> make_dof_map_unconstrained(const TetMesh& mesh) {
  auto dm = std::make_shared<DofMap>();
  const int n = mesh.num_layers();
  dm->free_nodes.resize(n);
  dm->node_to_free.resize(n);
  dm->layer_dof_offset.assign(n + 1, 0);
  for (int li = 0; li < n; ++li) {
    const int nn = mesh.layers[li].node_count();
    dm->free_nodes[li].resize(nn);
    dm->node_to_free[li].resize(nn);
    for (int v = 0; v < nn; ++v) {
      dm->free_nodes[li][v] = v;
      dm->node_to_free[li][v] = v;
    }
    dm->layer_dof_offset[li + 1] = dm->layer_dof_offset[li] + 3 * nn;
  }
  dm->n_dof = dm->layer_dof_offset[n];
  return dm;
}

DisplacementField DisplacementField::zero(std::shared_ptr<const DofMap> dofs) {
  DisplacementField u;
  u.values = Eigen::VectorXd::Zero(dofs->n_dof);
  u.dofs = std::move(dofs);
  return u;
}

Eigen::VectorXd scatter_full(const TetMesh& mesh, const DisplacementField& u) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(3 * mesh.total_nodes());
  for (int li = 0; li < mesh.num_layers(); ++li)
    for (std::size_t k = 0; k < u.dofs->free_nodes[li].size(); ++k) {
      const int local = u.dofs->free_nodes[li][k];
      const int g = mesh.global_node(li, local);
      for (int c = 0; c < 3; ++c)
        full[3 * g + c] = u.values[u.dofs->layer_dof_offset[li] + 3 * k + c];
    }
  return full;
}

namespace {

// Gradients of the four P1 basis functions on a tetrahedron; also returns
// the volume.
double p1_gradients(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                    std::array<Vec3, 4>& grad) {
  Eigen::Matrix3d J;
  J.col(0) = b - a;
  J.col(1) = c - a;
  J.col(2) = d - a;
  const double det = J.determinant();
  const Eigen::Matrix3d Jinv = J.inverse();
  // Reference gradients are -1 (node 0) and unit vectors; map by J^{-T}.
  grad[1] = Jinv.row(0);
  grad[2] = Jinv.row(1);
  grad[3] = Jinv.row(2);
  grad[0] = -(grad[1] + grad[2] + grad[3]);
  return det / 6.0;
}

}  // namespace

Eigen::Matrix<double, 12, 12> element_stiffness(const Vec3& a, const Vec3& b, const Vec3& c,
                                                const Vec3& d, const IsotropicMaterial& mat) {
  std::array<Vec3, 4> g;
  const double vol = p1_gradients(a, b, c, d, g);
  Eigen::Matrix<double, 12, 12> Ke;
  const double lam = mat.lame_lambda, mu = mat.lame_mu;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      Eigen::Matrix3d block = lam * g[i] * g[j].transpose() + mu * g[j] * g[i].transpose() +
                              mu * g[i].dot(g[j]) * Eigen::Matrix3d::Identity();
      Ke.block<3, 3>(3 * i, 3 * j) = vol * block;
    }
  // Symmetrise exactly so transposed entries accumulate identically.
  Ke = ((Ke + Ke.transpose()) * 0.5).eval();
  return Ke;
}

SparseSymmetric assemble_stiffness(const TetMesh& mesh,
                                   const std::vector<IsotropicMaterial>& materials,
                                   std::shared_ptr<const DofMap> dofs) {
  if (!dofs) dofs = make_dof_map(mesh);
  std::vector<Eigen::Triplet<double>> trip;
  for (int li = 0; li < mesh.num_layers(); ++li) {
    const LayerMesh& lm = mesh.layers[li];
    const IsotropicMaterial& mat = materials.at(mesh.spec.layers[li].material);
    for (const auto& t : lm.tets) {
      const auto Ke = element_stiffness(lm.nodes[t[0]], lm.nodes[t[1]], lm.nodes[t[2]],
                                        lm.nodes[t[3]], mat);
      for (int i = 0; i < 4; ++i)
        for (int ci = 0; ci < 3; ++ci) {
          const int row = dofs->dof(li, t[i], ci);
          if (row < 0) continue;
          for (int j = 0; j < 4; ++j)
            for (int cj = 0; cj < 3; ++cj) {
              const int col = dofs->dof(li, t[j], cj);
              if (col < 0) continue;
              trip.emplace_back(row, col, Ke(3 * i + ci, 3 * j + cj));
            }
        }
    }
  }
  SparseSymmetric K;
  K.mat.resize(dofs->n_dof, dofs->n_dof);
  K.mat.setFromTriplets(trip.begin(), trip.end());
  K.mat.makeCompressed();
  K.dofs = std::move(dofs);
  return K;
}

SpMat SparseSymmetric::layer_block(int layer) const {
  const int off = dofs->layer_dof_offset[layer];
  const int n = dofs->layer_dof_count(layer);
  return mat.block(off, off, n, n);
}

namespace {

// Integral of basis * patch indicator over one boundary triangle, by
// recursive subdivision with a midpoint rule on the partially covered
// leaves. Exact whenever the patch boundary follows grid lines.
constexpr int kPatchSubdivDepth = 4;

struct PatchRect {
  double x0, x1, y0, y1;
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

// position of triangle vs patch: 0 outside, 1 inside, 2 straddling
int classify(const Vec3& a, const Vec3& b, const Vec3& c, const PatchRect& p) {
  const double xmin = std::min({a.x(), b.x(), c.x()}), xmax = std::max({a.x(), b.x(), c.x()});
  const double ymin = std::min({a.y(), b.y(), c.y()}), ymax = std::max({a.y(), b.y(), c.y()});
  if (xmin >= p.x0 && xmax <= p.x1 && ymin >= p.y0 && ymax <= p.y1) return 1;
  if (xmax <= p.x0 || xmin >= p.x1 || ymax <= p.y0 || ymin >= p.y1) return 0;
  return 2;
}

// Accumulates integrals of the three P1 basis functions (barycentric w.r.t.
// the *root* triangle) over the patch-covered part of the triangle.
void patch_basis_integrals(const Vec3& a, const Vec3& b, const Vec3& c,
                           const Eigen::Vector3d& wa, const Eigen::Vector3d& wb,
                           const Eigen::Vector3d& wc, const PatchRect& patch, int depth,
                           Eigen::Vector3d& out) {
  const int cls = classify(a, b, c, patch);
  if (cls == 0) return;
  const double area = 0.5 * (b - a).cross(c - a).norm();
  if (cls == 1) {
    // Linear integrand: exact with the centroid value.
    out += area * (wa + wb + wc) / 3.0;
    return;
  }
  if (depth == 0) {
    const Vec3 ctr = (a + b + c) / 3.0;
    if (patch.contains(ctr.x(), ctr.y())) out += area * (wa + wb + wc) / 3.0;
    return;
  }
  const Vec3 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  const Eigen::Vector3d wab = 0.5 * (wa + wb), wbc = 0.5 * (wb + wc), wca = 0.5 * (wc + wa);
  patch_basis_integrals(a, ab, ca, wa, wab, wca, patch, depth - 1, out);
  patch_basis_integrals(ab, b, bc, wab, wb, wbc, patch, depth - 1, out);
  patch_basis_integrals(ca, bc, c, wca, wbc, wc, patch, depth - 1, out);
  patch_basis_integrals(ab, bc, ca, wab, wbc, wca, patch, depth - 1, out);
}

}  // namespace

Eigen::VectorXd assemble_loads(const TetMesh& mesh, const LoadSpec& loads, const DofMap& dofs) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(dofs.n_dof);
  if (loads.body_force.size() != static_cast<std::size_t>(mesh.num_layers()))
    throw std::invalid_argument("need one body force per layer");

  for (int li = 0; li < mesh.num_layers(); ++li) {
    const LayerMesh& lm = mesh.layers[li];
    const Vec3& f0 = loads.body_force[li];
    if (!f0.isZero()) {
      for (const auto& t : lm.tets) {
        const double vol = tet_volume(lm.nodes[t[0]], lm.nodes[t[1]], lm.nodes[t[2]], lm.nodes[t[3]]);
        for (int i = 0; i < 4; ++i)
          for (int c = 0; c < 3; ++c) {
            const int row = dofs.dof(li, t[i], c);
            if (row >= 0) f[row] += 0.25 * vol * f0[c];
          }
      }
    }
  }

  const TractionPatch& tp = loads.traction;
  if (!tp.traction.isZero() && tp.x1 > tp.x0 && tp.y1 > tp.y0) {
    const LayerMesh& lm = mesh.layers[0];
    const PatchRect rect{tp.x0, tp.x1, tp.y0, tp.y1};
    for (const auto& tri : lm.boundary) {
      if (tri.tag != FacetTag::TractionTop) continue;
      Eigen::Vector3d integrals = Eigen::Vector3d::Zero();
      patch_basis_integrals(lm.nodes[tri.nodes[0]], lm.nodes[tri.nodes[1]],
                            lm.nodes[tri.nodes[2]], Eigen::Vector3d(1, 0, 0),
                            Eigen::Vector3d(0, 1, 0), Eigen::Vector3d(0, 0, 1), rect,
                            kPatchSubdivDepth, integrals);
      for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 3; ++c) {
          const int row = dofs.dof(0, tri.nodes[i], c);
          if (row >= 0) f[row] += integrals[i] * tp.traction[c];
        }
    }
  }
  return f;
}

Eigen::Matrix3d compute_element_stress(const TetMesh& mesh,
                                       const std::vector<IsotropicMaterial>& materials,
                                       const DisplacementField& u, int layer, int elem) {
  const LayerMesh& lm = mesh.layers.at(layer);
  const auto& t = lm.tets.at(elem);
  std::array<Vec3, 4> g;
  p1_gradients(lm.nodes[t[0]], lm.nodes[t[1]], lm.nodes[t[2]], lm.nodes[t[3]], g);
  Eigen::Matrix3d gradu = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 4; ++i) {
    Vec3 ui = Vec3::Zero();
    for (int c = 0; c < 3; ++c) {
      const int dof = u.dofs->dof(layer, t[i], c);
      if (dof >= 0) ui[c] = u.values[dof];
    }
    gradu += ui * g[i].transpose();
  }
  const Eigen::Matrix3d eps = 0.5 * (gradu + gradu.transpose());
  const IsotropicMaterial& mat = materials.at(mesh.spec.layers[layer].material);
  return mat.lame_lambda * eps.trace() * Eigen::Matrix3d::Identity() + 2.0 * mat.lame_mu * eps;
}

double energy_norm(const SparseSymmetric& K, const Eigen::VectorXd& u) {
  if (u.size() != K.dim()) throw std::invalid_argument("energy_norm: dimension mismatch");
  return std::sqrt(std::max(0.0, u.dot(K.mat * u)) / 2.0);
}

double energy_norm_layer(const SparseSymmetric& K, const Eigen::VectorXd& u, int layer) {
  if (u.size() != K.dim()) throw std::invalid_argument("energy_norm: dimension mismatch");
  const int off = K.dofs->layer_dof_offset[layer];
  const int n = K.dofs->layer_dof_count(layer);
  const Eigen::VectorXd ul = u.segment(off, n);
  const SpMat Kl = K.layer_block(layer);
  return std::sqrt(std::max(0.0, ul.dot(Kl * ul)) / 2.0);
}

double evaluate_primal_objective(const SparseSymmetric& K, const Eigen::VectorXd& f,
                                 const Eigen::VectorXd& u, double friction_j) {
  if (u.size() != K.dim() || f.size() != K.dim())
    throw std::invalid_argument("primal objective: dimension mismatch");
  return 0.5 * u.dot(K.mat * u) + friction_j - f.dot(u);
}

}  // namespace mlc
