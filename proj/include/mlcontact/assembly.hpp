#pragma once

#include "mlcontact/mesh.hpp"

#include <Eigen/Sparse>

#include <memory>
#include <optional>
#include <vector>

namespace mlc {

/// Isotropic linear-elastic material. The spectral bounds of the elasticity
/// tensor are a_min = 2*mu (deviatoric part) and a_max = 3*lambda + 2*mu
/// (volumetric part).
struct IsotropicMaterial {
  double E = 0.0;
  double nu = 0.0;
  double lame_lambda = 0.0;
  double lame_mu = 0.0;

  IsotropicMaterial() = default;
  IsotropicMaterial(double E_, double nu_);

  double a_min() const { return 2.0 * lame_mu; }
  double a_max() const { return 3.0 * lame_lambda + 2.0 * lame_mu; }
};

std::pair<double, double> lame_parameters(double E, double nu);

/// Body force per layer plus one rectangular traction patch on the top face.
struct TractionPatch {
  Vec3 traction = Vec3::Zero();
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
};

struct LoadSpec {
  std::vector<Vec3> body_force;  // one per layer
  TractionPatch traction;
};

/// Free (non-Dirichlet) displacement unknowns, ordered layer by layer so the
/// stiffness matrix is block diagonal per layer.
struct DofMap {
  std::vector<std::vector<int>> free_nodes;    // per layer, sorted local ids
  std::vector<std::vector<int>> node_to_free;  // per layer, -1 when clamped
  std::vector<int> layer_dof_offset;           // size n_layers+1, in scalar dofs
  int n_dof = 0;

  int dof(int layer, int local_node, int comp) const {
    const int f = node_to_free[layer][local_node];
    return f < 0 ? -1 : layer_dof_offset[layer] + 3 * f + comp;
  }
  int layer_dof_count(int layer) const {
    return layer_dof_offset[layer + 1] - layer_dof_offset[layer];
  }
};

std::shared_ptr<const DofMap> make_dof_map(const TetMesh& mesh);
/// Variant that ignores the mesh Dirichlet flags (all nodes free); used for
/// whole-space checks such as rigid-body kernels.
std::shared_ptr<const DofMap> make_dof_map_unconstrained(const TetMesh& mesh);

using SpMat = Eigen::SparseMatrix<double>;

/// Dirichlet-eliminated global stiffness; block diagonal per layer.
struct SparseSymmetric {
  SpMat mat;
  std::shared_ptr<const DofMap> dofs;

  int dim() const { return static_cast<int>(mat.rows()); }
  SpMat layer_block(int layer) const;
};

struct DisplacementField {
  Eigen::VectorXd values;  // 3 * free node count
  std::shared_ptr<const DofMap> dofs;

  static DisplacementField zero(std::shared_ptr<const DofMap> dofs);
};

/// Scatter to a full nodal vector (3 * total nodes, Dirichlet entries zero).
Eigen::VectorXd scatter_full(const TetMesh& mesh, const DisplacementField& u);

SparseSymmetric assemble_stiffness(const TetMesh& mesh,
                                   const std::vector<IsotropicMaterial>& materials,
                                   std::shared_ptr<const DofMap> dofs = nullptr);

Eigen::VectorXd assemble_loads(const TetMesh& mesh, const LoadSpec& loads,
                               const DofMap& dofs);

/// 12x12 element stiffness of a single tetrahedron (dof order: node-major,
/// xyz per node).
Eigen::Matrix<double, 12, 12> element_stiffness(const Vec3& a, const Vec3& b, const Vec3& c,
                                                const Vec3& d, const IsotropicMaterial& mat);

Eigen::Matrix3d compute_element_stress(const TetMesh& mesh,
                                       const std::vector<IsotropicMaterial>& materials,
                                       const DisplacementField& u, int layer, int elem);

/// (1/sqrt(2)) * a(u,u)^{1/2}; the natural error norm for the problem.
double energy_norm(const SparseSymmetric& K, const Eigen::VectorXd& u);
double energy_norm_layer(const SparseSymmetric& K, const Eigen::VectorXd& u, int layer);

/// J(v) = 1/2 a(v,v) + j(v) - L(v); `friction_j` is evaluated by the caller
/// (contact module) so the assembly stays contact-agnostic.
double evaluate_primal_objective(const SparseSymmetric& K, const Eigen::VectorXd& f,
                                 const Eigen::VectorXd& u, double friction_j);

}  // namespace mlc
