#pragma once

#include "mlcontact/assembly.hpp"
#include "mlcontact/mesh.hpp"

#include <Eigen/Sparse>

#include <vector>

namespace mlc {

/// Multiplier discretisation on the contact triangulation: one point per
/// contact triangle (piecewise constant) or one per contact node (nodal
/// linear). Nodal multipliers are placed only at pairs that carry
/// displacement unknowns; points on the clamped footprint boundary would
/// pair against identically zero jumps and make the coupling rank
/// deficient.
enum class ContactSpaceKind {
  ElementwiseConstant,
  NodalLinear,
};

using SpMatR = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Sparse jump-moment operators for all interfaces.
///
/// Row p of G_N applied to a displacement vector gives
///   integral of psi_p * [v_N]  with  [v_N] = v_below.z - v_above.z,
/// rows (2p, 2p+1) of G_T give the x and y moments of
///   [v_T] = v_above.xy - v_below.xy.
///
/// Both a free-dof version (columns = displacement unknowns) and a full
/// nodal version (columns = 3 * total node count) are kept; the full one
/// lets synthetic whole-layer fields be tested directly.
struct CouplingOperators {
  ContactSpaceKind kind = ContactSpaceKind::NodalLinear;
  int n_points = 0;                   // N_l over all interfaces
  std::vector<int> interface_offset;  // size n_interfaces+1

  SpMatR G_N;       // N_l x n_dof
  SpMatR G_T;       // 2*N_l x n_dof
  SpMatR G_N_full;  // N_l x 3*total_nodes
  SpMatR G_T_full;  // 2*N_l x 3*total_nodes

  SpMat M_c;                   // N_l x N_l Gram of the multiplier basis
  Eigen::VectorXd point_weight;  // integral of psi_p over the interface
  std::vector<Vec2> point_xy;    // multiplier point positions

  int n_interfaces() const { return static_cast<int>(interface_offset.size()) - 1; }
  int interface_of_point(int p) const;

  /// Stacked application [G_N; G_T] * u on free dofs.
  Eigen::VectorXd apply(const Eigen::VectorXd& u_free) const;
  /// Transposed stacked application G^T * mu (mu = [mu_N; mu_T]).
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& mu) const;
};

CouplingOperators assemble_coupling(const TetMesh& mesh,
                                    const std::vector<ContactPairing>& pairings,
                                    ContactSpaceKind kind, const DofMap& dofs);

/// Slip bound g >= 0 sampled at each multiplier point.
struct FrictionField {
  Eigen::VectorXd bound;              // per multiplier point
  std::vector<int> interface_offset;  // matches the coupling operators

  static FrictionField constant_per_interface(const CouplingOperators& ops,
                                              const std::vector<double>& g);
};

/// Constant-per-interface bounds on the nodal multiplier layout, without
/// needing assembled coupling operators (used by the layer decomposition).
FrictionField nodal_friction(const std::vector<ContactPairing>& pairings,
                             const std::vector<double>& g);

/// Contact multipliers: scalar normal part and in-plane tangential part
/// (two components per point; all interfaces are horizontal, so the
/// tangential stress has no z component).
struct MultiplierVector {
  ContactSpaceKind kind = ContactSpaceKind::NodalLinear;
  std::vector<int> interface_offset;
  Eigen::VectorXd normal;      // N_l
  Eigen::VectorXd tangential;  // 2*N_l

  static MultiplierVector zero(const CouplingOperators& ops);
  Eigen::VectorXd stacked() const;
  static MultiplierVector from_stacked(const CouplingOperators& ops, const Eigen::VectorXd& x);
  bool feasible(const FrictionField& g, double tol = 0.0) const;
};

/// Pointwise jumps at the paired nodes of one interface.
struct JumpValues {
  Eigen::VectorXd normal;      // [u_N] per node pair
  Eigen::MatrixX2d tangential; // [u_T] per node pair
};

JumpValues jump_values(const TetMesh& mesh, const DisplacementField& u,
                       const ContactPairing& pairing);
JumpValues jump_values_full(const TetMesh& mesh, const Eigen::VectorXd& full_nodal,
                            const ContactPairing& pairing);

/// j(u) = sum_i integral of g |[u_T]| over the interface, with a degree-2
/// triangle rule on the P1-interpolated slip.
double friction_functional(const TetMesh& mesh, const DisplacementField& u,
                           const std::vector<ContactPairing>& pairings,
                           const std::vector<double>& g_per_interface);
double friction_functional_full(const TetMesh& mesh, const Eigen::VectorXd& full_nodal,
                                const std::vector<ContactPairing>& pairings,
                                const std::vector<double>& g_per_interface);

/// Euclidean projection onto the feasible set: clamps the normal part to
/// [0, inf) and the tangential 2-vectors into their g-balls.
MultiplierVector project_feasible(const MultiplierVector& mu, const FrictionField& g);

/// In-place stacked version used by the solvers.
void project_feasible_stacked(Eigen::VectorXd& x, int n_points, const FrictionField& g);

}  // namespace mlc
