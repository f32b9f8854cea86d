#pragma once

#include "mlcontact/contact.hpp"
#include "mlcontact/solver_mfem.hpp"

#include <vector>

namespace mlc {

struct LdmConfig {
  // Relaxation default from a bracketing sweep on coarse benchmark meshes:
  // 0.1 oscillates below h = 1.6, 0.05 converges on every tested size and
  // halving it keeps convergence.
  double theta = 0.05;
  double tol = 1e-6;  // relative interface-change threshold
  int max_outer = 1000;
  PgConfig inner;  // per-layer dual QP solves
  int oscillation_window = 25;

  LdmConfig() { inner.tol = 1e-9; }
};

enum class LdmStatus { Converged, MaxOuterReached, Oscillating };

struct LdmReport {
  LdmStatus status = LdmStatus::Converged;
  int outer_iterations = 0;
  std::vector<double> eps_history;       // relative trace change per outer step
  std::vector<int> inner_iterations;     // summed over layers, per outer step
  double wall_time_s = 0.0;
};

/// Interface displacement traces, one vector per interface with (x,y,z)
/// values at the contact node pairs that carry unknowns.
struct InterfaceTraces {
  std::vector<Eigen::VectorXd> lambda;
};

/// Per-layer dual QP of the decomposition step. The constraint stack B holds
/// the outward-normal rows, the tangential-trace rows and the upper-interface
/// coupling rows; C = B A^{-1} B^T is built once per layer and reused across
/// outer iterations (only the linear term depends on the traces).
struct LayerDualQp {
  int layer = 0;
  int m_lower = 0;  // contact nodes on the layer's lower face
  int m_upper = 0;  // coupled nodes on the layer's upper face
  // Layer-local dof indices (within the layer block) of the contact nodes,
  // 3 per node.
  std::vector<int> lower_dofs;
  std::vector<int> upper_dofs;
  Eigen::VectorXd g_lumped;  // friction bound * basis weight, per lower node
  Eigen::VectorXd u0;        // A^{-1} b for the current loads
  Eigen::VectorXd b;
  Eigen::MatrixXd C;         // dense when small
  bool explicit_C = false;
  double lipschitz = 0.0;

  int dim() const { return 4 * m_lower + 3 * m_upper; }
  Eigen::VectorXd apply_B(const Eigen::VectorXd& v) const;
  Eigen::VectorXd apply_B_transpose(const Eigen::VectorXd& omega) const;
};

LayerDualQp build_layer_dual(const TetMesh& mesh, const CholeskyFactor& factor,
                             const std::vector<ContactPairing>& pairings,
                             const FrictionField& nodal_friction, const Eigen::VectorXd& f,
                             int layer);

/// Linear term of the layer QP for the current interface traces; traces are
/// per-interface (x,y,z) vectors, empty for out-of-range neighbours.
Eigen::VectorXd layer_dual_linear_term(const LayerDualQp& qp, const Eigen::VectorXd& trace_lower,
                                       const Eigen::VectorXd& trace_upper);

struct LdmSolution {
  DisplacementField u;
  InterfaceTraces traces;
  LdmReport report;
  std::vector<Eigen::VectorXd> omega;  // per-layer dual iterates (last outer step)
};

/// Layer decomposition method: per-layer dual QPs coupled through relaxed
/// interface-trace updates. `nodal_friction` must be sampled on the nodal
/// multiplier layout (one value per free contact node pair).
LdmSolution solve_ldm(const TetMesh& mesh, const SparseSymmetric& K, const CholeskyFactor& factor,
                      const Eigen::VectorXd& f, const std::vector<ContactPairing>& pairings,
                      const FrictionField& nodal_friction, const LdmConfig& cfg);

/// Convenience overload that assembles the system itself.
LdmSolution solve_ldm(const TetMesh& mesh, const std::vector<IsotropicMaterial>& materials,
                      const LoadSpec& loads, const std::vector<double>& g_per_interface,
                      const LdmConfig& cfg);

inline const std::vector<double>& ldm_energy_trace(const LdmReport& report) {
  return report.eps_history;
}

}  // namespace mlc
