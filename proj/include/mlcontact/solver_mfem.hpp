#pragma once

#include "mlcontact/assembly.hpp"
#include "mlcontact/contact.hpp"
#include "mlcontact/projected_gradient.hpp"

#include <Eigen/SparseCholesky>

#include <memory>
#include <stdexcept>
#include <vector>

namespace mlc {

struct NotPositiveDefinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sparse Cholesky of the layer-block-diagonal stiffness; one factor per
/// layer block.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(const SparseSymmetric& K);

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  /// Solve with one layer block only; `b` has the layer's dof count.
  Eigen::VectorXd solve_layer(int layer, const Eigen::VectorXd& b) const;
  int dim() const { return dim_; }
  const std::shared_ptr<const DofMap>& dofs() const { return dofs_; }

 private:
  std::vector<std::unique_ptr<Eigen::SimplicialLLT<SpMat>>> blocks_;
  std::shared_ptr<const DofMap> dofs_;
  int dim_ = 0;
};

CholeskyFactor factorize(const SparseSymmetric& K);

struct SolverConfig {
  double tol = 1e-8;
  int max_iter = 50000;
  bool adaptive_restart = true;
  int power_iterations = 50;
};

struct KktResiduals {
  double penetration = 0.0;          // max positive pointwise normal gap
  double complementarity = 0.0;      // |lambda_N' G_N u|
  double friction_consistency = 0.0; // sum over points of the slip-law defect
  double bound_excess = 0.0;         // max(0, |lambda_T| - g)
};

enum class SolveStatus { Converged, MaxIterReached };

struct SolveReport {
  SolveStatus status = SolveStatus::Converged;
  int iterations = 0;
  int restarts = 0;
  double pg_norm = 0.0;
  double dual_objective = 0.0;
  KktResiduals kkt;
  double wall_time_s = 0.0;
  std::vector<double> objective_history;
};

/// Dual quadratic program over the multipliers:
///   min 1/2 mu' C mu - mu' d,   C = G K^{-1} G',  d = G K^{-1} f.
/// C is materialised densely for small multiplier counts and applied
/// through two triangular solves otherwise.
struct DualQp {
  const CholeskyFactor* factor = nullptr;
  const CouplingOperators* ops = nullptr;
  Eigen::VectorXd d;
  Eigen::MatrixXd C_dense;
  bool explicit_C = false;
  double lipschitz = 0.0;          // safeguarded: 1.05 * estimate
  double lipschitz_estimate = 0.0; // raw power-iteration value

  int dim() const { return static_cast<int>(d.size()); }
  Eigen::VectorXd apply_C(const Eigen::VectorXd& mu) const;
};

/// Dense C is built when the multiplier dimension 3*N_l stays below this.
constexpr int kExplicitSchurLimit = 3000;

DualQp build_dual(const CholeskyFactor& factor, const CouplingOperators& ops,
                  const Eigen::VectorXd& f, int power_iterations = 50);

std::pair<MultiplierVector, SolveReport> solve_dual(const DualQp& qp, const FrictionField& g,
                                                    const SolverConfig& cfg);

DisplacementField recover_displacement(const CholeskyFactor& factor, const Eigen::VectorXd& f,
                                       const CouplingOperators& ops,
                                       const MultiplierVector& lambda);

KktResiduals kkt_report(const TetMesh& mesh, const DisplacementField& u,
                        const MultiplierVector& lambda, const CouplingOperators& ops,
                        const FrictionField& g, const std::vector<ContactPairing>& pairings);

/// Numerical inf-sup proxy: sqrt of the smallest generalized eigenvalue of
/// C = G K^{-1} G' against the block-diagonal contact Gram. Returns 0 when
/// C is singular on the multiplier space.
double estimate_infsup(const CholeskyFactor& factor, const CouplingOperators& ops);

/// End-to-end solve on an assembled system; the harness and tests share it.
struct MfemSolution {
  DisplacementField u;
  MultiplierVector lambda;
  SolveReport report;
  double equilibrium_residual = 0.0;  // ||K u + G' lambda - f|| / ||f||
};

MfemSolution solve_mfem(const TetMesh& mesh, const SparseSymmetric& K,
                        const CholeskyFactor& factor, const Eigen::VectorXd& f,
                        const CouplingOperators& ops, const FrictionField& g,
                        const std::vector<ContactPairing>& pairings, const SolverConfig& cfg);

}  // namespace mlc
