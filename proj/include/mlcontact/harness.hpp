#pragma once

#include "mlcontact/contact.hpp"
#include "mlcontact/solver_ldm.hpp"
#include "mlcontact/solver_mfem.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

namespace mlc {

enum class SolverSelection { Mfem, Ldm, Both };

struct ExperimentConfig {
  LayerStackSpec geometry;
  std::vector<IsotropicMaterial> materials;
  std::vector<Vec3> body_force;  // per layer
  TractionPatch traction;
  std::vector<double> friction;  // one bound per interface
  std::vector<double> h_list;
  ContactSpaceKind contact_space = ContactSpaceKind::NodalLinear;
  SolverSelection solver = SolverSelection::Mfem;
  SolverConfig mfem;
  LdmConfig ldm;
  std::string out_dir = "out";

  LoadSpec loads() const;
  void validate() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json serialize_config(const ExperimentConfig& cfg);

/// Paper benchmark: 8x4 footprint, layers 0.4/0.8/1.6, pavement materials,
/// gravity plus an off-centre surface load patch.
ExperimentConfig benchmark_config();
/// Refinement-study companion: 4x2 footprint with three 0.5-thick layers so
/// every 2-adic h gives nested grids.
ExperimentConfig convergence_config();

/// One assembled problem instance, shared by the solver front-ends.
struct Problem {
  TetMesh mesh;
  std::vector<ContactPairing> pairings;
  SparseSymmetric K;
  std::unique_ptr<CholeskyFactor> factor;
  Eigen::VectorXd f;
  double assembly_time_s = 0.0;
  double factor_time_s = 0.0;
};

Problem build_problem(const ExperimentConfig& cfg, double h);

struct RunResult {
  double h = 0.0;
  int dof = 0;
  int multiplier_points = 0;
  MfemSolution mfem;
  LdmSolution ldm;
  bool ran_mfem = false;
  bool ran_ldm = false;
};

/// End-to-end pipeline for each h in the config; writes per-layer VTK fields
/// and a JSON report into the output directory.
std::vector<RunResult> run_benchmark(const ExperimentConfig& cfg);

struct ErrorTable {
  // Per row: H, then per-layer absolute and relative vector errors between
  // the elementwise-constant and nodal-linear solutions.
  struct Row {
    double H = 0.0;
    std::vector<double> abs_err;
    std::vector<double> rel_err;
  };
  std::vector<Row> rows;
};

ErrorTable compare_contact_spaces(const ExperimentConfig& cfg);

struct SolverComparison {
  double h = 0.0;
  // Energy norm of the field difference, relative, per layer and total. The
  // two discretisations treat the interface differently (consistent moments
  // vs nodal traces), so this floors at a mesh-dependent level.
  std::vector<double> rel_field_diff;
  double total_rel_field_diff = 0.0;
  // Relative difference of the total deformation energies.
  double total_rel_energy_diff = 0.0;
  double stick_slip_overlap = 0.0;  // fraction agreeing on interface 1
  LdmStatus ldm_status = LdmStatus::Converged;
  bool ldm_ok = false;
};

SolverComparison compare_solvers(const ExperimentConfig& cfg);

struct ConvergenceReport {
  struct Row {
    double H = 0.0;
    long long dof = 0;
    double rel_err_total = 0.0;
    std::vector<double> rel_err_layer;
    double runtime_s = 0.0;
  };
  std::vector<Row> rows;  // coarse meshes only; the finest is the reference
  double reference_H = 0.0;
  long long reference_dof = 0;
  double fitted_order = 0.0;
};

ConvergenceReport convergence_study(const ExperimentConfig& cfg, bool require_nested = false);

/// P1 interpolation of a coarse solution onto the nodes of a fine mesh of
/// the same stack (point evaluation; exact when the grids nest).
DisplacementField interpolate_to(const TetMesh& coarse_mesh, const DisplacementField& coarse_u,
                                 const TetMesh& fine_mesh,
                                 std::shared_ptr<const DofMap> fine_dofs);

void export_vtk(const TetMesh& mesh, int layer, const DisplacementField& u,
                const std::string& path);
void export_error_table_csv(const ErrorTable& table, int n_layers, const std::string& path);
void export_convergence_csv(const ConvergenceReport& report, int n_layers,
                            const std::string& path);
/// |[u_T]| sampled on the paired interface grid, one CSV row per grid line.
void export_slip_map_csv(const TetMesh& mesh, const ContactPairing& pairing,
                         const DisplacementField& u, const std::string& path);

}  // namespace mlc
