#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mlcontact/solver_ldm.hpp"

using namespace mlc;

namespace {

LayerStackSpec paper_geometry() {
  LayerStackSpec spec;
  spec.x_max = 8;
  spec.y_max = 4;
  spec.z_top = 2.8;
  spec.layers = {{0.4, 0}, {0.8, 1}, {1.6, 2}};
  return spec;
}

std::vector<IsotropicMaterial> paper_materials() {
  return {IsotropicMaterial(5e3, 0.25), IsotropicMaterial(2e3, 0.25), IsotropicMaterial(2e2, 0.4)};
}

LoadSpec paper_loads() {
  LoadSpec loads;
  loads.body_force.assign(3, Vec3(0, 0, -0.05));
  loads.traction.traction = Vec3(0, -4.5, -22.5);
  loads.traction.x0 = 3.8;
  loads.traction.x1 = 4.4;
  loads.traction.y0 = 1.8;
  loads.traction.y1 = 2.2;
  return loads;
}

struct System {
  TetMesh mesh;
  std::vector<ContactPairing> pairings;
  SparseSymmetric K;
  std::unique_ptr<CholeskyFactor> factor;
  Eigen::VectorXd f;
  FrictionField g;
};

System make_system(double h, const LoadSpec& loads, const std::vector<double>& gvals) {
  System s;
  s.mesh = build_layer_stack(paper_geometry(), h);
  s.pairings = extract_all_pairings(s.mesh);
  s.K = assemble_stiffness(s.mesh, paper_materials());
  s.factor = std::make_unique<CholeskyFactor>(s.K);
  s.f = assemble_loads(s.mesh, loads, *s.K.dofs);
  s.g = nodal_friction(s.pairings, gvals);
  return s;
}

}  // namespace

TEST_CASE("zero loads converge in one outer iteration with zero traces") {
  LoadSpec loads;
  loads.body_force.assign(3, Vec3::Zero());
  System s = make_system(0.8, loads, {0.2, 0.05});
  LdmConfig cfg;
  const LdmSolution sol = solve_ldm(s.mesh, s.K, *s.factor, s.f, s.pairings, s.g, cfg);
  CHECK(sol.report.status == LdmStatus::Converged);
  CHECK(sol.report.outer_iterations == 1);
  REQUIRE(sol.report.eps_history.size() == 1);
  CHECK(sol.report.eps_history[0] == 0.0);
  CHECK(sol.u.values.norm() == 0.0);
  for (const auto& lam : sol.traces.lambda) CHECK(lam.norm() == 0.0);
}

TEST_CASE("layer dual blocks have the documented shapes") {
  System s = make_system(0.8, paper_loads(), {0.2, 0.05});
  const LayerDualQp q1 = build_layer_dual(s.mesh, *s.factor, s.pairings, s.g, s.f, 0);
  const LayerDualQp q2 = build_layer_dual(s.mesh, *s.factor, s.pairings, s.g, s.f, 1);
  const LayerDualQp q3 = build_layer_dual(s.mesh, *s.factor, s.pairings, s.g, s.f, 2);

  const int m1 = q1.m_lower;
  CHECK(m1 > 0);
  CHECK(q1.m_upper == 0);                   // no coupling block for the top layer
  CHECK(q1.dim() == 4 * m1);
  CHECK(q2.dim() == 4 * q2.m_lower + 3 * m1);
  CHECK(q3.m_lower == 0);                   // bottom layer carries only the coupling block
  CHECK(q3.dim() == 3 * q2.m_lower);

  // C matches the dense reconstruction from B and the layer solve.
  const int dim = q1.dim();
  Eigen::MatrixXd C(dim, dim);
  for (int j = 0; j < dim; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e[j] = 1.0;
    C.col(j) = q1.apply_B(s.factor->solve_layer(0, q1.apply_B_transpose(e)));
  }
  CHECK((C - q1.C).cwiseAbs().maxCoeff() <= 1e-10 * C.cwiseAbs().maxCoeff());

  // zero loads and zero traces give a zero linear term
  LayerDualQp q1z = q1;
  q1z.u0.setZero();
  const Eigen::VectorXd d =
      layer_dual_linear_term(q1z, Eigen::VectorXd::Zero(3 * q1.m_lower), Eigen::VectorXd());
  CHECK(d.norm() == 0.0);
}

TEST_CASE("benchmark at h=0.8: converges and respects per-layer equilibrium") {
  System s = make_system(0.8, paper_loads(), {0.2, 0.05});
  LdmConfig cfg;
  cfg.tol = 1e-6;
  cfg.max_outer = 400;
  const LdmSolution sol = solve_ldm(s.mesh, s.K, *s.factor, s.f, s.pairings, s.g, cfg);
  CHECK(sol.report.status == LdmStatus::Converged);
  CHECK(sol.report.eps_history.back() <= cfg.tol);

  // per-layer equilibrium A u + B' omega = b at the returned iterate
  REQUIRE(sol.omega.size() == 3);
  for (int li = 0; li < 3; ++li) {
    const LayerDualQp q = build_layer_dual(s.mesh, *s.factor, s.pairings, s.g, s.f, li);
    const int off = s.K.dofs->layer_dof_offset[li];
    const int nd = s.K.dofs->layer_dof_count(li);
    const Eigen::VectorXd ul = sol.u.values.segment(off, nd);
    const SpMat A = s.K.layer_block(li);
    const Eigen::VectorXd resid = A * ul + q.apply_B_transpose(sol.omega[li]) - q.b;
    CHECK(resid.norm() <= 1e-9 * q.b.norm());
  }
}

TEST_CASE("epsilon trace is reported and ends under the tolerance") {
  System s = make_system(1.6, paper_loads(), {0.2, 0.05});
  LdmConfig cfg;
  cfg.tol = 1e-7;
  cfg.max_outer = 500;
  const LdmSolution sol = solve_ldm(s.mesh, s.K, *s.factor, s.f, s.pairings, s.g, cfg);
  const auto& eps = ldm_energy_trace(sol.report);
  REQUIRE(!eps.empty());
  CHECK(eps.back() <= cfg.tol);
  CHECK(static_cast<int>(eps.size()) == sol.report.outer_iterations);
}

TEST_CASE("halving theta still converges (slower is fine)") {
  System s = make_system(1.6, paper_loads(), {0.2, 0.05});
  LdmConfig cfg;
  cfg.tol = 1e-6;
  cfg.max_outer = 2000;
  const LdmSolution a = solve_ldm(s.mesh, s.K, *s.factor, s.f, s.pairings, s.g, cfg);
  REQUIRE(a.report.status == LdmStatus::Converged);
  LdmConfig half = cfg;
  half.theta = cfg.theta / 2.0;
  const LdmSolution b = solve_ldm(s.mesh, s.K, *s.factor, s.f, s.pairings, s.g, half);
  CHECK(b.report.status == LdmStatus::Converged);
  CHECK(b.report.outer_iterations >= a.report.outer_iterations);

  // both fixed points agree
  const double den = std::max(energy_norm(s.K, a.u.values), 1e-300);
  CHECK(energy_norm(s.K, a.u.values - b.u.values) / den <= 1e-3);
}

TEST_CASE("invalid configs are rejected") {
  System s = make_system(1.6, paper_loads(), {0.2, 0.05});
  LdmConfig cfg;
  cfg.theta = 0.0;
  CHECK_THROWS_AS(solve_ldm(s.mesh, s.K, *s.factor, s.f, s.pairings, s.g, cfg),
                  std::invalid_argument);
  LdmConfig cfg2;
  cfg2.tol = 0.0;
  CHECK_THROWS_AS(solve_ldm(s.mesh, s.K, *s.factor, s.f, s.pairings, s.g, cfg2),
                  std::invalid_argument);
}
