#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mlcontact/harness.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mlc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("mlcontact_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("config round-trip is idempotent and strict") {
  const ExperimentConfig cfg = benchmark_config();
  const json j1 = serialize_config(cfg);
  const ExperimentConfig cfg2 = parse_config(j1);
  const json j2 = serialize_config(cfg2);
  CHECK(j1 == j2);

  json bad = j1;
  bad["surprise"] = 1;
  CHECK_THROWS_AS(parse_config(bad), std::invalid_argument);
  json bad2 = j1;
  bad2["mesh"]["extra"] = 2;
  CHECK_THROWS_AS(parse_config(bad2), std::invalid_argument);
  json bad3 = j1;
  bad3["loads"]["traction"]["patch"] = {9.0, 10.0, 0.0, 1.0};  // outside footprint
  CHECK_THROWS_AS(parse_config(bad3), std::invalid_argument);
}

TEST_CASE("VTK export: cube with zero field") {
  const auto dir = temp_dir("vtk");
  LayerStackSpec spec;
  spec.z_top = 1.0;
  spec.layers = {{1.0, 0}};
  const TetMesh mesh = build_layer_stack(spec, 1.0);
  const DisplacementField u = DisplacementField::zero(make_dof_map(mesh));
  const std::string path = (dir / "cube.vtk").string();
  export_vtk(mesh, 0, u, path);

  const std::string text = slurp(path);
  CHECK(text.rfind("# vtk DataFile Version 3.0\n", 0) == 0);
  CHECK(text.find("DATASET UNSTRUCTURED_GRID") != std::string::npos);
  CHECK(text.find("POINTS 8 double") != std::string::npos);
  CHECK(text.find("CELLS 6 30") != std::string::npos);
  CHECK(text.find("CELL_TYPES 6") != std::string::npos);
  CHECK(text.find("VECTORS displacement double") != std::string::npos);

  // round-trip: parse the point count back out
  std::istringstream in(text);
  std::string line;
  int points = 0;
  while (std::getline(in, line))
    if (line.rfind("POINTS ", 0) == 0) {
      points = std::stoi(line.substr(7));
      break;
    }
  CHECK(points == mesh.layers[0].node_count());
}

TEST_CASE("CSV export: header-only and single-row tables, 17 significant digits") {
  const auto dir = temp_dir("csv");
  ErrorTable empty;
  const std::string p1 = (dir / "empty.csv").string();
  export_error_table_csv(empty, 3, p1);
  CHECK(slurp(p1) == "H,abs_l1,abs_l2,abs_l3,rel_l1,rel_l2,rel_l3\n");

  ErrorTable one;
  one.rows.push_back({0.2, {1.0 / 3.0, 2.0, 3.0}, {4.0, 5.0, 6.0}});
  const std::string p2 = (dir / "one.csv").string();
  export_error_table_csv(one, 3, p2);
  const std::string text = slurp(p2);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK(text.find("0.33333333333333331") != std::string::npos);
}

TEST_CASE("zero-load config produces zero fields; g=0 forces zero tangential multipliers") {
  ExperimentConfig cfg = benchmark_config();
  cfg.h_list = {1.6};
  cfg.body_force.assign(3, Vec3::Zero());
  cfg.traction.traction = Vec3::Zero();
  cfg.out_dir = temp_dir("zero").string();
  const auto results = run_benchmark(cfg);
  REQUIRE(results.size() == 1);
  CHECK(results[0].mfem.u.values.norm() == 0.0);

  ExperimentConfig cfg2 = benchmark_config();
  cfg2.h_list = {1.6};
  cfg2.friction = {0.0, 0.0};
  cfg2.out_dir = temp_dir("g0").string();
  const auto res2 = run_benchmark(cfg2);
  CHECK(res2[0].mfem.lambda.tangential.cwiseAbs().maxCoeff() == 0.0);
  CHECK(res2[0].mfem.report.kkt.bound_excess == 0.0);
}

TEST_CASE("self-comparison of one contact space gives a zero table") {
  ExperimentConfig cfg = benchmark_config();
  cfg.h_list = {1.6};
  cfg.mfem.tol = 1e-10;
  Problem pb = build_problem(cfg, 1.6);
  auto solve_with = [&](ContactSpaceKind kind) {
    const CouplingOperators ops = assemble_coupling(pb.mesh, pb.pairings, kind, *pb.K.dofs);
    const FrictionField g = FrictionField::constant_per_interface(ops, cfg.friction);
    return solve_mfem(pb.mesh, pb.K, *pb.factor, pb.f, ops, g, pb.pairings, cfg.mfem);
  };
  const MfemSolution a = solve_with(ContactSpaceKind::NodalLinear);
  const MfemSolution b = solve_with(ContactSpaceKind::NodalLinear);
  CHECK((a.u.values - b.u.values).norm() == 0.0);  // deterministic solve
}

TEST_CASE("benchmark run responds under the load patch") {
  ExperimentConfig cfg = benchmark_config();
  cfg.h_list = {0.4};
  cfg.out_dir = temp_dir("patch").string();
  const auto results = run_benchmark(cfg);
  const RunResult& rr = results[0];
  REQUIRE(rr.ran_mfem);
  CHECK(fs::exists(fs::path(cfg.out_dir) / "h_0.4" / "u_mfem_layer1.vtk"));
  CHECK(fs::exists(fs::path(cfg.out_dir) / "h_0.4" / "u_mfem_layer3.vtk"));
  CHECK(fs::exists(fs::path(cfg.out_dir) / "run_report.json"));

  // |u_z| on top of layer 2 under the patch exceeds the far field.
  const TetMesh mesh = build_layer_stack(cfg.geometry, 0.4);
  const Eigen::VectorXd full = scatter_full(mesh, rr.mfem.u);
  const LayerMesh& lm = mesh.layers[1];
  double under_patch = 0.0, far_field = 0.0;
  for (int iy = 0; iy <= lm.ny; ++iy)
    for (int ix = 0; ix <= lm.nx; ++ix) {
      const int local = lm.node_id(ix, iy, lm.nz);  // top face of layer 2
      const Vec3& p = lm.nodes[local];
      const double uz = std::abs(full[3 * mesh.global_node(1, local) + 2]);
      if (p.x() >= 3.6 && p.x() <= 4.6 && p.y() >= 1.6 && p.y() <= 2.4)
        under_patch = std::max(under_patch, uz);
      else if (p.x() >= 0.4 && p.x() <= 1.2)
        far_field = std::max(far_field, uz);
    }
  CHECK(under_patch > far_field);
}

TEST_CASE("interpolation reproduces the field on the same mesh and refines exactly") {
  ExperimentConfig cfg = convergence_config();
  Problem coarse = build_problem(cfg, 0.5);
  const CouplingOperators ops =
      assemble_coupling(coarse.mesh, coarse.pairings, cfg.contact_space, *coarse.K.dofs);
  const FrictionField g = FrictionField::constant_per_interface(ops, cfg.friction);
  const MfemSolution sol =
      solve_mfem(coarse.mesh, coarse.K, *coarse.factor, coarse.f, ops, g, coarse.pairings,
                 cfg.mfem);

  // identity on the same mesh
  const DisplacementField same =
      interpolate_to(coarse.mesh, sol.u, coarse.mesh, coarse.K.dofs);
  CHECK((same.values - sol.u.values).cwiseAbs().maxCoeff() < 1e-13);

  // exact reproduction of linear fields on a finer nested mesh
  Problem fine = build_problem(cfg, 0.25);
  DisplacementField linear = DisplacementField::zero(coarse.K.dofs);
  for (int li = 0; li < coarse.mesh.num_layers(); ++li)
    for (std::size_t k = 0; k < coarse.K.dofs->free_nodes[li].size(); ++k) {
      const Vec3& p = coarse.mesh.layers[li].nodes[coarse.K.dofs->free_nodes[li][k]];
      const int base = coarse.K.dofs->layer_dof_offset[li] + 3 * static_cast<int>(k);
      linear.values[base + 0] = 0.25 * p.x() - 0.5 * p.y();
      linear.values[base + 1] = p.z();
      linear.values[base + 2] = -p.x() + 2.0 * p.z();
    }
  const DisplacementField mapped = interpolate_to(coarse.mesh, linear, fine.mesh, fine.K.dofs);
  // check at fine nodes strictly inside the coarse free region
  for (int li = 0; li < fine.mesh.num_layers(); ++li)
    for (std::size_t k = 0; k < fine.K.dofs->free_nodes[li].size(); ++k) {
      const Vec3& p = fine.mesh.layers[li].nodes[fine.K.dofs->free_nodes[li][k]];
      // skip points whose interpolation stencil touches clamped coarse nodes
      const double margin = 0.5;
      if (p.x() < cfg.geometry.x_min + margin || p.x() > cfg.geometry.x_max - margin ||
          p.y() < cfg.geometry.y_min + margin || p.y() > cfg.geometry.y_max - margin)
        continue;
      if (li == 2 && p.z() < coarse.mesh.layers[2].z_lo + 0.5) continue;
      const int base = fine.K.dofs->layer_dof_offset[li] + 3 * static_cast<int>(k);
      CHECK(mapped.values[base + 0] ==
            doctest::Approx(0.25 * p.x() - 0.5 * p.y()).epsilon(1e-12));
      CHECK(mapped.values[base + 1] == doctest::Approx(p.z()).epsilon(1e-12));
      CHECK(mapped.values[base + 2] == doctest::Approx(-p.x() + 2.0 * p.z()).epsilon(1e-12));
    }
}

TEST_CASE("convergence study rejects bad size lists") {
  ExperimentConfig cfg = convergence_config();
  cfg.h_list = {0.25, 0.5};
  CHECK_THROWS_AS(convergence_study(cfg), std::invalid_argument);

  ExperimentConfig cfg2 = convergence_config();
  cfg2.h_list = {0.5, 0.3};  // not nested
  CHECK_THROWS_AS(convergence_study(cfg2, /*require_nested=*/true), std::invalid_argument);
}

TEST_CASE("reference compared against itself gives a zero error row") {
  ExperimentConfig cfg = convergence_config();
  Problem pb = build_problem(cfg, 0.5);
  const CouplingOperators ops =
      assemble_coupling(pb.mesh, pb.pairings, cfg.contact_space, *pb.K.dofs);
  const FrictionField g = FrictionField::constant_per_interface(ops, cfg.friction);
  const MfemSolution sol =
      solve_mfem(pb.mesh, pb.K, *pb.factor, pb.f, ops, g, pb.pairings, cfg.mfem);
  const DisplacementField same = interpolate_to(pb.mesh, sol.u, pb.mesh, pb.K.dofs);
  CHECK(energy_norm(pb.K, same.values - sol.u.values) <=
        1e-12 * std::max(1.0, energy_norm(pb.K, sol.u.values)));
}

TEST_CASE("deterministic outputs: identical CSV bytes across reruns") {
  ExperimentConfig cfg = benchmark_config();
  cfg.h_list = {1.6};
  const auto dir1 = temp_dir("det1");
  const auto dir2 = temp_dir("det2");

  cfg.out_dir = dir1.string();
  const ErrorTable t1 = compare_contact_spaces(cfg);
  export_error_table_csv(t1, 3, (dir1 / "t.csv").string());
  cfg.out_dir = dir2.string();
  const ErrorTable t2 = compare_contact_spaces(cfg);
  export_error_table_csv(t2, 3, (dir2 / "t.csv").string());
  CHECK(slurp((dir1 / "t.csv").string()) == slurp((dir2 / "t.csv").string()));
}

TEST_CASE("slip map CSV has one row per grid line") {
  ExperimentConfig cfg = benchmark_config();
  cfg.h_list = {1.6};
  Problem pb = build_problem(cfg, 1.6);
  const DisplacementField u = DisplacementField::zero(pb.K.dofs);
  const auto dir = temp_dir("slip");
  const std::string path = (dir / "slip.csv").string();
  export_slip_map_csv(pb.mesh, pb.pairings[0], u, path);
  const std::string text = slurp(path);
  CHECK(std::count(text.begin(), text.end(), '\n') == pb.mesh.layers[0].ny + 1);
}
