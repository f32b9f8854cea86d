// Command-line driver: runs the benchmark pipeline, the contact-space and
// solver comparisons, and the mesh-refinement convergence study.

#include "mlcontact/harness.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <Eigen/Core>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

struct CommonOpts {
  std::string config_path;
  double mesh_h = 0.0;
  std::string contact_space;
  std::string solver;
  double tol = 0.0;
  int max_iters = 0;
  double theta = 0.0;
  std::string out_dir;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "JSON experiment config")->required();
  cmd->add_option("--mesh-h", o.mesh_h, "Override: single mesh size");
  cmd->add_option("--contact-space", o.contact_space, "Override: p0 | p1")
      ->check(CLI::IsMember({"p0", "p1"}));
  cmd->add_option("--solver", o.solver, "Override: mfem | ldm | both")
      ->check(CLI::IsMember({"mfem", "ldm", "both"}));
  cmd->add_option("--tol", o.tol, "Override: solver tolerance");
  cmd->add_option("--max-iters", o.max_iters, "Override: solver iteration cap");
  cmd->add_option("--theta", o.theta, "Override: layer-decomposition relaxation");
  cmd->add_option("--out", o.out_dir, "Override: output directory");
  cmd->add_option("--threads", o.threads, "Worker threads for linear algebra");
}

mlc::ExperimentConfig resolve(const CommonOpts& o) {
  mlc::ExperimentConfig cfg = mlc::load_config(o.config_path);
  if (o.mesh_h > 0.0) cfg.h_list = {o.mesh_h};
  if (o.contact_space == "p0") cfg.contact_space = mlc::ContactSpaceKind::ElementwiseConstant;
  if (o.contact_space == "p1") cfg.contact_space = mlc::ContactSpaceKind::NodalLinear;
  if (o.solver == "mfem") cfg.solver = mlc::SolverSelection::Mfem;
  if (o.solver == "ldm") cfg.solver = mlc::SolverSelection::Ldm;
  if (o.solver == "both") cfg.solver = mlc::SolverSelection::Both;
  if (o.tol > 0.0) {
    cfg.mfem.tol = o.tol;
    cfg.ldm.tol = o.tol;
  }
  if (o.max_iters > 0) {
    cfg.mfem.max_iter = o.max_iters;
    cfg.ldm.max_outer = o.max_iters;
  }
  if (o.theta > 0.0) cfg.ldm.theta = o.theta;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  Eigen::setNbThreads(o.threads);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-layer elastic contact solver suite"};
  app.require_subcommand(1);

  CommonOpts solve_opts, spaces_opts, solvers_opts, conv_opts;
  CLI::App* cmd_solve = app.add_subcommand("solve", "Run the benchmark pipeline");
  add_common(cmd_solve, solve_opts);
  CLI::App* cmd_spaces =
      app.add_subcommand("compare-spaces", "Solve with both contact spaces and tabulate errors");
  add_common(cmd_spaces, spaces_opts);
  CLI::App* cmd_solvers =
      app.add_subcommand("compare-solvers", "Cross-validate the global and decomposed solvers");
  add_common(cmd_solvers, solvers_opts);
  CLI::App* cmd_conv = app.add_subcommand("convergence", "Mesh-refinement convergence study");
  add_common(cmd_conv, conv_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_solve->parsed()) {
      const mlc::ExperimentConfig cfg = resolve(solve_opts);
      const auto results = mlc::run_benchmark(cfg);
      for (const auto& rr : results) {
        std::printf("h=%g dof=%d", rr.h, rr.dof);
        if (rr.ran_mfem)
          std::printf(" mfem: iters=%d pg_norm=%.3e equilibrium=%.3e", rr.mfem.report.iterations,
                      rr.mfem.report.pg_norm, rr.mfem.equilibrium_residual);
        if (rr.ran_ldm)
          std::printf(" ldm: outer=%d eps=%.3e", rr.ldm.report.outer_iterations,
                      rr.ldm.report.eps_history.empty() ? 0.0 : rr.ldm.report.eps_history.back());
        std::printf("\n");
      }
      std::printf("outputs written to %s\n", cfg.out_dir.c_str());
    } else if (cmd_spaces->parsed()) {
      const mlc::ExperimentConfig cfg = resolve(spaces_opts);
      const mlc::ErrorTable table = mlc::compare_contact_spaces(cfg);
      std::filesystem::create_directories(cfg.out_dir);
      const std::string csv = cfg.out_dir + "/space_comparison.csv";
      mlc::export_error_table_csv(table, cfg.geometry.num_layers(), csv);
      for (const auto& row : table.rows) {
        std::printf("H=%g", row.H);
        for (std::size_t l = 0; l < row.rel_err.size(); ++l)
          std::printf(" rel_l%zu=%.3e", l + 1, row.rel_err[l]);
        std::printf("\n");
      }
      std::printf("table written to %s\n", csv.c_str());
    } else if (cmd_solvers->parsed()) {
      const mlc::ExperimentConfig cfg = resolve(solvers_opts);
      const mlc::SolverComparison cmp = mlc::compare_solvers(cfg);
      std::printf(
          "h=%g rel_energy_diff=%.3e field_diff=%.3e stick_slip_overlap=%.4f ldm=%s\n", cmp.h,
          cmp.total_rel_energy_diff, cmp.total_rel_field_diff, cmp.stick_slip_overlap,
          cmp.ldm_ok ? "converged" : "non-convergence");
      std::printf("slip maps written to %s\n", cfg.out_dir.c_str());
    } else if (cmd_conv->parsed()) {
      const mlc::ExperimentConfig cfg = resolve(conv_opts);
      const mlc::ConvergenceReport report = mlc::convergence_study(cfg);
      std::filesystem::create_directories(cfg.out_dir);
      const std::string csv = cfg.out_dir + "/convergence.csv";
      mlc::export_convergence_csv(report, cfg.geometry.num_layers(), csv);
      for (const auto& row : report.rows)
        std::printf("H=%g dof=%lld rel_err_total=%.4e runtime=%.1fs\n", row.H, row.dof,
                    row.rel_err_total, row.runtime_s);
      std::printf("reference H=%g dof=%lld, fitted order %.3f\n", report.reference_H,
                  report.reference_dof, report.fitted_order);
      std::printf("table written to %s\n", csv.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
