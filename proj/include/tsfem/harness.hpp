#pragma once

#include "tsfem/abp.hpp"
#include "tsfem/config.hpp"
#include "tsfem/nonlocal.hpp"
#include "tsfem/solver.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tsfem {

/// Exit codes of the command-line tool.
enum ExitCode : int { kSuccess = 0, kConfigError = 2, kNonConvergence = 3, kInvariantViolation = 4 };

/// Built-in problem ids, plus "custom".
std::vector<std::string> registry_ids();

/// Problem by id. Built-ins live on the unit square; "custom" takes its
/// coefficients and source from `config`. Unknown ids raise ConfigError.
ControlProblem make_problem(const RunConfig& config);
ControlProblem make_problem(const std::string& id);

BallQuadrature make_rule(const RuleConfig& rule);

/// Mesh, problem, quadrature, operator and loads for one mesh size. Not
/// copyable or movable: the operator refers to the mesh and problem.
class Discretization {
 public:
  Discretization(ControlProblem problem, int n, const EpsSchedule& eps, const RuleConfig& rule,
                 ContextOptions options = {});
  Discretization(const RunConfig& config, int n);
  Discretization(const Discretization&) = delete;
  Discretization& operator=(const Discretization&) = delete;

  const Mesh& mesh() const { return mesh_; }
  const ControlProblem& problem() const { return problem_; }
  const OperatorContext& ctx() const { return *ctx_; }
  const Eigen::VectorXd& loads() const { return loads_; }
  void set_loads(Eigen::VectorXd loads);
  int n() const { return n_; }

 private:
  int n_;
  ControlProblem problem_;
  Mesh mesh_;
  std::unique_ptr<OperatorContext> ctx_;
  Eigen::VectorXd loads_;
};

struct StudyRow {
  int n = 0;
  double h = 0.0;
  double eps = 0.0;
  double error_max = 0.0;
  std::optional<double> order;
  int iters = 0;
  double residual = 0.0;
  double seconds = 0.0;
};

struct ConsistencyRow {
  int n = 0;
  double h = 0.0;
  double eps = 0.0;
  double max_abs = 0.0;
  std::optional<double> order;
};

struct AbpRow {
  int n = 0;
  double h = 0.0;
  double eps = 0.0;
  AbpResult abp;
  std::optional<double> growth;  ///< ratio / previous ratio
  int iters = 0;
  double residual = 0.0;
};

/// A solve together with the discretization its solution lives on.
struct SolveRun {
  std::unique_ptr<Discretization> disc;
  SolveReport report;
};

/// Solve on config.n.front().
SolveRun run_solve(const RunConfig& config);
/// Errors against the exact solution, or against a reference solution on
/// reference_n (default 4 * max n) when none is known.
std::vector<StudyRow> run_convergence_study(const RunConfig& config);
std::vector<ConsistencyRow> run_consistency_study(const RunConfig& config);
/// Solves with seeded uniform random loads in [-1, 1] per node.
std::vector<AbpRow> run_abp_study(const RunConfig& config);

/// Loads f_z ~ U[-1, 1], one per interior node, from (seed, n).
Eigen::VectorXd random_loads(std::uint64_t seed, int n, Index count);

void write_report_csv(std::ostream& os, const SolveReport& report);
void write_study_csv(std::ostream& os, const std::vector<StudyRow>& rows, bool record_time);
void write_study_dat(std::ostream& os, const std::vector<StudyRow>& rows);
void write_consistency_csv(std::ostream& os, const std::vector<ConsistencyRow>& rows);
void write_abp_csv(std::ostream& os, const std::vector<AbpRow>& rows);

/// Worker slots for studies, from TSFEM_WORKERS (default 1).
int worker_count();

/// Run one subcommand (solve, study, consistency, abp, mesh-info), write its
/// files under config.out_dir and print a summary to `out`. Errors are
/// reported on `err` and mapped to an ExitCode.
int run_command(const std::string& command, const RunConfig& config, std::ostream& out, std::ostream& err);

/// Load the config file (if any), apply --out and --seed overrides and run.
int run_cli(const std::string& command, const std::string& config_path, const std::optional<std::string>& out_dir,
            const std::optional<std::uint64_t>& seed, std::ostream& out, std::ostream& err);

}  // namespace tsfem
