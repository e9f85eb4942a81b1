#pragma once

#include "tsfem/fem.hpp"
#include "tsfem/linalg.hpp"
#include "tsfem/nonlocal.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace tsfem {

enum class InitMode { paraboloid, zero, custom };

struct HowardConfig {
  /// Outer tolerance on max_z |F(w)(z) - f_z|. Zero selects
  /// 1e-10 * max(1, max |f_z|).
  double tol_F = 0.0;
  /// Inner (fixed-alpha) tolerance for exact solves. Zero selects tol_F / 10.
  double inner_tol = 0.0;
  /// Zero selects 50 * #A, capped at kMaxOuterCap.
  int max_outer = 0;
  /// Zero selects 50 * #B, capped at kMaxOuterCap.
  int max_inner = 0;
  /// Inner solves stop once the fixed-alpha residual drops below
  /// eta0 * 2^-k at outer step k.
  bool inexact = false;
  double eta0 = 1e-2;
  InitMode init = InitMode::paraboloid;
  /// Initial guess in dof order when init == custom.
  Eigen::VectorXd custom_init;

  static constexpr int kMaxOuterCap = 1000;
};

struct InnerStats {
  int linear_solves = 0;
  int factorizations = 0;
  int policy_iterations = 0;
};

struct SolveReport {
  explicit SolveReport(FeFunction w) : solution(std::move(w)) {}

  FeFunction solution;
  int outer_iterations = 0;
  /// Full min-max residual after each outer step.
  std::vector<double> residuals;
  /// max_z (w^{k+1} - w^k)(z) for consecutive outer iterates; <= 0 up to
  /// round-off for exact solves.
  std::vector<double> monotonicity_gaps;
  /// Linear solves per outer step.
  std::vector<int> inner_solves;
  PolicyField policy;
  InnerStats inner;
  double tol_F = 0.0;
  double seconds = 0.0;
};

/// Raised when an iteration cap is hit. Carries the residual history.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// Interpolant of the concave paraboloid P(x) = F (|x - c|^2 - R^2) / (2 lambda)
/// with F = min(0, min f_z) - delta, c the domain centroid and R the
/// circumradius enlarged by the stencil reach eps * max |M| * max |xi|, so that
/// P >= 0 at every quadrature point. Verified to be a discrete supersolution; delta is doubled
/// up to three times if the check fails. Nonnegative boundary values.
FeFunction perron_initializer(const OperatorContext& ctx, const Eigen::VectorXd& loads, double delta = -1.0);

/// argmin_a max_b I^{ab}(w)(z) per dof, lowest index on ties.
std::vector<int> select_alpha(const OperatorContext& ctx, const Eigen::VectorXd& nodal);

/// max_z |(lambda/2) Delta_h w + max_b I^{alpha_z b}(w) - f_z|.
double fixed_alpha_residual(const OperatorContext& ctx, const std::vector<int>& alpha, const Eigen::VectorXd& nodal,
                            const Eigen::VectorXd& loads);

struct HjbResult {
  Eigen::VectorXd solution;  ///< dof order
  std::vector<int> beta;
  std::vector<double> residuals;
  InnerStats stats;
};

/// Policy iteration in beta for the fixed-alpha problem
///   (lambda/2) Delta_h w + max_b I^{alpha_z b}(w) = f_z.
/// Stops when the fixed-alpha residual is <= tol or the beta policy repeats.
HjbResult solve_hjb_sup(const OperatorContext& ctx, const Eigen::VectorXd& loads, const std::vector<int>& alpha,
                        const Eigen::VectorXd& init, double tol, int max_iter = 0);

/// Min-max policy iteration: alpha frozen per outer step, inner sup-problem
/// solved by solve_hjb_sup, alpha re-selected from the new iterate.
SolveReport howard_minmax(const OperatorContext& ctx, const Eigen::VectorXd& loads, const HowardConfig& config = {});

/// howard_minmax with inexact inner solves (geometric eta schedule).
SolveReport inexact_howard(const OperatorContext& ctx, const Eigen::VectorXd& loads, HowardConfig config = {});

/// Damped nodal fixed point w <- w + tau (F(w) - f), w in V_h^0, until the
/// residual is <= tol. tau <= 0 selects 0.8 / max |diagonal|. Test oracle.
Eigen::VectorXd value_iteration_oracle(const OperatorContext& ctx, const Eigen::VectorXd& loads, double tau = -1.0,
                                       int max_iter = 200000, double tol = 1e-9);

/// Largest |diagonal| over all dofs and control pairs.
double max_policy_diagonal(const OperatorContext& ctx);

}  // namespace tsfem
