#pragma once

#include "tsfem/fem.hpp"
#include "tsfem/kernel.hpp"
#include "tsfem/linalg.hpp"
#include "tsfem/mesh.hpp"
#include "tsfem/problem.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsfem {

/// eps = C h^gamma max(1, |log h|)^delta.
struct EpsSchedule {
  double C = 1.0;
  double gamma = 0.5;
  double delta = 1.0;

  double operator()(double h) const;
};

/// Raised when an assembled operator breaks the monotone sign pattern, or a
/// mesh fails the weak-acuteness requirement.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ContextOptions {
  /// Accept meshes that are not weakly acute (the scheme may then lose
  /// monotonicity). A warning is printed to stderr.
  bool allow_non_acute = false;
};

/// One term of a precomputed nonlocal stencil: the coefficient of w(node).
struct StencilEntry {
  Index node;
  double weight;
};

/// Everything needed to evaluate the discrete operator
///   F(w)(z) = (lambda/2) Delta_h w(z) + min_a max_b I^{ab}(w)(z)
/// with the quadrature form of the nonlocal term
///   I^{ab}(w)(z) = (2/eps^2) [sum_j W_j w(z + eps M^{ab}(z) xi_j) - m0 w(z)].
/// Sample points outside the domain see w = 0.
class OperatorContext {
 public:
  OperatorContext(const Mesh& mesh, const ControlProblem& problem, BallQuadrature rule, double eps,
                  ContextOptions options = {});

  const Mesh& mesh() const { return *mesh_; }
  const ControlProblem& problem() const { return *problem_; }
  const BallQuadrature& rule() const { return rule_; }
  double eps() const { return eps_; }
  double lambda() const { return problem_->lambda; }
  int controls_a() const { return problem_->controls_a; }
  int controls_b() const { return problem_->controls_b; }
  Index num_dofs() const { return mesh_->num_interior(); }

  const SparseMatrix& stiffness() const { return stiffness_; }
  const Eigen::VectorXd& volumes() const { return volumes_; }

  /// max ||M^{ab}(x)|| over controls and samples, and sqrt(2/lambda).
  double q_eff() const { return q_eff_; }
  double q_paper() const { return kernel_support_bound(*problem_); }

  /// M^{ab} at interior dof i.
  const Matrix2& M(Index dof, int a, int b) const { return m_[index(dof, a, b)]; }

  /// Nonlocal stencil of I^{ab} at interior dof i over all nodes (boundary
  /// nodes included), sorted by node. The centre coefficient is included.
  std::span<const StencilEntry> stencil(Index dof, int a, int b) const;

  /// (lambda/2) Delta_h w at interior dof i, w given by values at all nodes.
  double laplacian_term(const Eigen::VectorXd& nodal, Index dof) const;
  /// I^{ab}(w) at interior dof i through the cached stencil.
  double nonlocal_term(const Eigen::VectorXd& nodal, Index dof, int a, int b) const;

  /// Diagonal of the row (lambda/2) Delta_h + I^{ab} at dof i.
  double diagonal(Index dof, int a, int b) const;

 private:
  std::size_t index(Index dof, int a, int b) const {
    return static_cast<std::size_t>((dof * problem_->controls_a + a) * problem_->controls_b + b);
  }

  const Mesh* mesh_;
  const ControlProblem* problem_;
  BallQuadrature rule_;
  double eps_;
  SparseMatrix stiffness_;
  Eigen::VectorXd volumes_;
  double q_eff_ = 0.0;
  std::vector<Matrix2> m_;
  std::vector<std::size_t> offsets_;
  std::vector<StencilEntry> entries_;
};

/// Control selection per interior dof.
struct PolicyField {
  std::vector<int> alpha;
  std::vector<int> beta;

  bool operator==(const PolicyField&) const = default;
};

/// Value of min over rows of max over columns, with the selected row and
/// column. Ties go to the lowest index.
struct InfSup {
  double value;
  int alpha;
  int beta;
};
InfSup inf_sup(const Eigen::MatrixXd& table);

/// I^{ab}(w)(z) for a finite element function, evaluating w by point
/// location at each quadrature point. z must be an interior node.
double evaluate_I(const OperatorContext& ctx, const FeFunction& w, Index z, int a, int b);

/// I^{ab}(w)(x) for a smooth callable at an arbitrary point x, with M^{ab}
/// evaluated at x. No zero extension: w is sampled wherever the points fall.
double evaluate_I(const OperatorContext& ctx, const std::function<double(const Vector2&)>& w, const Vector2& x, int a,
                  int b);

/// F(w)(z) and the selected controls. z must be an interior node.
InfSup evaluate_F(const OperatorContext& ctx, const FeFunction& w, Index z);

/// max_z |F(w)(z) - f_z|, loads in dof order.
double residual(const OperatorContext& ctx, const FeFunction& w, const Eigen::VectorXd& loads);

/// Interior-by-interior matrix of w -> (lambda/2) Delta_h w + I^{a_z b_z}(w)
/// for w in V_h^0. Throws InvariantViolation if the assembled rows break the
/// M-matrix sign pattern.
SparseMatrix assemble_policy_matrix(const OperatorContext& ctx, const PolicyField& policy);

/// Per-node consistency functional: the inf-sup of I applied to the Galerkin
/// projection of w at z, minus the phi_z-weighted star average of the inf-sup
/// of I applied to w itself. Quadrature points outside the domain take the
/// value of w (the projection is the identity there).
struct ConsistencyReport {
  double max_abs = 0.0;
  Eigen::VectorXd per_node;
};
ConsistencyReport measure_consistency(const OperatorContext& ctx, const SmoothFunction& w);

}  // namespace tsfem
