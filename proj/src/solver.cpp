#include "tsfem/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <utility>

namespace tsfem {

namespace {

// Factorizations of recently used policy matrices.
class FactorizationCache {
 public:
  explicit FactorizationCache(std::size_t capacity = 8) : capacity_(capacity) {}

  const Factorization& get(const OperatorContext& ctx, const PolicyField& policy, InnerStats& stats) {
    for (const auto& [key, fact] : entries_)
      if (key == policy) return *fact;
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.emplace_back(policy, std::make_unique<Factorization>(assemble_policy_matrix(ctx, policy)));
    ++stats.factorizations;
    return *entries_.back().second;
  }

 private:
  std::size_t capacity_;
  std::deque<std::pair<PolicyField, std::unique_ptr<Factorization>>> entries_;
};

Eigen::VectorXd to_nodal(const Mesh& mesh, const Eigen::VectorXd& dofs) {
  return FeFunction::from_interior(mesh, dofs).values();
}

std::vector<int> select_beta(const OperatorContext& ctx, const std::vector<int>& alpha, const Eigen::VectorXd& nodal) {
  std::vector<int> beta(static_cast<std::size_t>(ctx.num_dofs()));
  for (Index i = 0; i < ctx.num_dofs(); ++i) {
    const int a = alpha[i];
    int best = 0;
    double best_value = ctx.nonlocal_term(nodal, i, a, 0);
    for (int b = 1; b < ctx.controls_b(); ++b) {
      const double v = ctx.nonlocal_term(nodal, i, a, b);
      if (v > best_value) {
        best_value = v;
        best = b;
      }
    }
    beta[i] = best;
  }
  return beta;
}

HjbResult hjb_iterate(const OperatorContext& ctx, const Eigen::VectorXd& loads, const std::vector<int>& alpha,
                      const Eigen::VectorXd& init, double tol, int max_iter, FactorizationCache& cache) {
  if (max_iter <= 0) max_iter = std::min(50 * ctx.controls_b(), HowardConfig::kMaxOuterCap);
  HjbResult result;
  result.solution = init;
  PolicyField policy{alpha, select_beta(ctx, alpha, to_nodal(ctx.mesh(), init))};
  for (int it = 0; it < max_iter; ++it) {
    const Factorization& fact = cache.get(ctx, policy, result.stats);
    result.solution = fact.solve(loads);
    ++result.stats.linear_solves;
    ++result.stats.policy_iterations;
    const Eigen::VectorXd nodal = to_nodal(ctx.mesh(), result.solution);
    result.residuals.push_back(fixed_alpha_residual(ctx, alpha, nodal, loads));
    std::vector<int> next = select_beta(ctx, alpha, nodal);
    const bool repeated = next == policy.beta;
    if (result.residuals.back() <= tol || repeated) {
      result.beta = std::move(policy.beta);
      return result;
    }
    policy.beta = std::move(next);
  }
  std::ostringstream msg;
  msg << "inner policy iteration did not converge in " << max_iter << " steps";
  throw ConvergenceError(msg.str(), result.residuals);
}

double default_tol(const Eigen::VectorXd& loads) {
  return 1e-10 * std::max(1.0, loads.size() ? loads.lpNorm<Eigen::Infinity>() : 0.0);
}

}  // namespace

std::vector<int> select_alpha(const OperatorContext& ctx, const Eigen::VectorXd& nodal) {
  std::vector<int> alpha(static_cast<std::size_t>(ctx.num_dofs()));
  Eigen::MatrixXd table(ctx.controls_a(), ctx.controls_b());
  for (Index i = 0; i < ctx.num_dofs(); ++i) {
    for (int a = 0; a < ctx.controls_a(); ++a)
      for (int b = 0; b < ctx.controls_b(); ++b) table(a, b) = ctx.nonlocal_term(nodal, i, a, b);
    alpha[i] = inf_sup(table).alpha;
  }
  return alpha;
}

double fixed_alpha_residual(const OperatorContext& ctx, const std::vector<int>& alpha, const Eigen::VectorXd& nodal,
                            const Eigen::VectorXd& loads) {
  double r = 0.0;
  for (Index i = 0; i < ctx.num_dofs(); ++i) {
    double sup = -std::numeric_limits<double>::infinity();
    for (int b = 0; b < ctx.controls_b(); ++b) sup = std::max(sup, ctx.nonlocal_term(nodal, i, alpha[i], b));
    r = std::max(r, std::abs(ctx.laplacian_term(nodal, i) + sup - loads[i]));
  }
  return r;
}

FeFunction perron_initializer(const OperatorContext& ctx, const Eigen::VectorXd& loads, double delta) {
  const Mesh& mesh = ctx.mesh();
  const double f_min = loads.size() ? loads.minCoeff() : 0.0;
  if (delta <= 0.0) delta = std::abs(f_min) + 1.0;
  const Vector2 center = mesh.centroid();
  // the ball must hold every quadrature point, so that zero extension only
  // lowers the nonlocal term
  const double reach = ctx.rule().nodes.colwise().norm().maxCoeff();
  const double radius = mesh.circumradius() + ctx.eps() * ctx.q_eff() * reach;
  for (int attempt = 0; attempt < 4; ++attempt, delta *= 2.0) {
    const double f_bound = std::min(0.0, f_min) - delta;
    FeFunction p = interpolate(mesh, [&](const Vector2& x) {
      return 0.5 / ctx.lambda() * f_bound * ((x - center).squaredNorm() - radius * radius);
    });
    bool super = true;
    for (Index i = 0; i < ctx.num_dofs() && super; ++i)
      super = evaluate_F(ctx, p, mesh.interior_nodes()[i]).value <= loads[i];
    if (super) return p;
  }
  throw InvariantViolation("paraboloid initializer is not a discrete supersolution; the scheme is not monotone");
}

HjbResult solve_hjb_sup(const OperatorContext& ctx, const Eigen::VectorXd& loads, const std::vector<int>& alpha,
                        const Eigen::VectorXd& init, double tol, int max_iter) {
  FactorizationCache cache;
  return hjb_iterate(ctx, loads, alpha, init, tol, max_iter, cache);
}

SolveReport howard_minmax(const OperatorContext& ctx, const Eigen::VectorXd& loads, const HowardConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const Mesh& mesh = ctx.mesh();
  if (loads.size() != ctx.num_dofs()) throw std::invalid_argument("load vector size does not match the mesh");

  const double tol_F = config.tol_F > 0.0 ? config.tol_F : default_tol(loads);
  const double inner_tol = config.inner_tol > 0.0 ? config.inner_tol : 0.1 * tol_F;
  const int max_outer =
      config.max_outer > 0 ? config.max_outer : std::min(50 * ctx.controls_a(), HowardConfig::kMaxOuterCap);
  if (config.inexact && !(config.eta0 > 0.0)) throw std::invalid_argument("eta0 must be positive");

  Eigen::VectorXd init_nodal;
  switch (config.init) {
    case InitMode::paraboloid: init_nodal = perron_initializer(ctx, loads).values(); break;
    case InitMode::zero: init_nodal = Eigen::VectorXd::Zero(mesh.num_nodes()); break;
    case InitMode::custom:
      if (config.custom_init.size() != ctx.num_dofs()) throw std::invalid_argument("custom initial guess has the wrong size");
      init_nodal = to_nodal(mesh, config.custom_init);
      break;
  }

  SolveReport report{FeFunction::zero(mesh)};
  report.tol_F = tol_F;
  FactorizationCache cache;
  std::vector<int> alpha = select_alpha(ctx, init_nodal);
  Eigen::VectorXd w = FeFunction(mesh, init_nodal).interior_values();
  Eigen::VectorXd previous;
  std::vector<std::vector<int>> seen;
  bool force_stop = false;

  for (int k = 0; k < max_outer; ++k) {
    const double eta = config.inexact ? config.eta0 * std::ldexp(1.0, -k) : inner_tol;
    HjbResult inner = hjb_iterate(ctx, loads, alpha, w, std::max(eta, 0.0), config.max_inner, cache);
    w = std::move(inner.solution);
    report.inner.linear_solves += inner.stats.linear_solves;
    report.inner.factorizations += inner.stats.factorizations;
    report.inner.policy_iterations += inner.stats.policy_iterations;
    report.inner_solves.push_back(inner.stats.linear_solves);

    const FeFunction iterate = FeFunction::from_interior(mesh, w);
    report.residuals.push_back(residual(ctx, iterate, loads));
    if (previous.size()) report.monotonicity_gaps.push_back((w - previous).maxCoeff());
    previous = w;
    report.outer_iterations = k + 1;

    std::vector<int> next = select_alpha(ctx, iterate.values());
    if (report.residuals.back() <= tol_F) {
      report.policy.beta = select_beta(ctx, next, iterate.values());
      report.policy.alpha = std::move(next);
      report.solution = iterate;
      report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      return report;
    }
    if (force_stop) {
      std::ostringstream msg;
      msg << "alpha policy repeated without meeting tol_F = " << tol_F << " (residual " << report.residuals.back()
          << ")";
      throw ConvergenceError(msg.str(), report.residuals);
    }
    // a repeated alpha signature allows exactly one more residual check
    if (!config.inexact) {
      seen.push_back(alpha);
      force_stop = std::find(seen.begin(), seen.end(), next) != seen.end();
    }
    alpha = std::move(next);
  }
  std::ostringstream msg;
  msg << "min-max policy iteration did not converge in " << max_outer << " outer steps";
  throw ConvergenceError(msg.str(), report.residuals);
}

SolveReport inexact_howard(const OperatorContext& ctx, const Eigen::VectorXd& loads, HowardConfig config) {
  config.inexact = true;
  return howard_minmax(ctx, loads, config);
}

double max_policy_diagonal(const OperatorContext& ctx) {
  double d = 0.0;
  for (Index i = 0; i < ctx.num_dofs(); ++i)
    for (int a = 0; a < ctx.controls_a(); ++a)
      for (int b = 0; b < ctx.controls_b(); ++b) d = std::max(d, std::abs(ctx.diagonal(i, a, b)));
  return d;
}

Eigen::VectorXd value_iteration_oracle(const OperatorContext& ctx, const Eigen::VectorXd& loads, double tau,
                                       int max_iter, double tol) {
  const double tau_max = 1.0 / max_policy_diagonal(ctx);
  if (tau <= 0.0) tau = 0.8 * tau_max;
  if (tau > tau_max * (1.0 + 1e-12)) throw std::invalid_argument("damping tau exceeds 1 / max |diagonal|");
  const Mesh& mesh = ctx.mesh();
  Eigen::VectorXd nodal = Eigen::VectorXd::Zero(mesh.num_nodes());
  Eigen::VectorXd update(ctx.num_dofs());
  Eigen::MatrixXd table(ctx.controls_a(), ctx.controls_b());
  std::vector<double> history;
  for (int it = 0; it < max_iter; ++it) {
    double r = 0.0;
    for (Index i = 0; i < ctx.num_dofs(); ++i) {
      for (int a = 0; a < ctx.controls_a(); ++a)
        for (int b = 0; b < ctx.controls_b(); ++b) table(a, b) = ctx.nonlocal_term(nodal, i, a, b);
      update[i] = ctx.laplacian_term(nodal, i) + inf_sup(table).value - loads[i];
      r = std::max(r, std::abs(update[i]));
    }
    if (it % 1000 == 0) history.push_back(r);
    if (r <= tol) return FeFunction(mesh, nodal).interior_values();
    for (Index i = 0; i < ctx.num_dofs(); ++i) nodal[mesh.interior_nodes()[i]] += tau * update[i];
  }
  throw ConvergenceError("damped fixed-point iteration did not converge (tau too large or max_iter too small)",
                         std::move(history));
}

}  // namespace tsfem
