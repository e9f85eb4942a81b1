#include "tsfem/nonlocal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <sstream>

namespace tsfem {

namespace {

// 6-point degree-4 rule on the reference triangle, barycentric coordinates
// and weights summing to one.
struct TriangleRule {
  std::array<Vector3, 6> bary;
  std::array<double, 6> weight;
};

const TriangleRule& degree4_rule() {
  static const TriangleRule rule = [] {
    TriangleRule r;
    const double a1 = 0.445948490915965, b1 = 1.0 - 2.0 * a1, w1 = 0.223381589678011;
    const double a2 = 0.091576213509771, b2 = 1.0 - 2.0 * a2, w2 = 0.109951743655322;
    r.bary = {Vector3(b1, a1, a1), Vector3(a1, b1, a1), Vector3(a1, a1, b1),
              Vector3(b2, a2, a2), Vector3(a2, b2, a2), Vector3(a2, a2, b2)};
    r.weight = {w1, w1, w1, w2, w2, w2};
    return r;
  }();
  return rule;
}

Index require_interior(const Mesh& mesh, Index z) {
  if (z < 0 || z >= mesh.num_nodes() || !mesh.is_interior(z))
    throw std::invalid_argument("node " + std::to_string(z) + " is not an interior node");
  return mesh.dof(z);
}

}  // namespace

double EpsSchedule::operator()(double h) const {
  return C * std::pow(h, gamma) * std::pow(std::max(1.0, std::abs(std::log(h))), delta);
}

OperatorContext::OperatorContext(const Mesh& mesh, const ControlProblem& problem, BallQuadrature rule, double eps,
                                 ContextOptions options)
    : mesh_(&mesh), problem_(&problem), rule_(std::move(rule)), eps_(eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (!(problem.lambda > 0.0)) throw std::invalid_argument("ellipticity bounds have not been computed");
  if (rule_.weights.size() == 0 || rule_.weights.minCoeff() < 0.0)
    throw InvariantViolation("quadrature rule has negative weights");
  if (!mesh.weakly_acute()) {
    if (!options.allow_non_acute) throw InvariantViolation("mesh is not weakly acute; the scheme is not monotone");
    std::cerr << "warning: mesh is not weakly acute, monotonicity is not guaranteed\n";
  }

  stiffness_ = assemble_stiffness(mesh);
  volumes_ = lumped_volumes(mesh);
  const auto samples = sample_points(mesh);
  q_eff_ = sup_norm_M(problem, samples);

  const Index ni = mesh.num_interior();
  const int na = problem.controls_a, nb = problem.controls_b;
  m_.resize(static_cast<std::size_t>(ni * na * nb));
  offsets_.assign(m_.size() + 1, 0);
  entries_.clear();
  entries_.reserve(m_.size() * static_cast<std::size_t>(3 * rule_.size() + 1));

  const double scale = 2.0 / (eps * eps);
  std::vector<StencilEntry> row;
  for (Index i = 0; i < ni; ++i) {
    const Index z = mesh.interior_nodes()[i];
    const Vector2 x = mesh.vertex(z);
    for (int a = 0; a < na; ++a) {
      for (int b = 0; b < nb; ++b) {
        Matrix2 m;
        try {
          m = diffusion_sqrt<double>(problem.A(a, b)(x), problem.lambda);
        } catch (const EllipticityError& e) {
          throw EllipticityError("control pair (" + std::to_string(a) + ", " + std::to_string(b) + "): " + e.what());
        }
        m_[index(i, a, b)] = m;
        row.clear();
        row.push_back({z, -scale * rule_.m0});
        for (Index j = 0; j < rule_.size(); ++j) {
          const PointLocation loc = mesh.locate(x + eps * m * rule_.nodes.col(j));
          if (!loc.inside()) continue;
          // snap coordinates within the geometric tolerance onto the cell
          Vector3 bary = loc.bary.cwiseMax(0.0);
          bary /= bary.sum();
          const auto t = mesh.cell(loc.cell);
          for (int k = 0; k < 3; ++k)
            if (bary[k] > 0.0) row.push_back({t[k], scale * rule_.weights(j) * bary[k]});
        }
        std::sort(row.begin(), row.end(), [](const StencilEntry& l, const StencilEntry& r) { return l.node < r.node; });
        const std::size_t start = entries_.size();
        for (const StencilEntry& e : row) {
          if (entries_.size() > start && entries_.back().node == e.node) entries_.back().weight += e.weight;
          else entries_.push_back(e);
        }
        offsets_[index(i, a, b) + 1] = entries_.size();
      }
    }
  }
}

std::span<const StencilEntry> OperatorContext::stencil(Index dof, int a, int b) const {
  const std::size_t k = index(dof, a, b);
  return {entries_.data() + offsets_[k], offsets_[k + 1] - offsets_[k]};
}

double OperatorContext::laplacian_term(const Eigen::VectorXd& nodal, Index dof) const {
  const Index z = mesh_->interior_nodes()[dof];
  double s = 0.0;
  for (SparseMatrix::InnerIterator it(stiffness_, z); it; ++it) s += it.value() * nodal[it.col()];
  return -0.5 * lambda() * s / volumes_[z];
}

double OperatorContext::nonlocal_term(const Eigen::VectorXd& nodal, Index dof, int a, int b) const {
  double s = 0.0;
  for (const StencilEntry& e : stencil(dof, a, b)) s += e.weight * nodal[e.node];
  return s;
}

double OperatorContext::diagonal(Index dof, int a, int b) const {
  const Index z = mesh_->interior_nodes()[dof];
  double d = 0.5 * lambda() * stiffness_.coeff(z, z) / volumes_[z];
  for (const StencilEntry& e : stencil(dof, a, b))
    if (e.node == z) d -= e.weight;
  return -d;
}

InfSup inf_sup(const Eigen::MatrixXd& table) {
  InfSup best{0.0, -1, -1};
  for (Index a = 0; a < table.rows(); ++a) {
    Index b_max = 0;
    for (Index b = 1; b < table.cols(); ++b)
      if (table(a, b) > table(a, b_max)) b_max = b;
    if (best.alpha < 0 || table(a, b_max) < best.value) best = {table(a, b_max), static_cast<int>(a), static_cast<int>(b_max)};
  }
  return best;
}

double evaluate_I(const OperatorContext& ctx, const FeFunction& w, Index z, int a, int b) {
  const Index dof = require_interior(ctx.mesh(), z);
  const Vector2 x = ctx.mesh().vertex(z);
  const Matrix2& m = ctx.M(dof, a, b);
  const BallQuadrature& q = ctx.rule();
  double s = 0.0;
  for (Index j = 0; j < q.size(); ++j) s += q.weights(j) * w(x + ctx.eps() * m * q.nodes.col(j));
  return 2.0 / (ctx.eps() * ctx.eps()) * (s - q.m0 * w[z]);
}

double evaluate_I(const OperatorContext& ctx, const std::function<double(const Vector2&)>& w, const Vector2& x, int a,
                  int b) {
  const Matrix2 m = diffusion_sqrt<double>(ctx.problem().A(a, b)(x), ctx.lambda());
  const BallQuadrature& q = ctx.rule();
  double s = 0.0;
  for (Index j = 0; j < q.size(); ++j) s += q.weights(j) * w(x + ctx.eps() * m * q.nodes.col(j));
  return 2.0 / (ctx.eps() * ctx.eps()) * (s - q.m0 * w(x));
}

InfSup evaluate_F(const OperatorContext& ctx, const FeFunction& w, Index z) {
  const Index dof = require_interior(ctx.mesh(), z);
  Eigen::MatrixXd table(ctx.controls_a(), ctx.controls_b());
  for (int a = 0; a < ctx.controls_a(); ++a)
    for (int b = 0; b < ctx.controls_b(); ++b) table(a, b) = ctx.nonlocal_term(w.values(), dof, a, b);
  InfSup sel = inf_sup(table);
  sel.value += ctx.laplacian_term(w.values(), dof);
  return sel;
}

double residual(const OperatorContext& ctx, const FeFunction& w, const Eigen::VectorXd& loads) {
  double r = 0.0;
  const auto& nodes = ctx.mesh().interior_nodes();
  for (Index i = 0; i < ctx.num_dofs(); ++i) r = std::max(r, std::abs(evaluate_F(ctx, w, nodes[i]).value - loads[i]));
  return r;
}

SparseMatrix assemble_policy_matrix(const OperatorContext& ctx, const PolicyField& policy) {
  const Mesh& mesh = ctx.mesh();
  const Index ni = ctx.num_dofs();
  if (static_cast<Index>(policy.alpha.size()) != ni || static_cast<Index>(policy.beta.size()) != ni)
    throw std::invalid_argument("policy size does not match the number of interior nodes");
  std::vector<Eigen::Triplet<double>> triplets;
  const double half_lambda = 0.5 * ctx.lambda();
  for (Index i = 0; i < ni; ++i) {
    const int a = policy.alpha[i], b = policy.beta[i];
    if (a < 0 || a >= ctx.controls_a() || b < 0 || b >= ctx.controls_b())
      throw std::invalid_argument("policy control index out of range at dof " + std::to_string(i));
    const Index z = mesh.interior_nodes()[i];
    for (SparseMatrix::InnerIterator it(ctx.stiffness(), z); it; ++it) {
      const Index d = mesh.dof(it.col());
      if (d >= 0) triplets.emplace_back(i, d, -half_lambda * it.value() / ctx.volumes()[z]);
    }
    for (const StencilEntry& e : ctx.stencil(i, a, b)) {
      const Index d = mesh.dof(e.node);
      if (d >= 0) triplets.emplace_back(i, d, e.weight);
    }
  }
  SparseMatrix g(ni, ni);
  g.setFromTriplets(triplets.begin(), triplets.end());
  g.makeCompressed();

  for (Index i = 0; i < ni; ++i) {
    double diag = 0.0, sum = 0.0, off_min = 0.0;
    for (SparseMatrix::InnerIterator it(g, i); it; ++it) {
      sum += it.value();
      if (it.col() == i) diag = it.value();
      else off_min = std::min(off_min, it.value());
    }
    const double tol = 1e-12 * std::max(1.0, std::abs(diag));
    if (!(diag < 0.0) || off_min < -tol || sum > tol) {
      std::ostringstream msg;
      msg << "policy matrix row " << i << " breaks the M-matrix sign pattern: diagonal " << diag
          << ", min off-diagonal " << off_min << ", row sum " << sum;
      throw InvariantViolation(msg.str());
    }
  }
  return g;
}

ConsistencyReport measure_consistency(const OperatorContext& ctx, const SmoothFunction& w) {
  const Mesh& mesh = ctx.mesh();
  const FeFunction projected = galerkin_projection(mesh, ctx.stiffness(), w);
  const int na = ctx.controls_a(), nb = ctx.controls_b();
  const double scale = 2.0 / (ctx.eps() * ctx.eps());
  const BallQuadrature& q = ctx.rule();
  const TriangleRule& tri = degree4_rule();

  ConsistencyReport report;
  report.per_node.resize(ctx.num_dofs());
  Eigen::MatrixXd table(na, nb);
  for (Index i = 0; i < ctx.num_dofs(); ++i) {
    const Index z = mesh.interior_nodes()[i];
    const Vector2 x = mesh.vertex(z);

    for (int a = 0; a < na; ++a) {
      for (int b = 0; b < nb; ++b) {
        double s = 0.0;
        for (Index j = 0; j < q.size(); ++j) {
          const Vector2 p = x + ctx.eps() * ctx.M(i, a, b) * q.nodes.col(j);
          const PointLocation loc = mesh.locate(p);
          s += q.weights(j) * (loc.inside() ? projected.at(loc) : w(p));
        }
        table(a, b) = scale * (s - q.m0 * projected[z]);
      }
    }
    const double discrete = inf_sup(table).value;

    double average = 0.0;
    for (Index c : mesh.star(z)) {
      const auto t = mesh.cell(c);
      const int local = (t[0] == z) ? 0 : (t[1] == z) ? 1 : 2;
      for (std::size_t k = 0; k < tri.weight.size(); ++k) {
        const Vector3& l = tri.bary[k];
        const Vector2 p = l[0] * mesh.vertex(t[0]) + l[1] * mesh.vertex(t[1]) + l[2] * mesh.vertex(t[2]);
        for (int a = 0; a < na; ++a)
          for (int b = 0; b < nb; ++b) table(a, b) = evaluate_I(ctx, w.value, p, a, b);
        average += mesh.cell_area(c) * tri.weight[k] * l[local] * inf_sup(table).value;
      }
    }
    average /= ctx.volumes()[z];

    report.per_node[i] = discrete - average;
    report.max_abs = std::max(report.max_abs, std::abs(report.per_node[i]));
  }
  return report;
}

}  // namespace tsfem
