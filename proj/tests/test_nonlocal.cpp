#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tsfem/nonlocal.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <random>

using namespace tsfem;

namespace {

Matrix2 rotation(double t) {
  Matrix2 r;
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  return r;
}

ControlProblem make(std::vector<Matrix2> mats, int na, int nb) {
  ControlProblem p;
  p.controls_a = na;
  p.controls_b = nb;
  for (const auto& m : mats) p.coeff.push_back(MatrixField::constant(m));
  p.source = ScalarField::constant(1.0);
  ellipticity_bounds(p, {p.domain.center()});
  return p;
}

// Two diffusion matrices, each seen in two rotated frames.
ControlProblem rotated_game() {
  const Matrix2 d1 = Eigen::Vector2d(1.0, 2.0).asDiagonal(), d2 = Eigen::Vector2d(2.0, 1.0).asDiagonal();
  std::vector<Matrix2> mats;
  for (const Matrix2& d : {d1, d2})
    for (double t : {0.0, std::numbers::pi / 4}) mats.push_back(rotation(t) * d * rotation(t).transpose());
  return make(mats, 2, 2);
}

double hat(const Mesh& m, Index y, const Vector2& x) {
  const PointLocation loc = m.locate(x);
  if (!loc.inside()) return 0.0;
  const auto t = m.cell(loc.cell);
  for (int k = 0; k < 3; ++k)
    if (t[k] == y) return loc.bary[k];
  return 0.0;
}

Eigen::VectorXd random_interior(Index size, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(size);
  for (auto& x : v) x = u(gen);
  return v;
}

// (lambda/2) Delta_h w + I^{ab}(w) computed from scratch for every control.
Eigen::MatrixXd control_table(const OperatorContext& ctx, const FeFunction& w, Index z) {
  const Index dof = ctx.mesh().dof(z);
  Eigen::MatrixXd t(ctx.controls_a(), ctx.controls_b());
  for (int a = 0; a < ctx.controls_a(); ++a)
    for (int b = 0; b < ctx.controls_b(); ++b)
      t(a, b) = ctx.laplacian_term(w.values(), dof) + evaluate_I(ctx, w, z, a, b);
  return t;
}

}  // namespace

TEST_CASE("eps schedule") {
  const EpsSchedule s{2.0, 0.5, 1.0};
  CHECK(s(0.25) == doctest::Approx(2.0 * 0.5 * std::log(4.0)));
  CHECK(s(0.5) == doctest::Approx(2.0 * std::sqrt(0.5)));
  CHECK(EpsSchedule{1.0, 0.25, 0.0}(1.0 / 16) == doctest::Approx(0.5));
}

TEST_CASE("inf-sup of a table") {
  Eigen::MatrixXd t(2, 3);
  t << 1, 5, 2, 3, 0, 4;
  const InfSup r = inf_sup(t);
  CHECK(r.value == 4.0);
  CHECK(r.alpha == 1);
  CHECK(r.beta == 2);
  Eigen::MatrixXd ties = Eigen::MatrixXd::Constant(3, 3, 7.0);
  const InfSup s = inf_sup(ties);
  CHECK(s.alpha == 0);
  CHECK(s.beta == 0);
}

TEST_CASE("I annihilates affine functions") {
  const Mesh mesh = build_structured_mesh(6);
  const ControlProblem p = rotated_game();
  const OperatorContext ctx(mesh, p, build_axis_rule(Kernel(3.0)), 0.1);
  const auto affine = [](const Vector2& x) { return 0.7 - 2.0 * x.x() + 3.0 * x.y(); };
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      CHECK(std::abs(evaluate_I(ctx, affine, Vector2(0.3, 0.6), a, b)) <= 1e-10);
      CHECK(std::abs(evaluate_I(ctx, affine, Vector2(-3.0, 5.0), a, b)) <= 1e-9);
    }
  // the interpolant is exact, and at a central node every sample is inside
  const FeFunction w = interpolate(mesh, affine);
  const Index centre = 3 * 7 + 3;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) CHECK(std::abs(evaluate_I(ctx, w, centre, a, b)) <= 1e-10);
}

TEST_CASE("I of a paraboloid is the trace of M^2") {
  const Mesh mesh = build_structured_mesh(4);
  const ControlProblem p = make({Matrix2(Eigen::Vector2d(2.0, 4.0).asDiagonal())}, 1, 1);
  REQUIRE(p.lambda == 2.0);
  const auto q = [](const Vector2& x) { return 0.5 * x.squaredNorm(); };
  for (double eps : {0.5, 0.1, 0.01}) {
    for (const auto& rule : {build_axis_rule(Kernel(3.0)), build_polar_rule(Kernel(3.0), 3, 8)}) {
      const OperatorContext ctx(mesh, p, rule, eps);
      CHECK(evaluate_I(ctx, q, Vector2(0.4, 0.2), 0, 0) == doctest::Approx(4.0).epsilon(1e-9));
      // plus (lambda/2) Delta = 2 gives the full operator A : D^2 q = 6
    }
  }
}

TEST_CASE("stencil weights match hats evaluated at the sample points") {
  const Mesh mesh = build_structured_mesh(6);
  const ControlProblem p = rotated_game();
  for (double eps : {0.08, 0.3}) {
    const OperatorContext ctx(mesh, p, build_polar_rule(Kernel(3.0), 3, 8), eps);
    const BallQuadrature& rule = ctx.rule();
    for (Index z : mesh.interior_nodes()) {
      const Index dof = mesh.dof(z);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          std::map<Index, double> brute;
          brute[z] -= 2.0 / (eps * eps) * rule.m0;
          const Matrix2 m = diffusion_sqrt<double>(p.A(a, b)(mesh.vertex(z)), p.lambda);
          for (Index j = 0; j < rule.size(); ++j) {
            const Vector2 x = mesh.vertex(z) + eps * m * rule.nodes.col(j);
            for (Index y = 0; y < mesh.num_nodes(); ++y) {
              const double phi = hat(mesh, y, x);
              if (phi != 0.0) brute[y] += 2.0 / (eps * eps) * rule.weights[j] * phi;
            }
          }
          std::map<Index, double> got;
          for (const StencilEntry& e : ctx.stencil(dof, a, b)) got[e.node] += e.weight;
          for (const auto& [y, w] : brute) CHECK(got[y] == doctest::Approx(w).epsilon(1e-10).scale(1.0));
          for (const auto& [y, w] : got) CHECK(brute[y] == doctest::Approx(w).epsilon(1e-10).scale(1.0));
        }
    }
  }
}

TEST_CASE("F agrees with exhaustive control enumeration") {
  const Mesh mesh = build_structured_mesh(8);
  const ControlProblem p = rotated_game();
  const OperatorContext ctx(mesh, p, build_axis_rule(Kernel(3.0)), 0.2);
  const FeFunction w = FeFunction::from_interior(mesh, random_interior(mesh.num_interior(), 11));
  for (Index z : mesh.interior_nodes()) {
    const Eigen::MatrixXd t = control_table(ctx, w, z);
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 2; ++a) best = std::min(best, t.row(a).maxCoeff());
    const InfSup f = evaluate_F(ctx, w, z);
    CHECK(f.value == doctest::Approx(best).epsilon(1e-12).scale(1.0));
    CHECK(t.minCoeff() <= f.value + 1e-12);
    CHECK(f.value <= t.maxCoeff() + 1e-12);
  }
}

TEST_CASE("policy matrix agrees with pointwise evaluation") {
  const Mesh mesh = build_structured_mesh(8);
  const ControlProblem p = rotated_game();
  const OperatorContext ctx(mesh, p, build_polar_rule(Kernel(3.0), 3, 8), 0.25);
  const Index n = ctx.num_dofs();
  std::mt19937_64 gen(5);
  PolicyField policy{std::vector<int>(n), std::vector<int>(n)};
  for (Index i = 0; i < n; ++i) {
    policy.alpha[i] = static_cast<int>(gen() % 2);
    policy.beta[i] = static_cast<int>(gen() % 2);
  }
  const SparseMatrix g = assemble_policy_matrix(ctx, policy);
  const Eigen::VectorXd x = random_interior(n, 9);
  const FeFunction w = FeFunction::from_interior(mesh, x);
  const Eigen::VectorXd gx = g * x;
  for (Index i = 0; i < n; ++i) {
    const Index z = mesh.interior_nodes()[i];
    const double direct =
        ctx.laplacian_term(w.values(), i) + evaluate_I(ctx, w, z, policy.alpha[i], policy.beta[i]);
    CHECK(gx[i] == doctest::Approx(direct).epsilon(1e-11).scale(1.0));
    CHECK(g.coeff(i, i) == doctest::Approx(ctx.diagonal(i, policy.alpha[i], policy.beta[i])));
    CHECK(g.coeff(i, i) < 0.0);
  }
  for (Index i = 0; i < g.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(g, i); it; ++it)
      if (it.col() != it.row()) CHECK(it.value() >= 0.0);
}

TEST_CASE("F is monotone") {
  const Mesh mesh = build_structured_mesh(8);
  const ControlProblem p = rotated_game();
  const OperatorContext ctx(mesh, p, build_axis_rule(Kernel(3.0)), 0.2);
  const Eigen::VectorXd x = random_interior(ctx.num_dofs(), 21);
  const FeFunction w = FeFunction::from_interior(mesh, x);
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 30; ++trial) {
    const Index y = static_cast<Index>(gen() % ctx.num_dofs());
    FeFunction up = w;
    up.values()[mesh.interior_nodes()[y]] += 0.1;
    for (Index z : mesh.interior_nodes()) {
      const double before = evaluate_F(ctx, w, z).value, after = evaluate_F(ctx, up, z).value;
      if (mesh.dof(z) == y) CHECK(after <= before + 1e-12);
      else CHECK(after >= before - 1e-12);
    }
  }
}

TEST_CASE("residual of the exact discrete solution of a linear problem") {
  const Mesh mesh = build_structured_mesh(6);
  const ControlProblem p = make({Matrix2::Identity()}, 1, 1);
  const OperatorContext ctx(mesh, p, build_axis_rule(Kernel(3.0)), 0.2);
  const PolicyField zero{std::vector<int>(ctx.num_dofs(), 0), std::vector<int>(ctx.num_dofs(), 0)};
  const SparseMatrix g = assemble_policy_matrix(ctx, zero);
  const Eigen::VectorXd loads = Eigen::VectorXd::Ones(ctx.num_dofs());
  const Eigen::VectorXd x = linear_solve(g, loads);
  CHECK(residual(ctx, FeFunction::from_interior(mesh, x), loads) <= 1e-10);
  // discrete maximum principle: F(w) = 1 >= 0 with zero boundary data gives w <= 0
  CHECK(x.maxCoeff() <= 0.0);
}

TEST_CASE("non-acute meshes are rejected unless allowed") {
  Eigen::Matrix2Xd v(2, 5);
  v << 0, 1, 1, 0, 0.5, 0, 0, 1, 1, 0.2;
  Eigen::Matrix3Xi c(3, 4);
  c << 0, 1, 2, 3, 1, 2, 3, 0, 4, 4, 4, 4;
  const Mesh mesh(v, c);
  REQUIRE_FALSE(mesh.weakly_acute());
  const ControlProblem p = make({Matrix2::Identity()}, 1, 1);
  CHECK_THROWS_AS(OperatorContext(mesh, p, build_axis_rule(Kernel(3.0)), 0.2), InvariantViolation);
  CHECK_NOTHROW(OperatorContext(mesh, p, build_axis_rule(Kernel(3.0)), 0.2, ContextOptions{true}));
}

TEST_CASE("consistency functional vanishes on affine functions") {
  const Mesh mesh = build_structured_mesh(8);
  const ControlProblem p = rotated_game();
  const OperatorContext ctx(mesh, p, build_axis_rule(Kernel(3.0)), 0.2);
  const SmoothFunction affine{[](const Vector2& x) { return 1.0 + x.x() - 0.5 * x.y(); },
                              [](const Vector2&) { return Vector2(1.0, -0.5); }};
  CHECK(measure_consistency(ctx, affine).max_abs <= 1e-9);
}

TEST_CASE("support of the sample points") {
  const Mesh mesh = build_structured_mesh(4);
  const ControlProblem p = rotated_game();
  const OperatorContext ctx(mesh, p, build_axis_rule(Kernel(3.0)), 0.2);
  CHECK(ctx.q_eff() == doctest::Approx(std::sqrt(1.5)));
  CHECK(ctx.q_eff() <= ctx.q_paper());
}

TEST_CASE("huge eps leaves only the Laplacian and a diagonal shift") {
  const Mesh mesh = build_structured_mesh(5);
  const ControlProblem p = make({Matrix2::Identity()}, 1, 1);
  const double eps = 10.0;
  const OperatorContext ctx(mesh, p, build_axis_rule(Kernel(3.0)), eps);
  const Index n = ctx.num_dofs();
  const SparseMatrix g = assemble_policy_matrix(ctx, {std::vector<int>(n, 0), std::vector<int>(n, 0)});
  const SparseMatrix k = assemble_stiffness(mesh);
  const Eigen::VectorXd v = lumped_volumes(mesh);
  // every off-centre sample leaves the domain; the centre sample carries weight 2
  const double shift = 2.0 / (eps * eps) * (2.0 - 10.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const Index zi = mesh.interior_nodes()[i], zj = mesh.interior_nodes()[j];
      const double expected = -0.5 * k.coeff(zi, zj) / v[zi] + (i == j ? shift : 0.0);
      CHECK(g.coeff(i, j) == doctest::Approx(expected).epsilon(1e-12).scale(1.0));
    }
}
