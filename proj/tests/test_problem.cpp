#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tsfem/problem.hpp"

#include <random>

using namespace tsfem;

namespace {

ControlProblem constant_problem(std::vector<Matrix2> mats, int na, int nb) {
  ControlProblem p;
  p.controls_a = na;
  p.controls_b = nb;
  for (const auto& m : mats) p.coeff.push_back(MatrixField::constant(m));
  p.source = ScalarField::constant(1.0);
  return p;
}

Matrix2 diag(double a, double b) { return Eigen::Vector2d(a, b).asDiagonal(); }

}  // namespace

TEST_CASE("ellipticity bounds") {
  const Mesh mesh = build_structured_mesh(4);
  const auto samples = sample_points(mesh);
  CHECK(samples.size() == static_cast<std::size_t>(mesh.num_nodes() + mesh.num_cells()));

  ControlProblem id = constant_problem({Matrix2::Identity()}, 1, 1);
  CHECK(ellipticity_bounds(id, samples) == std::pair{1.0, 1.0});
  CHECK(id.lambda == 1.0);

  ControlProblem d = constant_problem({diag(1, 2)}, 1, 1);
  CHECK(ellipticity_bounds(d, samples) == std::pair{1.0, 2.0});

  ControlProblem two = constant_problem({diag(1, 2), diag(2, 1)}, 2, 1);
  CHECK(ellipticity_bounds(two, samples) == std::pair{1.0, 2.0});
  CHECK(two.Lambda == 2.0);
}

TEST_CASE("non-elliptic data is rejected") {
  const auto samples = sample_points(build_structured_mesh(2));
  ControlProblem bad = constant_problem({diag(1, -0.5)}, 1, 1);
  CHECK_THROWS_AS(ellipticity_bounds(bad, samples), EllipticityError);
  ControlProblem zero = constant_problem({diag(0, 1)}, 1, 1);
  CHECK_THROWS_AS(ellipticity_bounds(zero, samples), EllipticityError);
  ControlProblem empty;
  empty.controls_a = 0;
  CHECK_THROWS(ellipticity_bounds(empty, samples));
}

TEST_CASE("variable coefficients use the sample minimum") {
  const Mesh mesh = build_structured_mesh(4);
  ControlProblem p;
  p.coeff = {MatrixField::function("diag(1+x, 2)", [](const Vector2& x) { return diag(1.0 + x.x(), 2.0); }, 1.0)};
  const auto [lo, hi] = ellipticity_bounds(p, sample_points(mesh));
  CHECK(lo == doctest::Approx(1.0));
  CHECK(hi == doctest::Approx(2.0));
  CHECK(p.coeff[0].modulus(0.5) == 0.5);
  CHECK(MatrixField::constant(Matrix2::Identity()).modulus(0.5) == 0.0);
}

TEST_CASE("diffusion square root") {
  CHECK(diffusion_sqrt<double>(Matrix2::Identity(), 1.0).isApprox(Matrix2::Identity() / std::sqrt(2.0), 1e-15));
  CHECK(diffusion_sqrt<double>(diag(2, 4), 2.0).isApprox(diag(1, std::sqrt(3.0)), 1e-15));

  Matrix2 a;
  a << 2, 1, 1, 2;
  const Matrix2 m = diffusion_sqrt<double>(a, 1.0);
  CHECK((m - m.transpose()).norm() == 0.0);
  CHECK((m * m - (a - 0.5 * Matrix2::Identity())).norm() <= 1e-12);
  // eigenvalues of A - I/2 are 0.5 and 2.5; sqrt taken on each
  Eigen::SelfAdjointEigenSolver<Matrix2> eig(m);
  CHECK(eig.eigenvalues()[0] == doctest::Approx(std::sqrt(0.5)));
  CHECK(eig.eigenvalues()[1] == doctest::Approx(std::sqrt(2.5)));

  CHECK_THROWS_AS(diffusion_sqrt<double>(diag(0.2, 1), 1.0), EllipticityError);
}

TEST_CASE("diffusion square root on random SPD matrices") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Matrix2 b;
    b << u(gen), u(gen), u(gen), u(gen);
    const Matrix2 a = b * b.transpose() + Matrix2::Identity();
    const double lambda = Eigen::SelfAdjointEigenSolver<Matrix2>(a).eigenvalues()[0];
    const Matrix2 m = diffusion_sqrt<double>(a, lambda);
    CHECK((m - m.transpose()).norm() == 0.0);
    CHECK((m * m - (a - 0.5 * lambda * Matrix2::Identity())).norm() <= 1e-12);
  }
}

TEST_CASE("sup norm of M") {
  const auto samples = sample_points(build_structured_mesh(3));
  ControlProblem id = constant_problem({Matrix2::Identity()}, 1, 1);
  ellipticity_bounds(id, samples);
  CHECK(sup_norm_M(id, samples) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(kernel_support_bound(id) == doctest::Approx(std::sqrt(2.0)));

  ControlProblem two = constant_problem({diag(1, 2), diag(2, 1)}, 2, 1);
  ellipticity_bounds(two, samples);
  CHECK(sup_norm_M(two, samples) == doctest::Approx(std::sqrt(1.5)).epsilon(1e-15));
  // constants: independent of the sample set
  CHECK(sup_norm_M(two, sample_points(build_structured_mesh(9))) == sup_norm_M(two, samples));
  CHECK(sup_norm_M(two, samples) <= std::sqrt(two.Lambda - two.lambda / 2) + 1e-15);
}

TEST_CASE("constant fields evaluate identically everywhere") {
  Matrix2 a;
  a << 1.5, 0.5, 0.5, 1.5;
  const MatrixField f = MatrixField::constant(a);
  CHECK(f({0.1, 0.2}) == f({0.9, 0.3}));
  CHECK(f.is_constant());
  const ScalarField s = ScalarField::constant(3.0);
  CHECK(s({0.0, 0.0}) == 3.0);
}
