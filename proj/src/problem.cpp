#include "tsfem/problem.hpp"

#include <algorithm>
#include <limits>

namespace tsfem {

ScalarField ScalarField::constant(double c) {
  ScalarField f;
  f.value_ = c;
  return f;
}

ScalarField ScalarField::function(std::string name, std::function<double(const Vector2&)> fn) {
  ScalarField f;
  f.fn_ = std::move(fn);
  f.name_ = std::move(name);
  return f;
}

MatrixField MatrixField::constant(const Matrix2& a) {
  MatrixField f;
  f.value_ = 0.5 * (a + a.transpose());
  return f;
}

MatrixField MatrixField::function(std::string name, std::function<Matrix2(const Vector2&)> fn,
                                  double lipschitz) {
  MatrixField f;
  f.fn_ = std::move(fn);
  f.name_ = std::move(name);
  f.lipschitz_ = lipschitz;
  return f;
}

Matrix2 MatrixField::operator()(const Vector2& x) const {
  if (!fn_) return value_;
  const Matrix2 a = fn_(x);
  return 0.5 * (a + a.transpose());
}

bool ControlProblem::constant_coefficients() const {
  return std::all_of(coeff.begin(), coeff.end(), [](const MatrixField& f) { return f.is_constant(); });
}

std::vector<Vector2> sample_points(const Mesh& mesh) {
  std::vector<Vector2> pts;
  pts.reserve(static_cast<std::size_t>(mesh.num_nodes() + mesh.num_cells()));
  for (Index z = 0; z < mesh.num_nodes(); ++z) pts.push_back(mesh.vertex(z));
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto t = mesh.cell(c);
    pts.push_back((mesh.vertex(t[0]) + mesh.vertex(t[1]) + mesh.vertex(t[2])) / 3.0);
  }
  return pts;
}

std::pair<double, double> ellipticity_bounds(ControlProblem& problem, const std::vector<Vector2>& samples) {
  if (problem.controls_a < 1 || problem.controls_b < 1)
    throw std::invalid_argument("control sets must be nonempty");
  if (problem.coeff.size() != static_cast<std::size_t>(problem.controls_a * problem.controls_b))
    throw std::invalid_argument("coefficient table size does not match the control sets");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const std::vector<Vector2> origin{problem.domain.center()};
  for (int a = 0; a < problem.controls_a; ++a) {
    for (int b = 0; b < problem.controls_b; ++b) {
      const MatrixField& field = problem.A(a, b);
      const auto& pts = field.is_constant() ? origin : samples;
      for (const Vector2& x : pts) {
        Eigen::SelfAdjointEigenSolver<Matrix2> eig;
        eig.computeDirect(field(x), Eigen::EigenvaluesOnly);
        lo = std::min(lo, eig.eigenvalues().minCoeff());
        hi = std::max(hi, eig.eigenvalues().maxCoeff());
      }
    }
  }
  if (!(lo > 0.0))
    throw EllipticityError("coefficients are not uniformly elliptic (lambda = " + std::to_string(lo) + ")");
  problem.lambda = lo;
  problem.Lambda = hi;
  return {lo, hi};
}

double sup_norm_M(const ControlProblem& problem, const std::vector<Vector2>& samples) {
  double q = 0.0;
  const std::vector<Vector2> origin{problem.domain.center()};
  for (int a = 0; a < problem.controls_a; ++a) {
    for (int b = 0; b < problem.controls_b; ++b) {
      const MatrixField& field = problem.A(a, b);
      for (const Vector2& x : field.is_constant() ? origin : samples) {
        const Matrix2 m = diffusion_sqrt<double>(field(x), problem.lambda);
        Eigen::SelfAdjointEigenSolver<Matrix2> eig;
        eig.computeDirect(m, Eigen::EigenvaluesOnly);
        q = std::max(q, eig.eigenvalues().cwiseAbs().maxCoeff());
      }
    }
  }
  return q;
}

}  // namespace tsfem
