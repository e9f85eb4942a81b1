#pragma once

#include "tsfem/mesh.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tsfem {

using Matrix2 = Eigen::Matrix2d;

/// Smooth scalar function with its gradient. Used for sources, manufactured
/// solutions and the consistency diagnostics.
struct SmoothFunction {
  std::function<double(const Vector2&)> value;
  std::function<Vector2(const Vector2&)> gradient;

  double operator()(const Vector2& x) const { return value(x); }
};

/// Scalar field: a constant or a named function of x.
class ScalarField {
 public:
  ScalarField() = default;
  static ScalarField constant(double c);
  static ScalarField function(std::string name, std::function<double(const Vector2&)> f);

  double operator()(const Vector2& x) const { return fn_ ? fn_(x) : value_; }
  bool is_constant() const { return !fn_; }
  const std::string& name() const { return name_; }

 private:
  double value_ = 0.0;
  std::function<double(const Vector2&)> fn_;
  std::string name_ = "constant";
};

/// Symmetric 2x2 coefficient field. Constant fields have modulus of
/// continuity identically zero; function fields carry a Lipschitz bound used
/// as a linear modulus.
class MatrixField {
 public:
  MatrixField() = default;
  static MatrixField constant(const Matrix2& a);
  static MatrixField function(std::string name, std::function<Matrix2(const Vector2&)> f,
                              double lipschitz);

  Matrix2 operator()(const Vector2& x) const;
  bool is_constant() const { return !fn_; }
  const std::string& name() const { return name_; }
  /// Modulus of continuity of the field, evaluated at t.
  double modulus(double t) const { return is_constant() ? 0.0 : lipschitz_ * t; }

 private:
  Matrix2 value_ = Matrix2::Identity();
  std::function<Matrix2(const Vector2&)> fn_;
  double lipschitz_ = 0.0;
  std::string name_ = "constant";
};

/// inf over controls_a, sup over controls_b of A^{ab}(x) : D^2 u = f on a
/// rectangle, u = 0 on its boundary.
struct ControlProblem {
  std::string id;
  int controls_a = 1;
  int controls_b = 1;
  /// Row-major table, entry a * controls_b + b.
  std::vector<MatrixField> coeff;
  ScalarField source;
  Rect domain;
  double lambda = 0.0;
  double Lambda = 0.0;
  /// Exact solution, when known.
  std::optional<SmoothFunction> exact;

  const MatrixField& A(int a, int b) const { return coeff.at(static_cast<std::size_t>(a * controls_b + b)); }
  bool constant_coefficients() const;
};

/// Error raised when coefficient data violate the ellipticity contract.
class EllipticityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Cell barycenters plus vertices of `mesh`.
std::vector<Vector2> sample_points(const Mesh& mesh);

/// Extreme eigenvalues of A^{ab}(x) over all controls and samples. Stores
/// the result into `problem`.
std::pair<double, double> ellipticity_bounds(ControlProblem& problem, const std::vector<Vector2>& samples);

/// Principal square root of the symmetric positive semidefinite matrix
/// A - (lambda/2) I, via the closed-form 2x2 eigendecomposition.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> diffusion_sqrt(const Eigen::Matrix<Scalar, 2, 2>& a, Scalar lambda) {
  using Mat = Eigen::Matrix<Scalar, 2, 2>;
  const Mat sym = Scalar(0.5) * (a + a.transpose());
  const Mat shifted = sym - Scalar(0.5) * lambda * Mat::Identity();
  Eigen::SelfAdjointEigenSolver<Mat> eig;
  eig.computeDirect(shifted);
  const auto& ev = eig.eigenvalues();
  if (ev.minCoeff() < Scalar(0))
    throw EllipticityError("A - (lambda/2) I is not positive semidefinite (min eigenvalue " +
                           std::to_string(static_cast<double>(ev.minCoeff())) + ")");
  const Mat& v = eig.eigenvectors();
  Mat m = v * ev.cwiseSqrt().asDiagonal() * v.transpose();
  return Scalar(0.5) * (m + m.transpose());
}

/// max ||M^{ab}(x)||_2 over controls and samples. Requires lambda to be set.
double sup_norm_M(const ControlProblem& problem, const std::vector<Vector2>& samples);

/// sqrt(2 / lambda).
inline double kernel_support_bound(const ControlProblem& problem) { return std::sqrt(2.0 / problem.lambda); }

}  // namespace tsfem
