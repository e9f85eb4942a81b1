#pragma once

#include "tsfem/mesh.hpp"

#include <string>

namespace tsfem {

/// Radial bump phi(y) = c (1 - |y|^2)^p on the unit disc, normalized so that
/// the integral of |y|^2 phi equals the dimension (2).
class Kernel {
 public:
  explicit Kernel(double p = 3.0);

  double p() const { return p_; }
  double normalization() const { return c_; }
  double operator()(const Vector2& y) const;
  /// Value as a function of the radius.
  double radial(double r) const;
  /// Integral of |y|^{2k} phi(y) over the disc, closed form.
  double even_moment(int k) const;
  /// Integral of phi.
  double mass() const { return even_moment(0); }

 private:
  double p_;
  double c_;
};

/// Normalization constant c for dimension d = 2 and exponent p >= 2.
double kernel_normalization(int d, double p);

/// Quadrature on the unit disc in effective-weight form: for smooth g,
/// sum_j weights(j) g(nodes.col(j)) approximates the integral of g phi.
/// All weights are nonnegative and the rule is exact on quadratics.
struct BallQuadrature {
  Eigen::Matrix2Xd nodes;
  Eigen::VectorXd weights;
  double m0 = 0.0;     ///< sum of the weights
  double kappa = 0.0;  ///< 2 * m0, the coefficient of the centre value
  std::string kind;

  Index size() const { return weights.size(); }
  /// sum_j W_j xi_j xi_j^T; the identity for an exact rule.
  Eigen::Matrix2d second_moment() const;
  Vector2 first_moment() const;
};

/// Five-point rule {0, +-r e_1, +-r e_2}: axis weights 1/(2 r^2), centre
/// weight m0 - 2/r^2. Requires r^2 >= 2/m0 so the centre weight is >= 0.
BallQuadrature build_axis_rule(const Kernel& kernel, double r = 0.5);

/// Gauss rule in radius for the weight r phi(r) (Gauss-Jacobi in t = r^2)
/// times n_t equispaced angles.
BallQuadrature build_polar_rule(const Kernel& kernel, int n_r, int n_t);

}  // namespace tsfem
