#include "tsfem/kernel.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace tsfem {

namespace {

// Integral of r^{2k+1} (1 - r^2)^p over [0, 1].
double radial_beta(int k, double p) { return 0.5 * std::beta(k + 1.0, p + 1.0); }

// Nodes and weights of the n-point Gauss rule for the weight (1 - t)^p on
// [0, 1] (Golub-Welsch on the Jacobi matrix of P_n^{(p, 0)}).
void gauss_jacobi_unit(int n, double p, Eigen::VectorXd& t, Eigen::VectorXd& w) {
  const double a = p, b = 0.0;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double s = 2.0 * i + a + b;
    jac(i, i) = (b * b - a * a) / (s * (s + 2.0));
    if (i > 0) {
      const double num = 4.0 * i * (i + a) * (i + b) * (i + a + b);
      const double den = s * s * (s + 1.0) * (s - 1.0);
      jac(i, i - 1) = jac(i - 1, i) = std::sqrt(num / den);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
  t = 0.5 * (eig.eigenvalues().array() + 1.0);
  w = eig.eigenvectors().row(0).transpose().array().square() / (p + 1.0);
}

}  // namespace

double kernel_normalization(int d, double p) {
  if (d != 2) throw std::invalid_argument("only d = 2 is supported");
  if (!(p >= 2.0)) throw std::invalid_argument("kernel exponent p must be >= 2");
  // 2 pi c * int_0^1 r^3 (1 - r^2)^p dr = 2
  const double c = 2.0 / (2.0 * std::numbers::pi * radial_beta(1, p));

  // numerical cross-check of the second moment
  auto integrand = [&](double r) { return 2.0 * std::numbers::pi * c * r * r * r * std::pow(1.0 - r * r, p); };
  const double moment = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, 1.0, 15, 1e-14);
  if (std::abs(moment - d) > 1e-10 * d) {
    std::ostringstream msg;
    msg << "kernel normalization cross-check failed: second moment " << moment;
    throw std::logic_error(msg.str());
  }
  return c;
}

Kernel::Kernel(double p) : p_(p), c_(kernel_normalization(2, p)) {}

double Kernel::radial(double r) const {
  if (r >= 1.0) return 0.0;
  return c_ * std::pow(1.0 - r * r, p_);
}

double Kernel::operator()(const Vector2& y) const { return radial(y.norm()); }

double Kernel::even_moment(int k) const { return 2.0 * std::numbers::pi * c_ * radial_beta(k, p_); }

Eigen::Matrix2d BallQuadrature::second_moment() const {
  Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
  for (Index j = 0; j < size(); ++j) s += weights(j) * nodes.col(j) * nodes.col(j).transpose();
  return s;
}

Vector2 BallQuadrature::first_moment() const { return nodes * weights; }

BallQuadrature build_axis_rule(const Kernel& kernel, double r) {
  const double m0 = kernel.mass();
  const double r_min = std::sqrt(2.0 / m0);
  if (!(r > 0.0 && r < 1.0) || r * r < 2.0 / m0) {
    std::ostringstream msg;
    msg << "axis rule radius " << r << " outside the admissible interval [" << r_min << ", 1)";
    throw std::invalid_argument(msg.str());
  }
  BallQuadrature q;
  q.kind = "axis";
  q.nodes.resize(2, 5);
  q.nodes << 0.0, r, -r, 0.0, 0.0,
             0.0, 0.0, 0.0, r, -r;
  const double wa = 1.0 / (2.0 * r * r);
  q.weights.resize(5);
  q.weights << m0 - 4.0 * wa, wa, wa, wa, wa;
  q.m0 = q.weights.sum();
  q.kappa = 2.0 * q.m0;
  return q;
}

BallQuadrature build_polar_rule(const Kernel& kernel, int n_r, int n_t) {
  if (n_r < 2) throw std::invalid_argument("polar rule needs n_r >= 2");
  if (n_t < 4) throw std::invalid_argument("polar rule needs n_t >= 4");
  Eigen::VectorXd t, w;
  gauss_jacobi_unit(n_r, kernel.p(), t, w);
  BallQuadrature q;
  q.kind = "polar";
  q.nodes.resize(2, n_r * n_t);
  q.weights.resize(n_r * n_t);
  // int_B g phi = int_0^{2pi} int_0^1 g(sqrt(t), theta) (c/2) (1 - t)^p dt dtheta
  const double scale = std::numbers::pi * kernel.normalization() / n_t;
  for (int i = 0; i < n_r; ++i) {
    const double r = std::sqrt(t(i));
    for (int k = 0; k < n_t; ++k) {
      const double theta = 2.0 * std::numbers::pi * k / n_t;
      const int j = i * n_t + k;
      q.nodes.col(j) << r * std::cos(theta), r * std::sin(theta);
      q.weights(j) = scale * w(i);
    }
  }
  if (q.weights.minCoeff() < 0.0) throw std::logic_error("polar rule produced a negative weight");
  q.m0 = q.weights.sum();
  q.kappa = 2.0 * q.m0;
  return q;
}

}  // namespace tsfem
