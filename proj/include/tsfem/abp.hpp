#pragma once

#include "tsfem/fem.hpp"

#include <array>
#include <limits>
#include <vector>

namespace tsfem {

/// Affine function a . x + b spanned by three cloud points.
struct Facet {
  std::array<Index, 3> vertices;
  Vector2 gradient;
  double offset;

  double operator()(const Vector2& x) const { return gradient.dot(x) + offset; }
};

/// Value of the lower convex envelope of a weighted point cloud at x, with
/// the supporting facet found by the LP
///   min sum_i l_i h_i  s.t.  sum_i l_i (p_i, 1) = (x, 1),  l >= 0.
struct EnvelopeQuery {
  double value;
  Facet facet;
};

/// Solve the envelope LP by the simplex method (Bland's rule) from a
/// feasible starting triangle `start` containing x. Throws if `start` does
/// not contain x.
EnvelopeQuery lower_envelope(const std::vector<Vector2>& points, const std::vector<double>& heights,
                             const Vector2& x, const std::array<Index, 3>& start);

struct EnvelopeOptions {
  /// Radius of the outer ball; <= 0 selects 1.01 * circumradius.
  double radius = 0.0;
  /// Initial equispaced samples on the outer circle.
  int ring_samples = 64;
  /// Add circle points where a supporting plane is positive, so that the
  /// constraint L <= 0 holds on the whole circle rather than only at samples.
  bool adaptive_ring = true;
};

/// Lower convex envelope of -v^- over the ball B_R, with -v^- := 0 outside
/// the domain: lower hull of (z, -v^-(z)) over the nodes and (q, 0) over
/// points q on the circle of radius R.
class ConvexEnvelope {
 public:
  ConvexEnvelope(const FeFunction& v, EnvelopeOptions options = {});

  /// Envelope value at node z.
  double at_node(Index z) const { return nodal_[z]; }
  const Eigen::VectorXd& nodal() const { return nodal_; }
  /// Envelope at an arbitrary point of B_R.
  double operator()(const Vector2& x) const;

  /// Distinct supporting facets found at the nodes.
  const std::vector<Facet>& facets() const { return facets_; }
  const std::vector<Vector2>& points() const { return points_; }
  const std::vector<double>& heights() const { return heights_; }
  double radius() const { return radius_; }
  Vector2 center() const { return center_; }
  /// Number of circle points after adaptive refinement.
  Index ring_size() const { return static_cast<Index>(points_.size()) - first_ring_; }

 private:
  EnvelopeQuery solve(const Vector2& x, std::vector<Vector2>& points, std::vector<double>& heights) const;

  Vector2 center_;
  double radius_;
  EnvelopeOptions options_;
  Index first_ring_;
  std::vector<Vector2> points_;
  std::vector<double> heights_;
  Eigen::VectorXd nodal_;
  std::vector<Facet> facets_;
};

/// Interior nodes z with |Gamma(z) - v(z)| <= tol and v(z) <= tol.
/// tol <= 0 selects 1e-9 (1 + ||v||_inf).
std::vector<Index> contact_set(const FeFunction& v, const ConvexEnvelope& envelope, double tol = -1.0);

struct AbpResult {
  double sup_neg = 0.0;  ///< sup v^-
  double rhs = 0.0;      ///< (sum over the contact set of |f_z|^2 |omega_z|)^{1/2}
  /// sup_neg / rhs; 0 when sup_neg == 0, +inf when rhs == 0 < sup_neg.
  double ratio = 0.0;
  std::vector<Index> contact;
  double max_violation = 0.0;  ///< max over interior z of Gamma(z) - v(z)
};

/// Discrete ABP diagnostic for v with loads f_z (dof order).
AbpResult abp_ratio(const FeFunction& v, const Eigen::VectorXd& loads, EnvelopeOptions options = {});

/// max_z |Gamma_64(z) - Gamma_128(z)| over all nodes for initial ring sizes
/// `coarse` and 2 * `coarse`.
double ring_sensitivity(const FeFunction& v, int coarse = 64, bool adaptive_ring = true);

}  // namespace tsfem
