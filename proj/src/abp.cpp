#include "tsfem/abp.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tsfem {

namespace {

constexpr int kMaxCuts = 200;
// Reduced costs below this (relative to the height scale) are round-off.
constexpr double kEnterTol = 1e-10;
// A circle cut must beat the entering tolerance so the new point enters.
constexpr double kCutTol = 4e-10;

struct Basis {
  std::array<Index, 3> idx;
  Eigen::Matrix3d inverse;  // inverse of the column matrix [(p_i, 1)]
  Vector3 lambda;
};

Eigen::Matrix3d column_matrix(const std::vector<Vector2>& points, const std::array<Index, 3>& idx) {
  Eigen::Matrix3d b;
  for (int k = 0; k < 3; ++k) b.col(k) << points[idx[k]], 1.0;
  return b;
}

Basis make_basis(const std::vector<Vector2>& points, const std::array<Index, 3>& idx, const Vector2& x) {
  const Eigen::Matrix3d b = column_matrix(points, idx);
  Eigen::FullPivLU<Eigen::Matrix3d> lu(b);
  if (!lu.isInvertible()) throw std::invalid_argument("envelope start triangle is degenerate");
  Basis basis{idx, lu.inverse(), Vector3::Zero()};
  basis.lambda = basis.inverse * Vector3(x.x(), x.y(), 1.0);
  return basis;
}

Facet facet_of(const Basis& basis, const std::vector<double>& heights) {
  const Vector3 cb(heights[basis.idx[0]], heights[basis.idx[1]], heights[basis.idx[2]]);
  const Vector3 y = basis.inverse.transpose() * cb;
  return {basis.idx, Vector2(y[0], y[1]), y[2]};
}

double height_scale(const std::vector<double>& heights) {
  double s = 0.0;
  for (double h : heights) s = std::max(s, std::abs(h));
  return 1.0 + s;
}

// Primal simplex with Bland's rule; basis must be feasible on entry.
void run_simplex(const std::vector<Vector2>& points, const std::vector<double>& heights, const Vector2& x,
                 Basis& basis, double tol) {
  const Index n = static_cast<Index>(points.size());
  // Bland's rule terminates; the cap only guards against round-off cycling.
  const Index max_pivots = 50 * n + 100;
  for (Index pivot = 0; pivot < max_pivots; ++pivot) {
    const Facet f = facet_of(basis, heights);
    Index enter = -1;
    for (Index j = 0; j < n; ++j) {
      if (j == basis.idx[0] || j == basis.idx[1] || j == basis.idx[2]) continue;
      if (heights[j] - f(points[j]) < -tol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return;
    const Vector3 d = basis.inverse * Vector3(points[enter].x(), points[enter].y(), 1.0);
    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
      if (d[k] <= 1e-14) continue;
      const double r = std::max(basis.lambda[k], 0.0) / d[k];
      const double slack = 1e-12 * (1.0 + r);
      if (leave < 0 || r < best - slack || (r <= best + slack && basis.idx[k] < basis.idx[leave])) {
        best = r;
        leave = k;
      }
    }
    if (leave < 0) throw std::logic_error("envelope LP is unbounded");
    basis.idx[leave] = enter;
    basis = make_basis(points, basis.idx, x);
    for (int k = 0; k < 3; ++k) basis.lambda[k] = std::max(basis.lambda[k], 0.0);
  }
  throw std::logic_error("envelope simplex exceeded its pivot budget");
}

}  // namespace

EnvelopeQuery lower_envelope(const std::vector<Vector2>& points, const std::vector<double>& heights,
                             const Vector2& x, const std::array<Index, 3>& start) {
  if (points.size() != heights.size()) throw std::invalid_argument("points and heights differ in size");
  Basis basis = make_basis(points, start, x);
  if (basis.lambda.minCoeff() < -1e-12) throw std::invalid_argument("envelope start triangle does not contain x");
  for (int k = 0; k < 3; ++k) basis.lambda[k] = std::max(basis.lambda[k], 0.0);
  run_simplex(points, heights, x, basis, kEnterTol * height_scale(heights));
  const Facet f = facet_of(basis, heights);
  return {f(x), f};
}

ConvexEnvelope::ConvexEnvelope(const FeFunction& v, EnvelopeOptions options) : options_(options) {
  const Mesh& mesh = v.mesh();
  if (options_.ring_samples < 3) throw std::invalid_argument("at least 3 ring samples are required");
  center_ = mesh.centroid();
  radius_ = options_.radius > 0.0 ? options_.radius : 1.01 * mesh.circumradius();
  if (radius_ <= mesh.circumradius()) throw std::invalid_argument("outer ball does not contain the domain");
  // The inscribed ring polygon must contain the domain so a ring triangle
  // always provides a feasible start.
  if (radius_ * std::cos(std::numbers::pi / options_.ring_samples) <= mesh.circumradius())
    throw std::invalid_argument("too few ring samples for the outer radius");

  for (Index z = 0; z < mesh.num_nodes(); ++z) {
    points_.push_back(mesh.vertex(z));
    heights_.push_back(std::min(v[z], 0.0));
  }
  first_ring_ = static_cast<Index>(points_.size());
  for (int k = 0; k < options_.ring_samples; ++k) {
    const double t = 2.0 * std::numbers::pi * k / options_.ring_samples;
    points_.push_back(center_ + radius_ * Vector2(std::cos(t), std::sin(t)));
    heights_.push_back(0.0);
  }

  nodal_.resize(mesh.num_nodes());
  for (Index z = 0; z < mesh.num_nodes(); ++z) {
    const EnvelopeQuery q = solve(mesh.vertex(z), points_, heights_);
    // the node itself is a feasible combination, so Gamma(z) <= -v^-(z)
    nodal_[z] = std::min(q.value, heights_[z]);
    std::array<Index, 3> key = q.facet.vertices;
    std::sort(key.begin(), key.end());
    const bool known = std::any_of(facets_.begin(), facets_.end(), [&](const Facet& f) {
      std::array<Index, 3> k2 = f.vertices;
      std::sort(k2.begin(), k2.end());
      return k2 == key;
    });
    if (!known) facets_.push_back(q.facet);
  }
}

double ConvexEnvelope::operator()(const Vector2& x) const {
  if ((x - center_).norm() > radius_ * std::cos(std::numbers::pi / options_.ring_samples))
    throw std::out_of_range("envelope evaluation outside the ring polygon");
  std::vector<Vector2> points = points_;
  std::vector<double> heights = heights_;
  return solve(x, points, heights).value;
}

EnvelopeQuery ConvexEnvelope::solve(const Vector2& x, std::vector<Vector2>& points,
                                    std::vector<double>& heights) const {
  // fan triangle (r_0, r_k, r_{k+1}) of the initial ring containing x
  const Index m = options_.ring_samples;
  Basis basis{};
  bool found = false;
  for (Index k = 1; k + 1 < m && !found; ++k) {
    basis = make_basis(points, {first_ring_, first_ring_ + k, first_ring_ + k + 1}, x);
    found = basis.lambda.minCoeff() >= -1e-12;
  }
  if (!found) throw std::logic_error("no ring triangle contains the query point");
  for (int k = 0; k < 3; ++k) basis.lambda[k] = std::max(basis.lambda[k], 0.0);

  const double tol = kEnterTol * height_scale(heights);
  const double cut_tol = kCutTol * height_scale(heights);
  for (int cut = 0;; ++cut) {
    run_simplex(points, heights, x, basis, tol);
    const Facet f = facet_of(basis, heights);
    if (!options_.adaptive_ring) return {f(x), f};
    // max of the supporting plane over the circle
    const double slope = f.gradient.norm();
    if (f(center_) + radius_ * slope <= cut_tol || slope == 0.0) return {f(x), f};
    if (cut == kMaxCuts) throw std::logic_error("adaptive ring refinement did not settle");
    points.push_back(center_ + radius_ / slope * f.gradient);
    heights.push_back(0.0);
  }
}

std::vector<Index> contact_set(const FeFunction& v, const ConvexEnvelope& envelope, double tol) {
  if (tol <= 0.0) tol = 1e-9 * (1.0 + v.values().lpNorm<Eigen::Infinity>());
  std::vector<Index> nodes;
  for (Index z : v.mesh().interior_nodes())
    if (std::abs(envelope.at_node(z) - v[z]) <= tol && v[z] <= tol) nodes.push_back(z);
  return nodes;
}

AbpResult abp_ratio(const FeFunction& v, const Eigen::VectorXd& loads, EnvelopeOptions options) {
  const Mesh& mesh = v.mesh();
  if (loads.size() != mesh.num_interior()) throw std::invalid_argument("load vector size does not match the mesh");
  const ConvexEnvelope envelope(v, options);
  AbpResult result;
  result.contact = contact_set(v, envelope);
  result.sup_neg = std::max(0.0, -v.values().minCoeff());
  double sum = 0.0;
  for (Index z : result.contact) sum += loads[mesh.dof(z)] * loads[mesh.dof(z)] * mesh.star_volume(z);
  result.rhs = std::sqrt(sum);
  if (result.sup_neg == 0.0) result.ratio = 0.0;
  else if (result.rhs == 0.0) result.ratio = std::numeric_limits<double>::infinity();
  else result.ratio = result.sup_neg / result.rhs;
  result.max_violation = -std::numeric_limits<double>::infinity();
  for (Index z : mesh.interior_nodes()) result.max_violation = std::max(result.max_violation, envelope.at_node(z) - v[z]);
  return result;
}

double ring_sensitivity(const FeFunction& v, int coarse, bool adaptive_ring) {
  EnvelopeOptions a;
  a.ring_samples = coarse;
  a.adaptive_ring = adaptive_ring;
  EnvelopeOptions b = a;
  b.ring_samples = 2 * coarse;
  return (ConvexEnvelope(v, a).nodal() - ConvexEnvelope(v, b).nodal()).lpNorm<Eigen::Infinity>();
}

}  // namespace tsfem
