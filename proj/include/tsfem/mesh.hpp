#pragma once

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <vector>

namespace tsfem {

using Index = Eigen::Index;
using Vector2 = Eigen::Vector2d;
using Vector3 = Eigen::Vector3d;

/// Absolute tolerance on barycentric coordinates used by point location.
inline constexpr double kGeomTol = 1e-12;

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  Vector2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
};

/// Result of a point query. `cell == kOutside` means the point is not in the
/// closed domain.
struct PointLocation {
  static constexpr Index kOutside = -1;

  Index cell = kOutside;
  Vector3 bary = Vector3::Zero();

  bool inside() const { return cell != kOutside; }
};

/// Conforming triangulation of a polygon. Immutable after construction.
///
/// Cells are stored counter-clockwise. Boundary nodes are the endpoints of
/// edges that belong to exactly one cell; every other node is interior.
/// Interior nodes carry a dense dof index 0..num_interior()-1 in the order of
/// `interior_nodes()`.
class Mesh {
 public:
  Mesh(Eigen::Matrix2Xd vertices, Eigen::Matrix3Xi cells);

  Index num_nodes() const { return vertices_.cols(); }
  Index num_cells() const { return cells_.cols(); }
  Index num_interior() const { return static_cast<Index>(interior_.size()); }

  const Eigen::Matrix2Xd& vertices() const { return vertices_; }
  const Eigen::Matrix3Xi& cells() const { return cells_; }
  Vector2 vertex(Index z) const { return vertices_.col(z); }
  std::array<Index, 3> cell(Index c) const {
    return {cells_(0, c), cells_(1, c), cells_(2, c)};
  }

  const std::vector<Index>& interior_nodes() const { return interior_; }
  const std::vector<Index>& boundary_nodes() const { return boundary_; }
  bool is_interior(Index z) const { return dof_[z] >= 0; }
  /// Interior dof index of node z, or -1 for boundary nodes.
  Index dof(Index z) const { return dof_[z]; }

  /// Incident cells of node z, ascending.
  const std::vector<Index>& star(Index z) const { return stars_[z]; }

  /// Maximum edge length.
  double h() const { return h_; }
  double cell_area(Index c) const { return areas_[c]; }
  double area() const;
  /// |omega_z|, the total area of the cells incident to z.
  double star_volume(Index z) const;

  /// True when no triangle angle exceeds pi/2 (up to `tol` on the cosine).
  bool weakly_acute(double tol = 1e-12) const;

  Vector2 centroid() const;
  /// Largest distance from `centroid()` to a vertex.
  double circumradius() const;

  /// Locate p using the background bin grid. On shared edges and vertices the
  /// lowest containing cell index wins.
  PointLocation locate(const Vector2& p) const;
  /// Same contract as locate(), by scanning every cell.
  PointLocation locate_exhaustive(const Vector2& p) const;

  Vector3 barycentric(Index c, const Vector2& p) const;

 private:
  void build_topology();
  void build_bins();
  bool contains(Index c, const Vector2& p, Vector3& bary) const;

  Eigen::Matrix2Xd vertices_;
  Eigen::Matrix3Xi cells_;
  std::vector<double> areas_;
  std::vector<Index> interior_;
  std::vector<Index> boundary_;
  std::vector<Index> dof_;
  std::vector<std::vector<Index>> stars_;
  double h_ = 0.0;

  // Uniform background grid over the bounding box; each bin lists the cells
  // whose (padded) bounding box meets it, ascending.
  Vector2 bin_origin_ = Vector2::Zero();
  Vector2 bin_size_ = Vector2::Ones();
  Index bins_x_ = 1, bins_y_ = 1;
  std::vector<std::vector<Index>> bins_;
};

/// Friedrichs-Keller triangulation of `rect` with n subdivisions per side:
/// each grid square is split along its south-west to north-east diagonal.
Mesh build_structured_mesh(int n, const Rect& rect = {});

/// Plain-text dump: node table `id x y interior|boundary` followed by the
/// cell table `id v0 v1 v2`.
void write_mesh(std::ostream& os, const Mesh& mesh);

}  // namespace tsfem
