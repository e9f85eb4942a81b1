#include "tsfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>

namespace tsfem {

namespace {

double signed_area(const Vector2& a, const Vector2& b, const Vector2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace

Mesh::Mesh(Eigen::Matrix2Xd vertices, Eigen::Matrix3Xi cells)
    : vertices_(std::move(vertices)), cells_(std::move(cells)) {
  if (cells_.cols() == 0) throw std::invalid_argument("mesh has no cells");
  const Index nv = vertices_.cols();
  areas_.resize(cells_.cols());
  for (Index c = 0; c < cells_.cols(); ++c) {
    for (int k = 0; k < 3; ++k) {
      if (cells_(k, c) < 0 || cells_(k, c) >= nv)
        throw std::invalid_argument("cell " + std::to_string(c) + " references a missing vertex");
    }
    double a = signed_area(vertex(cells_(0, c)), vertex(cells_(1, c)), vertex(cells_(2, c)));
    if (std::abs(a) <= 0.0)
      throw std::invalid_argument("degenerate cell " + std::to_string(c));
    if (a < 0) {
      std::swap(cells_(1, c), cells_(2, c));
      a = -a;
    }
    areas_[c] = a;
  }
  build_topology();
  build_bins();
}

void Mesh::build_topology() {
  const Index nv = num_nodes();
  stars_.assign(nv, {});
  std::map<std::pair<Index, Index>, int> edge_count;
  h_ = 0.0;
  for (Index c = 0; c < num_cells(); ++c) {
    for (int k = 0; k < 3; ++k) {
      const Index a = cells_(k, c), b = cells_((k + 1) % 3, c);
      stars_[a].push_back(c);
      ++edge_count[std::minmax(a, b)];
      h_ = std::max(h_, (vertex(a) - vertex(b)).norm());
    }
  }
  std::vector<char> on_boundary(nv, 0);
  for (const auto& [edge, count] : edge_count) {
    if (count > 2) throw std::invalid_argument("non-conforming mesh: edge shared by more than two cells");
    if (count == 1) on_boundary[edge.first] = on_boundary[edge.second] = 1;
  }
  interior_.clear();
  boundary_.clear();
  dof_.assign(nv, -1);
  for (Index z = 0; z < nv; ++z) {
    if (stars_[z].empty()) throw std::invalid_argument("vertex " + std::to_string(z) + " is not used by any cell");
    if (on_boundary[z]) {
      boundary_.push_back(z);
    } else {
      dof_[z] = static_cast<Index>(interior_.size());
      interior_.push_back(z);
    }
  }
}

void Mesh::build_bins() {
  const Vector2 lo = vertices_.rowwise().minCoeff();
  const Vector2 hi = vertices_.rowwise().maxCoeff();
  const Vector2 ext = (hi - lo).cwiseMax(1e-300);
  // Aim for roughly one cell per bin along each axis.
  const double target = std::max(h_, 1e-300);
  bins_x_ = std::clamp<Index>(static_cast<Index>(std::ceil(ext.x() / target)), 1, 4096);
  bins_y_ = std::clamp<Index>(static_cast<Index>(std::ceil(ext.y() / target)), 1, 4096);
  bin_origin_ = lo;
  bin_size_ = {ext.x() / static_cast<double>(bins_x_), ext.y() / static_cast<double>(bins_y_)};
  bins_.assign(bins_x_ * bins_y_, {});
  const double pad = 1e-9 * ext.maxCoeff();
  for (Index c = 0; c < num_cells(); ++c) {
    Vector2 cmin = vertex(cells_(0, c)), cmax = cmin;
    for (int k = 1; k < 3; ++k) {
      cmin = cmin.cwiseMin(vertex(cells_(k, c)));
      cmax = cmax.cwiseMax(vertex(cells_(k, c)));
    }
    cmin.array() -= pad;
    cmax.array() += pad;
    const auto bx0 = std::clamp<Index>(static_cast<Index>(std::floor((cmin.x() - lo.x()) / bin_size_.x())), 0, bins_x_ - 1);
    const auto bx1 = std::clamp<Index>(static_cast<Index>(std::floor((cmax.x() - lo.x()) / bin_size_.x())), 0, bins_x_ - 1);
    const auto by0 = std::clamp<Index>(static_cast<Index>(std::floor((cmin.y() - lo.y()) / bin_size_.y())), 0, bins_y_ - 1);
    const auto by1 = std::clamp<Index>(static_cast<Index>(std::floor((cmax.y() - lo.y()) / bin_size_.y())), 0, bins_y_ - 1);
    for (Index by = by0; by <= by1; ++by)
      for (Index bx = bx0; bx <= bx1; ++bx) bins_[by * bins_x_ + bx].push_back(c);
  }
}

double Mesh::area() const {
  double a = 0.0;
  for (double ac : areas_) a += ac;
  return a;
}

double Mesh::star_volume(Index z) const {
  if (z < 0 || z >= num_nodes()) throw std::out_of_range("invalid node index " + std::to_string(z));
  double a = 0.0;
  for (Index c : stars_[z]) a += areas_[c];
  return a;
}

bool Mesh::weakly_acute(double tol) const {
  for (Index c = 0; c < num_cells(); ++c) {
    for (int k = 0; k < 3; ++k) {
      const Vector2 p = vertex(cells_(k, c));
      const Vector2 e1 = vertex(cells_((k + 1) % 3, c)) - p;
      const Vector2 e2 = vertex(cells_((k + 2) % 3, c)) - p;
      // obtuse iff the cosine is negative
      if (e1.dot(e2) < -tol * e1.norm() * e2.norm()) return false;
    }
  }
  return true;
}

Vector2 Mesh::centroid() const {
  Vector2 c = Vector2::Zero();
  double total = 0.0;
  for (Index k = 0; k < num_cells(); ++k) {
    const Vector2 g = (vertex(cells_(0, k)) + vertex(cells_(1, k)) + vertex(cells_(2, k))) / 3.0;
    c += areas_[k] * g;
    total += areas_[k];
  }
  return c / total;
}

double Mesh::circumradius() const {
  const Vector2 c = centroid();
  return (vertices_.colwise() - c).colwise().norm().maxCoeff();
}

Vector3 Mesh::barycentric(Index c, const Vector2& p) const {
  const Vector2 a = vertex(cells_(0, c)), b = vertex(cells_(1, c)), d = vertex(cells_(2, c));
  const double inv = 1.0 / (2.0 * areas_[c]);
  Vector3 l;
  l(1) = 2.0 * signed_area(a, p, d) * inv;
  l(2) = 2.0 * signed_area(a, b, p) * inv;
  l(0) = 1.0 - l(1) - l(2);
  return l;
}

bool Mesh::contains(Index c, const Vector2& p, Vector3& bary) const {
  bary = barycentric(c, p);
  return bary.minCoeff() >= -kGeomTol;
}

PointLocation Mesh::locate(const Vector2& p) const {
  PointLocation loc;
  const Vector2 rel = (p - bin_origin_).cwiseQuotient(bin_size_);
  const double tol = 1e-9;
  if (!(rel.x() >= -tol && rel.y() >= -tol && rel.x() <= bins_x_ + tol && rel.y() <= bins_y_ + tol)) return loc;
  const auto bx = std::clamp<Index>(static_cast<Index>(std::floor(rel.x())), 0, bins_x_ - 1);
  const auto by = std::clamp<Index>(static_cast<Index>(std::floor(rel.y())), 0, bins_y_ - 1);
  Vector3 bary;
  for (Index c : bins_[by * bins_x_ + bx]) {
    if (contains(c, p, bary)) {
      loc.cell = c;
      loc.bary = bary;
      return loc;
    }
  }
  return loc;
}

PointLocation Mesh::locate_exhaustive(const Vector2& p) const {
  PointLocation loc;
  Vector3 bary;
  for (Index c = 0; c < num_cells(); ++c) {
    if (contains(c, p, bary)) {
      loc.cell = c;
      loc.bary = bary;
      return loc;
    }
  }
  return loc;
}

Mesh build_structured_mesh(int n, const Rect& rect) {
  if (n < 1) throw std::invalid_argument("subdivision count must be >= 1");
  if (!(rect.width() > 0.0) || !(rect.height() > 0.0))
    throw std::invalid_argument("degenerate rectangle");
  const Index m = n + 1;
  Eigen::Matrix2Xd v(2, m * m);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < m; ++i) {
      // exact endpoints; interior coordinates by affine interpolation
      v(0, j * m + i) = (i == n) ? rect.x1 : rect.x0 + rect.width() * static_cast<double>(i) / n;
      v(1, j * m + i) = (j == n) ? rect.y1 : rect.y0 + rect.height() * static_cast<double>(j) / n;
    }
  }
  Eigen::Matrix3Xi cells(3, 2 * n * n);
  Index c = 0;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      const int sw = static_cast<int>(j * m + i), se = sw + 1;
      const int nw = static_cast<int>(sw + m), ne = nw + 1;
      cells.col(c++) << sw, se, ne;
      cells.col(c++) << sw, ne, nw;
    }
  }
  return Mesh(std::move(v), std::move(cells));
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
  os.precision(17);
  os << "# nodes: id x y interior|boundary\n";
  for (Index z = 0; z < mesh.num_nodes(); ++z) {
    os << z << ' ' << mesh.vertex(z).x() << ' ' << mesh.vertex(z).y() << ' '
       << (mesh.is_interior(z) ? "interior" : "boundary") << '\n';
  }
  os << "# cells: id v0 v1 v2\n";
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto t = mesh.cell(c);
    os << c << ' ' << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
}

}  // namespace tsfem
