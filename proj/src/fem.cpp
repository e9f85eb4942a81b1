#include "tsfem/fem.hpp"

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsfem {

namespace {

// Gradients of the three barycentric coordinates of cell c (columns).
Eigen::Matrix<double, 2, 3> barycentric_gradients(const Mesh& mesh, Index c) {
  const auto t = mesh.cell(c);
  const Vector2 a = mesh.vertex(t[0]), b = mesh.vertex(t[1]), d = mesh.vertex(t[2]);
  const double two_area = 2.0 * mesh.cell_area(c);
  Eigen::Matrix<double, 2, 3> g;
  // grad lambda_k is the inward normal of the opposite edge over twice the area
  g.col(0) << b.y() - d.y(), d.x() - b.x();
  g.col(1) << d.y() - a.y(), a.x() - d.x();
  g.col(2) << a.y() - b.y(), b.x() - a.x();
  return g / two_area;
}

}  // namespace

FeFunction::FeFunction(const Mesh& mesh, Eigen::VectorXd values) : mesh_(&mesh), values_(std::move(values)) {
  if (values_.size() != mesh.num_nodes()) throw std::invalid_argument("nodal vector size does not match the mesh");
}

FeFunction FeFunction::from_interior(const Mesh& mesh, const Eigen::VectorXd& interior) {
  if (interior.size() != mesh.num_interior()) throw std::invalid_argument("interior vector size does not match the mesh");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mesh.num_nodes());
  const auto& nodes = mesh.interior_nodes();
  for (Index i = 0; i < interior.size(); ++i) v[nodes[i]] = interior[i];
  return {mesh, std::move(v)};
}

FeFunction FeFunction::zero(const Mesh& mesh) { return {mesh, Eigen::VectorXd::Zero(mesh.num_nodes())}; }

Eigen::VectorXd FeFunction::interior_values() const {
  const auto& nodes = mesh_->interior_nodes();
  Eigen::VectorXd v(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) v[static_cast<Index>(i)] = values_[nodes[i]];
  return v;
}

bool FeFunction::in_v0(double tol) const {
  for (Index z : mesh_->boundary_nodes())
    if (std::abs(values_[z]) > tol) return false;
  return true;
}

double FeFunction::at(const PointLocation& loc) const {
  if (!loc.inside()) return 0.0;
  const auto t = mesh_->cell(loc.cell);
  return loc.bary[0] * values_[t[0]] + loc.bary[1] * values_[t[1]] + loc.bary[2] * values_[t[2]];
}

double FeFunction::operator()(const Vector2& x) const { return at(mesh_->locate(x)); }

FeFunction interpolate(const Mesh& mesh, const std::function<double(const Vector2&)>& f) {
  Eigen::VectorXd v(mesh.num_nodes());
  for (Index z = 0; z < mesh.num_nodes(); ++z) v[z] = f(mesh.vertex(z));
  return {mesh, std::move(v)};
}

SparseMatrix assemble_stiffness(const Mesh& mesh) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(9 * mesh.num_cells()));
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const double area = mesh.cell_area(c);
    if (!(area > 0.0)) throw std::invalid_argument("degenerate cell " + std::to_string(c));
    const auto g = barycentric_gradients(mesh, c);
    const Eigen::Matrix3d local = area * g.transpose() * g;
    const auto t = mesh.cell(c);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) triplets.emplace_back(t[i], t[j], local(i, j));
  }
  SparseMatrix k(mesh.num_nodes(), mesh.num_nodes());
  k.setFromTriplets(triplets.begin(), triplets.end());
  k.makeCompressed();
  return k;
}

Eigen::VectorXd lumped_volumes(const Mesh& mesh) {
  Eigen::VectorXd v(mesh.num_nodes());
  for (Index z = 0; z < mesh.num_nodes(); ++z) v[z] = mesh.star_volume(z) / 3.0;
  return v;
}

double discrete_laplacian(const SparseMatrix& stiffness, const Eigen::VectorXd& volumes, const FeFunction& w, Index z) {
  if (!w.mesh().is_interior(z)) throw std::invalid_argument("discrete Laplacian requested at boundary node " + std::to_string(z));
  double s = 0.0;
  for (SparseMatrix::InnerIterator it(stiffness, z); it; ++it) s += it.value() * w[it.col()];
  return -s / volumes[z];
}

Eigen::VectorXd load_coefficients(const Mesh& mesh, const Eigen::VectorXd& volumes,
                                  const std::function<double(const Vector2&)>& f) {
  Eigen::VectorXd integral = Eigen::VectorXd::Zero(mesh.num_nodes());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto t = mesh.cell(c);
    const double w = mesh.cell_area(c) / 3.0;
    // midpoint of the edge opposite vertex k
    Eigen::Vector3d fm;
    for (int k = 0; k < 3; ++k) fm[k] = f(0.5 * (mesh.vertex(t[(k + 1) % 3]) + mesh.vertex(t[(k + 2) % 3])));
    // phi_{t[k]} is 1/2 at the two midpoints adjacent to vertex k, 0 at the third
    for (int k = 0; k < 3; ++k) integral[t[k]] += w * 0.5 * (fm.sum() - fm[k]);
  }
  Eigen::VectorXd loads(mesh.num_interior());
  const auto& nodes = mesh.interior_nodes();
  for (Index i = 0; i < loads.size(); ++i) loads[i] = integral[nodes[i]] / volumes[nodes[i]];
  return loads;
}

FeFunction galerkin_projection(const Mesh& mesh, const SparseMatrix& stiffness, const SmoothFunction& w) {
  const Index ni = mesh.num_interior();
  if (ni == 0) throw std::invalid_argument("Galerkin projection needs at least one interior node");
  Eigen::VectorXd values = Eigen::VectorXd::Zero(mesh.num_nodes());
  for (Index z : mesh.boundary_nodes()) values[z] = w(mesh.vertex(z));

  // b_z = int grad w . grad phi_z, edge-midpoint rule (grad phi_z is constant per cell)
  Eigen::VectorXd rhs_all = Eigen::VectorXd::Zero(mesh.num_nodes());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto t = mesh.cell(c);
    Vector2 mean_grad = Vector2::Zero();
    for (int k = 0; k < 3; ++k) mean_grad += w.gradient(0.5 * (mesh.vertex(t[(k + 1) % 3]) + mesh.vertex(t[(k + 2) % 3])));
    mean_grad /= 3.0;
    const auto g = barycentric_gradients(mesh, c);
    for (int k = 0; k < 3; ++k) rhs_all[t[k]] += mesh.cell_area(c) * mean_grad.dot(g.col(k));
  }

  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs(ni);
  for (Index i = 0; i < ni; ++i) {
    const Index z = mesh.interior_nodes()[i];
    double r = rhs_all[z];
    for (SparseMatrix::InnerIterator it(stiffness, z); it; ++it) {
      const Index d = mesh.dof(it.col());
      if (d >= 0) triplets.emplace_back(i, d, it.value());
      else r -= it.value() * values[it.col()];
    }
    rhs[i] = r;
  }
  SparseMatrix kii(ni, ni);
  kii.setFromTriplets(triplets.begin(), triplets.end());
  const Eigen::VectorXd x = linear_solve(kii, rhs);
  for (Index i = 0; i < ni; ++i) values[mesh.interior_nodes()[i]] = x[i];
  return {mesh, std::move(values)};
}

void write_fe_function(std::ostream& os, const FeFunction& w) {
  os.precision(17);
  os << "# id x y value\n";
  const Mesh& mesh = w.mesh();
  for (Index z = 0; z < mesh.num_nodes(); ++z)
    os << z << ' ' << mesh.vertex(z).x() << ' ' << mesh.vertex(z).y() << ' ' << w[z] << '\n';
}

}  // namespace tsfem
