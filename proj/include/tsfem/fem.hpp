#pragma once

#include "tsfem/linalg.hpp"
#include "tsfem/mesh.hpp"
#include "tsfem/problem.hpp"

#include <functional>
#include <iosfwd>

namespace tsfem {

/// Continuous piecewise-affine function on a mesh, given by its values at
/// every node. Extended by zero outside the domain. The mesh must outlive
/// the function.
class FeFunction {
 public:
  FeFunction(const Mesh& mesh, Eigen::VectorXd values);
  /// Zero boundary values, interior values taken from `interior` (dof order).
  static FeFunction from_interior(const Mesh& mesh, const Eigen::VectorXd& interior);
  static FeFunction zero(const Mesh& mesh);

  const Mesh& mesh() const { return *mesh_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  double operator[](Index z) const { return values_[z]; }

  /// Interior values in dof order.
  Eigen::VectorXd interior_values() const;
  /// Membership in V_h^0: all boundary values within `tol` of zero.
  bool in_v0(double tol = 0.0) const;

  double operator()(const Vector2& x) const;
  double at(const PointLocation& loc) const;

 private:
  const Mesh* mesh_;
  Eigen::VectorXd values_;
};

/// Nodal interpolant of f.
FeFunction interpolate(const Mesh& mesh, const std::function<double(const Vector2&)>& f);

/// K[z][y] = int grad phi_y . grad phi_z over all nodes.
SparseMatrix assemble_stiffness(const Mesh& mesh);

/// v_z = int phi_z = |omega_z| / 3 for every node.
Eigen::VectorXd lumped_volumes(const Mesh& mesh);

/// Delta_h w(z) = -v_z^{-1} sum_y K[z][y] w(y), z interior.
double discrete_laplacian(const SparseMatrix& stiffness, const Eigen::VectorXd& volumes, const FeFunction& w, Index z);

/// f_z = v_z^{-1} int f phi_z, in interior dof order. Edge-midpoint rule per
/// cell (exact for quadratic integrands).
Eigen::VectorXd load_coefficients(const Mesh& mesh, const Eigen::VectorXd& volumes,
                                  const std::function<double(const Vector2&)>& f);

/// Galerkin projection: boundary values w(z), interior values solve
/// K_II x = int grad w . grad phi_z - K_IB w_B.
FeFunction galerkin_projection(const Mesh& mesh, const SparseMatrix& stiffness, const SmoothFunction& w);

/// Plain-text `id x y value` table.
void write_fe_function(std::ostream& os, const FeFunction& w);

}  // namespace tsfem
