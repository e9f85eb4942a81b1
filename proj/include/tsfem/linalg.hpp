#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <memory>
#include <stdexcept>

namespace tsfem {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Raised when a factorization fails or the post-solve residual misses the
/// contract bound.
class LinearSolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solve `matrix * x = rhs` by sparse LU (COLAMD ordering, deterministic)
/// and check ||rhs - matrix x||_inf <= 1e-12 (||matrix||_inf ||x||_inf +
/// ||rhs||_inf). Falls back to BiCGSTAB/ILUT if the residual check fails.
/// Systems above 8192 unknowns try BiCGSTAB/ILUT first.
Eigen::VectorXd linear_solve(const SparseMatrix& matrix, const Eigen::VectorXd& rhs);

/// Factorization of one system matrix, reusable for several right-hand
/// sides. Same residual contract as linear_solve(). Large systems get an
/// ILUT preconditioner for BiCGSTAB instead, with sparse LU built on demand
/// when a Krylov solve misses the bound. Not safe for concurrent solves.
class Factorization {
 public:
  explicit Factorization(const SparseMatrix& matrix);
  ~Factorization();
  Factorization(Factorization&&) noexcept;
  Factorization& operator=(Factorization&&) noexcept;

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  const SparseMatrix& matrix() const { return matrix_; }

 private:
  struct Impl;
  SparseMatrix matrix_;
  std::unique_ptr<Impl> impl_;
};

/// Relative residual used by linear_solve().
double relative_residual(const SparseMatrix& matrix, const Eigen::VectorXd& x, const Eigen::VectorXd& rhs);

/// Infinity norm of a sparse matrix (max absolute row sum).
double inf_norm(const SparseMatrix& matrix);

}  // namespace tsfem
