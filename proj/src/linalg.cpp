#include "tsfem/linalg.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <sstream>

namespace tsfem {

namespace {

constexpr double kResidualBound = 1e-12;

// Above this many unknowns the LU fill of the wide stencil outgrows memory;
// preconditioned BiCGSTAB goes first and LU is only the fallback.
constexpr Eigen::Index kDirectLimit = 8192;
constexpr double kIlutDropTol = 1e-3;
constexpr int kIlutFill = 10;
constexpr int kKrylovMaxIterations = 1000;

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

}  // namespace

double inf_norm(const SparseMatrix& matrix) {
  double best = 0.0;
  for (Eigen::Index r = 0; r < matrix.outerSize(); ++r) {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(matrix, r); it; ++it) s += std::abs(it.value());
    best = std::max(best, s);
  }
  return best;
}

double relative_residual(const SparseMatrix& matrix, const Eigen::VectorXd& x, const Eigen::VectorXd& rhs) {
  const double r = (rhs - matrix * x).lpNorm<Eigen::Infinity>();
  const double scale = inf_norm(matrix) * x.lpNorm<Eigen::Infinity>() + rhs.lpNorm<Eigen::Infinity>();
  return scale > 0.0 ? r / scale : r;
}

struct Factorization::Impl {
  using Lu = Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>>;
  using Krylov = Eigen::BiCGSTAB<ColMatrix, Eigen::IncompleteLUT<double>>;

  ColMatrix col;
  std::unique_ptr<Lu> lu;
  std::unique_ptr<Krylov> krylov;

  void factorize() {
    lu = std::make_unique<Lu>();
    lu->analyzePattern(col);
    lu->factorize(col);
    if (lu->info() != Eigen::Success) {
      std::ostringstream msg;
      msg << "sparse LU failed: " << lu->lastErrorMessage();
      throw LinearSolveError(msg.str());
    }
  }

  void precondition() {
    krylov = std::make_unique<Krylov>();
    krylov->preconditioner().setDroptol(kIlutDropTol);
    krylov->preconditioner().setFillfactor(kIlutFill);
    krylov->setTolerance(1e-15);
    krylov->setMaxIterations(kKrylovMaxIterations);
    krylov->compute(col);
  }
};

Factorization::Factorization(const SparseMatrix& matrix) : matrix_(matrix), impl_(std::make_unique<Impl>()) {
  if (matrix.rows() != matrix.cols()) throw LinearSolveError("system matrix is not square");
  impl_->col = matrix;
  impl_->col.makeCompressed();
  if (matrix.rows() > kDirectLimit) impl_->precondition();
  else impl_->factorize();
}

Factorization::~Factorization() = default;
Factorization::Factorization(Factorization&&) noexcept = default;
Factorization& Factorization::operator=(Factorization&&) noexcept = default;

Eigen::VectorXd Factorization::solve(const Eigen::VectorXd& rhs) const {
  double rel_krylov = -1.0;
  if (impl_->krylov) {
    Eigen::VectorXd y = impl_->krylov->solve(rhs);
    rel_krylov = relative_residual(matrix_, y, rhs);
    if (rel_krylov <= kResidualBound) return y;
    if (!impl_->lu) impl_->factorize();
  }

  Eigen::VectorXd x = impl_->lu->solve(rhs);
  double rel = relative_residual(matrix_, x, rhs);
  if (rel <= kResidualBound) return x;

  // one step of iterative refinement, then the Krylov fallback
  x += impl_->lu->solve(Eigen::VectorXd(rhs - matrix_ * x));
  rel = relative_residual(matrix_, x, rhs);
  if (rel <= kResidualBound) return x;

  if (!impl_->krylov) {
    impl_->precondition();
    const Eigen::VectorXd y = impl_->krylov->solveWithGuess(rhs, x);
    rel_krylov = relative_residual(matrix_, y, rhs);
    if (rel_krylov <= kResidualBound) return y;
  }

  std::ostringstream msg;
  msg << "linear solve missed the residual bound: LU " << rel << ", BiCGSTAB " << rel_krylov;
  throw LinearSolveError(msg.str());
}

Eigen::VectorXd linear_solve(const SparseMatrix& matrix, const Eigen::VectorXd& rhs) {
  return Factorization(matrix).solve(rhs);
}

}  // namespace tsfem
