#pragma once

#include <span>
#include <vector>

#include "pbwn/matrix.hpp"

// Primitives for the manifold of n x p matrices whose rows all have unit L2
// norm. Rows, not columns, are the normalized unit everywhere in this
// library: row i of a weight matrix is neuron i's incoming weight vector.

namespace pbwn::manifold {

/// A row-norm deviation up to this much still counts as on-manifold.
inline constexpr double kManifoldTol = 1e-9;
/// Rows with norm below this are degenerate: normalizing them is undefined.
inline constexpr double kZeroTol = 1e-12;
/// Tolerance for the tangency residual diag(W V^T).
inline constexpr double kTangencyTol = 1e-10;

/// A matrix validated to have unit-norm rows (within kManifoldTol).
class ObliquePoint {
 public:
  /// Validates the row-norm constraint; throws ConfigError on violation.
  static ObliquePoint from_matrix(Matrix w);

  const Matrix& matrix() const { return w_; }
  std::size_t rows() const { return w_.rows(); }
  std::size_t cols() const { return w_.cols(); }

 private:
  friend ObliquePoint norm_project(const Matrix&);
  friend ObliquePoint retract(const ObliquePoint&, const class TangentVector&, double);
  struct Trusted {};
  ObliquePoint(Matrix w, Trusted) : w_(std::move(w)) {}

  Matrix w_;
};

/// A matrix validated (or constructed) to lie in the tangent space at a base
/// point W, i.e. diag(W V^T) = 0: each row of V is orthogonal to the
/// corresponding row of W.
class TangentVector {
 public:
  /// Validates tangency at the base point; throws ConfigError on violation.
  static TangentVector at(const ObliquePoint& base, Matrix v);

  const Matrix& matrix() const { return v_; }

 private:
  friend TangentVector riemannian_gradient(const ObliquePoint&, const Matrix&);
  struct Trusted {};
  TangentVector(Matrix v, Trusted) : v_(std::move(v)) {}

  Matrix v_;
};

/// Diagonal of a square matrix, off-diagonal entries zeroed.
Matrix ddiag(const Matrix& m);

/// Projects an ordinary gradient G onto the tangent space at W:
/// G - diag(W G^T) W, computed per row as g - (w . g) w.
/// The result satisfies the tangency invariant by construction.
TangentVector riemannian_gradient(const ObliquePoint& w, const Matrix& g);

/// Steps to W - eta*V and rescales each row by the inverse square root of
/// the corresponding diagonal entry of (W - eta*V)(W - eta*V)^T, landing
/// back on the manifold. Throws DegenerateRowError if a stepped row
/// collapses below kZeroTol.
ObliquePoint retract(const ObliquePoint& w, const TangentVector& v, double eta);

/// Divides each row by its L2 norm. Throws DegenerateRowError (naming the
/// row) if any row norm is below kZeroTol.
ObliquePoint norm_project(const Matrix& m);

/// In-place row normalization; the workhorse behind norm_project and the
/// optimizer's projection events.
void project_rows_inplace(Matrix& m);

/// Largest |row norm - 1| over all rows; 0 means exactly on-manifold.
double max_row_norm_deviation(const Matrix& m);

/// Checks ||(w . g) w|| <= ||g|| + 1e-12 for a unit row w, i.e. the tangent
/// correction never dominates the ordinary gradient.
bool dominance_bound_check(std::span<const double> w_row, std::span<const double> g_row);

}  // namespace pbwn::manifold
