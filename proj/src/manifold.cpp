#include "pbwn/manifold.hpp"

#include <cmath>
#include <cstdlib>

#include "pbwn/tensor.hpp"

namespace pbwn::manifold {

ObliquePoint ObliquePoint::from_matrix(Matrix w) {
  const auto norms = tensor::row_l2_norms(w);
  for (std::size_t i = 0; i < norms.size(); ++i) {
    if (std::abs(norms[i] - 1.0) > kManifoldTol) {
      throw ConfigError("ObliquePoint: row " + std::to_string(i) + " has norm " +
                        std::to_string(norms[i]) + ", not unit within tolerance");
    }
  }
  return ObliquePoint(std::move(w), Trusted{});
}

TangentVector TangentVector::at(const ObliquePoint& base, Matrix v) {
  if (!base.matrix().same_shape(v)) {
    throw DimensionError("TangentVector: shape " + v.shape_str() +
                         " does not match base point " + base.matrix().shape_str());
  }
  for (std::size_t i = 0; i < v.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < v.cols(); ++j) dot += base.matrix()(i, j) * v(i, j);
    if (std::abs(dot) > kTangencyTol) {
      throw ConfigError("TangentVector: row " + std::to_string(i) +
                        " is not tangent (residual " + std::to_string(dot) + ")");
    }
  }
  return TangentVector(std::move(v), Trusted{});
}

Matrix ddiag(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("ddiag: matrix is " + m.shape_str() + ", not square");
  }
  Matrix d(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) d(i, i) = m(i, i);
  return d;
}

TangentVector riemannian_gradient(const ObliquePoint& w, const Matrix& g) {
  const Matrix& wm = w.matrix();
  if (!wm.same_shape(g)) {
    throw DimensionError("riemannian_gradient: gradient " + g.shape_str() +
                         " does not match point " + wm.shape_str());
  }
  Matrix out(g.rows(), g.cols());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < g.cols(); ++j) dot += wm(i, j) * g(i, j);
    for (std::size_t j = 0; j < g.cols(); ++j) out(i, j) = g(i, j) - dot * wm(i, j);
  }
  return TangentVector(std::move(out), TangentVector::Trusted{});
}

ObliquePoint retract(const ObliquePoint& w, const TangentVector& v, double eta) {
  const Matrix& wm = w.matrix();
  const Matrix& vm = v.matrix();
  Matrix stepped(wm.rows(), wm.cols());
  for (std::size_t i = 0; i < wm.size(); ++i) {
    stepped.data()[i] = wm.data()[i] - eta * vm.data()[i];
  }
  // Row i of the result is row i of `stepped` times 1/sqrt(M_ii), where
  // M_ii = ||stepped_i||^2 is the i-th diagonal entry of stepped*stepped^T.
  std::vector<double> inv_sqrt(stepped.rows());
  for (std::size_t i = 0; i < stepped.rows(); ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < stepped.cols(); ++j) {
      sq += stepped(i, j) * stepped(i, j);
    }
    if (std::sqrt(sq) < kZeroTol) {
      throw DegenerateRowError("retract: stepped row " + std::to_string(i) +
                                   " has near-zero norm, rescaling is undefined",
                               i);
    }
    inv_sqrt[i] = 1.0 / std::sqrt(sq);
  }
  return ObliquePoint(tensor::scale_rows(stepped, inv_sqrt), ObliquePoint::Trusted{});
}

void project_rows_inplace(Matrix& m) {
  const auto norms = tensor::row_l2_norms(m);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (norms[i] < kZeroTol) {
      throw DegenerateRowError("norm_project: row " + std::to_string(i) +
                                   " has norm below the zero tolerance",
                               i);
    }
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double* row = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) row[j] /= norms[i];
  }
}

ObliquePoint norm_project(const Matrix& m) {
  Matrix w = m;
  project_rows_inplace(w);
  return ObliquePoint(std::move(w), ObliquePoint::Trusted{});
}

double max_row_norm_deviation(const Matrix& m) {
  const auto norms = tensor::row_l2_norms(m);
  double dev = 0.0;
  for (double n : norms) dev = std::max(dev, std::abs(n - 1.0));
  return dev;
}

bool dominance_bound_check(std::span<const double> w_row,
                           std::span<const double> g_row) {
  if (w_row.size() != g_row.size()) {
    throw DimensionError("dominance_bound_check: row lengths " +
                         std::to_string(w_row.size()) + " and " +
                         std::to_string(g_row.size()) + " differ");
  }
  double dot = 0.0, g_sq = 0.0, w_sq = 0.0;
  for (std::size_t j = 0; j < w_row.size(); ++j) {
    dot += w_row[j] * g_row[j];
    g_sq += g_row[j] * g_row[j];
    w_sq += w_row[j] * w_row[j];
  }
  const double lhs = std::abs(dot) * std::sqrt(w_sq);
  return lhs <= std::sqrt(g_sq) + 1e-12;
}

}  // namespace pbwn::manifold
