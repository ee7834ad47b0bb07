#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "chaos/error.hpp"
#include "chaos/rng.hpp"

namespace chaos {

/// n×k basis matrix whose row count follows the state vector type, so a
/// fixed-size state gives a fixed-row basis.
template <class Vector>
using BasisOf = Eigen::Matrix<double, Vector::RowsAtCompileTime, Eigen::Dynamic>;

using Matrix = Eigen::MatrixXd;
using DynVector = Eigen::VectorXd;

inline constexpr double kRankTolerance = 1e-14;

/// Thin QR of `p` (n×k, k ≤ n) by classical Gram-Schmidt with one
/// re-orthogonalization pass. Writes Q (n×k, orthonormal columns) and the
/// upper-triangular R (k×k) with strictly positive diagonal, so the
/// factorization is unique. Throws DegenerateTangentError if a column is
/// dependent on the preceding ones (|R_ii| < kRankTolerance).
template <class Basis>
void thin_qr(const Basis& p, Basis& q, Matrix& r) {
  const auto n = p.rows();
  const auto k = p.cols();
  if (k > n) throw DimensionError("thin_qr: more columns than rows");
  q = p;
  r.setZero(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    auto col = q.col(j);
    if (j > 0) {
      const auto done = q.leftCols(j);
      for (int pass = 0; pass < 2; ++pass) {
        const DynVector proj = done.transpose() * col;
        r.col(j).head(j) += proj;
        col.noalias() -= done * proj;
      }
    }
    const double norm = col.norm();
    if (!(norm >= kRankTolerance))
      throw DegenerateTangentError("tangent basis lost rank at column " + std::to_string(j + 1) +
                                   " (|R_ii| = " + std::to_string(norm) + ")");
    r(j, j) = norm;
    col /= norm;
  }
}

/// Inverse of an upper-triangular matrix by back substitution.
inline Matrix upper_inverse(const Matrix& r) {
  return r.triangularView<Eigen::Upper>().solve(Matrix::Identity(r.rows(), r.cols()));
}

/// n×k matrix with orthonormal columns drawn from standard-Gaussian columns.
template <class Basis>
Basis random_orthonormal(Eigen::Index n, Eigen::Index k, CounterRng& rng) {
  Basis g(n, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  Basis q(n, k);
  Matrix r;
  thin_qr(g, q, r);
  return q;
}

template <class V>
bool all_finite(const V& v) {
  return v.allFinite();
}

}  // namespace chaos
