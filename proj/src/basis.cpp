#include "honestsets/basis.hpp"

#include <cmath>

namespace honestsets::numkit {

OrthoBasis orthonormal_basis(const Matrix& X_A, double tol) {
  require(tol > 0.0, "orthonormal_basis: tol must be positive");
  require(X_A.allFinite(), "orthonormal_basis: non-finite entries");

  OrthoBasis out;
  out.source_indices.resize(static_cast<std::size_t>(X_A.cols()));
  for (Index j = 0; j < X_A.cols(); ++j) out.source_indices[static_cast<std::size_t>(j)] = j;

  if (X_A.cols() == 0) {
    out.Q = Matrix(X_A.rows(), 0);
    out.k = 0;
    return out;
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(X_A);
  const Vector diag = qr.matrixR().diagonal().cwiseAbs();
  const double lead = diag.size() > 0 ? diag[0] : 0.0;
  Index k = 0;
  if (lead > 0.0) {
    for (Index i = 0; i < diag.size() && i < X_A.rows(); ++i) {
      if (diag[i] > tol * lead) ++k;
    }
  }
  Matrix thinQ = qr.householderQ() * Matrix::Identity(X_A.rows(), k);
  out.Q = std::move(thinQ);
  out.k = k;
  return out;
}

OrthoBasis orthonormal_basis(const Matrix& X, const IndexSet& indices, double tol) {
  Matrix X_A(X.rows(), static_cast<Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) {
    X_A.col(static_cast<Index>(j)) = X.col(indices[j]);
  }
  OrthoBasis out = orthonormal_basis(X_A, tol);
  out.source_indices = indices;
  return out;
}

Matrix complement_basis(const OrthoBasis& basis) {
  const Index n = basis.n();
  if (basis.k == 0) return Matrix::Identity(n, n);
  // Full QR of Q: the trailing n-k Householder columns span the complement.
  Eigen::HouseholderQR<Matrix> qr(basis.Q);
  Matrix full = qr.householderQ() * Matrix::Identity(n, n);
  return full.rightCols(n - basis.k);
}

}  // namespace honestsets::numkit
