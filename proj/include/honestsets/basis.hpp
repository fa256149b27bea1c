#pragma once

#include "honestsets/types.hpp"

namespace honestsets::numkit {

// Orthonormal basis Q (n x k) of span(X_A) together with the source index set.
// k = 0 encodes A = empty set.
struct OrthoBasis {
  Matrix Q;                 // n x k, Q^T Q = I_k
  Index k = 0;              // detected rank
  IndexSet source_indices;  // A, the column indices the basis was built from

  Index n() const { return Q.rows(); }

  // P_A v = Q (Q^T v)
  Vector project(const Vector& v) const {
    if (k == 0) return Vector::Zero(v.size());
    return Q * (Q.transpose() * v);
  }

  Vector project_complement(const Vector& v) const {
    if (k == 0) return v;
    return v - project(v);
  }
};

// Column-pivoted Householder QR with rank detected at tol relative to the
// leading diagonal of R. Throws on non-finite entries.
OrthoBasis orthonormal_basis(const Matrix& X_A, double tol = 1e-10);

OrthoBasis orthonormal_basis(const Matrix& X, const IndexSet& indices, double tol = 1e-10);

// Orthonormal basis of the orthogonal complement of span(basis.Q) in R^n
// (n x (n - k)). Used when a step solves a reduced problem in complement
// coordinates.
Matrix complement_basis(const OrthoBasis& basis);

}  // namespace honestsets::numkit
