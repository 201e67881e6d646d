#pragma once

// Inverse mass restricted to the joint-constraint null space,
//
//   X11 = M^-1 + M^-1 Je' (-Je M^-1 Je')^-1 Je M^-1,
//
// the top-left block of the inverse of [[M, Je'], [Je, 0]].

#include "gridpush/body_model.hpp"

#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace gridpush {

// Pseudo-inverse of a symmetric positive semidefinite matrix applied to B;
// eigenvalues at or below rel_tol times the largest one are treated as zero.
inline Matrix psd_pseudo_solve(const Matrix& S, const Matrix& B, Real rel_tol = 1e-10, Index* rank = nullptr) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  const Vector& ev = es.eigenvalues();
  const Real cut = rel_tol * std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<Real>::min());
  Vector inv = Vector::Zero(ev.size());
  Index r = 0;
  for (Index k = 0; k < ev.size(); ++k)
    if (ev[k] > cut) {
      inv[k] = 1.0 / ev[k];
      ++r;
    }
  if (rank) *rank = r;
  const Matrix& V = es.eigenvectors();
  return V * inv.asDiagonal() * (V.transpose() * B);
}

struct X11Result {
  Matrix x;
  // True when the joint rows are redundant (the grid has cycles) and the
  // Schur complement had to be pseudo-inverted.
  bool pseudo_inverse = false;
  Index constraint_rank = 0;
};

// M^-1 - M^-1 C' (C M^-1 C')^+ C M^-1 for a diagonal mass. Uses a Cholesky
// factorization when C has full row rank, an eigen-decomposition otherwise.
inline X11Result constrained_inverse(const Vector& mass_diag, const Matrix& C) {
  const Vector minv = mass_diag.cwiseInverse();
  X11Result out;
  out.x = minv.asDiagonal();
  if (C.rows() == 0) return out;

  const Matrix CMinv = C * minv.asDiagonal();  // C M^-1
  const Matrix S = CMinv * C.transpose();
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-13) {
    out.x.noalias() -= CMinv.transpose() * llt.solve(CMinv);
    out.constraint_rank = C.rows();
    return out;
  }
  out.x.noalias() -= CMinv.transpose() * psd_pseudo_solve(S, CMinv, 1e-10, &out.constraint_rank);
  out.pseudo_inverse = true;
  return out;
}

// Adds constraint rows C to an already-constrained inverse X:
// X - X C' (C X C')^+ C X.
inline Matrix restrict_constrained_inverse(const Matrix& X, const Matrix& C) {
  if (C.rows() == 0) return X;
  const Matrix CX = C * X;
  const Matrix S = CX * C.transpose();
  return X - CX.transpose() * psd_pseudo_solve(S, CX);
}

// X11 for the body's joints at `pose`. On grids with cycles the joint rows
// are redundant; the pseudo-inverse is evaluated exactly by restricting to the
// rows of a spanning tree, which span the same row space.
inline X11Result x11(const GridBody& body, const Vector& pose, const Vector& mass_diag) {
  const bool cyclic = body.adjacency().size() + 1 > static_cast<std::size_t>(body.size());
  if (!cyclic) return constrained_inverse(mass_diag, adjacency_jacobian(body, pose));
  const auto tree = spanning_tree_pairs(body);
  X11Result r = constrained_inverse(mass_diag, adjacency_jacobian(body, pose, &tree));
  r.pseudo_inverse = true;
  return r;
}

inline X11Result x11(const GridBody& body, const Vector& pose) { return x11(body, pose, mass_diagonal(body)); }

}  // namespace gridpush
