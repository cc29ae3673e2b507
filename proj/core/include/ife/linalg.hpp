#pragma once

#include <Eigen/Dense>

namespace ife {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Eigenvalues sorted non-increasing, with the matching orthonormal
/// eigenvectors as columns.
struct EigenDecomposition {
  Vector values;
  Matrix vectors;
};

/// Relative cutoff used to decide the numerical rank of a Gram matrix when
/// forming generalized inverses.
inline constexpr double kRankCutoff = 1e-12;

/// Relative asymmetry tolerated by the symmetric solvers.
inline constexpr double kSymmetryTolerance = 1e-10;

/// P_A = A (A'A)^+ A'. A may be rank deficient or have zero columns.
Matrix projector_onto(const Matrix& a);

/// M_A = I - P_A.
Matrix projector_orthogonal(const Matrix& a);

/// Orthonormal basis of the column span of `a`, rank decided with kRankCutoff.
Matrix orthonormal_basis(const Matrix& a);

/// Applies M_A from the left without forming the N x N projector.
Matrix apply_orthogonal_left(const Matrix& a, const Matrix& z);

/// Applies M_B from the right (z M_B) without forming the T x T projector.
Matrix apply_orthogonal_right(const Matrix& z, const Matrix& b);

/// Moore-Penrose inverse of a symmetric PSD matrix via its eigendecomposition.
Matrix pinv_symmetric(const Matrix& s);

/// Throws NotSymmetric unless max|A - A'| <= kSymmetryTolerance * max(1, max|A|).
void require_symmetric(const Matrix& a);

/// Full decomposition, eigenvalues descending.
EigenDecomposition sym_eigen(const Matrix& a);

/// Leading `k` eigenpairs of a symmetric matrix (descending). Uses a
/// range-restricted LAPACK solver, so cost is dominated by tridiagonalisation.
EigenDecomposition top_eigen(const Matrix& a, Index k);

/// All eigenvalues, descending.
Vector sym_eigenvalues(const Matrix& a);

/// Sum of the dim - skip_top smallest eigenvalues of a symmetric matrix.
/// Equal to trace(A) minus the `skip_top` largest eigenvalues, but summed
/// directly from the small end so it keeps absolute accuracy near zero.
double sum_smallest_eigenvalues(const Matrix& a, Index skip_top);

Vector singular_values(const Matrix& a);

/// Largest singular value; 0 for empty matrices.
double spectral_norm(const Matrix& a);

inline double frobenius_norm(const Matrix& a) { return a.norm(); }

/// Gram matrix on the smaller side: A A' when rows <= cols, else A' A.
Matrix smaller_gram(const Matrix& a);

bool all_finite(const Matrix& a);

}  // namespace ife
