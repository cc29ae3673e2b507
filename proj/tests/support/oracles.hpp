#pragma once

// Reference computations for the tests. Each one takes a different route
// from the library code it checks: explicit loops, Kronecker-vectorised
// systems, hand-written orthogonalisation, polynomial roots or finite
// differences. They favour clarity over speed.

#include <functional>
#include <vector>

#include "ife/linalg.hpp"

namespace oracle {

using ife::Index;
using ife::Matrix;
using ife::Vector;

/// I - Q Q' with Q from modified Gram-Schmidt with one re-orthogonalisation
/// pass; columns whose remaining norm falls below tol * max norm are dropped.
Matrix mgs_orthogonal_projector(const Matrix& a, double tol = 1e-10);

/// Eigenvalues (descending) of a small symmetric matrix as roots of its
/// characteristic polynomial (Faddeev-LeVerrier coefficients, companion matrix).
Vector characteristic_roots(const Matrix& a);

/// Largest singular value by power iteration on A'A.
double power_iteration_norm(const Matrix& a, int iterations = 5000);

/// Sum of squared singular values beyond the first r (one-sided Jacobi SVD).
double svd_tail_energy(const Matrix& a, Index r);

/// Rank-r truncated SVD reconstruction.
Matrix svd_truncation(const Matrix& a, Index r);

/// Residual of a per-row OLS on the columns of `basis` (T x p).
Matrix per_unit_detrend(const Matrix& z, const Matrix& basis);

/// z with each column's mean over rows removed.
Matrix column_demean(const Matrix& z);

/// OLS of vec(Y) on vec(Z_k) with Z_k = vec^-1((M_F kron M_L) vec(X_k)) and
/// target (M_F kron M_L) vec(Y) or the raw Y. Explicit NT x NT projectors.
Vector kronecker_projected_ols(const Matrix& y, const std::vector<Matrix>& x, const Matrix& lambda,
                               const Matrix& f, bool project_target);

/// Minimiser of g over an equally spaced grid on [lo, hi].
double grid_argmin(const std::function<double(double)>& g, double lo, double hi, double step);

/// sum_t sum_{tau=t+1}^{min(t+M,T)} P_{t,tau} (1/N) sum_i e_it x_i,tau.
double truncated_double_sum(const Matrix& p_f, const Matrix& e, const Matrix& x, Index bandwidth);

/// sum_it a_it b_it.
double elementwise_sum(const Matrix& a, const Matrix& b);

/// Dense, literal -(1/3) sum over the six orderings of
/// Tr(M_l A1 M_f A2' l (l'l)^-1 (f'f)^-1 f' A3').
double l3_literal(const Matrix& lambda, const Matrix& f, const Matrix& a, const Matrix& b,
                  const Matrix& c);

/// Tr(M_l A M_f B') with dense projectors from mgs_orthogonal_projector.
double l2_literal(const Matrix& lambda, const Matrix& f, const Matrix& a, const Matrix& b);

/// Second and third derivatives of g at 0 from a 7-point central stencil.
struct Derivatives {
  double second = 0.0;
  double third = 0.0;
};
Derivatives seven_point(const std::function<double(double)>& g, double h);

/// Selection criteria evaluated straight from the textbook formulas on a
/// given descending spectrum (eigenvalues of u'u/NT).
Index argmin_penalised(const Vector& mu, Index n, Index t, Index r_max, int which);
Index eigenvalue_ratio_choice(const Vector& mu, Index n, Index t, Index r_max);
Index growth_ratio_choice(const Vector& mu, Index n, Index t, Index r_max);

/// Differenced-eigenvalue choice: regress five eigenvalues from rank j on
/// (rank - 1)^(2/3) with a QR least-squares fit, threshold twice |slope|,
/// take the largest gap index above it, restart at j = choice + 1.
Index edge_distribution_choice(const Vector& mu, Index r_max, int rounds);

}  // namespace oracle
