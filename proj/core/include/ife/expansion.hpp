#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ife/linalg.hpp"
#include "ife/panel.hpp"

namespace ife {

/// The data-generating structure: Y = beta0 . X + lambda0 f0' + error.
struct TrueStructure {
  Matrix lambda0;  // N x R0
  Matrix f0;       // T x R0
  Vector beta0;
  Matrix error;    // N x T

  Index n_factors() const { return lambda0.cols(); }
};

/// Shapes must agree with `data`; lambda0 f0' must have full rank R0
/// (smallest retained singular value above 1e-10 times the largest).
void validate(const TrueStructure& truth, const PanelDataset& data);

/// Second-order coefficient Tr(M_lambda0 A M_f0 B').
double l2(const TrueStructure& truth, const Matrix& a, const Matrix& b);

/// Third-order coefficient, symmetrised over its three arguments:
/// -(1/3) sum over orderings of Tr(M_lambda0 A M_f0 B' G C') with
/// G = lambda0 (lambda0'lambda0)^-1 (f0'f0)^-1 f0'.
double l3(const TrueStructure& truth, const Matrix& a, const Matrix& b, const Matrix& c);

/// L^(g) for g <= 3 (g = 1 is identically zero). Throws UnsupportedOrder
/// for other orders and InvalidConfig when the argument count differs from g.
double expansion_coefficient(const TrueStructure& truth, int order, const std::vector<Matrix>& args);

/// W_{k1 k2} = L2(X_{k1}, X_{k2}) / NT.
Matrix compute_w(const TrueStructure& truth, const PanelDataset& data);
/// C1_k = Tr(M_lambda0 X_k M_f0 e') / sqrt(NT).
Vector compute_c1(const TrueStructure& truth, const PanelDataset& data);
/// The three-trace second-order score term. Throws SingularFactorGram when
/// lambda0'lambda0 or f0'f0 is not invertible.
Vector compute_c2(const TrueStructure& truth, const PanelDataset& data);

struct ConvergenceRadius {
  double d_min = 0.0;
  double d_max = 0.0;
  double r0 = 0.0;
};

/// d_max and d_min are the largest and R0-th singular values of lambda0 f0' / sqrt(NT);
/// r0 = (4 d_max / d_min^2 + 1 / (2 d_max))^-1. Throws RankDeficientStructure
/// when R0 = 0 or d_min < 1e-12.
ConvergenceRadius convergence_radius(const TrueStructure& truth);

struct ExpansionObjects {
  Matrix w;
  Vector c1;
  Vector c2;
  /// Absent when R0 = 0.
  std::optional<ConvergenceRadius> radius;
  /// Argument 0 is the error matrix e, arguments 1..K the regressors.
  Matrix l2_table;
  /// Flattened (K+1)^3 table, index (a * (K+1) + b) * (K+1) + c.
  std::vector<double> l3_table;
  /// Profile objective with R = R0 at beta0.
  double objective_at_truth = 0.0;
};

ExpansionObjects compute_expansion(const TrueStructure& truth, const PanelDataset& data);

struct QuadraticApprox {
  double approx = 0.0;
  double exact = 0.0;
  double remainder = 0.0;
};

/// L(beta0) - (2/sqrt(NT)) d'(C1 + C2) + d'W d with d = beta - beta0, next to
/// the exact profile objective at R0.
QuadraticApprox quadratic_approx(const ExpansionObjects& objects, const TrueStructure& truth,
                                 const PanelDataset& data, const Vector& beta);

/// Profile objective with R = R0 evaluated as ||Z - best rank-R0 fit||^2 / NT,
/// in extended precision. Meant for finite differencing at small steps.
double residual_form_objective(const Matrix& z, Index n_factors);

struct DerivativeCheck {
  double step = 0.0;
  double fd_second = 0.0;
  double fd_third = 0.0;
  /// (2/NT)[L2(D,D) + 3 L3(D,D,e)] and (6/NT) L3(D,D,D), D = direction . X.
  double expected_second = 0.0;
  double expected_third = 0.0;
  double rel_error_second = 0.0;
  double rel_error_third = 0.0;
};

/// Five-point central differences of s -> L(beta0 - s * direction), with
/// the step chosen so that |s| ||D|| / sqrt(NT) = step_fraction * r0.
DerivativeCheck directional_derivatives(const TrueStructure& truth, const PanelDataset& data,
                                        const Vector& direction, double step_fraction = 1e-4);

}  // namespace ife
