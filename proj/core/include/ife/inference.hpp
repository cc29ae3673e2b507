#pragma once

#include <string_view>

#include "ife/estimator.hpp"
#include "ife/linalg.hpp"
#include "ife/panel.hpp"

namespace ife {

/// Truncation kernel: unit weight for lags 1..bandwidth, zero beyond.
struct KernelSpec {
  int bandwidth = 2;
};

/// Which incidental-parameter bias terms enter the correction.
enum class BiasTerms {
  /// Only the predetermined-regressor term (forward lags of e'X).
  Dynamic,
  /// Adds the cross-sectional heteroskedasticity term and the time-serial
  /// correlation term of the error second moments.
  Full,
};

std::string_view to_string(BiasTerms terms) noexcept;
BiasTerms parse_bias_terms(std::string_view text);

struct InferenceOptions {
  KernelSpec kernel;
  BiasTerms bias_terms = BiasTerms::Dynamic;
  /// Also compute the heteroskedasticity and autocorrelation robust sandwich.
  bool robust = false;
  /// Hypothesised coefficient values for the t statistics; empty means zero.
  Vector null_value;
};

struct InferenceReport {
  double sigma2 = 0.0;
  Matrix w;
  /// Predetermined-regressor term, always computed.
  Vector b_dynamic;
  /// Cross-sectional and time-serial terms; zero unless BiasTerms::Full.
  Vector b_cross_section;
  Vector b_time_serial;
  /// Total shift added to beta_hat.
  Vector correction;
  Vector beta_hat;
  Vector beta_bc;
  Vector se;
  Vector t_stats;
  /// Filled only when robust inference was requested.
  Matrix omega;
  Vector se_robust;
  Vector t_robust;
  int bandwidth = 2;
  BiasTerms bias_terms = BiasTerms::Dynamic;
  EffectiveSize effective;
  double w_condition = 0.0;
};

/// Sum of squared residuals over ((N_eff - R)(T_eff - R) - K).
double sigma2_hat(const FactorFit& fit, Index n_regressors, const EffectiveSize& size);

/// W_{k1 k2} = Tr(M_Lambda X_{k1} M_F X_{k2}') / (N_eff T_eff).
Matrix w_hat(const PanelDataset& data, const FactorFit& fit);

/// (1/N_eff) Tr[P_F (e'X_k)^trunc], the forward-lag truncation of e'X_k.
Vector b_hat(const PanelDataset& data, const FactorFit& fit, const KernelSpec& kernel);

/// (1/T_eff) Tr[diag(e e') M_Lambda X_k F (F'F)^-1 (Lambda'Lambda)^-1 Lambda'].
Vector cross_section_bias(const PanelDataset& data, const FactorFit& fit);

/// (1/N_eff) Tr[(e'e)^band M_F X_k' Lambda (Lambda'Lambda)^-1 (F'F)^-1 F'],
/// with the two-sided band |t - s| <= bandwidth.
Vector time_serial_bias(const PanelDataset& data, const FactorFit& fit, const KernelSpec& kernel);

/// Inverse of W. Throws NearSingularW when the smallest eigenvalue is at
/// most 1e-10 times the largest.
Matrix invert_w(const Matrix& w);

/// beta + W^{-1} b / t_eff.
Vector bias_corrected(const Vector& beta, const Matrix& w, const Vector& b, double t_eff);

struct StandardErrors {
  Vector se;
  Vector t_stats;
};

/// se_k = sqrt(sigma2 (W^-1)_kk / (N_eff T_eff)); t_k = (estimate_k - null_k) / se_k.
StandardErrors standard_errors(double sigma2, const Matrix& w, const EffectiveSize& size,
                               const Vector& estimate, const Vector& null_value = Vector());

/// Omega = (1/(N_eff T_eff)) sum_i sum_{|t-s|<=M} s_it s_is' with scores
/// s_it,k = (M_Lambda X_k M_F)_it e_it.
Matrix robust_omega(const PanelDataset& data, const FactorFit& fit, const KernelSpec& kernel);

/// Sandwich standard errors from W^-1 Omega W^-1 / (N_eff T_eff).
StandardErrors robust_standard_errors(const Matrix& w, const Matrix& omega,
                                      const EffectiveSize& size, const Vector& estimate,
                                      const Vector& null_value = Vector());

/// Throws BandwidthOutOfRange unless 1 <= M < T.
void validate(const KernelSpec& kernel, Index n_periods);

/// Full inference pipeline for a fitted model.
InferenceReport infer(const PanelDataset& data, const FactorFit& fit,
                      const InferenceOptions& options = {});

}  // namespace ife
