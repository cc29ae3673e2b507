#include "ife/inference.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "ife/error.hpp"

namespace ife {

namespace {

double cells(const EffectiveSize& size) {
  return static_cast<double>(size.n_units) * static_cast<double>(size.n_periods);
}

// M_Lambda X M_F for every regressor.
std::vector<Matrix> projected_regressors(const PanelDataset& data, const FactorFit& fit) {
  const Matrix qf = orthonormal_basis(fit.factors);
  const Matrix ql = orthonormal_basis(fit.loadings);
  std::vector<Matrix> out;
  out.reserve(data.regressors.size());
  for (const Matrix& x : data.regressors) {
    Matrix z = x - (x * qf) * qf.transpose();
    z -= ql * (ql.transpose() * z);
    out.push_back(std::move(z));
  }
  return out;
}

// (F'F)^-1 (Lambda'Lambda)^-1, or an empty matrix when R = 0.
Matrix factor_gram_inverse_product(const FactorFit& fit) {
  const Index r = fit.n_factors();
  if (r == 0) return Matrix(0, 0);
  const Matrix ff = fit.factors.transpose() * fit.factors;
  const Matrix ll = fit.loadings.transpose() * fit.loadings;
  return pinv_symmetric(ff) * pinv_symmetric(ll);
}

Vector null_or_zero(const Vector& null_value, Index k) {
  if (null_value.size() == 0) return Vector::Zero(k);
  if (null_value.size() != k) {
    throw Error(ErrorCode::InvalidConfig, "hypothesis vector has length " +
                                              std::to_string(null_value.size()) + ", expected " +
                                              std::to_string(k));
  }
  return null_value;
}

StandardErrors from_covariance(const Matrix& cov, const Vector& estimate, const Vector& null_value) {
  const Index k = estimate.size();
  const Vector null = null_or_zero(null_value, k);
  StandardErrors out{Vector(k), Vector(k)};
  for (Index j = 0; j < k; ++j) {
    out.se(j) = std::sqrt(std::max(0.0, cov(j, j)));
    out.t_stats(j) = (estimate(j) - null(j)) / out.se(j);
  }
  return out;
}

}  // namespace

std::string_view to_string(BiasTerms terms) noexcept {
  return terms == BiasTerms::Full ? "full" : "dynamic";
}

BiasTerms parse_bias_terms(std::string_view text) {
  if (text == "dynamic") return BiasTerms::Dynamic;
  if (text == "full") return BiasTerms::Full;
  throw Error(ErrorCode::InvalidConfig, "unknown bias terms '" + std::string(text) + "'");
}

void validate(const KernelSpec& kernel, Index n_periods) {
  if (kernel.bandwidth < 1 || kernel.bandwidth >= n_periods) {
    throw Error(ErrorCode::BandwidthOutOfRange,
                "bandwidth must satisfy 1 <= M < T = " + std::to_string(n_periods) + ", got " +
                    std::to_string(kernel.bandwidth));
  }
}

double sigma2_hat(const FactorFit& fit, Index n_regressors, const EffectiveSize& size) {
  const double r = static_cast<double>(fit.n_factors());
  const double dof = (static_cast<double>(size.n_units) - r) *
                         (static_cast<double>(size.n_periods) - r) -
                     static_cast<double>(n_regressors);
  if (!(dof > 0.0)) {
    throw Error(ErrorCode::DegreesOfFreedomExhausted,
                "(N_eff - R)(T_eff - R) - K = " + std::to_string(dof) + " leaves no degrees of freedom");
  }
  return fit.residuals.squaredNorm() / dof;
}

Matrix w_hat(const PanelDataset& data, const FactorFit& fit) {
  const Index k_count = data.n_regressors();
  const std::vector<Matrix> z = projected_regressors(data, fit);
  Matrix w(k_count, k_count);
  const double scale = 1.0 / cells(data.effective);
  for (Index a = 0; a < k_count; ++a) {
    for (Index b = 0; b <= a; ++b) {
      // Tr(M_L X_a M_F X_b') = <M_L X_a M_F, X_b>, and projectors are idempotent.
      const double v = z[static_cast<std::size_t>(a)].cwiseProduct(z[static_cast<std::size_t>(b)]).sum() * scale;
      w(a, b) = v;
      w(b, a) = v;
    }
  }
  return w;
}

Vector b_hat(const PanelDataset& data, const FactorFit& fit, const KernelSpec& kernel) {
  const Index t_count = data.n_periods();
  validate(kernel, t_count);
  const Index k_count = data.n_regressors();
  Vector out = Vector::Zero(k_count);
  if (fit.n_factors() == 0) return out;

  const Matrix pf = projector_onto(fit.factors);
  const Matrix& e = fit.residuals;
  const Index m = kernel.bandwidth;
  for (Index k = 0; k < k_count; ++k) {
    const Matrix& x = data.regressors[static_cast<std::size_t>(k)];
    // Right-sided truncation of e'X: entries (t, s) with t < s <= t + M.
    Matrix trunc = Matrix::Zero(t_count, t_count);
    for (Index t = 0; t < t_count; ++t) {
      const Index last = std::min(t + m, t_count - 1);
      for (Index s = t + 1; s <= last; ++s) trunc(t, s) = e.col(t).dot(x.col(s));
    }
    // Tr(P B) = sum_ts P_ts B_st.
    out(k) = pf.cwiseProduct(trunc.transpose()).sum() /
             static_cast<double>(data.effective.n_units);
  }
  return out;
}

Vector cross_section_bias(const PanelDataset& data, const FactorFit& fit) {
  const Index k_count = data.n_regressors();
  Vector out = Vector::Zero(k_count);
  if (fit.n_factors() == 0) return out;

  const Matrix& e = fit.residuals;
  const Vector unit_variance = e.rowwise().squaredNorm();
  const Matrix core = factor_gram_inverse_product(fit);
  for (Index k = 0; k < k_count; ++k) {
    const Matrix& x = data.regressors[static_cast<std::size_t>(k)];
    const Matrix h = apply_orthogonal_left(fit.loadings, x * fit.factors) * core;
    // Diagonal of h Lambda', weighted by diag(e e').
    const Vector diag = h.cwiseProduct(fit.loadings).rowwise().sum();
    out(k) = unit_variance.dot(diag) / static_cast<double>(data.effective.n_periods);
  }
  return out;
}

Vector time_serial_bias(const PanelDataset& data, const FactorFit& fit, const KernelSpec& kernel) {
  const Index t_count = data.n_periods();
  validate(kernel, t_count);
  const Index k_count = data.n_regressors();
  Vector out = Vector::Zero(k_count);
  if (fit.n_factors() == 0) return out;

  const Matrix& e = fit.residuals;
  const Index m = kernel.bandwidth;
  const Matrix core = factor_gram_inverse_product(fit);
  // Banded e'e, |t - s| <= M.
  Matrix band = Matrix::Zero(t_count, t_count);
  for (Index t = 0; t < t_count; ++t) {
    for (Index s = std::max<Index>(0, t - m); s <= std::min(t + m, t_count - 1); ++s) {
      band(t, s) = e.col(t).dot(e.col(s));
    }
  }
  const Matrix band_f = band * fit.factors;
  for (Index k = 0; k < k_count; ++k) {
    const Matrix& x = data.regressors[static_cast<std::size_t>(k)];
    // Q = U F' with U = M_F X' Lambda (Lambda'Lambda)^-1 (F'F)^-1; Tr(band U F') = Tr(F' band U).
    const Matrix u = apply_orthogonal_left(fit.factors, x.transpose() * fit.loadings) *
                     core.transpose();
    out(k) = band_f.cwiseProduct(u).sum() / static_cast<double>(data.effective.n_units);
  }
  return out;
}

Matrix invert_w(const Matrix& w) {
  if (w.size() == 0) return w;
  require_symmetric(w);
  const Vector d = sym_eigenvalues(w);
  const double top = d(0);
  const double bottom = d(d.size() - 1);
  if (!(top > 0.0) || !(bottom > 1e-10 * top)) {
    std::ostringstream msg;
    msg << "W is near singular (eigenvalues " << bottom << " .. " << top << ", condition number "
        << (bottom > 0.0 ? top / bottom : INFINITY) << ")";
    throw Error(ErrorCode::NearSingularW, msg.str());
  }
  Eigen::LLT<Matrix> llt(0.5 * (w + w.transpose()));
  return llt.solve(Matrix::Identity(w.rows(), w.cols()));
}

Vector bias_corrected(const Vector& beta, const Matrix& w, const Vector& b, double t_eff) {
  if (beta.size() == 0) return beta;
  return beta + invert_w(w) * b / t_eff;
}

StandardErrors standard_errors(double sigma2, const Matrix& w, const EffectiveSize& size,
                               const Vector& estimate, const Vector& null_value) {
  if (estimate.size() == 0) return {Vector(0), Vector(0)};
  const Matrix cov = sigma2 * invert_w(w) / cells(size);
  return from_covariance(cov, estimate, null_value);
}

Matrix robust_omega(const PanelDataset& data, const FactorFit& fit, const KernelSpec& kernel) {
  const Index t_count = data.n_periods();
  validate(kernel, t_count);
  const Index k_count = data.n_regressors();
  const Index m = kernel.bandwidth;
  const std::vector<Matrix> z = projected_regressors(data, fit);
  Matrix omega = Matrix::Zero(k_count, k_count);
  for (Index a = 0; a < k_count; ++a) {
    const Matrix sa = z[static_cast<std::size_t>(a)].cwiseProduct(fit.residuals);
    for (Index b = 0; b <= a; ++b) {
      const Matrix sb = z[static_cast<std::size_t>(b)].cwiseProduct(fit.residuals);
      double acc = sa.cwiseProduct(sb).sum();
      for (Index lag = 1; lag <= m; ++lag) {
        const Index span = t_count - lag;
        acc += sa.leftCols(span).cwiseProduct(sb.rightCols(span)).sum();
        acc += sa.rightCols(span).cwiseProduct(sb.leftCols(span)).sum();
      }
      omega(a, b) = acc;
      omega(b, a) = acc;
    }
  }
  return omega / cells(data.effective);
}

StandardErrors robust_standard_errors(const Matrix& w, const Matrix& omega,
                                      const EffectiveSize& size, const Vector& estimate,
                                      const Vector& null_value) {
  if (estimate.size() == 0) return {Vector(0), Vector(0)};
  const Matrix w_inv = invert_w(w);
  const Matrix cov = w_inv * omega * w_inv / cells(size);
  return from_covariance(0.5 * (cov + cov.transpose()), estimate, null_value);
}

InferenceReport infer(const PanelDataset& data, const FactorFit& fit,
                      const InferenceOptions& options) {
  validate(options.kernel, data.n_periods());
  const Index k_count = data.n_regressors();
  const EffectiveSize& size = data.effective;

  InferenceReport rep;
  rep.bandwidth = options.kernel.bandwidth;
  rep.bias_terms = options.bias_terms;
  rep.effective = size;
  rep.beta_hat = fit.beta;
  rep.sigma2 = sigma2_hat(fit, k_count, size);
  rep.w = w_hat(data, fit);
  rep.b_dynamic = b_hat(data, fit, options.kernel);
  rep.b_cross_section = Vector::Zero(k_count);
  rep.b_time_serial = Vector::Zero(k_count);
  if (options.bias_terms == BiasTerms::Full) {
    rep.b_cross_section = cross_section_bias(data, fit);
    rep.b_time_serial = time_serial_bias(data, fit, options.kernel);
  }
  if (k_count == 0) {
    rep.correction = rep.beta_bc = rep.se = rep.t_stats = Vector(0);
    return rep;
  }

  const Vector d = sym_eigenvalues(rep.w);
  rep.w_condition = d(d.size() - 1) > 0.0 ? d(0) / d(d.size() - 1) : INFINITY;

  const double t_eff = static_cast<double>(size.n_periods);
  const double n_eff = static_cast<double>(size.n_units);
  // All three terms share the 1/T_eff scaling once the cross-section term is rescaled.
  const Vector total = rep.b_dynamic + rep.b_time_serial + (t_eff / n_eff) * rep.b_cross_section;
  rep.beta_bc = bias_corrected(fit.beta, rep.w, total, t_eff);
  rep.correction = rep.beta_bc - fit.beta;

  const StandardErrors homo =
      standard_errors(rep.sigma2, rep.w, size, rep.beta_bc, options.null_value);
  rep.se = homo.se;
  rep.t_stats = homo.t_stats;
  if (options.robust) {
    rep.omega = robust_omega(data, fit, options.kernel);
    const StandardErrors rob =
        robust_standard_errors(rep.w, rep.omega, size, rep.beta_bc, options.null_value);
    rep.se_robust = rob.se;
    rep.t_robust = rob.t_stats;
  }
  return rep;
}

}  // namespace ife
