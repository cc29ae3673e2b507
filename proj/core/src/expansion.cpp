#include "ife/expansion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "ife/error.hpp"
#include "ife/estimator.hpp"

namespace ife {

namespace {

double nt_of(const TrueStructure& truth) {
  return static_cast<double>(truth.lambda0.rows()) * static_cast<double>(truth.f0.rows());
}

// Inverse of a Gram matrix that must be well conditioned.
Matrix gram_inverse(const Matrix& a, const char* name) {
  const Matrix g = a.transpose() * a;
  const Vector d = sym_eigenvalues(g);
  if (!(d(0) > 0.0) || !(d(d.size() - 1) > kRankCutoff * d(0))) {
    throw Error(ErrorCode::SingularFactorGram, std::string(name) + "'" + name + " is singular");
  }
  return g.llt().solve(Matrix::Identity(g.rows(), g.cols()));
}

// (lambda0'lambda0)^-1 (f0'f0)^-1.
Matrix core_product(const TrueStructure& truth) {
  return gram_inverse(truth.lambda0, "lambda0") * gram_inverse(truth.f0, "f0");
}

Matrix double_projection(const TrueStructure& truth, const Matrix& a) {
  return apply_orthogonal_left(truth.lambda0, apply_orthogonal_right(a, truth.f0));
}

// Tr(M_l A M_f B' G C') with G = l S f', evaluated as Tr(S (C f)' P B' l).
double l3_term(const TrueStructure& truth, const Matrix& core, const Matrix& pa, const Matrix& b,
               const Matrix& c) {
  const Matrix cf_p = (c * truth.f0).transpose() * pa;   // R x T
  const Matrix y = cf_p * (b.transpose() * truth.lambda0);  // R x R
  return (core * y).trace();
}

}  // namespace

void validate(const TrueStructure& truth, const PanelDataset& data) {
  const Index n = data.n_units();
  const Index t = data.n_periods();
  if (truth.lambda0.rows() != n || truth.f0.rows() != t ||
      truth.lambda0.cols() != truth.f0.cols() || truth.error.rows() != n ||
      truth.error.cols() != t || truth.beta0.size() != data.n_regressors()) {
    throw Error(ErrorCode::InvalidSpec, "true structure does not match the panel dimensions");
  }
  if (truth.n_factors() > 0) {
    const Vector s = singular_values(truth.lambda0 * truth.f0.transpose());
    if (!(s(0) > 0.0) || !(s(truth.n_factors() - 1) > 1e-10 * s(0))) {
      throw Error(ErrorCode::RankDeficientStructure,
                  "lambda0 f0' has rank below " + std::to_string(truth.n_factors()));
    }
  }
}

// Both arguments are projected so that l2(a, b) == l2(b, a) bit for bit.
double l2(const TrueStructure& truth, const Matrix& a, const Matrix& b) {
  return double_projection(truth, a).cwiseProduct(double_projection(truth, b)).sum();
}

double l3(const TrueStructure& truth, const Matrix& a, const Matrix& b, const Matrix& c) {
  if (truth.n_factors() == 0) return 0.0;
  const Matrix core = core_product(truth);
  const Matrix pa = double_projection(truth, a);
  const Matrix pb = double_projection(truth, b);
  const Matrix pc = double_projection(truth, c);
  const double sum = l3_term(truth, core, pa, b, c) + l3_term(truth, core, pa, c, b) +
                     l3_term(truth, core, pb, a, c) + l3_term(truth, core, pb, c, a) +
                     l3_term(truth, core, pc, a, b) + l3_term(truth, core, pc, b, a);
  return -sum / 3.0;
}

double expansion_coefficient(const TrueStructure& truth, int order, const std::vector<Matrix>& args) {
  if (order < 1 || order > 3) {
    throw Error(ErrorCode::UnsupportedOrder,
                "expansion coefficients are implemented for orders 1..3, got " + std::to_string(order));
  }
  if (static_cast<int>(args.size()) != order) {
    throw Error(ErrorCode::InvalidConfig, "order " + std::to_string(order) + " needs " +
                                              std::to_string(order) + " arguments, got " +
                                              std::to_string(args.size()));
  }
  switch (order) {
    case 1: return 0.0;
    case 2: return l2(truth, args[0], args[1]);
    default: return l3(truth, args[0], args[1], args[2]);
  }
}

Matrix compute_w(const TrueStructure& truth, const PanelDataset& data) {
  const Index k_count = data.n_regressors();
  const double nt = nt_of(truth);
  Matrix w(k_count, k_count);
  for (Index a = 0; a < k_count; ++a) {
    for (Index b = 0; b <= a; ++b) {
      const double v = l2(truth, data.regressors[static_cast<std::size_t>(a)],
                          data.regressors[static_cast<std::size_t>(b)]) / nt;
      w(a, b) = v;
      w(b, a) = v;
    }
  }
  return w;
}

Vector compute_c1(const TrueStructure& truth, const PanelDataset& data) {
  const Index k_count = data.n_regressors();
  const Matrix pe = double_projection(truth, truth.error);
  Vector c1(k_count);
  for (Index k = 0; k < k_count; ++k) {
    c1(k) = pe.cwiseProduct(data.regressors[static_cast<std::size_t>(k)]).sum() /
            std::sqrt(nt_of(truth));
  }
  return c1;
}

Vector compute_c2(const TrueStructure& truth, const PanelDataset& data) {
  const Index k_count = data.n_regressors();
  Vector c2 = Vector::Zero(k_count);
  if (truth.n_factors() == 0) return c2;

  const Matrix& e = truth.error;
  const Matrix& lam = truth.lambda0;
  const Matrix& f = truth.f0;
  const Matrix ll_inv = gram_inverse(lam, "lambda0");
  const Matrix ff_inv = gram_inverse(f, "f0");
  // f (f'f)^-1 (l'l)^-1 l'  and  l (l'l)^-1 (f'f)^-1 f'.
  const Matrix g_ft = f * ff_inv * ll_inv * lam.transpose();
  const Matrix g_lf = lam * ll_inv * ff_inv * f.transpose();
  const Matrix m_lam = projector_orthogonal(lam);
  const Matrix m_f = projector_orthogonal(f);
  const Matrix e_mf_et_ml = e * m_f * e.transpose() * m_lam;
  const Matrix et_ml_e_mf = e.transpose() * m_lam * e * m_f;
  for (Index k = 0; k < k_count; ++k) {
    const Matrix& x = data.regressors[static_cast<std::size_t>(k)];
    const double t1 = (e_mf_et_ml * x * g_ft).trace();
    const double t2 = (et_ml_e_mf * x.transpose() * g_lf).trace();
    const double t3 = (e.transpose() * m_lam * x * m_f * e.transpose() * g_lf).trace();
    c2(k) = -(t1 + t2 + t3) / std::sqrt(nt_of(truth));
  }
  return c2;
}

ConvergenceRadius convergence_radius(const TrueStructure& truth) {
  if (truth.n_factors() == 0) {
    throw Error(ErrorCode::RankDeficientStructure, "convergence radius needs at least one factor");
  }
  // Nonzero eigenvalues of lambda0 f0' f0 lambda0' / NT, via the R0 x R0
  // congruent form C' (f0'f0) C with lambda0'lambda0 = C C'.
  const Matrix ll = truth.lambda0.transpose() * truth.lambda0;
  const Eigen::LLT<Matrix> chol(ll);
  if (chol.info() != Eigen::Success) {
    throw Error(ErrorCode::RankDeficientStructure, "lambda0'lambda0 is not positive definite");
  }
  const Matrix c = chol.matrixL();
  const Matrix reduced = c.transpose() * (truth.f0.transpose() * truth.f0) * c;
  const Vector d = sym_eigenvalues(0.5 * (reduced + reduced.transpose()) / nt_of(truth));
  ConvergenceRadius out;
  out.d_max = std::sqrt(std::max(0.0, d(0)));
  out.d_min = std::sqrt(std::max(0.0, d(d.size() - 1)));
  if (out.d_min < 1e-12) {
    throw Error(ErrorCode::RankDeficientStructure,
                "d_min = " + std::to_string(out.d_min) + " is numerically zero");
  }
  out.r0 = 1.0 / (4.0 * out.d_max / (out.d_min * out.d_min) + 1.0 / (2.0 * out.d_max));
  return out;
}

ExpansionObjects compute_expansion(const TrueStructure& truth, const PanelDataset& data) {
  validate(truth, data);
  ExpansionObjects out;
  out.w = compute_w(truth, data);
  out.c1 = compute_c1(truth, data);
  out.c2 = compute_c2(truth, data);
  if (truth.n_factors() > 0) out.radius = convergence_radius(truth);

  std::vector<const Matrix*> args;
  args.push_back(&truth.error);
  for (const Matrix& x : data.regressors) args.push_back(&x);
  const Index m = static_cast<Index>(args.size());
  out.l2_table.resize(m, m);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b <= a; ++b) {
      const double v = l2(truth, *args[static_cast<std::size_t>(a)], *args[static_cast<std::size_t>(b)]);
      out.l2_table(a, b) = v;
      out.l2_table(b, a) = v;
    }
  }
  out.l3_table.assign(static_cast<std::size_t>(m * m * m), 0.0);
  auto at = [m](Index a, Index b, Index c) { return static_cast<std::size_t>((a * m + b) * m + c); };
  for (Index a = 0; a < m; ++a) {
    for (Index b = a; b < m; ++b) {
      for (Index c = b; c < m; ++c) {
        const double v = l3(truth, *args[static_cast<std::size_t>(a)],
                            *args[static_cast<std::size_t>(b)], *args[static_cast<std::size_t>(c)]);
        const std::array<Index, 3> idx{a, b, c};
        std::array<Index, 3> p = idx;
        std::sort(p.begin(), p.end());
        do {
          out.l3_table[at(p[0], p[1], p[2])] = v;
        } while (std::next_permutation(p.begin(), p.end()));
      }
    }
  }
  out.objective_at_truth = profile_objective(data, truth.beta0, truth.n_factors());
  return out;
}

QuadraticApprox quadratic_approx(const ExpansionObjects& objects, const TrueStructure& truth,
                                 const PanelDataset& data, const Vector& beta) {
  const Vector d = beta - truth.beta0;
  QuadraticApprox out;
  out.approx = objects.objective_at_truth -
               2.0 / std::sqrt(nt_of(truth)) * d.dot(objects.c1 + objects.c2) +
               d.dot(objects.w * d);
  out.exact = profile_objective(data, beta, truth.n_factors());
  out.remainder = out.exact - out.approx;
  return out;
}

double residual_form_objective(const Matrix& z, Index n_factors) {
  using Wide = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  if (n_factors < 0 || n_factors > std::min(z.rows(), z.cols())) {
    throw Error(ErrorCode::RankArgumentOutOfRange, "number of factors outside [0, min(N,T)]");
  }
  // Work on the side with the smaller Gram matrix; the residual norm is the same.
  const Wide w = z.rows() < z.cols() ? Wide(z.transpose().cast<long double>()) : Wide(z.cast<long double>());
  Eigen::SelfAdjointEigenSolver<Wide> es(w.transpose() * w);
  const Wide top = es.eigenvectors().rightCols(n_factors);
  const Wide resid = w - (w * top) * top.transpose();
  const long double nt = static_cast<long double>(z.rows()) * static_cast<long double>(z.cols());
  return static_cast<double>(resid.squaredNorm() / nt);
}

DerivativeCheck directional_derivatives(const TrueStructure& truth, const PanelDataset& data,
                                        const Vector& direction, double step_fraction) {
  validate(truth, data);
  const Index r = truth.n_factors();
  const Matrix d = combine_regressors(data, direction);
  const Matrix base = net_outcome(data, truth.beta0);
  const double nt = nt_of(truth);
  const double d_scale = spectral_norm(d) / std::sqrt(nt);
  if (!(d_scale > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "direction annihilates every regressor");
  }
  const double r0 = convergence_radius(truth).r0;

  DerivativeCheck out;
  out.step = step_fraction * r0 / d_scale;
  const double h = out.step;
  auto value = [&](double s) { return residual_form_objective(base + s * d, r); };
  const double fm2 = value(-2.0 * h);
  const double fm1 = value(-h);
  const double f0 = value(0.0);
  const double fp1 = value(h);
  const double fp2 = value(2.0 * h);
  out.fd_second = (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h);
  out.fd_third = (fp2 - 2.0 * fp1 + 2.0 * fm1 - fm2) / (2.0 * h * h * h);
  out.expected_second = 2.0 / nt * (l2(truth, d, d) + 3.0 * l3(truth, d, d, truth.error));
  out.expected_third = 6.0 / nt * l3(truth, d, d, d);
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
  out.rel_error_second = rel(out.fd_second, out.expected_second);
  out.rel_error_third = rel(out.fd_third, out.expected_third);
  return out;
}

}  // namespace ife
