#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "ife/error.hpp"
#include "ife/estimator.hpp"
#include "ife/inference.hpp"
#include "oracles.hpp"

using namespace ife;

namespace {

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no ife::Error thrown";
  return ErrorCode::InvalidConfig;
}

struct Fitted {
  fixture::Instance inst;
  FactorFit fit;
};

Fitted fitted(std::uint64_t seed, Index n, Index t, Index k, Index r) {
  Fitted out{fixture::factor_panel(seed, n, t, k, 2), {}};
  EstimatorConfig c;
  c.n_factors = r;
  c.n_random_starts = 0;
  out.fit = estimate(out.inst.data, c);
  return out;
}

FactorFit fake_fit(const Matrix& resid, Index r) {
  FactorFit f;
  f.residuals = resid;
  f.loadings = Matrix::Zero(resid.rows(), r);
  f.factors = Matrix::Zero(resid.cols(), r);
  return f;
}

}  // namespace

TEST(Sigma2, ZeroResiduals) {
  EXPECT_EQ(sigma2_hat(fake_fit(Matrix::Zero(5, 4), 1), 1, {5, 4}), 0.0);
}

TEST(Sigma2, ConstantResiduals) {
  EXPECT_DOUBLE_EQ(sigma2_hat(fake_fit(Matrix::Ones(5, 4), 1), 1, {5, 4}), 20.0 / 11.0);
}

TEST(Sigma2, DirectSummation) {
  const Fitted f = fitted(1, 9, 8, 2, 2);
  double ss = 0.0;
  for (Index i = 0; i < 9; ++i) {
    for (Index t = 0; t < 8; ++t) ss += f.fit.residuals(i, t) * f.fit.residuals(i, t);
  }
  EXPECT_NEAR(sigma2_hat(f.fit, 2, {9, 8}), ss / (7.0 * 6.0 - 2.0), 1e-14 * ss);
}

TEST(Sigma2, UsesEffectiveSizesAndRejectsExhaustedDof) {
  const FactorFit f = fake_fit(Matrix::Ones(4, 4), 2);
  EXPECT_DOUBLE_EQ(sigma2_hat(f, 0, {3, 4}), 16.0 / 2.0);
  EXPECT_EQ(code_of([&] { sigma2_hat(f, 4, {4, 4}); }), ErrorCode::DegreesOfFreedomExhausted);
}

TEST(WHat, ZeroRegressorGivesZeroRowAndColumn) {
  Fitted f = fitted(2, 8, 7, 2, 1);
  f.inst.data.regressors[0].setZero();
  const Matrix w = w_hat(f.inst.data, f.fit);
  EXPECT_EQ(w.row(0).cwiseAbs().sum(), 0.0);
  EXPECT_EQ(w.col(0).cwiseAbs().sum(), 0.0);
}

TEST(WHat, NoFactorsIsPlainGram) {
  const Fitted f = fitted(3, 8, 7, 2, 0);
  const Matrix w = w_hat(f.inst.data, f.fit);
  const auto& x = f.inst.data.regressors;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      EXPECT_NEAR(w(a, b), (x[a] * x[b].transpose()).trace() / 56.0, 1e-13);
    }
  }
}

TEST(WHat, ElementwiseOracle) {
  const Fitted f = fitted(4, 10, 9, 2, 2);
  const Matrix w = w_hat(f.inst.data, f.fit);
  const Matrix ml = oracle::mgs_orthogonal_projector(f.fit.loadings);
  const Matrix mf = oracle::mgs_orthogonal_projector(f.fit.factors);
  const auto& x = f.inst.data.regressors;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      EXPECT_NEAR(w(a, b), oracle::elementwise_sum(ml * x[a] * mf, x[b]) / 90.0, 1e-12);
    }
  }
  EXPECT_LT(max_abs(w - w.transpose()), 1e-15);
  EXPECT_GE(sym_eigenvalues(w).minCoeff(), -1e-9 * w.norm());
}

TEST(WHat, RotationInvariant) {
  const Fitted f = fitted(5, 10, 9, 2, 2);
  FactorFit rotated = f.fit;
  Rng rng(5);
  const Matrix s = fixture::gaussian(rng, 2, 2) + 3.0 * Matrix::Identity(2, 2);
  rotated.loadings = f.fit.loadings * s;
  rotated.factors = f.fit.factors * s.inverse().transpose();
  EXPECT_LT(max_abs(w_hat(f.inst.data, rotated) - w_hat(f.inst.data, f.fit)), 1e-12);
  KernelSpec k;
  EXPECT_LT((b_hat(f.inst.data, rotated, k) - b_hat(f.inst.data, f.fit, k)).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(BHat, ZeroInputsGiveZero) {
  Fitted f = fitted(6, 8, 7, 1, 2);
  FactorFit zero_e = f.fit;
  zero_e.residuals.setZero();
  EXPECT_EQ(b_hat(f.inst.data, zero_e, {}).cwiseAbs().sum(), 0.0);
  f.inst.data.regressors[0].setZero();
  EXPECT_EQ(b_hat(f.inst.data, f.fit, {}).cwiseAbs().sum(), 0.0);
}

TEST(BHat, MatchesDoubleSum) {
  for (int rep = 0; rep < 10; ++rep) {
    const Fitted f = fitted(10 + rep, 9, 11, 2, 2);
    const Matrix pf = f.fit.factors * (f.fit.factors.transpose() * f.fit.factors).inverse() *
                      f.fit.factors.transpose();
    for (int m : {1, 2, 4, 10}) {
      const Vector b = b_hat(f.inst.data, f.fit, KernelSpec{m});
      for (int k = 0; k < 2; ++k) {
        const double ref = oracle::truncated_double_sum(pf, f.fit.residuals,
                                                        f.inst.data.regressors[k], m);
        EXPECT_NEAR(b(k), ref, 1e-12 * std::max(1.0, std::abs(ref)));
      }
    }
  }
}

TEST(BHat, BandwidthValidation) {
  const Fitted f = fitted(7, 8, 6, 1, 1);
  EXPECT_EQ(code_of([&] { b_hat(f.inst.data, f.fit, KernelSpec{0}); }),
            ErrorCode::BandwidthOutOfRange);
  EXPECT_EQ(code_of([&] { b_hat(f.inst.data, f.fit, KernelSpec{6}); }),
            ErrorCode::BandwidthOutOfRange);
}

TEST(BHat, ExogenousRegressorsAverageToZero) {
  const int reps = 300;
  std::vector<double> values;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(1000 + static_cast<std::uint64_t>(rep));
    const Matrix l = fixture::gaussian(rng, 30, 1, 1.0);
    const Matrix f = fixture::gaussian(rng, 20, 1);
    const Matrix x = fixture::gaussian(rng, 30, 20);
    const Matrix y = x + l * f.transpose() + fixture::gaussian(rng, 30, 20);
    const PanelDataset d = make_panel(y, {x});
    EstimatorConfig c;
    c.n_factors = 1;
    c.n_random_starts = 0;
    values.push_back(b_hat(d, estimate(d, c), {})(0));
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= reps;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double se = std::sqrt(var / (reps - 1) / reps);
  EXPECT_LT(std::abs(mean), 4.0 * se);
}

TEST(FullBias, CrossSectionTermMatchesLiteralTrace) {
  const Fitted f = fitted(20, 9, 8, 2, 2);
  const Vector b = cross_section_bias(f.inst.data, f.fit);
  const Matrix& l = f.fit.loadings;
  const Matrix& fac = f.fit.factors;
  const Matrix ml = oracle::mgs_orthogonal_projector(l);
  const Matrix diag_ee = (f.fit.residuals * f.fit.residuals.transpose()).diagonal().asDiagonal();
  for (int k = 0; k < 2; ++k) {
    const Matrix inner = ml * f.inst.data.regressors[k] * fac *
                         (fac.transpose() * fac).inverse() * (l.transpose() * l).inverse() *
                         l.transpose();
    EXPECT_NEAR(b(k), (diag_ee * inner).trace() / 8.0, 1e-11);
  }
}

TEST(FullBias, TimeSerialTermMatchesLiteralTrace) {
  const Fitted f = fitted(21, 9, 10, 2, 2);
  const KernelSpec kernel{2};
  const Vector b = time_serial_bias(f.inst.data, f.fit, kernel);
  const Matrix& l = f.fit.loadings;
  const Matrix& fac = f.fit.factors;
  const Matrix mf = oracle::mgs_orthogonal_projector(fac);
  Matrix band = f.fit.residuals.transpose() * f.fit.residuals;
  for (Index t = 0; t < 10; ++t) {
    for (Index s = 0; s < 10; ++s) {
      if (std::abs(t - s) > 2) band(t, s) = 0.0;
    }
  }
  for (int k = 0; k < 2; ++k) {
    const Matrix inner = mf * f.inst.data.regressors[k].transpose() * l *
                         (l.transpose() * l).inverse() * (fac.transpose() * fac).inverse() *
                         fac.transpose();
    EXPECT_NEAR(b(k), (band * inner).trace() / 9.0, 1e-11);
  }
}

TEST(BiasCorrection, ZeroBiasLeavesEstimate) {
  Vector beta(2);
  beta << 0.3, -1.0;
  EXPECT_EQ(bias_corrected(beta, Matrix::Identity(2, 2), Vector::Zero(2), 10.0), beta);
}

TEST(BiasCorrection, ScalarArithmetic) {
  const Vector out = bias_corrected(Vector::Zero(1), Matrix::Constant(1, 1, 2.0),
                                    Vector::Constant(1, 4.0), 10.0);
  EXPECT_NEAR(out(0), 0.2, 1e-15);
}

TEST(BiasCorrection, NearSingularWIsRejected) {
  Matrix w(2, 2);
  w << 1.0, 1.0, 1.0, 1.0 + 1e-12;
  EXPECT_EQ(code_of([&] { invert_w(w); }), ErrorCode::NearSingularW);
}

TEST(StandardErrors, IdentityCase) {
  const StandardErrors se =
      standard_errors(1.0, Matrix::Identity(2, 2), {10, 10}, Vector::Constant(2, 0.5));
  EXPECT_NEAR(se.se(0), 0.1, 1e-15);
  EXPECT_NEAR(se.se(1), 0.1, 1e-15);
  EXPECT_NEAR(se.t_stats(0), 5.0, 1e-12);
}

TEST(StandardErrors, ZeroEstimateGivesZeroT) {
  const StandardErrors se = standard_errors(2.0, Matrix::Identity(1, 1), {5, 5}, Vector::Zero(1));
  EXPECT_EQ(se.t_stats(0), 0.0);
}

TEST(StandardErrors, NullHypothesis) {
  const StandardErrors se = standard_errors(1.0, Matrix::Identity(1, 1), {10, 10},
                                            Vector::Constant(1, 1.3), Vector::Constant(1, 1.0));
  EXPECT_NEAR(se.t_stats(0), 3.0, 1e-12);
  EXPECT_EQ(code_of([] {
              standard_errors(1.0, Matrix::Identity(1, 1), {10, 10}, Vector::Zero(1),
                              Vector::Zero(2));
            }),
            ErrorCode::InvalidConfig);
}

TEST(Robust, OmegaMatchesBruteForce) {
  const Fitted f = fitted(30, 8, 9, 2, 2);
  const KernelSpec kernel{2};
  const Matrix omega = robust_omega(f.inst.data, f.fit, kernel);
  const Matrix ml = oracle::mgs_orthogonal_projector(f.fit.loadings);
  const Matrix mf = oracle::mgs_orthogonal_projector(f.fit.factors);
  std::vector<Matrix> z;
  for (const Matrix& x : f.inst.data.regressors) z.push_back(ml * x * mf);
  const Matrix& e = f.fit.residuals;
  Matrix ref = Matrix::Zero(2, 2);
  for (Index i = 0; i < 8; ++i) {
    for (Index t = 0; t < 9; ++t) {
      for (Index s = 0; s < 9; ++s) {
        if (std::abs(t - s) > 2) continue;
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) ref(a, b) += z[a](i, t) * e(i, t) * z[b](i, s) * e(i, s);
        }
      }
    }
  }
  ref /= 72.0;
  EXPECT_LT(max_abs(omega - ref), 1e-12);
}

TEST(Infer, ReportInvariants) {
  const Fitted f = fitted(40, 20, 15, 2, 2);
  InferenceOptions opt;
  opt.robust = true;
  const InferenceReport rep = infer(f.inst.data, f.fit, opt);
  const Matrix w_inv = rep.w.inverse();
  const Vector expect_bc = f.fit.beta + w_inv * rep.b_dynamic / 15.0;
  EXPECT_LT((rep.beta_bc - expect_bc).cwiseAbs().maxCoeff(), 1e-12);
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(rep.se(k), std::sqrt(rep.sigma2 * w_inv(k, k) / 300.0), 1e-12);
    EXPECT_NEAR(rep.t_stats(k), rep.beta_bc(k) / rep.se(k), 1e-9);
  }
  EXPECT_EQ(rep.se_robust.size(), 2);
  EXPECT_EQ(rep.b_cross_section.cwiseAbs().sum(), 0.0);
}

TEST(Infer, FullTermsEnterTheCorrection) {
  const Fitted f = fitted(41, 20, 15, 1, 2);
  InferenceOptions opt;
  opt.bias_terms = BiasTerms::Full;
  const InferenceReport rep = infer(f.inst.data, f.fit, opt);
  const Vector total = rep.b_dynamic + rep.b_time_serial + (15.0 / 20.0) * rep.b_cross_section;
  EXPECT_NEAR(rep.correction(0), total(0) / rep.w(0, 0) / 15.0, 1e-12);
  EXPECT_EQ(parse_bias_terms("full"), BiasTerms::Full);
  EXPECT_EQ(code_of([] { parse_bias_terms("all"); }), ErrorCode::InvalidConfig);
}
