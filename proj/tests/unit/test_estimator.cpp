#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "ife/error.hpp"
#include "ife/estimator.hpp"
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

EstimatorConfig config_for(Index r, Scheme scheme = Scheme::Hybrid) {
  EstimatorConfig c;
  c.n_factors = r;
  c.scheme = scheme;
  c.n_random_starts = 2;
  return c;
}

void expect_fit_invariants(const PanelDataset& data, const FactorFit& fit) {
  const Index r = fit.n_factors();
  const double t = static_cast<double>(data.n_periods());
  const double cells = static_cast<double>(data.n_units() * data.n_periods());
  if (r > 0) {
    EXPECT_LT(max_abs(fit.factors.transpose() * fit.factors / t - Matrix::Identity(r, r)), 1e-9);
    const Matrix ll = fit.loadings.transpose() * fit.loadings;
    for (Index i = 0; i < r; ++i) {
      for (Index j = 0; j < r; ++j) {
        if (i != j) {
          EXPECT_LT(std::abs(ll(i, j)), 1e-8 * std::max(1.0, ll(0, 0)));
        }
      }
      if (i > 0) {
        EXPECT_GE(ll(i - 1, i - 1), ll(i, i) * (1 - 1e-12));
      }
    }
  }
  const Matrix projected =
      oracle::mgs_orthogonal_projector(fit.loadings) * fit.residuals *
      oracle::mgs_orthogonal_projector(fit.factors);
  EXPECT_LT(max_abs(projected - fit.residuals), 1e-8);
  EXPECT_NEAR(fit.objective, fit.residuals.squaredNorm() / cells,
              1e-10 * std::max(fit.objective, 1e-300));
  const Matrix rebuilt = net_outcome(data, fit.beta) - fit.loadings * fit.factors.transpose();
  EXPECT_LT(max_abs(rebuilt - fit.residuals), 1e-10 * std::max(1.0, max_abs(data.outcome)));
}

}  // namespace

TEST(ProfileObjective, ClosedFormCases) {
  EXPECT_DOUBLE_EQ(profile_objective(make_panel(Matrix::Identity(2, 2), {}), Vector(0), 0), 0.5);
  EXPECT_NEAR(profile_objective(make_panel(Matrix::Ones(2, 2), {}), Vector(0), 1), 0.0, 1e-15);
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 1.0;
  EXPECT_NEAR(profile_objective(make_panel(d, {}), Vector(0), 1), 0.25, 1e-15);
}

TEST(ProfileObjective, RejectsRankOutOfRange) {
  const PanelDataset d = make_panel(Matrix::Identity(2, 3), {});
  EXPECT_EQ(code_of([&] { profile_objective(d, Vector(0), 3); }),
            ErrorCode::RankArgumentOutOfRange);
  EXPECT_EQ(code_of([&] { profile_objective(d, Vector(0), -1); }),
            ErrorCode::RankArgumentOutOfRange);
}

TEST(ProfileObjective, MatchesExplicitMinimisationOverFactors) {
  Rng rng(3);
  for (int rep = 0; rep < 30; ++rep) {
    const Index n = 3 + static_cast<Index>(rng.uniform() * 10);
    const Index t = 3 + static_cast<Index>(rng.uniform() * 10);
    const fixture::Instance inst = fixture::factor_panel(100 + rep, n, t, 2, 1);
    const Vector beta = fixture::gaussian(rng, 2, 1);
    for (Index r = 0; r < std::min(n, t); ++r) {
      const double profile = profile_objective(inst.data, beta, r);
      const Matrix net = net_outcome(inst.data, beta);
      const FactorBlocks pc = principal_components(net, r);
      const Matrix mf = oracle::mgs_orthogonal_projector(pc.factors);
      const double explicit_min =
          (net * mf * net.transpose()).trace() / static_cast<double>(n * t);
      EXPECT_NEAR(profile, explicit_min, 1e-9 * std::max(1.0, explicit_min));
      EXPECT_NEAR(profile, ls_objective(inst.data, beta, pc), 1e-9 * std::max(1.0, profile));
    }
  }
}

TEST(ProfileObjective, NonIncreasingInFactorCount) {
  const fixture::Instance inst = fixture::factor_panel(4, 9, 7, 1, 2);
  Rng rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const Vector beta = fixture::gaussian(rng, 1, 1);
    double prev = profile_objective(inst.data, beta, 0);
    for (Index r = 1; r <= 7; ++r) {
      const double cur = profile_objective(inst.data, beta, r);
      EXPECT_LE(cur, prev + 1e-14);
      prev = cur;
    }
  }
}

TEST(PrincipalComponents, ExactRankOne) {
  Rng rng(5);
  const Matrix l = fixture::gaussian(rng, 6, 1);
  const Matrix f = fixture::gaussian(rng, 4, 1);
  const FactorBlocks pc = principal_components(l * f.transpose(), 1);
  EXPECT_LT(max_abs(pc.loadings * pc.factors.transpose() - l * f.transpose()), 1e-10);
}

TEST(PrincipalComponents, ZeroFactorsIsEmpty) {
  Rng rng(6);
  const Matrix target = fixture::gaussian(rng, 5, 3);
  const FactorBlocks pc = principal_components(target, 0);
  EXPECT_EQ(pc.loadings.cols(), 0);
  EXPECT_EQ(pc.factors.cols(), 0);
  EXPECT_EQ(pc.factors.rows(), 3);
}

TEST(PrincipalComponents, ErrorEqualsSvdTail) {
  Rng rng(7);
  const Matrix target = fixture::gaussian(rng, 6, 4);
  const FactorBlocks pc = principal_components(target, 2);
  const Matrix fitted = pc.loadings * pc.factors.transpose();
  EXPECT_NEAR((target - fitted).squaredNorm(), oracle::svd_tail_energy(target, 2), 1e-10);
  EXPECT_LT(max_abs(fitted - oracle::svd_truncation(target, 2)), 1e-10);
}

TEST(PrincipalComponents, BothSidesAgree) {
  Rng rng(8);
  for (const auto& [n, t] : {std::pair<Index, Index>{5, 30}, {30, 5}, {12, 12}}) {
    const Matrix target = fixture::gaussian(rng, n, t);
    const FactorBlocks pc = principal_components(target, 3);
    EXPECT_LT(max_abs(pc.loadings * pc.factors.transpose() - oracle::svd_truncation(target, 3)),
              1e-10);
    EXPECT_LT(max_abs(pc.factors.transpose() * pc.factors / static_cast<double>(t) -
                      Matrix::Identity(3, 3)),
              1e-10);
  }
}

TEST(InnerStep, PerfectFit) {
  Rng rng(9);
  const Matrix x = fixture::gaussian(rng, 4, 5);
  const PanelDataset d = make_panel(x, {x});
  const FactorBlocks none{Matrix(4, 0), Matrix(5, 0)};
  for (Scheme s : {Scheme::ProjectedOls, Scheme::ResidualOls, Scheme::DoublyProjectedOls}) {
    EXPECT_NEAR(inner_beta_step(d, none, s).beta(0), 1.0, 1e-14);
  }
}

TEST(InnerStep, SchemeThreeWithoutFactorsIsPooledOls) {
  const fixture::Instance inst = fixture::factor_panel(10, 6, 7, 2, 1);
  const FactorBlocks none{Matrix(6, 0), Matrix(7, 0)};
  const Vector step = inner_beta_step(inst.data, none, Scheme::DoublyProjectedOls).beta;
  const Vector ols =
      oracle::kronecker_projected_ols(inst.data.outcome, inst.data.regressors, Matrix(6, 0),
                                      Matrix(7, 0), false);
  EXPECT_LT((step - ols).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((pooled_ols(inst.data).beta - ols).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(InnerStep, AllSchemesMatchKroneckerOracle) {
  Rng rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    const fixture::Instance inst = fixture::factor_panel(200 + rep, 7, 6, 2, 2);
    const Matrix target = net_outcome(inst.data, fixture::gaussian(rng, 2, 1));
    const FactorBlocks blocks = principal_components(target, 2);
    const Matrix& y = inst.data.outcome;
    const auto& x = inst.data.regressors;

    const Vector s1 = inner_beta_step(inst.data, blocks, Scheme::ProjectedOls).beta;
    const Vector o1 = oracle::kronecker_projected_ols(y, x, Matrix(7, 0), blocks.factors, false);
    EXPECT_LT((s1 - o1).cwiseAbs().maxCoeff(), 1e-10);

    const Vector s2 = inner_beta_step(inst.data, blocks, Scheme::ResidualOls).beta;
    const Matrix partial = y - blocks.loadings * blocks.factors.transpose();
    const Vector o2 = oracle::kronecker_projected_ols(partial, x, Matrix(7, 0), Matrix(6, 0), false);
    EXPECT_LT((s2 - o2).cwiseAbs().maxCoeff(), 1e-10);

    const Vector s3 = inner_beta_step(inst.data, blocks, Scheme::DoublyProjectedOls).beta;
    const Vector o3 = oracle::kronecker_projected_ols(y, x, blocks.loadings, blocks.factors, true);
    EXPECT_LT((s3 - o3).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(InnerStep, HybridIsNotAStepRule) {
  const fixture::Instance inst = fixture::factor_panel(12, 5, 5, 1, 1);
  const FactorBlocks none{Matrix(5, 0), Matrix(5, 0)};
  EXPECT_EQ(code_of([&] { inner_beta_step(inst.data, none, Scheme::Hybrid); }),
            ErrorCode::InvalidConfig);
}

TEST(InnerStep, CollinearDesignFallsBackToMinimumNorm) {
  Rng rng(13);
  const Matrix x = fixture::gaussian(rng, 5, 6);
  const PanelDataset d = make_panel(2.0 * x, {x, x});
  const FactorBlocks none{Matrix(5, 0), Matrix(6, 0)};
  const BetaStep step = inner_beta_step(d, none, Scheme::ResidualOls);
  EXPECT_TRUE(step.singular);
  EXPECT_NEAR(step.beta(0), 1.0, 1e-10);
  EXPECT_NEAR(step.beta(1), 1.0, 1e-10);
}

TEST(Scheme, ParsesNamesAndNumbers) {
  EXPECT_EQ(parse_scheme("1"), Scheme::ProjectedOls);
  EXPECT_EQ(parse_scheme("2"), Scheme::ResidualOls);
  EXPECT_EQ(parse_scheme("3"), Scheme::DoublyProjectedOls);
  EXPECT_EQ(parse_scheme("hybrid"), Scheme::Hybrid);
  for (Scheme s : {Scheme::ProjectedOls, Scheme::ResidualOls, Scheme::DoublyProjectedOls,
                   Scheme::Hybrid}) {
    EXPECT_EQ(parse_scheme(to_string(s)), s);
  }
  EXPECT_EQ(code_of([] { parse_scheme("4"); }), ErrorCode::InvalidConfig);
}

TEST(Estimate, NoiselessRecoversTruth) {
  const fixture::Instance inst = fixture::factor_panel(14, 20, 18, 2, 2, 0.0);
  for (Scheme s : {Scheme::ProjectedOls, Scheme::ResidualOls, Scheme::DoublyProjectedOls,
                   Scheme::Hybrid}) {
    const FactorFit fit = estimate(inst.data, config_for(2, s));
    EXPECT_LT((fit.beta - inst.truth.beta0).norm(), 1e-7) << to_string(s);
    EXPECT_LT(fit.objective, 1e-12) << to_string(s);
  }
}

TEST(Estimate, NoiselessIdentificationAboveTrueRank) {
  const fixture::Instance inst = fixture::factor_panel(15, 16, 14, 1, 2, 0.0);
  for (Index r = 2; r < 14 - 2; ++r) {
    const FactorFit fit = estimate(inst.data, config_for(r));
    EXPECT_LT((fit.beta - inst.truth.beta0).norm(), 1e-6) << "R = " << r;
  }
}

TEST(Estimate, MatchesGridSearch) {
  const fixture::Instance inst = fixture::factor_panel(16, 8, 8, 1, 1, 1.0);
  const FactorFit fit = estimate(inst.data, config_for(1));
  const double b0 = inst.truth.beta0(0);
  const double grid = oracle::grid_argmin(
      [&](double b) { return profile_objective(inst.data, Vector::Constant(1, b), 1); }, b0 - 0.5,
      b0 + 0.5, 1e-4);
  EXPECT_NEAR(fit.beta(0), grid, 1e-4);
}

TEST(Estimate, FitInvariants) {
  for (int rep = 0; rep < 6; ++rep) {
    const fixture::Instance inst = fixture::factor_panel(300 + rep, 12 + rep, 10, 2, 2);
    for (Index r : {0, 1, 2, 4}) {
      const FactorFit fit = estimate(inst.data, config_for(r));
      expect_fit_invariants(inst.data, fit);
      EXPECT_NEAR(fit.objective, profile_objective(inst.data, fit.beta, r),
                  1e-9 * std::max(fit.objective, 1e-12));
    }
  }
}

TEST(Estimate, RejectsRankAtMinimumDimension) {
  const fixture::Instance inst = fixture::factor_panel(17, 6, 5, 1, 1);
  EXPECT_EQ(code_of([&] { estimate(inst.data, config_for(5)); }),
            ErrorCode::RankArgumentOutOfRange);
  EstimatorConfig bad = config_for(1);
  bad.tol_objective = 0.0;
  EXPECT_EQ(code_of([&] { estimate(inst.data, bad); }), ErrorCode::InvalidConfig);
  bad = config_for(1);
  bad.max_iterations = 0;
  EXPECT_EQ(code_of([&] { estimate(inst.data, bad); }), ErrorCode::InvalidConfig);
  bad = config_for(1);
  bad.extra_starts = {Vector::Zero(3)};
  EXPECT_EQ(code_of([&] { estimate(inst.data, bad); }), ErrorCode::InvalidConfig);
}

TEST(Estimate, PureFactorExtraction) {
  const fixture::Instance inst = fixture::factor_panel(18, 9, 8, 0, 2);
  const FactorFit fit = estimate(inst.data, config_for(2));
  EXPECT_EQ(fit.beta.size(), 0);
  EXPECT_NEAR(fit.objective, profile_objective(inst.data, Vector(0), 2), 1e-12);
}

TEST(Estimate, MonotoneDescentForSchemesOneAndTwo) {
  for (int rep = 0; rep < 5; ++rep) {
    const fixture::Instance inst = fixture::factor_panel(400 + rep, 15, 12, 2, 2, 1.5);
    for (Scheme s : {Scheme::ProjectedOls, Scheme::ResidualOls}) {
      EstimatorConfig c = config_for(3, s);
      c.warm_pc = false;
      const FactorFit fit = estimate_from(inst.data, c, pooled_ols(inst.data).beta);
      for (std::size_t i = 1; i < fit.trace.size(); ++i) {
        EXPECT_LE(fit.trace[i], fit.trace[i - 1] * (1 + 1e-12)) << to_string(s) << " step " << i;
      }
    }
  }
}

TEST(Estimate, StepPairsDoNotIncreaseLsObjective) {
  // Explicit alternation for scheme 2, measuring the LS objective after each half step.
  const fixture::Instance inst = fixture::factor_panel(19, 14, 11, 2, 2, 1.0);
  Vector beta = pooled_ols(inst.data).beta;
  FactorBlocks blocks = principal_components(net_outcome(inst.data, beta), 2);
  double prev = ls_objective(inst.data, beta, blocks);
  for (int it = 0; it < 40; ++it) {
    beta = inner_beta_step(inst.data, blocks, Scheme::ResidualOls).beta;
    const double after_beta = ls_objective(inst.data, beta, blocks);
    EXPECT_LE(after_beta, prev * (1 + 1e-12));
    blocks = principal_components(net_outcome(inst.data, beta), 2);
    const double after_pc = ls_objective(inst.data, beta, blocks);
    EXPECT_LE(after_pc, after_beta * (1 + 1e-12));
    prev = after_pc;
  }
}

TEST(Estimate, RotationInvariance) {
  const fixture::Instance inst = fixture::factor_panel(20, 13, 11, 1, 2);
  const FactorFit fit = estimate(inst.data, config_for(2));
  Rng rng(20);
  const Matrix s = fixture::gaussian(rng, 2, 2) + 3.0 * Matrix::Identity(2, 2);
  const Matrix l = fit.loadings * s;
  const Matrix f = fit.factors * s.inverse().transpose();
  const Matrix resid = net_outcome(inst.data, fit.beta) - l * f.transpose();
  EXPECT_LT(max_abs(resid - fit.residuals), 1e-10);
  const FactorBlocks rotated{l, f};
  EXPECT_NEAR(ls_objective(inst.data, fit.beta, rotated), fit.objective, 1e-12);
}

TEST(Estimate, DeterministicAndWarmStartNeutral) {
  const fixture::Instance inst = fixture::factor_panel(21, 40, 36, 2, 2);
  EstimatorConfig c = config_for(2);
  c.n_random_starts = 4;
  c.seed = 9;
  const FactorFit a = estimate(inst.data, c);
  const FactorFit b = estimate(inst.data, c);
  EXPECT_EQ(a.beta, b.beta);
  EXPECT_EQ(a.start_objectives, b.start_objectives);
  c.warm_pc = false;
  const FactorFit dense = estimate(inst.data, c);
  EXPECT_LT((a.beta - dense.beta).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(a.objective, dense.objective, 1e-9 * a.objective);
}

TEST(Estimate, BestStartWinsAndTiesGoToLowestIndex) {
  const fixture::Instance inst = fixture::factor_panel(22, 10, 10, 1, 1);
  EstimatorConfig c = config_for(1);
  c.n_random_starts = 5;
  const FactorFit fit = estimate(inst.data, c);
  ASSERT_EQ(fit.start_objectives.size(), 6u);
  const double best = *std::min_element(fit.start_objectives.begin(), fit.start_objectives.end());
  EXPECT_EQ(fit.objective, best);
  for (int j = 0; j < fit.start_index; ++j) {
    EXPECT_GT(fit.start_objectives[static_cast<std::size_t>(j)], best);
  }
}

TEST(Estimate, MaxIterationsReportsNonConvergence) {
  const fixture::Instance inst = fixture::factor_panel(23, 12, 12, 2, 2, 1.0);
  EstimatorConfig c = config_for(2, Scheme::ResidualOls);
  c.max_iterations = 1;
  c.n_random_starts = 0;
  const FactorFit fit = estimate(inst.data, c);
  EXPECT_FALSE(fit.converged);
  EXPECT_EQ(fit.iterations, 1);
}
