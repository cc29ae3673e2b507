#include "ife/estimator.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ife/error.hpp"
#include "ife/random.hpp"

namespace ife {

namespace {

void check_rank(Index r, Index n, Index t) {
  if (r < 0 || r > std::min(n, t)) {
    throw Error(ErrorCode::RankArgumentOutOfRange,
                "number of factors " + std::to_string(r) + " outside [0, min(N,T) = " +
                    std::to_string(std::min(n, t)) + "]");
  }
}

// Minimum-norm solution of the normal equations A b = c, flagging rank loss.
BetaStep solve_normal_equations(const Matrix& a, const Vector& c) {
  BetaStep out{Vector::Zero(c.size()), false};
  if (c.size() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
  const Vector& d = es.eigenvalues();
  const double top = d.maxCoeff();
  if (!(top > 0.0)) {
    out.singular = true;
    return out;
  }
  const Vector rotated = es.eigenvectors().transpose() * c;
  Vector scaled = Vector::Zero(d.size());
  for (Index j = 0; j < d.size(); ++j) {
    if (d(j) > kRankCutoff * top) {
      scaled(j) = rotated(j) / d(j);
    } else {
      out.singular = true;
    }
  }
  out.beta = es.eigenvectors() * scaled;
  return out;
}

double inner(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

// Subspace iteration on target'target from a warm T x R orthonormal basis.
// Returns false when the Ritz residuals have not settled within the budget;
// the caller then falls back to the dense eigensolver.
bool warm_principal_components(const Matrix& target, Index r, Matrix& basis, FactorBlocks& out) {
  constexpr int kMaxSweeps = 12;
  constexpr double kResidualTol = 1e-11;
  const double t = static_cast<double>(target.cols());
  Matrix q = basis;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    const Matrix v = target.transpose() * (target * q);
    const Matrix h = q.transpose() * v;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()));
    // Descending order.
    const Vector theta = es.eigenvalues().reverse();
    const Matrix s = es.eigenvectors().rowwise().reverse();
    const double top = theta(0);
    if (!(top > 0.0) || !(theta(r - 1) > 1e-10 * top)) return false;
    const Matrix resid = v * s - q * s * theta.asDiagonal();
    if (resid.colwise().norm().maxCoeff() <= kResidualTol * top) {
      basis = q * s;
      out.factors = std::sqrt(t) * basis;
      out.loadings = target * out.factors / t;
      return true;
    }
    q = orthonormal_basis(v);
    if (q.cols() != r) return false;
  }
  return false;
}

Scheme step_rule(const EstimatorConfig& config, int iteration) {
  if (config.scheme != Scheme::Hybrid) return config.scheme;
  return iteration <= config.hybrid_warmup ? Scheme::ResidualOls : Scheme::DoublyProjectedOls;
}

}  // namespace

std::string_view to_string(Scheme scheme) noexcept {
  switch (scheme) {
    case Scheme::ProjectedOls: return "projected_ols";
    case Scheme::ResidualOls: return "residual_ols";
    case Scheme::DoublyProjectedOls: return "doubly_projected_ols";
    case Scheme::Hybrid: return "hybrid";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view text) {
  if (text == "1" || text == "projected_ols") return Scheme::ProjectedOls;
  if (text == "2" || text == "residual_ols") return Scheme::ResidualOls;
  if (text == "3" || text == "doubly_projected_ols") return Scheme::DoublyProjectedOls;
  if (text == "hybrid") return Scheme::Hybrid;
  throw Error(ErrorCode::InvalidConfig, "unknown iteration scheme '" + std::string(text) + "'");
}

void validate(const EstimatorConfig& config, const PanelDataset& data) {
  const Index n = data.n_units();
  const Index t = data.n_periods();
  if (config.n_factors < 0 || config.n_factors >= std::min(n, t)) {
    throw Error(ErrorCode::RankArgumentOutOfRange,
                "number of factors must satisfy 0 <= R < min(N,T) = " +
                    std::to_string(std::min(n, t)) + ", got " + std::to_string(config.n_factors));
  }
  if (!(config.tol_objective > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "tol_objective must be positive");
  }
  if (config.max_iterations < 1) {
    throw Error(ErrorCode::InvalidConfig, "max_iterations must be at least 1");
  }
  if (config.n_random_starts < 0 || !(config.random_start_radius >= 0.0) ||
      config.hybrid_warmup < 0) {
    throw Error(ErrorCode::InvalidConfig,
                "random starts, start radius and warm-up length must be non-negative");
  }
  for (const Vector& s : config.extra_starts) {
    if (s.size() != data.n_regressors() || !s.allFinite()) {
      throw Error(ErrorCode::InvalidConfig, "extra start has wrong length or non-finite entries");
    }
  }
}

double profile_objective(const PanelDataset& data, const Vector& beta, Index n_factors) {
  const Index n = data.n_units();
  const Index t = data.n_periods();
  check_rank(n_factors, n, t);
  const Matrix resid = net_outcome(data, beta);
  const double value = sum_smallest_eigenvalues(smaller_gram(resid), n_factors) /
                       static_cast<double>(n * t);
  return std::max(0.0, value);
}

FactorBlocks principal_components(const Matrix& target, Index n_factors) {
  const Index n = target.rows();
  const Index t = target.cols();
  check_rank(n_factors, n, t);
  FactorBlocks out{Matrix(n, n_factors), Matrix(t, n_factors)};
  if (n_factors == 0) return out;

  const double sqrt_t = std::sqrt(static_cast<double>(t));
  bool done = false;
  if (n < t) {
    // Dual route on the N x N Gram matrix; F is recovered as target' U / sigma.
    Matrix gram = Matrix::Zero(n, n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(target);
    const EigenDecomposition eig =
        top_eigen(Matrix(gram.selfadjointView<Eigen::Lower>()), n_factors);
    const double top = std::max(eig.values(0), 0.0);
    const double last = std::max(eig.values(n_factors - 1), 0.0);
    if (top > 0.0 && last > 1e-10 * top) {
      const Vector inv_sigma = eig.values.cwiseSqrt().cwiseInverse();
      out.factors = sqrt_t * (target.transpose() * eig.vectors) * inv_sigma.asDiagonal();
      done = true;
    }
  }
  if (!done) {
    Matrix gram = Matrix::Zero(t, t);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(target.transpose());
    const EigenDecomposition eig =
        top_eigen(Matrix(gram.selfadjointView<Eigen::Lower>()), n_factors);
    out.factors = sqrt_t * eig.vectors;
  }
  out.loadings = target * out.factors / static_cast<double>(t);
  return out;
}

double ls_objective(const PanelDataset& data, const Vector& beta, const FactorBlocks& blocks) {
  const Matrix resid =
      net_outcome(data, beta) - blocks.loadings * blocks.factors.transpose();
  return resid.squaredNorm() / static_cast<double>(data.n_units() * data.n_periods());
}

BetaStep inner_beta_step(const PanelDataset& data, const FactorBlocks& blocks, Scheme scheme) {
  const Index k_count = data.n_regressors();
  if (k_count == 0) return {Vector(0), false};

  std::vector<Matrix> design;
  design.reserve(static_cast<std::size_t>(k_count));
  Matrix target;
  switch (scheme) {
    case Scheme::ProjectedOls: {
      const Matrix qf = orthonormal_basis(blocks.factors);
      for (const Matrix& x : data.regressors) design.push_back(x - (x * qf) * qf.transpose());
      target = data.outcome;
      break;
    }
    case Scheme::ResidualOls: {
      for (const Matrix& x : data.regressors) design.push_back(x);
      target = data.outcome - blocks.loadings * blocks.factors.transpose();
      break;
    }
    case Scheme::DoublyProjectedOls: {
      const Matrix qf = orthonormal_basis(blocks.factors);
      const Matrix ql = orthonormal_basis(blocks.loadings);
      for (const Matrix& x : data.regressors) {
        Matrix z = x - (x * qf) * qf.transpose();
        z -= ql * (ql.transpose() * z);
        design.push_back(std::move(z));
      }
      target = data.outcome;
      break;
    }
    case Scheme::Hybrid:
      throw Error(ErrorCode::InvalidConfig, "hybrid is not a single beta-step rule");
  }

  Matrix gram(k_count, k_count);
  Vector rhs(k_count);
  for (Index k = 0; k < k_count; ++k) {
    rhs(k) = inner(design[static_cast<std::size_t>(k)], target);
    for (Index l = 0; l <= k; ++l) {
      const double v = inner(design[static_cast<std::size_t>(k)], design[static_cast<std::size_t>(l)]);
      gram(k, l) = v;
      gram(l, k) = v;
    }
  }
  return solve_normal_equations(gram, rhs);
}

PooledOls pooled_ols(const PanelDataset& data) {
  const Index k_count = data.n_regressors();
  const FactorBlocks none{Matrix(data.n_units(), 0), Matrix(data.n_periods(), 0)};
  const BetaStep step = inner_beta_step(data, none, Scheme::ResidualOls);
  PooledOls out{step.beta, Vector::Zero(k_count), step.singular};
  if (k_count == 0) return out;

  Matrix gram(k_count, k_count);
  for (Index k = 0; k < k_count; ++k) {
    for (Index l = 0; l <= k; ++l) {
      const double v = inner(data.regressors[static_cast<std::size_t>(k)],
                             data.regressors[static_cast<std::size_t>(l)]);
      gram(k, l) = v;
      gram(l, k) = v;
    }
  }
  const double cells = static_cast<double>(data.n_units() * data.n_periods());
  const double dof = cells - static_cast<double>(k_count);
  if (dof <= 0.0) return out;
  const double sigma2 = net_outcome(data, out.beta).squaredNorm() / dof;
  const Matrix inv = pinv_symmetric(gram);
  for (Index k = 0; k < k_count; ++k) out.se(k) = std::sqrt(std::max(0.0, sigma2 * inv(k, k)));
  return out;
}

FactorFit estimate_from(const PanelDataset& data, const EstimatorConfig& config,
                        const Vector& start) {
  const Index r = config.n_factors;
  const double cells = static_cast<double>(data.n_units() * data.n_periods());
  const double floor =
      1e-14 * data.outcome.squaredNorm() / cells + std::numeric_limits<double>::min();

  FactorFit fit;
  Vector beta = start;
  FactorBlocks blocks;
  Matrix resid;
  double previous = std::numeric_limits<double>::quiet_NaN();
  // Warm start for the PC step. The returned fit always comes from the dense
  // solver so its normalisation is exact.
  const bool use_warm = config.warm_pc && r > 0 && 4 * r < std::min(data.n_units(), data.n_periods());
  Matrix basis;

  for (int it = 1;; ++it) {
    const Matrix net = net_outcome(data, beta);
    if (basis.size() == 0 || !warm_principal_components(net, r, basis, blocks)) {
      blocks = principal_components(net, r);
      if (use_warm) basis = blocks.factors / std::sqrt(static_cast<double>(data.n_periods()));
    }
    resid = net - blocks.loadings * blocks.factors.transpose();
    const double obj = resid.squaredNorm() / cells;
    fit.trace.push_back(obj);
    fit.iterations = it;

    if (data.n_regressors() == 0) {
      fit.converged = true;
      break;
    }
    if (it > 1 && std::abs(previous - obj) <= config.tol_objective * std::max(obj, floor)) {
      fit.converged = true;
      break;
    }
    if (it >= config.max_iterations) break;
    previous = obj;

    const BetaStep step = inner_beta_step(data, blocks, step_rule(config, it));
    fit.singular_design = fit.singular_design || step.singular;
    beta = step.beta;
  }

  if (basis.size() > 0) {
    const Matrix net = net_outcome(data, beta);
    blocks = principal_components(net, r);
    resid = net - blocks.loadings * blocks.factors.transpose();
    fit.trace.back() = resid.squaredNorm() / cells;
  }
  fit.beta = std::move(beta);
  fit.loadings = std::move(blocks.loadings);
  fit.factors = std::move(blocks.factors);
  fit.residuals = std::move(resid);
  fit.objective = fit.trace.back();
  return fit;
}

FactorFit estimate(const PanelDataset& data, const EstimatorConfig& config) {
  validate(data);
  validate(config, data);

  if (data.n_regressors() == 0) {
    FactorFit fit = estimate_from(data, config, Vector(0));
    fit.start_objectives = {fit.objective};
    return fit;
  }

  const PooledOls ols = pooled_ols(data);
  std::vector<Vector> starts;
  starts.push_back(ols.beta);
  for (const Vector& s : config.extra_starts) starts.push_back(s);
  for (int j = 0; j < config.n_random_starts; ++j) {
    Rng rng = Rng::for_stream(config.seed, static_cast<std::uint64_t>(j));
    Vector s = ols.beta;
    for (Index k = 0; k < s.size(); ++k) {
      // A perfect pooled fit has zero standard errors; fall back to unit scale.
      const double scale = config.absolute_start_radius ? 1.0
                           : (std::isfinite(ols.se(k)) && ols.se(k) > 0.0) ? ols.se(k)
                                                                           : 1.0;
      s(k) += config.random_start_radius * scale * rng.uniform(-1.0, 1.0);
    }
    starts.push_back(std::move(s));
  }

  FactorFit best;
  std::vector<double> objectives;
  objectives.reserve(starts.size());
  for (std::size_t j = 0; j < starts.size(); ++j) {
    FactorFit fit = estimate_from(data, config, starts[j]);
    objectives.push_back(fit.objective);
    if (j == 0 || fit.objective < best.objective) {
      fit.start_index = static_cast<int>(j);
      best = std::move(fit);
    }
  }
  best.start_objectives = std::move(objectives);
  return best;
}

}  // namespace ife
