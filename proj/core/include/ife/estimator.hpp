#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "ife/linalg.hpp"
#include "ife/panel.hpp"

namespace ife {

/// Step (b) of the alternating LS iteration. Step (a), principal components
/// for fixed beta, is shared by all schemes.
enum class Scheme {
  ProjectedOls,        // regress Y on X_k M_F
  ResidualOls,         // regress Y - Lambda F' on X_k
  DoublyProjectedOls,  // regress Y on M_Lambda X_k M_F
  Hybrid,              // ResidualOls warm-up, then DoublyProjectedOls
};

std::string_view to_string(Scheme scheme) noexcept;
/// Accepts "1", "2", "3", "hybrid" and the enumerator names in snake case.
Scheme parse_scheme(std::string_view text);

struct EstimatorConfig {
  Index n_factors = 0;
  Scheme scheme = Scheme::Hybrid;
  double tol_objective = 1e-10;
  int max_iterations = 1000;
  int n_random_starts = 10;
  /// Half-width of the uniform perturbation around pooled OLS, in units of
  /// each coefficient's pooled-OLS standard error unless
  /// absolute_start_radius is set.
  double random_start_radius = 1.0;
  bool absolute_start_radius = false;
  std::uint64_t seed = 0;
  int hybrid_warmup = 20;
  /// Reuse the previous factors as a warm start for the principal-components
  /// step (subspace iteration, falling back to a dense eigensolver).
  bool warm_pc = true;
  /// Additional deterministic starting values, tried after pooled OLS and
  /// before the random starts.
  std::vector<Vector> extra_starts;
};

/// Throws InvalidConfig / RankArgumentOutOfRange for unusable settings.
void validate(const EstimatorConfig& config, const PanelDataset& data);

/// Loadings (N x R) and factors (T x R) normalised so F'F/T = I and
/// Lambda'Lambda is diagonal with non-increasing entries.
struct FactorBlocks {
  Matrix loadings;
  Matrix factors;
};

struct FactorFit {
  Vector beta;
  Matrix loadings;
  Matrix factors;
  Matrix residuals;
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  int start_index = 0;
  /// Some beta step hit a singular design and used the minimum-norm solution.
  bool singular_design = false;
  /// LS objective after each PC step of the winning start.
  std::vector<double> trace;
  /// Final objective reached by every start, by start index.
  std::vector<double> start_objectives;

  Index n_factors() const { return factors.cols(); }
};

/// (1/NT) * sum of the min(N,T) - R smallest eigenvalues of the Gram matrix
/// of Y - beta.X, computed on the smaller side.
double profile_objective(const PanelDataset& data, const Vector& beta, Index n_factors);

/// Best rank-R approximation Lambda F' of `target`.
FactorBlocks principal_components(const Matrix& target, Index n_factors);

/// ||Y - beta.X - Lambda F'||^2 / NT.
double ls_objective(const PanelDataset& data, const Vector& beta, const FactorBlocks& blocks);

struct BetaStep {
  Vector beta;
  bool singular = false;
};

/// Closed-form minimiser of the step-(b) objective of `scheme` for fixed
/// factor blocks. Hybrid is not a step rule and is rejected.
BetaStep inner_beta_step(const PanelDataset& data, const FactorBlocks& blocks, Scheme scheme);

/// Pooled OLS of Y on X (no factors) together with per-coefficient standard
/// errors under homoskedasticity.
struct PooledOls {
  Vector beta;
  Vector se;
  bool singular = false;
};
PooledOls pooled_ols(const PanelDataset& data);

/// Multistart alternating LS. Never throws NoConvergedStart: if no start
/// meets the tolerance the best fit is returned with converged = false.
FactorFit estimate(const PanelDataset& data, const EstimatorConfig& config);

/// Runs the iteration from a single starting value.
FactorFit estimate_from(const PanelDataset& data, const EstimatorConfig& config,
                        const Vector& start);

}  // namespace ife
