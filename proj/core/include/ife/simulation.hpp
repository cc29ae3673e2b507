#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ife/estimator.hpp"
#include "ife/expansion.hpp"
#include "ife/inference.hpp"
#include "ife/linalg.hpp"
#include "ife/panel.hpp"

namespace ife {

enum class DgpKind {
  /// One or more regressors correlated with the factors, MA(1) errors with
  /// t(5) innovations.
  StaticMa1T5,
  /// Y_it = beta0 Y_i,t-1 + lambda_i'f_t + e_it with AR(1) factors.
  Ar1Factors,
  /// No true factors; the regressor and the error share a rank-one structure.
  CounterExample,
  /// Static design with e = 0.
  Noiseless,
  /// User-supplied loadings, factors and regressors; MA(1) t(5) errors.
  Custom,
};

std::string_view to_string(DgpKind kind) noexcept;
DgpKind parse_dgp_kind(std::string_view text);

struct DgpSpec {
  DgpKind kind = DgpKind::StaticMa1T5;
  Index n_units = 100;
  Index n_periods = 100;
  Index n_factors = 2;
  /// Length sets K for the static, noiseless and custom designs.
  Vector beta0 = Vector::Constant(1, 1.0);
  // AR(1) design
  double factor_ar = 0.5;
  int burn_in = 100;
  // Counter-example design; c <= 0 selects the smallest admissible value and
  // kappa <= 0 uses sqrt(N/T).
  double a = 0.25;
  double c = 0.0;
  double kappa = 0.0;
  // Custom design
  Matrix custom_loadings;
  Matrix custom_factors;
  std::vector<Matrix> custom_regressors;
  double custom_error_scale = 1.0;
};

/// Effective kappa of a counter-example spec.
double counter_example_kappa(const DgpSpec& spec);
/// Smallest c admitted for the counter-example at the given a and kappa.
double counter_example_c_bound(double a, double kappa);
/// c actually used by `generate`.
double counter_example_c(const DgpSpec& spec);

/// Throws InvalidSpec for inconsistent sizes or parameters outside the
/// admissible region of the design.
void validate(const DgpSpec& spec);

struct Draw {
  PanelDataset data;
  TrueStructure truth;
};

/// Deterministic in (spec, seed, repetition).
Draw generate(const DgpSpec& spec, std::uint64_t seed, std::uint64_t repetition);

inline constexpr std::array<double, 9> kQuantileLevels = {0.01, 0.05, 0.10, 0.25, 0.50,
                                                          0.75, 0.90, 0.95, 0.99};

struct McConfig {
  DgpSpec dgp;
  std::vector<Index> r_list = {0, 1, 2, 3, 4, 5};
  int repetitions = 500;
  std::uint64_t seed = 0;
  EstimatorConfig estimator;
  InferenceOptions inference;
  /// Use the robust sandwich for the size of the t test.
  bool robust_test = true;
  /// Feed the estimates already obtained at other R as extra starting values.
  bool chain_starts = true;
  int parallelism = 1;
};

struct RepetitionRecord {
  bool ok = false;
  std::string error;
  Vector beta_hat;
  Vector beta_bc;
  Vector t_stat;
  double sigma2 = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct McCell {
  Index r = 0;
  int n_ok = 0;
  int n_failed = 0;
  int n_nonconverged = 0;
  Vector bias;
  Vector sd;
  Vector rmse;
  Vector bias_bc;
  Vector sd_bc;
  /// Rows follow kQuantileLevels; columns are coefficients. Quantiles of
  /// sqrt(NT)(beta_hat - beta0).
  Matrix quantiles;
  /// Rejection rate of the two-sided 5% test of beta = beta0 on beta_bc.
  Vector size;
  double sigma2_mean = 0.0;
  double sigma2_sd = 0.0;
  double mean_iterations = 0.0;
};

struct McResult {
  DgpSpec dgp;
  std::vector<Index> r_list;
  int repetitions = 0;
  std::uint64_t seed = 0;
  int parallelism = 1;
  double seconds = 0.0;
  std::vector<McCell> cells;
  /// records[rep][j] belongs to r_list[j].
  std::vector<std::vector<RepetitionRecord>> records;

  const McCell& cell(Index r) const;
};

/// Runs every repetition (estimate, then inference) for each R in the list.
/// Per-repetition failures are recorded, not thrown. The result does not
/// depend on the number of workers.
McResult run_experiment(const McConfig& config);

/// Sample quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double level);

struct RemainderStudyRow {
  Index size = 0;
  /// Per seed, the largest |remainder| / (1 + sqrt(NT)|beta - beta0|)^2 over the sampled betas.
  std::vector<double> sup_ratio;
  double median_sup_ratio = 0.0;
  /// Same statistic multiplied by NT.
  double median_scaled_sup_ratio = 0.0;
};

struct RemainderStudy {
  std::vector<RemainderStudyRow> rows;
  /// median_sup_ratio of row j over row j-1.
  std::vector<double> ratios;
};

/// Samples `points` betas uniformly in the ball |beta - beta0| <= radius / sqrt(N)
/// for N = T = each size and `seeds` draws of `base`.
RemainderStudy remainder_scaling_study(const DgpSpec& base, const std::vector<Index>& sizes,
                                       int seeds, int points, double radius, std::uint64_t seed);

}  // namespace ife
