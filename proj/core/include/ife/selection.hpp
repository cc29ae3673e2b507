#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ife/estimator.hpp"
#include "ife/linalg.hpp"
#include "ife/panel.hpp"

namespace ife {

/// Factor-number criteria.
///   IC1-3, PC1-3: Bai and Ng (2002), Econometrica 70(1).
///   BIC3: Bai and Ng (2002), section 5.
///   ER, GR: Ahn and Horenstein (2013), Econometrica 81(3).
///   ED: Onatski (2010), Review of Economics and Statistics 92(4).
enum class Criterion { IC1, IC2, IC3, PC1, PC2, PC3, BIC3, ER, GR, ED };

std::string_view to_string(Criterion c) noexcept;
std::optional<Criterion> parse_criterion(std::string_view text);
const std::vector<Criterion>& all_criteria();

struct CriterionResult {
  Criterion criterion = Criterion::IC1;
  Index choice = 0;
  /// The choice sits at r_max and should not be trusted.
  bool boundary = false;
  /// Criterion value for k = 0..r_max; NaN where undefined.
  std::vector<double> values;
};

struct SelectionReport {
  Index r_max = 0;
  EffectiveSize size;
  /// Eigenvalues of u'u / NT, descending, min(N,T) of them.
  Vector eigenvalues;
  Vector log_eigenvalues;
  /// V(k) = sum_{r>k} eigenvalue_r for k = 0..r_max.
  std::vector<double> v;
  /// Mock zeroth eigenvalue used by ER and GR.
  double mock_eigenvalue = 0.0;
  /// Calibrated gap threshold and number of edge-regression rounds for ED.
  double ed_threshold = 0.0;
  int ed_iterations = 0;
  std::vector<CriterionResult> results;

  const CriterionResult* find(Criterion c) const;
  /// Throws InvalidConfig when the criterion was not evaluated.
  Index choice(Criterion c) const;
};

/// Number of edge-regression refinements used to calibrate ED.
inline constexpr int kEdIterations = 4;

/// Y - beta_{r_max} . X, the residual before factors are removed.
Matrix first_stage_residuals(const PanelDataset& data, Index r_max, EstimatorConfig config);

/// Throws RMaxTooLarge unless 0 <= r_max < min(N,T). `size` defaults to the
/// dimensions of u_hat and feeds the penalties.
SelectionReport select_factors(const Matrix& u_hat, Index r_max,
                               const std::vector<Criterion>& criteria = all_criteria(),
                               std::optional<EffectiveSize> size = std::nullopt);

/// CSV with columns rank,eigenvalue,log_eigenvalue.
std::string scree_csv(const Vector& eigenvalues);
void emit_scree(const Matrix& u_hat, const std::filesystem::path& path);

/// Eigenvalues of u'u / NT, descending and clipped at zero.
Vector scree_eigenvalues(const Matrix& u_hat);

}  // namespace ife
