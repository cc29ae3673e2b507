#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ife/linalg.hpp"

namespace ife {

/// Sample sizes after additive effects have been swept out. Inference uses
/// these in its degree-of-freedom corrections and normalisations.
struct EffectiveSize {
  Index n_units = 0;
  Index n_periods = 0;
};

/// Balanced N x T panel: outcome Y and K regressors X_k, all N x T.
struct PanelDataset {
  Matrix outcome;
  std::vector<Matrix> regressors;
  std::vector<std::string> regressor_names;
  std::vector<std::string> unit_labels;
  std::vector<std::string> period_labels;
  EffectiveSize effective;

  Index n_units() const { return outcome.rows(); }
  Index n_periods() const { return outcome.cols(); }
  Index n_regressors() const { return static_cast<Index>(regressors.size()); }
};

/// Builds a dataset with default labels ("1".."N", "1".."T", "x1".."xK")
/// and effective sizes equal to the raw sizes. Validates shapes and finiteness.
PanelDataset make_panel(Matrix outcome, std::vector<Matrix> regressors);

/// Throws InvalidSpec on shape mismatch, non-finite entries or empty panels.
void validate(const PanelDataset& data);

/// Y - sum_k beta_k X_k.
Matrix net_outcome(const PanelDataset& data, const Vector& beta);

/// sum_k beta_k X_k.
Matrix combine_regressors(const PanelDataset& data, const Vector& beta);

/// Which additive effects to remove before factor estimation. Unit-side
/// trends are nested: quadratic requires linear, linear requires intercepts.
struct ProjectionSpec {
  bool unit_intercepts = false;         // alpha_i
  bool unit_linear_trends = false;      // gamma_i * t
  bool unit_quadratic_trends = false;   // delta_i * t^2
  bool time_effects = false;            // mu_t
  bool lag_outcome_first = false;       // prepend Y_{i,t-1} as a regressor

  /// Number of time-basis columns swept from the right (0..3).
  Index time_basis_columns() const;
  bool any() const;
};

/// Throws InvalidSpec if the trend flags are not nested.
void validate(const ProjectionSpec& spec);

/// Time basis (1, t, t^2) restricted to the requested columns, t = 1..T.
Matrix time_basis(Index n_periods, const ProjectionSpec& spec);

/// M_left Z M_right for a single N x T matrix.
Matrix sweep(const Matrix& z, const ProjectionSpec& spec);

/// Drops the first period and prepends the lagged outcome as regressor "y_lag".
PanelDataset with_lagged_outcome(const PanelDataset& data);

/// Applies the lag (if requested) and sweeps every matrix. Effective sizes
/// become N - 1 (time effects) and T - #time-basis columns. Throws
/// DegenerateProjection if some regressor is annihilated by the sweep.
PanelDataset project_additive_effects(const PanelDataset& data, const ProjectionSpec& spec);

/// Column naming for long-format CSV files.
struct CsvSchema {
  std::string unit_column = "unit_id";
  std::string time_column = "time_id";
  std::string outcome_column = "y";
  /// Empty means: every remaining column, in header order.
  std::vector<std::string> regressor_columns;
};

/// Reads a long-format CSV (one row per unit/period cell). Units and
/// periods are ordered by label, numerically when every label parses as a
/// number. Throws MissingColumn, NonNumericCell, DuplicateCell, UnbalancedPanel, Io.
PanelDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

/// Parses CSV text; `source` is used in error messages.
PanelDataset parse_csv(const std::string& text, const CsvSchema& schema = {},
                       const std::string& source = "<memory>");

/// Long format, unit-major rows, 17 significant digits.
std::string to_csv(const PanelDataset& data);
void write_csv(const PanelDataset& data, const std::filesystem::path& path);

}  // namespace ife
