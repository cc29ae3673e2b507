#include "ife/panel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ife/error.hpp"

namespace ife {

namespace {

void require(bool ok, ErrorCode code, const std::string& message) {
  if (!ok) throw Error(code, message);
}

std::vector<std::string> numbered_labels(Index n, const std::string& prefix) {
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels.push_back(prefix + std::to_string(i + 1));
  return labels;
}

}  // namespace

PanelDataset make_panel(Matrix outcome, std::vector<Matrix> regressors) {
  PanelDataset data;
  data.outcome = std::move(outcome);
  data.regressors = std::move(regressors);
  data.regressor_names = numbered_labels(data.n_regressors(), "x");
  data.unit_labels = numbered_labels(data.n_units(), "");
  data.period_labels = numbered_labels(data.n_periods(), "");
  data.effective = {data.n_units(), data.n_periods()};
  validate(data);
  return data;
}

void validate(const PanelDataset& data) {
  const Index n = data.n_units();
  const Index t = data.n_periods();
  require(n >= 1 && t >= 1, ErrorCode::InvalidSpec, "panel must have at least one cell");
  require(data.outcome.allFinite(), ErrorCode::InvalidSpec, "outcome contains non-finite values");
  for (std::size_t k = 0; k < data.regressors.size(); ++k) {
    const Matrix& x = data.regressors[k];
    require(x.rows() == n && x.cols() == t, ErrorCode::InvalidSpec,
            "regressor " + std::to_string(k + 1) + " has shape " + std::to_string(x.rows()) +
                "x" + std::to_string(x.cols()) + ", expected " + std::to_string(n) + "x" +
                std::to_string(t));
    require(x.allFinite(), ErrorCode::InvalidSpec,
            "regressor " + std::to_string(k + 1) + " contains non-finite values");
  }
  require(data.regressor_names.size() == data.regressors.size(), ErrorCode::InvalidSpec,
          "regressor name count does not match regressor count");
  require(static_cast<Index>(data.unit_labels.size()) == n &&
              static_cast<Index>(data.period_labels.size()) == t,
          ErrorCode::InvalidSpec, "label count does not match panel shape");
  require(data.effective.n_units >= 1 && data.effective.n_units <= n &&
              data.effective.n_periods >= 1 && data.effective.n_periods <= t,
          ErrorCode::InvalidSpec, "effective sizes out of range");
}

Matrix combine_regressors(const PanelDataset& data, const Vector& beta) {
  if (beta.size() != data.n_regressors()) {
    throw Error(ErrorCode::InvalidSpec, "coefficient vector has length " +
                                            std::to_string(beta.size()) + ", expected " +
                                            std::to_string(data.n_regressors()));
  }
  Matrix out = Matrix::Zero(data.n_units(), data.n_periods());
  for (Index k = 0; k < beta.size(); ++k) out += beta(k) * data.regressors[k];
  return out;
}

Matrix net_outcome(const PanelDataset& data, const Vector& beta) {
  return data.outcome - combine_regressors(data, beta);
}

Index ProjectionSpec::time_basis_columns() const {
  return static_cast<Index>(unit_intercepts) + static_cast<Index>(unit_linear_trends) +
         static_cast<Index>(unit_quadratic_trends);
}

bool ProjectionSpec::any() const {
  return unit_intercepts || unit_linear_trends || unit_quadratic_trends || time_effects ||
         lag_outcome_first;
}

void validate(const ProjectionSpec& spec) {
  require(!spec.unit_quadratic_trends || spec.unit_linear_trends, ErrorCode::InvalidSpec,
          "quadratic unit trends require linear unit trends");
  require(!spec.unit_linear_trends || spec.unit_intercepts, ErrorCode::InvalidSpec,
          "linear unit trends require unit intercepts");
}

Matrix time_basis(Index n_periods, const ProjectionSpec& spec) {
  Matrix basis(n_periods, spec.time_basis_columns());
  Index c = 0;
  for (Index power = 0; power < 3; ++power) {
    const bool on = power == 0   ? spec.unit_intercepts
                    : power == 1 ? spec.unit_linear_trends
                                 : spec.unit_quadratic_trends;
    if (!on) continue;
    for (Index t = 0; t < n_periods; ++t) {
      basis(t, c) = std::pow(static_cast<double>(t + 1), static_cast<double>(power));
    }
    ++c;
  }
  return basis;
}

Matrix sweep(const Matrix& z, const ProjectionSpec& spec) {
  Matrix out = z;
  if (spec.time_effects) {
    // M_{1_N} from the left: remove the cross-sectional mean of every period.
    out.rowwise() -= out.colwise().mean();
  }
  if (spec.time_basis_columns() > 0) {
    out = apply_orthogonal_right(out, time_basis(z.cols(), spec));
  }
  return out;
}

PanelDataset with_lagged_outcome(const PanelDataset& data) {
  const Index n = data.n_units();
  const Index t = data.n_periods();
  require(t >= 2, ErrorCode::InvalidSpec, "lagging the outcome needs at least two periods");
  PanelDataset out;
  out.outcome = data.outcome.rightCols(t - 1);
  out.regressors.reserve(data.regressors.size() + 1);
  out.regressors.push_back(data.outcome.leftCols(t - 1));
  out.regressor_names.push_back("y_lag");
  for (std::size_t k = 0; k < data.regressors.size(); ++k) {
    out.regressors.push_back(data.regressors[k].rightCols(t - 1));
    out.regressor_names.push_back(data.regressor_names[k]);
  }
  out.unit_labels = data.unit_labels;
  out.period_labels.assign(data.period_labels.begin() + 1, data.period_labels.end());
  out.effective = {std::min(data.effective.n_units, n),
                   std::min(data.effective.n_periods, t - 1)};
  return out;
}

PanelDataset project_additive_effects(const PanelDataset& data, const ProjectionSpec& spec) {
  validate(spec);
  validate(data);
  PanelDataset base = spec.lag_outcome_first ? with_lagged_outcome(data) : data;
  const Index n = base.n_units();
  const Index t = base.n_periods();
  const Index swept_t = spec.time_basis_columns();
  require(t > swept_t, ErrorCode::InvalidSpec,
          "T = " + std::to_string(t) + " must exceed the " + std::to_string(swept_t) +
              " swept time-basis columns");
  require(!spec.time_effects || n >= 2, ErrorCode::InvalidSpec,
          "sweeping time effects needs at least two units");

  PanelDataset out = base;
  out.outcome = sweep(base.outcome, spec);
  for (std::size_t k = 0; k < base.regressors.size(); ++k) {
    const Matrix& x = base.regressors[k];
    Matrix swept = sweep(x, spec);
    const double before = std::max(1.0, x.norm());
    if (swept.norm() <= 1e-10 * before) {
      throw Error(ErrorCode::DegenerateProjection,
                  "regressor '" + base.regressor_names[k] +
                      "' has no variation left after sweeping additive effects (low-rank regressor)");
    }
    out.regressors[k] = std::move(swept);
  }
  out.effective.n_units = base.effective.n_units - (spec.time_effects ? 1 : 0);
  out.effective.n_periods = base.effective.n_periods - swept_t;
  return out;
}

}  // namespace ife
