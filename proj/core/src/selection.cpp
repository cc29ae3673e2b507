#include "ife/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "ife/error.hpp"

namespace ife {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_double(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Index arg_best(const std::vector<double>& values, bool maximise) {
  Index best = -1;
  for (Index k = 0; k < static_cast<Index>(values.size()); ++k) {
    const double v = values[static_cast<std::size_t>(k)];
    if (!std::isfinite(v)) continue;
    if (best < 0 || (maximise ? v > values[static_cast<std::size_t>(best)]
                              : v < values[static_cast<std::size_t>(best)])) {
      best = k;
    }
  }
  return std::max<Index>(best, 0);
}

// Slope of y on x^(2/3) by least squares; x are 1-based ranks.
double edge_slope(const Vector& mu, Index first, Index last) {
  const Index count = last - first + 1;
  double sx = 0.0, sy = 0.0;
  for (Index j = first; j <= last; ++j) {
    sx += std::pow(static_cast<double>(j - 1), 2.0 / 3.0);
    sy += mu(j - 1);
  }
  const double mx = sx / static_cast<double>(count);
  const double my = sy / static_cast<double>(count);
  double sxy = 0.0, sxx = 0.0;
  for (Index j = first; j <= last; ++j) {
    const double dx = std::pow(static_cast<double>(j - 1), 2.0 / 3.0) - mx;
    sxy += dx * (mu(j - 1) - my);
    sxx += dx * dx;
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

}  // namespace

std::string_view to_string(Criterion c) noexcept {
  switch (c) {
    case Criterion::IC1: return "IC1";
    case Criterion::IC2: return "IC2";
    case Criterion::IC3: return "IC3";
    case Criterion::PC1: return "PC1";
    case Criterion::PC2: return "PC2";
    case Criterion::PC3: return "PC3";
    case Criterion::BIC3: return "BIC3";
    case Criterion::ER: return "ER";
    case Criterion::GR: return "GR";
    case Criterion::ED: return "ED";
  }
  return "unknown";
}

std::optional<Criterion> parse_criterion(std::string_view text) {
  for (Criterion c : all_criteria()) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

const std::vector<Criterion>& all_criteria() {
  static const std::vector<Criterion> all = {Criterion::IC1, Criterion::IC2, Criterion::IC3,
                                             Criterion::PC1, Criterion::PC2, Criterion::PC3,
                                             Criterion::BIC3, Criterion::ER, Criterion::GR,
                                             Criterion::ED};
  return all;
}

const CriterionResult* SelectionReport::find(Criterion c) const {
  for (const auto& r : results) {
    if (r.criterion == c) return &r;
  }
  return nullptr;
}

Index SelectionReport::choice(Criterion c) const {
  const CriterionResult* r = find(c);
  if (r == nullptr) {
    throw Error(ErrorCode::InvalidConfig,
                "criterion " + std::string(to_string(c)) + " was not evaluated");
  }
  return r->choice;
}

Matrix first_stage_residuals(const PanelDataset& data, Index r_max, EstimatorConfig config) {
  const Index m = std::min(data.n_units(), data.n_periods());
  if (r_max < 0 || r_max >= m) {
    throw Error(ErrorCode::RMaxTooLarge, "r_max = " + std::to_string(r_max) +
                                             " must satisfy 0 <= r_max < min(N,T) = " +
                                             std::to_string(m));
  }
  if (data.n_regressors() == 0) return data.outcome;
  config.n_factors = r_max;
  const FactorFit fit = estimate(data, config);
  return net_outcome(data, fit.beta);
}

Vector scree_eigenvalues(const Matrix& u_hat) {
  const double cells = static_cast<double>(u_hat.rows()) * static_cast<double>(u_hat.cols());
  Vector mu = sym_eigenvalues(smaller_gram(u_hat)) / cells;
  return mu.cwiseMax(0.0);
}

SelectionReport select_factors(const Matrix& u_hat, Index r_max,
                               const std::vector<Criterion>& criteria,
                               std::optional<EffectiveSize> size) {
  const Index m = std::min(u_hat.rows(), u_hat.cols());
  if (r_max < 0 || r_max >= m) {
    throw Error(ErrorCode::RMaxTooLarge, "r_max = " + std::to_string(r_max) +
                                             " must satisfy 0 <= r_max < min(N,T) = " +
                                             std::to_string(m));
  }
  SelectionReport rep;
  rep.r_max = r_max;
  rep.size = size.value_or(EffectiveSize{u_hat.rows(), u_hat.cols()});
  rep.eigenvalues = scree_eigenvalues(u_hat);
  rep.log_eigenvalues = rep.eigenvalues.array().log();
  const Vector& mu = rep.eigenvalues;

  // tail(k) = sum_{r>k} mu_r, k = 0..m.
  std::vector<double> tail(static_cast<std::size_t>(m + 1), 0.0);
  for (Index k = m - 1; k >= 0; --k) tail[static_cast<std::size_t>(k)] = tail[static_cast<std::size_t>(k + 1)] + mu(k);
  rep.v.assign(tail.begin(), tail.begin() + r_max + 1);

  const double n = static_cast<double>(rep.size.n_units);
  const double t = static_cast<double>(rep.size.n_periods);
  const double nt = n * t;
  const double small = std::min(n, t);
  const double g1 = (n + t) / nt * std::log(nt / (n + t));
  const double g2 = (n + t) / nt * std::log(small);
  const double g3 = std::log(small) / small;
  const double sigma_bar = rep.v.back();
  rep.mock_eigenvalue = tail[0] / std::log(small);

  auto mu_at = [&](Index k) { return k == 0 ? rep.mock_eigenvalue : mu(k - 1); };

  for (Criterion c : criteria) {
    CriterionResult res;
    res.criterion = c;
    res.values.assign(static_cast<std::size_t>(r_max + 1), kNaN);
    bool maximise = false;
    for (Index k = 0; k <= r_max; ++k) {
      const double vk = rep.v[static_cast<std::size_t>(k)];
      const double kd = static_cast<double>(k);
      double value = kNaN;
      switch (c) {
        case Criterion::IC1: value = std::log(vk) + kd * g1; break;
        case Criterion::IC2: value = std::log(vk) + kd * g2; break;
        case Criterion::IC3: value = std::log(vk) + kd * g3; break;
        case Criterion::PC1: value = vk + kd * sigma_bar * g1; break;
        case Criterion::PC2: value = vk + kd * sigma_bar * g2; break;
        case Criterion::PC3: value = vk + kd * sigma_bar * g3; break;
        case Criterion::BIC3: value = vk + kd * sigma_bar * (n + t - kd) * std::log(nt) / nt; break;
        case Criterion::ER: {
          maximise = true;
          const double next = mu(k);
          if (next > 0.0) value = mu_at(k) / next;
          break;
        }
        case Criterion::GR: {
          maximise = true;
          const double prev = vk + mu_at(k);
          const double after = tail[static_cast<std::size_t>(k + 1)];
          if (vk > 0.0 && after > 0.0) value = std::log(prev / vk) / std::log(vk / after);
          break;
        }
        case Criterion::ED:
          if (k >= 1) value = mu(k - 1) - mu(k);
          break;
      }
      res.values[static_cast<std::size_t>(k)] = value;
    }

    if (c == Criterion::ED) {
      // Edge regression on five eigenvalues starting at rank j, then the
      // largest k whose gap clears twice the fitted slope; repeat from j = k + 1.
      Index j = r_max + 1;
      Index choice = 0;
      int rounds = 0;
      double delta = 0.0;
      for (int it = 0; it < kEdIterations; ++it) {
        const Index last = std::min(j + 4, m);
        if (last - j < 1) break;
        delta = 2.0 * std::abs(edge_slope(mu, j, last));
        ++rounds;
        Index next = 0;
        for (Index k = r_max; k >= 1; --k) {
          if (mu(k - 1) - mu(k) >= delta) {
            next = k;
            break;
          }
        }
        choice = next;
        if (next + 1 == j) break;
        j = next + 1;
      }
      rep.ed_threshold = delta;
      rep.ed_iterations = rounds;
      res.choice = choice;
    } else {
      res.choice = arg_best(res.values, maximise);
    }
    res.boundary = res.choice == r_max;
    rep.results.push_back(std::move(res));
  }
  return rep;
}

std::string scree_csv(const Vector& eigenvalues) {
  std::string out = "rank,eigenvalue,log_eigenvalue\n";
  for (Index r = 0; r < eigenvalues.size(); ++r) {
    out += std::to_string(r + 1) + "," + format_double(eigenvalues(r)) + "," +
           format_double(std::log(eigenvalues(r))) + "\n";
  }
  return out;
}

void emit_scree(const Matrix& u_hat, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << scree_csv(scree_eigenvalues(u_hat));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace ife
