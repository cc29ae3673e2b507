#include "ife/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <optional>
#include <string>
#include <thread>

#include "ife/error.hpp"
#include "ife/random.hpp"

namespace ife {

namespace {

constexpr double kCritical5 = 1.959963984540054;

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::InvalidSpec, message);
}

Matrix draw_normal(Rng& rng, Index rows, Index cols, double mean = 0.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal(mean, 1.0);
  }
  return m;
}

// e_it = scale (v_it + v_i,t-1) / sqrt(2), v iid t(5), one pre-sample period.
Matrix ma1_t5_errors(Rng& rng, Index n, Index t, double scale) {
  Matrix v(n, t + 1);
  for (Index i = 0; i < n; ++i) {
    for (Index s = 0; s <= t; ++s) v(i, s) = rng.student_t(5);
  }
  return scale * (v.rightCols(t) + v.leftCols(t)) / std::sqrt(2.0);
}

// Regressors 1 + X~ + sum_r (lambda_ir + chi_ir)(f_tr + f_t-1,r) and the
// factors of the estimation sample.
struct StaticParts {
  Matrix lambda;
  Matrix f;
  std::vector<Matrix> x;
};

StaticParts static_parts(Rng& rng, const DgpSpec& spec) {
  const Index n = spec.n_units;
  const Index t = spec.n_periods;
  const Index r = spec.n_factors;
  const Index k_count = spec.beta0.size();
  StaticParts out;
  out.lambda = draw_normal(rng, n, r, 1.0);
  std::vector<Matrix> chi;
  for (Index k = 0; k < k_count; ++k) chi.push_back(draw_normal(rng, n, r, 1.0));
  const Matrix f_all = draw_normal(rng, t + 1, r);  // row 0 is the pre-sample period
  out.f = f_all.bottomRows(t);
  const Matrix f_sum = f_all.bottomRows(t) + f_all.topRows(t);
  for (Index k = 0; k < k_count; ++k) {
    Matrix x = Matrix::Constant(n, t, 1.0) + draw_normal(rng, n, t);
    x += (out.lambda + chi[static_cast<std::size_t>(k)]) * f_sum.transpose();
    out.x.push_back(std::move(x));
  }
  return out;
}

Draw assemble(Matrix lambda, Matrix f, std::vector<Matrix> x, Vector beta0, Matrix e) {
  Matrix y = lambda * f.transpose() + e;
  for (Index k = 0; k < beta0.size(); ++k) y += beta0(k) * x[static_cast<std::size_t>(k)];
  Draw d;
  d.data = make_panel(std::move(y), std::move(x));
  d.truth = TrueStructure{std::move(lambda), std::move(f), std::move(beta0), std::move(e)};
  return d;
}

Draw generate_ar1(Rng& rng, const DgpSpec& spec) {
  const Index n = spec.n_units;
  const Index t = spec.n_periods;
  const Index r = spec.n_factors;
  const double rho = spec.factor_ar;
  const double beta = spec.beta0(0);
  const Index total = spec.burn_in + t + 1;
  Matrix lambda = draw_normal(rng, n, r, 1.0);
  Matrix f_all = Matrix::Zero(total, r);
  Vector f_prev = Vector::Zero(r);
  const double innovation_scale = 1.0 / std::sqrt(1.0 - rho * rho);
  for (Index s = 0; s < total; ++s) {
    for (Index q = 0; q < r; ++q) f_all(s, q) = rho * f_prev(q) + innovation_scale * rng.normal();
    f_prev = f_all.row(s).transpose();
  }
  const Matrix e_all = draw_normal(rng, n, total);
  Matrix y_all(n, total);
  for (Index i = 0; i < n; ++i) {
    double prev = 0.0;
    for (Index s = 0; s < total; ++s) {
      prev = beta * prev + lambda.row(i).dot(f_all.row(s)) + e_all(i, s);
      y_all(i, s) = prev;
    }
  }
  // Last t + 1 periods: period 0 only supplies the first lag.
  const Index first = total - t;
  Matrix y = y_all.rightCols(t);
  std::vector<Matrix> x{y_all.block(0, first - 1, n, t)};
  Draw d;
  d.data = make_panel(std::move(y), std::move(x));
  d.data.regressor_names = {"y_lag"};
  d.truth = TrueStructure{std::move(lambda), f_all.bottomRows(t), spec.beta0,
                          e_all.rightCols(t)};
  return d;
}

Draw generate_counter_example(Rng& rng, const DgpSpec& spec) {
  const Index n = spec.n_units;
  const Index t = spec.n_periods;
  const double c = counter_example_c(spec);
  const double bound = std::sqrt(3.0);
  Vector lx(n), fx(t);
  for (Index i = 0; i < n; ++i) lx(i) = rng.uniform(-bound, bound);
  for (Index s = 0; s < t; ++s) fx(s) = rng.uniform(-bound, bound);
  const Matrix x_tilde = draw_normal(rng, n, t);
  const Matrix u = draw_normal(rng, n, t);
  // (1 + c lx lx'/N) u (1 + c fx fx'/T), without forming the N x N and T x T factors.
  const Matrix left = u + (c / static_cast<double>(n)) * lx * (lx.transpose() * u);
  Matrix e = left + (c / static_cast<double>(t)) * (left * fx) * fx.transpose();
  Matrix x = spec.a * x_tilde + lx * fx.transpose();
  return assemble(Matrix(n, 0), Matrix(t, 0), {std::move(x)}, spec.beta0, std::move(e));
}

}  // namespace

std::string_view to_string(DgpKind kind) noexcept {
  switch (kind) {
    case DgpKind::StaticMa1T5: return "static";
    case DgpKind::Ar1Factors: return "ar1";
    case DgpKind::CounterExample: return "counter_example";
    case DgpKind::Noiseless: return "noiseless";
    case DgpKind::Custom: return "custom";
  }
  return "unknown";
}

DgpKind parse_dgp_kind(std::string_view text) {
  for (DgpKind k : {DgpKind::StaticMa1T5, DgpKind::Ar1Factors, DgpKind::CounterExample,
                    DgpKind::Noiseless, DgpKind::Custom}) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown design '" + std::string(text) + "'");
}

double counter_example_kappa(const DgpSpec& spec) {
  if (spec.kappa > 0.0) return spec.kappa;
  return std::sqrt(static_cast<double>(spec.n_units) / static_cast<double>(spec.n_periods));
}

double counter_example_c_bound(double a, double kappa) {
  const double num = (2.0 + std::sqrt(2.0)) * (1.0 + kappa) * (1.0 + std::sqrt(3.0) * std::pow(a, -0.25));
  const double den = std::min(1.0, kappa) * (0.5 - std::pow(a, 1.5) * std::max(kappa, 1.0 / kappa));
  return num / den;
}

double counter_example_c(const DgpSpec& spec) {
  return spec.c > 0.0 ? spec.c : counter_example_c_bound(spec.a, counter_example_kappa(spec));
}

void validate(const DgpSpec& spec) {
  require(spec.n_units >= 2 && spec.n_periods >= 2, "N and T must be at least 2");
  require(spec.n_factors >= 0 && spec.n_factors < std::min(spec.n_units, spec.n_periods),
          "number of true factors must satisfy 0 <= R0 < min(N,T)");
  require(spec.beta0.size() >= 1 && spec.beta0.allFinite(), "beta0 must be a finite, non-empty vector");
  switch (spec.kind) {
    case DgpKind::StaticMa1T5:
    case DgpKind::Noiseless:
      break;
    case DgpKind::Ar1Factors:
      require(spec.beta0.size() == 1, "the AR(1) design has exactly one coefficient");
      require(std::abs(spec.beta0(0)) < 1.0, "the AR(1) design needs |beta0| < 1");
      require(std::abs(spec.factor_ar) < 1.0, "the factor AR coefficient must lie in (-1, 1)");
      require(spec.burn_in >= 0, "burn-in must be non-negative");
      break;
    case DgpKind::CounterExample: {
      require(spec.beta0.size() == 1, "the counter-example has exactly one coefficient");
      require(spec.n_factors == 0, "the counter-example has no true factors (R0 = 0)");
      const double kappa = counter_example_kappa(spec);
      const double a_max = std::pow(0.5, 2.0 / 3.0) * std::min(kappa * kappa, 1.0 / (kappa * kappa));
      require(spec.a > 0.0 && spec.a < a_max,
              "counter-example needs 0 < a < " + std::to_string(a_max) + ", got " + std::to_string(spec.a));
      const double c_min = counter_example_c_bound(spec.a, kappa);
      require(spec.c <= 0.0 || spec.c >= c_min,
              "counter-example needs c >= " + std::to_string(c_min) + ", got " + std::to_string(spec.c));
      break;
    }
    case DgpKind::Custom: {
      const Index n = spec.n_units;
      const Index t = spec.n_periods;
      require(spec.custom_loadings.rows() == n && spec.custom_factors.rows() == t &&
                  spec.custom_loadings.cols() == spec.n_factors &&
                  spec.custom_factors.cols() == spec.n_factors,
              "custom loadings/factors must be N x R0 and T x R0");
      require(static_cast<Index>(spec.custom_regressors.size()) == spec.beta0.size(),
              "custom design needs one regressor per coefficient");
      for (const Matrix& x : spec.custom_regressors) {
        require(x.rows() == n && x.cols() == t && x.allFinite(), "custom regressors must be finite N x T");
      }
      require(spec.custom_error_scale >= 0.0, "custom error scale must be non-negative");
      break;
    }
  }
}

Draw generate(const DgpSpec& spec, std::uint64_t seed, std::uint64_t repetition) {
  validate(spec);
  Rng rng = Rng::for_stream(seed, repetition);
  const Index n = spec.n_units;
  const Index t = spec.n_periods;
  switch (spec.kind) {
    case DgpKind::StaticMa1T5: {
      StaticParts p = static_parts(rng, spec);
      Matrix e = ma1_t5_errors(rng, n, t, 1.0);
      return assemble(std::move(p.lambda), std::move(p.f), std::move(p.x), spec.beta0, std::move(e));
    }
    case DgpKind::Noiseless: {
      StaticParts p = static_parts(rng, spec);
      return assemble(std::move(p.lambda), std::move(p.f), std::move(p.x), spec.beta0,
                      Matrix::Zero(n, t));
    }
    case DgpKind::Ar1Factors:
      return generate_ar1(rng, spec);
    case DgpKind::CounterExample:
      return generate_counter_example(rng, spec);
    case DgpKind::Custom: {
      Matrix e = ma1_t5_errors(rng, n, t, spec.custom_error_scale);
      return assemble(spec.custom_loadings, spec.custom_factors, spec.custom_regressors,
                      spec.beta0, std::move(e));
    }
  }
  throw Error(ErrorCode::InvalidSpec, "unknown design");
}

double quantile(std::vector<double> values, double level) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = level * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

const McCell& McResult::cell(Index r) const {
  for (const McCell& c : cells) {
    if (c.r == r) return c;
  }
  throw Error(ErrorCode::InvalidConfig, "no Monte Carlo cell for R = " + std::to_string(r));
}

McResult run_experiment(const McConfig& config) {
  validate(config.dgp);
  if (config.repetitions < 1) throw Error(ErrorCode::InvalidConfig, "repetitions must be at least 1");
  if (config.r_list.empty()) throw Error(ErrorCode::InvalidConfig, "the R list is empty");
  const auto start_time = std::chrono::steady_clock::now();

  const std::size_t n_rep = static_cast<std::size_t>(config.repetitions);
  const std::size_t n_r = config.r_list.size();
  McResult result;
  result.dgp = config.dgp;
  result.r_list = config.r_list;
  result.repetitions = config.repetitions;
  result.seed = config.seed;
  result.parallelism = std::max(1, config.parallelism);
  result.records.assign(n_rep, std::vector<RepetitionRecord>(n_r));

  InferenceOptions inference = config.inference;
  if (config.robust_test) inference.robust = true;

  auto run_one = [&](std::size_t rep) {
    std::vector<RepetitionRecord>& out = result.records[rep];
    Draw draw;
    try {
      draw = generate(config.dgp, config.seed, rep);
    } catch (const std::exception& ex) {
      for (auto& rec : out) rec.error = ex.what();
      return;
    }
    InferenceOptions opts = inference;
    opts.null_value = draw.truth.beta0;
    std::vector<std::optional<FactorFit>> fits(n_r);
    std::vector<Vector> found;
    for (std::size_t j = 0; j < n_r; ++j) {
      try {
        EstimatorConfig est = config.estimator;
        est.n_factors = config.r_list[j];
        est.seed = mix_seed(config.seed ^ 0xA5A5A5A5ULL, rep);
        if (config.chain_starts) {
          for (const Vector& b : found) est.extra_starts.push_back(b);
        }
        fits[j] = estimate(draw.data, est);
        found.push_back(fits[j]->beta);
      } catch (const std::exception& ex) {
        out[j].error = ex.what();
      }
    }
    // Backward pass: an estimate found with more (or fewer) factors can start
    // a search that the forward chain never tried. Only starts that already
    // beat the current objective are iterated.
    if (config.chain_starts) {
      for (std::size_t j = 0; j < n_r; ++j) {
        if (!fits[j]) continue;
        for (std::size_t i = 0; i < n_r; ++i) {
          if (i == j || !fits[i]) continue;
          const Vector start = fits[i]->beta;
          try {
            const double at_start = profile_objective(draw.data, start, config.r_list[j]);
            if (!(at_start < fits[j]->objective * (1.0 - 1e-10))) continue;
            EstimatorConfig est = config.estimator;
            est.n_factors = config.r_list[j];
            FactorFit alt = estimate_from(draw.data, est, start);
            if (alt.objective < fits[j]->objective) fits[j] = std::move(alt);
          } catch (const std::exception&) {
            // keep the forward-pass fit
          }
        }
      }
    }
    for (std::size_t j = 0; j < n_r; ++j) {
      RepetitionRecord& rec = out[j];
      if (!fits[j]) continue;
      const FactorFit& fit = *fits[j];
      try {
        rec.beta_hat = fit.beta;
        rec.iterations = fit.iterations;
        rec.converged = fit.converged;
        const InferenceReport rep_inf = infer(draw.data, fit, opts);
        rec.beta_bc = rep_inf.beta_bc;
        rec.sigma2 = rep_inf.sigma2;
        rec.t_stat = opts.robust && config.robust_test ? rep_inf.t_robust : rep_inf.t_stats;
        rec.ok = true;
      } catch (const std::exception& ex) {
        rec.ok = false;
        rec.error = ex.what();
      }
    }
  };

  const int workers = std::min<int>(result.parallelism, config.repetitions);
  if (workers <= 1) {
    for (std::size_t rep = 0; rep < n_rep; ++rep) run_one(rep);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t rep = next++; rep < n_rep; rep = next++) run_one(rep);
      });
    }
    for (auto& th : pool) th.join();
  }

  const Vector& beta0 = config.dgp.beta0;
  const Index k_count = config.dgp.kind == DgpKind::Ar1Factors ? 1 : beta0.size();
  const double root_nt = std::sqrt(static_cast<double>(config.dgp.n_units) *
                                   static_cast<double>(config.dgp.n_periods));
  for (std::size_t j = 0; j < n_r; ++j) {
    McCell cell;
    cell.r = config.r_list[j];
    std::vector<const RepetitionRecord*> ok;
    for (std::size_t rep = 0; rep < n_rep; ++rep) {
      const RepetitionRecord& rec = result.records[rep][j];
      if (rec.ok) {
        ok.push_back(&rec);
        if (!rec.converged) ++cell.n_nonconverged;
      } else {
        ++cell.n_failed;
      }
    }
    cell.n_ok = static_cast<int>(ok.size());
    const double count = static_cast<double>(ok.size());
    cell.bias = cell.sd = cell.rmse = cell.bias_bc = cell.sd_bc = cell.size = Vector::Zero(k_count);
    cell.quantiles = Matrix::Zero(static_cast<Index>(kQuantileLevels.size()), k_count);
    if (!ok.empty()) {
      for (Index k = 0; k < k_count; ++k) {
        double sum = 0.0, sum_bc = 0.0, sq = 0.0, rejects = 0.0;
        std::vector<double> scaled;
        for (const RepetitionRecord* rec : ok) {
          const double err = rec->beta_hat(k) - beta0(k);
          sum += err;
          sq += err * err;
          sum_bc += rec->beta_bc(k) - beta0(k);
          if (std::abs(rec->t_stat(k)) > kCritical5) rejects += 1.0;
          scaled.push_back(root_nt * err);
        }
        cell.bias(k) = sum / count;
        cell.bias_bc(k) = sum_bc / count;
        cell.rmse(k) = std::sqrt(sq / count);
        cell.size(k) = rejects / count;
        double ss = 0.0, ss_bc = 0.0;
        for (const RepetitionRecord* rec : ok) {
          const double d = rec->beta_hat(k) - beta0(k) - cell.bias(k);
          const double d_bc = rec->beta_bc(k) - beta0(k) - cell.bias_bc(k);
          ss += d * d;
          ss_bc += d_bc * d_bc;
        }
        const double denom = std::max(1.0, count - 1.0);
        cell.sd(k) = std::sqrt(ss / denom);
        cell.sd_bc(k) = std::sqrt(ss_bc / denom);
        for (std::size_t q = 0; q < kQuantileLevels.size(); ++q) {
          cell.quantiles(static_cast<Index>(q), k) = quantile(scaled, kQuantileLevels[q]);
        }
      }
      double s2 = 0.0, it = 0.0;
      for (const RepetitionRecord* rec : ok) {
        s2 += rec->sigma2;
        it += rec->iterations;
      }
      cell.sigma2_mean = s2 / count;
      cell.mean_iterations = it / count;
      double v = 0.0;
      for (const RepetitionRecord* rec : ok) v += (rec->sigma2 - cell.sigma2_mean) * (rec->sigma2 - cell.sigma2_mean);
      cell.sigma2_sd = std::sqrt(v / std::max(1.0, count - 1.0));
    }
    result.cells.push_back(std::move(cell));
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return result;
}

RemainderStudy remainder_scaling_study(const DgpSpec& base, const std::vector<Index>& sizes,
                                       int seeds, int points, double radius, std::uint64_t seed) {
  if (sizes.empty() || seeds < 1 || points < 1 || !(radius > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "remainder study needs sizes, seeds >= 1, points >= 1 and radius > 0");
  }
  RemainderStudy study;
  for (Index size : sizes) {
    DgpSpec spec = base;
    spec.n_units = size;
    spec.n_periods = size;
    RemainderStudyRow row;
    row.size = size;
    const double nt = static_cast<double>(size) * static_cast<double>(size);
    for (int s = 0; s < seeds; ++s) {
      const Draw draw = generate(spec, seed, static_cast<std::uint64_t>(s));
      const ExpansionObjects obj = compute_expansion(draw.truth, draw.data);
      Rng rng = Rng::for_stream(mix_seed(seed, static_cast<std::uint64_t>(size)), static_cast<std::uint64_t>(s));
      const Index k_count = draw.truth.beta0.size();
      double sup = 0.0;
      for (int p = 0; p < points; ++p) {
        Vector dir(k_count);
        for (Index k = 0; k < k_count; ++k) dir(k) = rng.normal();
        const double len = std::pow(rng.uniform(), 1.0 / static_cast<double>(k_count)) * radius /
                           std::sqrt(static_cast<double>(size));
        const Vector delta = dir.normalized() * len;
        const QuadraticApprox q = quadratic_approx(obj, draw.truth, draw.data, draw.truth.beta0 + delta);
        const double denom = 1.0 + std::sqrt(nt) * delta.norm();
        sup = std::max(sup, std::abs(q.remainder) / (denom * denom));
      }
      row.sup_ratio.push_back(sup);
    }
    row.median_sup_ratio = quantile(row.sup_ratio, 0.5);
    row.median_scaled_sup_ratio = row.median_sup_ratio * nt;
    study.rows.push_back(std::move(row));
  }
  for (std::size_t j = 1; j < study.rows.size(); ++j) {
    study.ratios.push_back(study.rows[j].median_sup_ratio / study.rows[j - 1].median_sup_ratio);
  }
  return study;
}

}  // namespace ife
