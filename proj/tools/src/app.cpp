#include "ife/cli/app.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ife/cli/settings.hpp"
#include "ife/error.hpp"
#include "ife/estimator.hpp"
#include "ife/expansion.hpp"
#include "ife/inference.hpp"
#include "ife/panel.hpp"
#include "ife/report.hpp"
#include "ife/selection.hpp"
#include "ife/simulation.hpp"

namespace ife::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Key {
  const char* name;
  const char* help;
  const char* fallback;  // nullptr: no default
  bool boolean = false;
};

const std::vector<Key> kCommonKeys = {
    {"config", "flat key = value settings file; flags override it", nullptr},
    {"output", "report path (default: standard output)", nullptr},
    {"format", "report format: json or csv", "json"},
    {"seed", "master seed for every random draw", "0"},
    {"parallelism", "worker threads (simulate only)", "1"},
};

const std::vector<Key> kDataKeys = {
    {"input", "long-format CSV panel", nullptr},
    {"unit-column", "unit identifier column", "unit_id"},
    {"time-column", "period identifier column", "time_id"},
    {"outcome-column", "outcome column", "y"},
    {"regressors", "regressor columns, comma separated (default: all remaining)", nullptr},
    {"project", "additive effects to sweep: any of unit,trend,trend2,time", "none"},
    {"lag-outcome", "prepend the lagged outcome as the first regressor", "false", true},
};

const std::vector<Key> kEstimatorKeys = {
    {"scheme", "beta step: 1, 2, 3 or hybrid", "hybrid"},
    {"starts", "number of random starts", "10"},
    {"start-radius", "random start half-width, in pooled-OLS standard errors", "1"},
    {"tol", "relative objective tolerance", "1e-10"},
    {"max-iter", "iteration cap per start", "1000"},
    {"warmup", "hybrid warm-up iterations", "20"},
};

const std::vector<Key> kInferenceKeys = {
    {"bandwidth", "truncation bandwidth M", "2"},
    {"bias-terms", "dynamic or full", "dynamic"},
};

const std::vector<Key> kDgpKeys = {
    {"dgp", "static, ar1, counter_example, noiseless or custom", "static"},
    {"n", "number of units", "100"},
    {"t", "number of periods", "100"},
    {"factors", "true number of factors", "2"},
    {"beta0", "true coefficients, comma separated", "1"},
    {"factor-ar", "factor autoregressive coefficient (ar1)", "0.5"},
    {"burn-in", "pre-sample periods (ar1)", "100"},
    {"a", "regressor scale (counter_example)", "0.25"},
    {"c", "error loading (counter_example); <= 0 uses the smallest admissible value", "0"},
    {"kappa", "sqrt(N/T) override (counter_example); <= 0 derives it", "0"},
};

std::vector<Key> join(std::initializer_list<std::vector<Key>> parts) {
  std::vector<Key> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

struct Command {
  std::string name;
  std::string help;
  std::vector<Key> keys;
  CLI::App* app = nullptr;
  std::map<std::string, std::string> given = {};
};

std::vector<Command> make_commands() {
  std::vector<Command> cmds;
  cmds.push_back({"estimate", "Estimate the model for one or more numbers of factors",
                  join({kCommonKeys, kDataKeys, kEstimatorKeys, kInferenceKeys,
                        {{"r", "number of factors", nullptr},
                         {"r-list", "numbers of factors, e.g. 0..5", nullptr},
                         {"robust", "also report robust standard errors", "false", true},
                         {"null", "hypothesised coefficients for the t statistics", nullptr}}})});
  cmds.push_back({"select", "Choose the number of factors from first-stage residuals",
                  join({kCommonKeys, kDataKeys, kEstimatorKeys,
                        {{"r-max", "largest number of factors considered", nullptr},
                         {"criteria", "comma list of criteria, or all", "all"},
                         {"scree", "scree CSV path (default: next to the report)", nullptr}}})});
  cmds.push_back({"simulate", "Run a Monte Carlo experiment",
                  join({kCommonKeys, kDgpKeys, kEstimatorKeys, kInferenceKeys, kDataKeys,
                        {{"r", "factors fitted to --input for the custom design", nullptr},
                         {"r-list", "numbers of factors to estimate", "0..5"},
                         {"reps", "repetitions", "500"},
                         {"robust", "size test uses robust standard errors", "true", true},
                         {"chain-starts", "reuse estimates at other R as starts", "true", true},
                         {"table", "also write the CSV table to this path", nullptr}}})});
  // Random starts are costly inside a Monte Carlo; chained starts cover most of their benefit.
  for (Key& k : cmds.back().keys) {
    if (std::string(k.name) == "starts") k.fallback = "0";
  }
  cmds.push_back({"verify-expansion", "Check the quadratic expansion numerically",
                  join({kCommonKeys, kDgpKeys,
                        {{"instances", "instances for the centre and derivative checks", "5"},
                         {"step-fraction", "finite-difference step as a fraction of r0", "1e-4"},
                         {"error-scale", "error size for the derivative check, as a fraction of r0", "1e-9"},
                         {"fd-tol", "relative tolerance of the derivative check", "1e-4"},
                         {"sizes", "N = T values of the doubling study", "25,50,100,200"},
                         {"study-seeds", "draws per size in the doubling study", "5"},
                         {"points", "sampled coefficients per draw", "10"},
                         {"radius", "sampling radius times 1/sqrt(N)", "1"},
                         {"ratio-max", "largest acceptable ratio of successive medians", "0.7"}}})});
  for (Key& k : cmds.back().keys) {
    const std::string name = k.name;
    if (name == "n" || name == "t") k.fallback = "20";
  }
  return cmds;
}

// Settings: config file first, then flags, then defaults.
Settings resolve(const Command& cmd) {
  std::set<std::string> known;
  for (const Key& k : cmd.keys) known.insert(k.name);

  Settings s;
  if (auto it = cmd.given.find("config"); it != cmd.given.end()) {
    s = load_config(it->second);
    for (const auto& [k, v] : s.values()) {
      if (!known.count(k) || k == "config") {
        throw Error(ErrorCode::InvalidConfig, "unknown setting '" + k + "' for " + cmd.name);
      }
    }
  }
  for (const auto& [k, v] : cmd.given) s.set(k, v);
  for (const Key& k : cmd.keys) {
    if (k.fallback) s.set_default(k.name, k.fallback);
  }
  return s;
}

std::uint64_t seed_value(const Settings& s) {
  const long v = s.integer("seed");
  if (v < 0) throw Error(ErrorCode::InvalidConfig, "seed must be non-negative");
  return static_cast<std::uint64_t>(v);
}

Provenance provenance(const std::string& command, const Settings& s) {
  Provenance p;
  p.command = command;
  p.seed = seed_value(s);
  for (const auto& [k, v] : s.values()) {
    // Output locations do not change results.
    if (k == "config" || k == "output" || k == "scree" || k == "table") continue;
    p.settings[k] = v;
  }
  return p;
}

void require_format(const Settings& s, bool csv_allowed) {
  const std::string f = s.text("format");
  if (f == "json" || (csv_allowed && f == "csv")) return;
  throw Error(ErrorCode::InvalidConfig, std::string("unsupported format '") + f + "'" +
                                            (csv_allowed ? " (json or csv)" : " (json only)"));
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

void emit(const Settings& s, const std::string& content, std::ostream& out) {
  if (s.has("output")) {
    write_file(s.text("output"), content);
  } else {
    out << content;
  }
}

// Refuse to overwrite the input panel.
void guard_input(const Settings& s, const std::vector<std::string>& output_keys) {
  if (!s.has("input")) return;
  std::error_code ec;
  for (const std::string& key : output_keys) {
    if (!s.has(key)) continue;
    if (fs::exists(s.text(key), ec) && fs::equivalent(s.text("input"), s.text(key), ec)) {
      throw Error(ErrorCode::InvalidConfig, "--" + key + " would overwrite the input file");
    }
  }
}

ProjectionSpec projection(const Settings& s) {
  ProjectionSpec p;
  for (const std::string& w : s.words("project")) {
    if (w == "none") continue;
    if (w == "unit") {
      p.unit_intercepts = true;
    } else if (w == "trend") {
      p.unit_linear_trends = true;
    } else if (w == "trend2") {
      p.unit_quadratic_trends = true;
    } else if (w == "time") {
      p.time_effects = true;
    } else {
      throw Error(ErrorCode::InvalidConfig,
                  "unknown projection '" + w + "' (expected unit, trend, trend2 or time)");
    }
  }
  p.lag_outcome_first = s.flag("lag-outcome");
  validate(p);
  return p;
}

PanelDataset load_data(const Settings& s) {
  CsvSchema schema;
  schema.unit_column = s.text("unit-column");
  schema.time_column = s.text("time-column");
  schema.outcome_column = s.text("outcome-column");
  if (s.has("regressors")) schema.regressor_columns = s.words("regressors");
  const ProjectionSpec p = projection(s);
  PanelDataset raw = load_csv(s.text("input"), schema);
  return p.any() ? project_additive_effects(raw, p) : raw;
}

int non_negative(const Settings& s, const std::string& key) {
  const long v = s.integer(key);
  if (v < 0 || v > 1'000'000'000) {
    throw Error(ErrorCode::InvalidConfig, "setting '" + key + "' must be a non-negative integer");
  }
  return static_cast<int>(v);
}

EstimatorConfig estimator_config(const Settings& s) {
  EstimatorConfig c;
  c.scheme = parse_scheme(s.text("scheme"));
  c.n_random_starts = non_negative(s, "starts");
  c.random_start_radius = s.real("start-radius");
  c.tol_objective = s.real("tol");
  c.max_iterations = non_negative(s, "max-iter");
  c.hybrid_warmup = non_negative(s, "warmup");
  c.seed = seed_value(s);
  return c;
}

InferenceOptions inference_options(const Settings& s) {
  InferenceOptions o;
  o.kernel.bandwidth = s.integer("bandwidth");
  o.bias_terms = parse_bias_terms(s.text("bias-terms"));
  o.robust = s.flag("robust");
  if (s.has("null")) o.null_value = s.vector("null");
  return o;
}

std::vector<Index> r_values(const Settings& s) {
  if (s.has("r") && s.has("r-list")) {
    throw Error(ErrorCode::InvalidConfig, "give either --r or --r-list, not both");
  }
  std::vector<Index> out;
  if (s.has("r")) {
    out.push_back(s.integer("r"));
  } else if (s.has("r-list")) {
    for (long r : s.integers("r-list")) out.push_back(r);
  } else {
    throw Error(ErrorCode::InvalidConfig, "estimate needs --r or --r-list");
  }
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "empty list of factor numbers");
  return out;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string estimate_csv(const PanelDataset& data, const std::vector<EstimateEntry>& entries) {
  std::string out =
      "r,coefficient,name,beta,beta_bc,se,t_stat,se_robust,t_robust,sigma2,objective,converged,iterations\n";
  const double nan = std::nan("");
  for (const EstimateEntry& e : entries) {
    for (Index k = 0; k < data.n_regressors(); ++k) {
      const bool inf = e.inference.has_value();
      const bool rob = inf && e.inference->se_robust.size() > 0;
      out += std::to_string(e.r) + "," + std::to_string(k + 1) + "," +
             data.regressor_names[static_cast<std::size_t>(k)] + "," + fmt(e.fit.beta(k)) + "," +
             fmt(inf ? e.inference->beta_bc(k) : nan) + "," + fmt(inf ? e.inference->se(k) : nan) + "," +
             fmt(inf ? e.inference->t_stats(k) : nan) + "," +
             fmt(rob ? e.inference->se_robust(k) : nan) + "," +
             fmt(rob ? e.inference->t_robust(k) : nan) + "," + fmt(inf ? e.inference->sigma2 : nan) +
             "," + fmt(e.fit.objective) + "," + (e.fit.converged ? "true" : "false") + "," +
             std::to_string(e.fit.iterations) + "\n";
    }
  }
  return out;
}

int cmd_estimate(const Settings& s, std::ostream& out, std::ostream&) {
  require_format(s, true);
  s.text("input");
  guard_input(s, {"output"});
  const std::vector<Index> rs = r_values(s);
  const EstimatorConfig base = estimator_config(s);
  const InferenceOptions options = inference_options(s);
  const PanelDataset data = load_data(s);
  if (options.null_value.size() > 0 && options.null_value.size() != data.n_regressors()) {
    throw Error(ErrorCode::InvalidConfig, "--null needs one value per regressor");
  }
  validate(options.kernel, data.effective.n_periods);

  std::vector<EstimateEntry> entries;
  std::vector<Vector> found;
  for (Index r : rs) {
    EstimatorConfig config = base;
    config.n_factors = r;
    // Estimates at the other R are cheap, deterministic extra starts.
    config.extra_starts = found;
    EstimateEntry entry;
    entry.r = r;
    entry.fit = estimate(data, config);
    found.push_back(entry.fit.beta);
    try {
      entry.inference = infer(data, entry.fit, options);
    } catch (const Error& e) {
      entry.inference_error = std::string(to_string(e.code())) + ": " + e.what();
    }
    entries.push_back(std::move(entry));
  }
  const Provenance prov = provenance("estimate", s);
  emit(s, s.text("format") == "csv" ? estimate_csv(data, entries) : estimate_report_json(prov, data, entries),
       out);
  return kExitOk;
}

std::vector<Criterion> criteria(const Settings& s) {
  std::vector<Criterion> out;
  for (const std::string& w : s.words("criteria")) {
    if (w == "all") return all_criteria();
    const auto c = parse_criterion(w);
    if (!c) throw Error(ErrorCode::InvalidConfig, "unknown criterion '" + w + "'");
    out.push_back(*c);
  }
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "no criteria requested");
  return out;
}

fs::path scree_path(const Settings& s) {
  if (s.has("scree")) return s.text("scree");
  if (!s.has("output")) {
    throw Error(ErrorCode::InvalidConfig, "select needs --output or --scree for the scree table");
  }
  fs::path p = s.text("output");
  p.replace_extension();
  p += ".scree.csv";
  return p;
}

int cmd_select(const Settings& s, std::ostream& out, std::ostream&) {
  require_format(s, true);
  s.text("input");
  guard_input(s, {"output", "scree"});
  const long r_max = s.integer("r-max");
  const std::vector<Criterion> wanted = criteria(s);
  const fs::path scree = scree_path(s);
  const EstimatorConfig config = estimator_config(s);
  const PanelDataset data = load_data(s);

  const Matrix u = first_stage_residuals(data, r_max, config);
  const SelectionReport report = select_factors(u, r_max, wanted, data.effective);
  write_file(scree, scree_csv(report.eigenvalues));

  std::string content;
  if (s.text("format") == "csv") {
    content = "criterion,choice,boundary\n";
    for (const CriterionResult& c : report.results) {
      content += std::string(to_string(c.criterion)) + "," + std::to_string(c.choice) + "," +
                 (c.boundary ? "true" : "false") + "\n";
    }
  } else {
    content = selection_report_json(provenance("select", s), report);
  }
  emit(s, content, out);
  return kExitOk;
}

DgpSpec dgp_spec(const Settings& s) {
  DgpSpec d;
  d.kind = parse_dgp_kind(s.text("dgp"));
  d.n_units = s.integer("n");
  d.n_periods = s.integer("t");
  d.n_factors = s.integer("factors");
  d.beta0 = s.vector("beta0");
  d.factor_ar = s.real("factor-ar");
  d.burn_in = non_negative(s, "burn-in");
  d.a = s.real("a");
  d.c = s.real("c");
  d.kappa = s.real("kappa");
  return d;
}

// The custom design is fitted to a user panel: its loadings, factors and
// regressors are held fixed and new MA(1) t(5) errors are drawn at the
// fitted error variance.
void fit_custom(const Settings& s, DgpSpec& d) {
  if (!s.has("input") || !s.has("r")) {
    throw Error(ErrorCode::InvalidConfig, "the custom design needs --input and --r");
  }
  const PanelDataset data = load_data(s);
  EstimatorConfig config = estimator_config(s);
  config.n_factors = s.integer("r");
  const FactorFit fit = estimate(data, config);
  const double sigma2 = sigma2_hat(fit, data.n_regressors(), data.effective);
  d.n_units = data.n_units();
  d.n_periods = data.n_periods();
  d.n_factors = config.n_factors;
  d.beta0 = fit.beta;
  d.custom_loadings = fit.loadings;
  d.custom_factors = fit.factors;
  d.custom_regressors = data.regressors;
  // Var of (v_t + v_t-1)/sqrt(2) with v ~ t(5) is 5/3.
  d.custom_error_scale = std::sqrt(sigma2 * 3.0 / 5.0);
}

int cmd_simulate(const Settings& s, std::ostream& out, std::ostream& err) {
  require_format(s, true);
  guard_input(s, {"output", "table"});
  McConfig mc;
  mc.dgp = dgp_spec(s);
  if (mc.dgp.kind == DgpKind::Custom) fit_custom(s, mc.dgp);
  validate(mc.dgp);
  mc.r_list.clear();
  for (long r : s.integers("r-list")) mc.r_list.push_back(r);
  mc.repetitions = non_negative(s, "reps");
  if (mc.repetitions < 1) throw Error(ErrorCode::InvalidConfig, "reps must be at least 1");
  mc.seed = seed_value(s);
  mc.estimator = estimator_config(s);
  mc.inference.kernel.bandwidth = s.integer("bandwidth");
  mc.inference.bias_terms = parse_bias_terms(s.text("bias-terms"));
  mc.robust_test = s.flag("robust");
  mc.chain_starts = s.flag("chain-starts");
  mc.parallelism = non_negative(s, "parallelism");
  if (mc.parallelism < 1) throw Error(ErrorCode::InvalidConfig, "parallelism must be at least 1");

  const auto t0 = std::chrono::steady_clock::now();
  const McResult result = run_experiment(mc);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  // Timing goes to the log only so reports stay byte-identical across runs.
  char line[128];
  std::snprintf(line, sizeof line, "simulate: %d repetitions x %zu R values in %.2f s\n",
                result.repetitions, result.r_list.size(), seconds);
  err << line;

  const std::string table = mc_table_csv(result);
  if (s.has("table")) write_file(s.text("table"), table);
  emit(s, s.text("format") == "csv" ? table : mc_report_json(provenance("simulate", s), result), out);
  return kExitOk;
}

// Y rebuilt from the structure after its error has been replaced.
PanelDataset with_error(const Draw& draw, const Matrix& error) {
  PanelDataset data = draw.data;
  data.outcome = combine_regressors(data, draw.truth.beta0) +
                 draw.truth.lambda0 * draw.truth.f0.transpose() + error;
  return data;
}

int cmd_verify_expansion(const Settings& s, std::ostream& out, std::ostream&) {
  require_format(s, false);
  DgpSpec spec = dgp_spec(s);
  if (spec.kind == DgpKind::Custom || spec.kind == DgpKind::CounterExample) {
    throw Error(ErrorCode::InvalidConfig, "verify-expansion needs a design with true factors");
  }
  validate(spec);
  const std::uint64_t seed = seed_value(s);
  const int instances = non_negative(s, "instances");
  const double step_fraction = s.real("step-fraction");
  const double error_scale = s.real("error-scale");
  const double fd_tol = s.real("fd-tol");
  const double ratio_max = s.real("ratio-max");
  std::vector<Index> sizes;
  for (long v : s.integers("sizes")) sizes.push_back(v);
  const int study_seeds = non_negative(s, "study-seeds");
  const int points = non_negative(s, "points");
  const double radius = s.real("radius");
  if (instances < 1 || !(step_fraction > 0.0) || !(error_scale >= 0.0) || !(fd_tol > 0.0)) {
    throw Error(ErrorCode::InvalidConfig,
                "instances must be >= 1, step-fraction and fd-tol positive, error-scale non-negative");
  }

  const Provenance prov = provenance("verify-expansion", s);
  json root;
  root["command"] = prov.command;
  root["version"] = std::string(version_string());
  root["seed"] = prov.seed;
  root["config_hash"] = prov.config_hash();
  json settings = json::object();
  for (const auto& [k, v] : prov.settings) settings[k] = v;
  root["settings"] = std::move(settings);

  // Noiseless centre: the expansion is exact at beta0.
  bool centre_pass = true;
  json centre = json::array();
  json fd_rows = json::array();
  bool fd_pass = true;
  for (int i = 0; i < instances; ++i) {
    const Draw draw = generate(spec, seed, static_cast<std::uint64_t>(i));
    TrueStructure clean = draw.truth;
    clean.error.setZero();
    const PanelDataset clean_data = with_error(draw, clean.error);
    const ExpansionObjects obj = compute_expansion(clean, clean_data);
    const QuadraticApprox q = quadratic_approx(obj, clean, clean_data, clean.beta0);
    const bool ok = std::abs(q.remainder) <= 1e-10;
    centre_pass = centre_pass && ok;
    centre.push_back({{"instance", i},
                      {"objective_at_truth", q.exact},
                      {"approx", q.approx},
                      {"remainder", q.remainder},
                      {"pass", ok}});

    // Derivatives along each coordinate with the error shrunk inside r0.
    TrueStructure small = draw.truth;
    const double r0 = convergence_radius(small).r0;
    const double nt = static_cast<double>(small.error.rows()) * static_cast<double>(small.error.cols());
    const double e_norm = spectral_norm(small.error) / std::sqrt(nt);
    small.error = e_norm > 0.0 ? Matrix(small.error * (error_scale * r0 / e_norm))
                               : Matrix(small.error);
    const PanelDataset small_data = with_error(draw, small.error);
    for (Index k = 0; k < small.beta0.size(); ++k) {
      const Vector dir = Vector::Unit(small.beta0.size(), k);
      const DerivativeCheck c = directional_derivatives(small, small_data, dir, step_fraction);
      const bool pass = c.rel_error_second <= fd_tol && c.rel_error_third <= fd_tol;
      fd_pass = fd_pass && pass;
      fd_rows.push_back({{"instance", i},
                         {"coefficient", k + 1},
                         {"r0", r0},
                         {"step", c.step},
                         {"fd_second", c.fd_second},
                         {"expected_second", c.expected_second},
                         {"rel_error_second", c.rel_error_second},
                         {"fd_third", c.fd_third},
                         {"expected_third", c.expected_third},
                         {"rel_error_third", c.rel_error_third},
                         {"pass", pass}});
    }
  }
  root["centre"] = {{"error", "zero"}, {"tolerance", 1e-10}, {"rows", centre}, {"pass", centre_pass}};
  root["finite_difference"] = {{"step_fraction", step_fraction},
                               {"error_scale", error_scale},
                               {"tolerance", fd_tol},
                               {"rows", fd_rows},
                               {"pass", fd_pass}};

  bool study_pass = true;
  json study_json;
  if (!sizes.empty()) {
    const RemainderStudy study = remainder_scaling_study(spec, sizes, study_seeds, points, radius, seed);
    json rows = json::array();
    for (const RemainderStudyRow& r : study.rows) {
      json sup = json::array();
      for (double v : r.sup_ratio) sup.push_back(v);
      rows.push_back({{"size", r.size},
                      {"median_sup_ratio", r.median_sup_ratio},
                      {"median_scaled_sup_ratio", r.median_scaled_sup_ratio},
                      {"sup_ratio", sup}});
    }
    json ratios = json::array();
    for (double v : study.ratios) {
      ratios.push_back(v);
      study_pass = study_pass && v <= ratio_max;
    }
    study_json = {{"radius", radius},
                  {"points", points},
                  {"seeds", study_seeds},
                  {"ratio_max", ratio_max},
                  {"rows", rows},
                  {"ratios", ratios},
                  {"pass", study_pass}};
  }
  root["remainder_scaling"] = study_json;
  root["all_pass"] = centre_pass && fd_pass && study_pass;
  emit(s, root.dump(2) + "\n", out);
  return kExitOk;
}

void report_error(std::ostream& err, const std::string& code, const std::string& category,
                  const std::string& message) {
  json root;
  root["error"] = {{"code", code}, {"category", category}, {"message", message}};
  err << root.dump(2) << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Panel regressions with interactive fixed effects"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version_string()));

  std::vector<Command> cmds = make_commands();
  for (Command& cmd : cmds) {
    cmd.app = app.add_subcommand(cmd.name, cmd.help);
    for (const Key& k : cmd.keys) {
      std::string desc = k.help;
      if (k.fallback) desc += std::string(" [") + k.fallback + "]";
      // Booleans accept a bare flag or an explicit value (--robust=false).
      auto* opt = cmd.app->add_option("--" + std::string(k.name), cmd.given[k.name], desc);
      if (k.boolean) opt->expected(0, 1);
    }
  }

  // CLI11 expects the arguments in reverse order.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << version_string() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, std::string(to_string(ErrorCode::InvalidConfig)), "validation", e.what());
    return kExitValidation;
  }

  try {
    for (Command& cmd : cmds) {
      if (!cmd.app->parsed()) continue;
      // Keep only what was actually given; empty booleans mean "true".
      std::map<std::string, std::string> given;
      for (const Key& k : cmd.keys) {
        if (cmd.app->count("--" + std::string(k.name)) == 0) continue;
        std::string v = cmd.given[k.name];
        if (k.boolean && v.empty()) v = "true";
        given[k.name] = v;
      }
      cmd.given = std::move(given);
      const Settings s = resolve(cmd);
      if (cmd.name == "estimate") return cmd_estimate(s, out, err);
      if (cmd.name == "select") return cmd_select(s, out, err);
      if (cmd.name == "simulate") return cmd_simulate(s, out, err);
      return cmd_verify_expansion(s, out, err);
    }
  } catch (const Error& e) {
    const bool validation = is_validation_error(e.code());
    report_error(err, std::string(to_string(e.code())), validation ? "validation" : "numerical", e.what());
    return validation ? kExitValidation : kExitNumerical;
  } catch (const std::exception& e) {
    report_error(err, "Internal", "numerical", e.what());
    return kExitNumerical;
  }
  return kExitValidation;
}

}  // namespace ife::cli
