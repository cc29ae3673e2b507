#include "ife/report.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

namespace ife {

namespace {

using json = nlohmann::ordered_json;

json to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json to_json(const Matrix& m) {
  json out = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

json header(const Provenance& prov) {
  json h;
  h["command"] = prov.command;
  h["version"] = std::string(version_string());
  h["seed"] = prov.seed;
  h["config_hash"] = prov.config_hash();
  json settings = json::object();
  for (const auto& [k, v] : prov.settings) settings[k] = v;
  h["settings"] = std::move(settings);
  return h;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json inference_json(const InferenceReport& inf) {
  json j;
  j["sigma2"] = inf.sigma2;
  j["w"] = to_json(inf.w);
  j["w_condition"] = inf.w_condition;
  j["b"] = to_json(inf.b_dynamic);
  j["b_cross_section"] = to_json(inf.b_cross_section);
  j["b_time_serial"] = to_json(inf.b_time_serial);
  j["bias_terms"] = std::string(to_string(inf.bias_terms));
  j["beta_bc"] = to_json(inf.beta_bc);
  j["se"] = to_json(inf.se);
  j["t_stats"] = to_json(inf.t_stats);
  if (inf.se_robust.size() > 0 || inf.omega.size() > 0) {
    j["omega"] = to_json(inf.omega);
    j["se_robust"] = to_json(inf.se_robust);
    j["t_robust"] = to_json(inf.t_robust);
  }
  j["bandwidth"] = inf.bandwidth;
  j["effective"] = {{"n_units", inf.effective.n_units}, {"n_periods", inf.effective.n_periods}};
  return j;
}

}  // namespace

std::string_view version_string() noexcept { return IFEPANEL_VERSION_STRING; }

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string Provenance::config_hash() const {
  std::string canonical = "command=" + command + "\nseed=" + std::to_string(seed) + "\n";
  for (const auto& [k, v] : settings) canonical += k + "=" + v + "\n";
  return fnv1a_hex(canonical);
}

std::string estimate_report_json(const Provenance& prov, const PanelDataset& data,
                                 const std::vector<EstimateEntry>& entries) {
  json root = header(prov);
  root["data"] = {{"n_units", data.n_units()},
                  {"n_periods", data.n_periods()},
                  {"n_regressors", data.n_regressors()},
                  {"regressor_names", data.regressor_names},
                  {"effective",
                   {{"n_units", data.effective.n_units}, {"n_periods", data.effective.n_periods}}}};
  json results = json::array();
  for (const EstimateEntry& e : entries) {
    json r;
    r["r"] = e.r;
    r["beta"] = to_json(e.fit.beta);
    r["objective"] = e.fit.objective;
    r["converged"] = e.fit.converged;
    r["iterations"] = e.fit.iterations;
    r["start_index"] = e.fit.start_index;
    r["singular_design"] = e.fit.singular_design;
    r["start_objectives"] = e.fit.start_objectives;
    if (e.inference) {
      r["inference"] = inference_json(*e.inference);
    } else {
      r["inference"] = nullptr;
      r["inference_error"] = e.inference_error;
    }
    results.push_back(std::move(r));
  }
  root["results"] = std::move(results);
  return root.dump(2) + "\n";
}

std::string selection_report_json(const Provenance& prov, const SelectionReport& report) {
  json root = header(prov);
  root["r_max"] = report.r_max;
  root["effective"] = {{"n_units", report.size.n_units}, {"n_periods", report.size.n_periods}};
  root["eigenvalues"] = to_json(report.eigenvalues);
  root["log_eigenvalues"] = to_json(report.log_eigenvalues);
  root["v"] = report.v;
  root["mock_eigenvalue"] = report.mock_eigenvalue;
  root["ed_threshold"] = report.ed_threshold;
  root["ed_iterations"] = report.ed_iterations;
  json choices = json::object();
  json criteria = json::array();
  for (const CriterionResult& c : report.results) {
    choices[std::string(to_string(c.criterion))] = c.choice;
    criteria.push_back({{"criterion", std::string(to_string(c.criterion))},
                        {"choice", c.choice},
                        {"boundary", c.boundary},
                        {"values", c.values}});
  }
  root["choices"] = std::move(choices);
  root["criteria"] = std::move(criteria);
  return root.dump(2) + "\n";
}

std::string mc_report_json(const Provenance& prov, const McResult& result) {
  json root = header(prov);
  const DgpSpec& d = result.dgp;
  root["design"] = {{"kind", std::string(to_string(d.kind))},
                    {"n_units", d.n_units},
                    {"n_periods", d.n_periods},
                    {"n_factors", d.n_factors},
                    {"beta0", to_json(d.beta0)}};
  if (d.kind == DgpKind::CounterExample) {
    root["design"]["a"] = d.a;
    root["design"]["c"] = counter_example_c(d);
    root["design"]["kappa"] = counter_example_kappa(d);
  }
  root["repetitions"] = result.repetitions;
  json levels = json::array();
  for (double q : kQuantileLevels) levels.push_back(q);
  root["quantile_levels"] = std::move(levels);
  json cells = json::array();
  for (const McCell& c : result.cells) {
    cells.push_back({{"r", c.r},
                     {"n_ok", c.n_ok},
                     {"n_failed", c.n_failed},
                     {"n_nonconverged", c.n_nonconverged},
                     {"bias", to_json(c.bias)},
                     {"sd", to_json(c.sd)},
                     {"rmse", to_json(c.rmse)},
                     {"bias_bc", to_json(c.bias_bc)},
                     {"sd_bc", to_json(c.sd_bc)},
                     {"quantiles", to_json(c.quantiles)},
                     {"size", to_json(c.size)},
                     {"sigma2_mean", c.sigma2_mean},
                     {"sigma2_sd", c.sigma2_sd},
                     {"mean_iterations", c.mean_iterations}});
  }
  root["cells"] = std::move(cells);
  return root.dump(2) + "\n";
}

std::string mc_table_csv(const McResult& result) {
  std::string out = "n_units,n_periods,statistic,coefficient";
  for (const McCell& c : result.cells) out += ",R" + std::to_string(c.r);
  out += "\n";
  if (result.cells.empty()) return out;
  const Index k_count = result.cells.front().bias.size();
  auto row = [&](const std::string& name, auto&& value) {
    for (Index k = 0; k < k_count; ++k) {
      out += std::to_string(result.dgp.n_units) + "," + std::to_string(result.dgp.n_periods) + "," +
             name + "," + std::to_string(k + 1);
      for (const McCell& c : result.cells) out += "," + format_double(value(c, k));
      out += "\n";
    }
  };
  row("bias", [](const McCell& c, Index k) { return c.bias(k); });
  row("sd", [](const McCell& c, Index k) { return c.sd(k); });
  row("rmse", [](const McCell& c, Index k) { return c.rmse(k); });
  row("bias_bc", [](const McCell& c, Index k) { return c.bias_bc(k); });
  row("sd_bc", [](const McCell& c, Index k) { return c.sd_bc(k); });
  row("size", [](const McCell& c, Index k) { return c.size(k); });
  row("sigma2_mean", [](const McCell& c, Index) { return c.sigma2_mean; });
  for (std::size_t q = 0; q < kQuantileLevels.size(); ++q) {
    char name[32];
    std::snprintf(name, sizeof name, "q%02d", static_cast<int>(std::lround(kQuantileLevels[q] * 100)));
    row(name, [q](const McCell& c, Index k) { return c.quantiles(static_cast<Index>(q), k); });
  }
  return out;
}

std::string error_json(ErrorCode code, std::string_view message) {
  json root;
  root["error"] = {{"code", std::string(to_string(code))},
                   {"category", is_validation_error(code) ? "validation" : "numerical"},
                   {"message", std::string(message)}};
  return root.dump(2) + "\n";
}

}  // namespace ife
