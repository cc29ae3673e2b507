#include <algorithm>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ife/error.hpp"
#include "ife/panel.hpp"

namespace ife {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

// Ordering of unit/period labels: numeric when every label is a number,
// lexicographic otherwise.
std::vector<std::string> ordered_labels(const std::vector<std::string>& labels) {
  std::vector<std::string> out = labels;
  const bool numeric = std::all_of(out.begin(), out.end(), [](const std::string& s) {
    return parse_double(s).has_value();
  });
  if (numeric) {
    std::stable_sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
      const double da = *parse_double(a);
      const double db = *parse_double(b);
      if (da != db) return da < db;
      return a < b;
    });
  } else {
    std::sort(out.begin(), out.end());
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

PanelDataset parse_csv(const std::string& text, const CsvSchema& schema,
                       const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    for (std::string_view f : split_fields(line)) header.emplace_back(f);
    break;
  }
  if (header.empty()) throw Error(ErrorCode::Io, source + ": missing header row");

  auto column_of = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw Error(ErrorCode::MissingColumn, source + ": missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t unit_col = column_of(schema.unit_column);
  const std::size_t time_col = column_of(schema.time_column);
  const std::size_t y_col = column_of(schema.outcome_column);

  std::vector<std::string> regressor_names = schema.regressor_columns;
  if (regressor_names.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != unit_col && c != time_col && c != y_col) regressor_names.push_back(header[c]);
    }
  }
  std::vector<std::size_t> x_cols;
  for (const std::string& name : regressor_names) x_cols.push_back(column_of(name));

  struct Cell {
    double y;
    std::vector<double> x;
  };
  std::map<std::pair<std::string, std::string>, Cell> cells;
  std::vector<std::string> units;
  std::vector<std::string> periods;
  std::unordered_map<std::string, bool> seen_unit;
  std::unordered_map<std::string, bool> seen_period;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::NonNumericCell, source + ":" + std::to_string(line_no) + ": expected " +
                                                 std::to_string(header.size()) + " fields, found " +
                                                 std::to_string(fields.size()));
    }
    auto number = [&](std::size_t col) {
      const auto v = parse_double(fields[col]);
      if (!v || !std::isfinite(*v)) {
        throw Error(ErrorCode::NonNumericCell, source + ":" + std::to_string(line_no) +
                                                   ": column '" + header[col] +
                                                   "' holds non-numeric value '" +
                                                   std::string(fields[col]) + "'");
      }
      return *v;
    };
    std::string unit(fields[unit_col]);
    std::string period(fields[time_col]);
    Cell cell{number(y_col), {}};
    for (std::size_t c : x_cols) cell.x.push_back(number(c));
    if (!seen_unit[unit]) {
      seen_unit[unit] = true;
      units.push_back(unit);
    }
    if (!seen_period[period]) {
      seen_period[period] = true;
      periods.push_back(period);
    }
    const auto [it, inserted] = cells.emplace(std::make_pair(unit, period), std::move(cell));
    if (!inserted) {
      throw Error(ErrorCode::DuplicateCell, source + ":" + std::to_string(line_no) +
                                                ": duplicate cell (unit " + unit + ", time " +
                                                period + ")");
    }
  }
  if (cells.empty()) throw Error(ErrorCode::Io, source + ": no data rows");

  units = ordered_labels(units);
  periods = ordered_labels(periods);
  const auto n = static_cast<Index>(units.size());
  const auto t = static_cast<Index>(periods.size());

  PanelDataset data;
  data.outcome.resize(n, t);
  data.regressors.assign(x_cols.size(), Matrix(n, t));
  std::vector<std::string> missing;
  std::size_t missing_count = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index s = 0; s < t; ++s) {
      const auto it = cells.find({units[static_cast<std::size_t>(i)], periods[static_cast<std::size_t>(s)]});
      if (it == cells.end()) {
        ++missing_count;
        if (missing.size() < 20) {
          missing.push_back("(" + units[static_cast<std::size_t>(i)] + "," +
                            periods[static_cast<std::size_t>(s)] + ")");
        }
        continue;
      }
      data.outcome(i, s) = it->second.y;
      for (std::size_t k = 0; k < x_cols.size(); ++k) data.regressors[k](i, s) = it->second.x[k];
    }
  }
  if (missing_count > 0) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : " ") + m;
    if (missing_count > missing.size()) {
      list += " ... (" + std::to_string(missing_count) + " missing in total)";
    }
    throw Error(ErrorCode::UnbalancedPanel, source + ": unbalanced panel, missing cells " + list);
  }
  data.regressor_names = regressor_names;
  data.unit_labels = units;
  data.period_labels = periods;
  data.effective = {n, t};
  validate(data);
  return data;
}

PanelDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema, path.string());
}

std::string to_csv(const PanelDataset& data) {
  std::string out = "unit_id,time_id,y";
  for (const auto& name : data.regressor_names) out += "," + name;
  out += "\n";
  for (Index i = 0; i < data.n_units(); ++i) {
    for (Index t = 0; t < data.n_periods(); ++t) {
      out += data.unit_labels[static_cast<std::size_t>(i)];
      out += ",";
      out += data.period_labels[static_cast<std::size_t>(t)];
      out += ",";
      out += format_double(data.outcome(i, t));
      for (const Matrix& x : data.regressors) {
        out += ",";
        out += format_double(x(i, t));
      }
      out += "\n";
    }
  }
  return out;
}

void write_csv(const PanelDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << to_csv(data);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace ife
