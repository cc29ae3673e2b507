#include "ife/cli/settings.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ife/error.hpp"

namespace ife::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw Error(ErrorCode::InvalidConfig, "setting '" + key + "': '" + value + "' is not " + what);
}

long parse_integer(const std::string& key, const std::string& text) {
  long v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) bad_value(key, text, "an integer");
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || text.empty()) bad_value(key, text, "a number");
  return v;
}

}  // namespace

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto dots = item.find("..");
    if (dots != std::string::npos) {
      const long lo = parse_integer("range", trim(item.substr(0, dots)));
      const long hi = parse_integer("range", trim(item.substr(dots + 2)));
      if (hi < lo) throw Error(ErrorCode::InvalidConfig, "empty range '" + item + "'");
      for (long v = lo; v <= hi; ++v) out.push_back(std::to_string(v));
    } else {
      out.push_back(item);
    }
  }
  return out;
}

std::string Settings::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::InvalidConfig, "missing required setting '" + key + "'");
  return it->second;
}

long Settings::integer(const std::string& key) const { return parse_integer(key, text(key)); }

double Settings::real(const std::string& key) const { return parse_real(key, text(key)); }

bool Settings::flag(const std::string& key) const {
  const std::string v = text(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::vector<long> Settings::integers(const std::string& key) const {
  std::vector<long> out;
  for (const std::string& w : split_list(text(key))) out.push_back(parse_integer(key, w));
  return out;
}

std::vector<double> Settings::reals(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& w : split_list(text(key))) out.push_back(parse_real(key, w));
  return out;
}

std::vector<std::string> Settings::words(const std::string& key) const { return split_list(text(key)); }

Vector Settings::vector(const std::string& key) const {
  const std::vector<double> v = reals(key);
  Vector out(static_cast<Index>(v.size()));
  for (std::size_t j = 0; j < v.size(); ++j) out(static_cast<Index>(j)) = v[j];
  return out;
}

Settings parse_config(const std::string& text, const std::string& source) {
  Settings out;
  std::stringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig,
                  source + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (key.empty()) {
      throw Error(ErrorCode::InvalidConfig, source + ":" + std::to_string(number) + ": empty key");
    }
    out.set(key, trim(line.substr(eq + 1)));
  }
  return out;
}

Settings load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

}  // namespace ife::cli
