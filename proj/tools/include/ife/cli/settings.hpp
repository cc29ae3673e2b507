#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ife/linalg.hpp"

namespace ife::cli {

/// Flat key/value settings. Values stay as text until a command reads them
/// with the typed getters, which throw InvalidConfig naming the key.
class Settings {
 public:
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void set_default(const std::string& key, std::string value) { values_.emplace(key, std::move(value)); }
  void erase(const std::string& key) { values_.erase(key); }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string text(const std::string& key) const;
  long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<long> integers(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  std::vector<std::string> words(const std::string& key) const;
  Vector vector(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// "key = value" lines; '#' starts a comment; blank lines are ignored.
/// Keys are the long flag names without the leading dashes.
Settings parse_config(const std::string& text, const std::string& source);
Settings load_config(const std::filesystem::path& path);

/// Splits on commas and trims; "a..b" expands to the integers a..b.
std::vector<std::string> split_list(const std::string& text);

}  // namespace ife::cli
