#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace csflow {

/// Raised for malformed, missing or out-of-range configuration values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical routine cannot produce a finite or converged result.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a query leaves a tabulated or admissible range (for example
/// an m2 value outside the flow table).
class RangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an iterate leaves the admissible conductivity window
/// (sigma below its floor or the seminorm bound exceeded).
class WindowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key-value view of an INI file. Keys are "section.key", all lowercase.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::filesystem::path& path);
  static Config from_string(const std::string& ini_text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void erase(const std::string& key) { values_.erase(key); }

  std::optional<std::string> find(const std::string& key) const;

  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  /// Canonical "key=value\n" listing sorted by key. Numeric values are
  /// re-printed with 17 significant digits so formatting differences in the
  /// file do not change the hash.
  std::string canonical() const;

  /// 64-bit FNV-1a of canonical(), printed as 16 hex digits.
  std::string hash() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t value);

}  // namespace csflow
