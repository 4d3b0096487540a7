#include "csflow/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace csflow {

namespace {

// Messages for keys whose absence is a common mistake.
std::string missing_message(const std::string& key) {
  static const std::map<std::string, std::string> named = {
      {"regulator.epsilon", "regulator slope required"},
      {"spacetime.circumference", "spacetime circumference required"},
      {"spacetime.mass", "free mass required"},
      {"spacetime.modes", "mode count required"},
      {"state.amplitude", "state-kernel amplitude required"},
      {"state.decay", "state-kernel decay scale required"},
  };
  auto it = named.find(key);
  if (it != named.end()) return it->second;
  return "missing configuration key '" + key + "'";
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

Config from_ptree(const boost::property_tree::ptree& tree) {
  Config cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      cfg.set(lower(section), body.data());
      continue;
    }
    for (const auto& [key, leaf] : body) {
      cfg.set(lower(section) + "." + lower(key), leaf.data());
    }
  }
  return cfg;
}

std::optional<double> parse_double(const std::string& text) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first != last && std::isspace(static_cast<unsigned char>(*first))) ++first;
  while (last != first && std::isspace(static_cast<unsigned char>(*(last - 1)))) --last;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

}  // namespace

Config Config::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return from_ptree(tree);
}

Config Config::from_string(const std::string& ini_text) {
  std::istringstream in(ini_text);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return from_ptree(tree);
}

std::optional<std::string> Config::find(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

double Config::get_double(const std::string& key) const {
  auto raw = find(key);
  if (!raw) throw ConfigError(missing_message(key));
  auto value = parse_double(*raw);
  if (!value || !std::isfinite(*value)) {
    throw ConfigError("key '" + key + "' is not a finite number: '" + *raw + "'");
  }
  return *value;
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long Config::get_int(const std::string& key) const {
  double v = get_double(key);
  if (v != std::floor(v)) throw ConfigError("key '" + key + "' must be an integer");
  return static_cast<long>(v);
}

long Config::get_int(const std::string& key, long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto raw = find(key);
  return raw ? *raw : fallback;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [key, raw] : values_) {
    out += key;
    out += '=';
    if (auto v = parse_double(raw)) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", *v);
      out += buf;
    } else {
      out += raw;
    }
    out += '\n';
  }
  return out;
}

std::string Config::hash() const { return hex64(fnv1a64(canonical())); }

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace csflow
