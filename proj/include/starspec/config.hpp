#pragma once

// Run configuration shared by the command-line front end: "key = value" files with optional
// [section] headers, merged with command-line flags (flags win).

#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "starspec/error.hpp"

namespace starspec {

enum class KeyKind { text, real, positive, integer, real_list };

/// Every key a configuration may carry, with its value type. '_' and '-' are interchangeable.
inline const std::map<std::string, KeyKind>& config_keys() {
  static const std::map<std::string, KeyKind> keys{
      {"eos", KeyKind::text},          {"gamma", KeyKind::positive},     {"K", KeyKind::positive},
      {"A", KeyKind::positive},        {"B", KeyKind::positive},         {"mu", KeyKind::real_list},
      {"mu-min", KeyKind::positive},   {"mu-max", KeyKind::positive},    {"points", KeyKind::integer},
      {"tol", KeyKind::positive},      {"nodes", KeyKind::integer},      {"cells", KeyKind::integer},
      {"N", KeyKind::integer},         {"nu1", KeyKind::positive},       {"nu2", KeyKind::positive},
      {"coordinate", KeyKind::text},   {"tau-grid", KeyKind::real_list}, {"perturb", KeyKind::text},
      {"tmax", KeyKind::positive},     {"dt", KeyKind::positive},        {"output-dt", KeyKind::positive},
      {"stop-amplitude", KeyKind::positive}, {"fit-decay", KeyKind::real_list},
      {"fit-growth", KeyKind::real_list},    {"rho", KeyKind::real_list}, {"out", KeyKind::text},
      {"format", KeyKind::text},       {"svg", KeyKind::text},
  };
  return keys;
}

inline std::string normalize_key(std::string k) {
  for (char& c : k) {
    if (c == '_') c = '-';
  }
  return k;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::optional<double> parse_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::vector<double> parse_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto v = parse_real(trim(item));
    if (!v) throw DomainError("--" + key + ": '" + item + "' is not a number");
    out.push_back(*v);
  }
  if (out.empty()) throw DomainError("--" + key + ": empty list");
  return out;
}

// Empty string when valid, else the reason.
inline std::string check_value(const std::string& key, const std::string& value) {
  const auto it = config_keys().find(key);
  if (it == config_keys().end()) return {};
  switch (it->second) {
    case KeyKind::text: return value.empty() ? "empty value" : "";
    case KeyKind::real:
      return parse_real(value) ? "" : "'" + value + "' is not a number";
    case KeyKind::positive: {
      const auto v = parse_real(value);
      if (!v) return "'" + value + "' is not a number";
      return *v > 0.0 ? "" : "must be positive";
    }
    case KeyKind::integer: {
      char* end = nullptr;
      const long v = std::strtol(value.c_str(), &end, 10);
      if (value.empty() || end != value.c_str() + value.size()) return "'" + value + "' is not an integer";
      return v > 0 ? "" : "must be positive";
    }
    case KeyKind::real_list:
      try {
        parse_list(value, key);
      } catch (const DomainError& e) {
        return e.what();
      }
      return {};
  }
  return {};
}

}  // namespace detail

/// Raw key/value settings plus non-fatal warnings. Typed access validates on the way out.
struct RunConfig {
  std::map<std::string, std::string> values;
  std::vector<std::string> warnings;

  bool has(const std::string& key) const { return values.count(key) != 0; }

  void set(const std::string& key, const std::string& value) {
    const std::string k = normalize_key(key);
    if (const auto why = detail::check_value(k, value); !why.empty()) throw DomainError("--" + k + ": " + why);
    values[k] = value;
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) const {
    if (const auto it = values.find(key); it != values.end()) return it->second;
    if (fallback) return *fallback;
    throw DomainError("missing required --" + key);
  }

  double real(const std::string& key, std::optional<double> fallback = std::nullopt) const {
    if (const auto it = values.find(key); it != values.end()) {
      if (const auto v = detail::parse_real(it->second)) return *v;
      throw DomainError("--" + key + ": '" + it->second + "' is not a number");
    }
    if (fallback) return *fallback;
    throw DomainError("missing required --" + key);
  }

  int integer(const std::string& key, std::optional<int> fallback = std::nullopt) const {
    if (const auto it = values.find(key); it != values.end()) return std::stoi(it->second);
    if (fallback) return *fallback;
    throw DomainError("missing required --" + key);
  }

  std::vector<double> list(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) const {
    if (const auto it = values.find(key); it != values.end()) return detail::parse_list(it->second, key);
    if (fallback) return *fallback;
    throw DomainError("missing required --" + key);
  }

  /// this, overridden by every key set in `flags`.
  RunConfig merged(const RunConfig& flags) const {
    RunConfig r = *this;
    for (const auto& [k, v] : flags.values) r.values[k] = v;
    r.warnings.insert(r.warnings.end(), flags.warnings.begin(), flags.warnings.end());
    return r;
  }
};

/// Parses "key = value" text. Blank lines and lines starting with '#' or ';' are skipped;
/// "[name]" starts a section, which only groups keys. Unknown keys are kept as warnings.
inline RunConfig parse_config(std::istream& in, const std::string& name = "config") {
  RunConfig cfg;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const std::string s = detail::trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    auto fail = [&](const std::string& why) {
      throw DomainError(name + ":" + std::to_string(lineno) + ": " + why + ": '" + s + "'");
    };
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) fail("malformed section header");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = normalize_key(detail::trim(s.substr(0, eq)));
    const std::string value = detail::trim(s.substr(eq + 1));
    if (key.empty()) fail("empty key");
    if (!config_keys().count(key)) {
      cfg.warnings.push_back(name + ":" + std::to_string(lineno) + ": unknown key '" + key + "' ignored");
      continue;
    }
    if (const auto why = detail::check_value(key, value); !why.empty()) fail(why);
    cfg.values[key] = value;
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot read config file '" + path + "'");
  return parse_config(in, path);
}

}  // namespace starspec
