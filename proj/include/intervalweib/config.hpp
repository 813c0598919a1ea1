#pragma once

// Experiment configuration: INI-style `[section]` / `key = value` files,
// addressed as "section.key". Command-line flags override file values.

#include <charconv>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "intervalweib/dataset.hpp"

namespace intervalweib {

/// Raised for unreadable or invalid configuration (usage errors).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Config {
 public:
  Config() = default;

  static Config load(const std::string& path) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    Config c;
    for (const auto& [section, body] : tree) {
      if (body.empty()) {
        c.values_[section] = body.data();
        continue;
      }
      for (const auto& [key, value] : body) c.values_[section + "." + key] = value.data();
    }
    return c;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  /// "section.key=value" override from the command line.
  void set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("expected KEY=VALUE, got '" + assignment + "'");
    set(std::string(detail::trim(assignment.substr(0, eq))), std::string(detail::trim(assignment.substr(eq + 1))));
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_number(key, it->second);
  }

  long get_int(const std::string& key, long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const double v = parse_number(key, it->second);
    if (v != static_cast<double>(static_cast<long>(v))) throw ConfigError("'" + key + "' must be an integer");
    return static_cast<long>(v);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_bool(key, it->second);
  }

  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (auto part : split_list(it->second)) out.push_back(parse_number(key, part));
    return out;
  }

  std::vector<bool> get_bools(const std::string& key, const std::vector<bool>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<bool> out;
    for (auto part : split_list(it->second)) out.push_back(parse_bool(key, part));
    return out;
  }

  std::vector<std::string> get_strings(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return {};
    return split_list(it->second);
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
      auto t = detail::trim(part);
      if (!t.empty()) out.emplace_back(t);
    }
    return out;
  }

  static double parse_number(const std::string& key, const std::string& text) {
    double v = 0.0;
    if (!detail::parse_double(text, v)) throw ConfigError("'" + key + "' is not a number: '" + text + "'");
    return v;
  }

  static bool parse_bool(const std::string& key, const std::string& text) {
    const auto t = detail::trim(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ConfigError("'" + key + "' is not a boolean: '" + text + "'");
  }

  std::map<std::string, std::string> values_;
};

}  // namespace intervalweib
