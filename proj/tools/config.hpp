#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "porogen/error.hpp"

namespace porogen::cli {

using nlohmann::json;

// Reads one JSON object of a run configuration. Every key must be consumed;
// finish() rejects the rest. Relative paths resolve against `base`.
class ConfigReader {
 public:
  ConfigReader(json j, std::string context, std::filesystem::path base);

  static ConfigReader from_file(std::filesystem::path const& path);

  bool has(std::string const& key) const { return j_.contains(key); }
  std::string field(std::string const& key) const;

  json const& raw(std::string const& key);
  std::optional<json> raw_optional(std::string const& key);

  template <class T>
  T get(std::string const& key) {
    json const& v = raw(key);
    try {
      return v.get<T>();
    } catch (json::exception const&) {
      throw ConfigError("config field '" + field(key) + "' has the wrong type");
    }
  }

  template <class T>
  T get(std::string const& key, T fallback) {
    if (!has(key)) return fallback;
    return get<T>(key);
  }

  std::filesystem::path path(std::string const& key);
  std::optional<std::filesystem::path> path_optional(std::string const& key);
  ConfigReader child(std::string const& key);
  std::optional<ConfigReader> child_optional(std::string const& key);

  json const& json_value() const { return j_; }
  std::filesystem::path const& base() const { return base_; }

  void finish() const;

 private:
  json j_;
  std::string context_;
  std::filesystem::path base_;
  std::set<std::string> used_;
};

// Positive integer that fits in size_t.
std::size_t positive_count(ConfigReader& r, std::string const& key, std::size_t fallback);

}  // namespace porogen::cli
