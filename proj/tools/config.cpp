#include "config.hpp"

#include <fstream>

namespace porogen::cli {

ConfigReader::ConfigReader(json j, std::string context, std::filesystem::path base)
    : j_(std::move(j)), context_(std::move(context)), base_(std::move(base)) {
  if (!j_.is_object()) {
    throw ConfigError("config " + (context_.empty() ? std::string("root") : "'" + context_ + "'") +
                      " must be a JSON object");
  }
}

ConfigReader ConfigReader::from_file(std::filesystem::path const& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (json::parse_error const& e) {
    throw ConfigError("malformed config file " + path.string() + ": " + e.what());
  }
  return ConfigReader(std::move(j), "", path.parent_path());
}

std::string ConfigReader::field(std::string const& key) const {
  return context_.empty() ? key : context_ + "." + key;
}

json const& ConfigReader::raw(std::string const& key) {
  if (!has(key)) throw ConfigError("config is missing required field '" + field(key) + "'");
  used_.insert(key);
  return j_.at(key);
}

std::optional<json> ConfigReader::raw_optional(std::string const& key) {
  if (!has(key)) return std::nullopt;
  return raw(key);
}

std::filesystem::path ConfigReader::path(std::string const& key) {
  std::filesystem::path p = get<std::string>(key);
  if (p.empty()) throw ConfigError("config field '" + field(key) + "' is an empty path");
  return p.is_absolute() ? p : base_ / p;
}

std::optional<std::filesystem::path> ConfigReader::path_optional(std::string const& key) {
  if (!has(key)) return std::nullopt;
  return path(key);
}

ConfigReader ConfigReader::child(std::string const& key) {
  return ConfigReader(raw(key), field(key), base_);
}

std::optional<ConfigReader> ConfigReader::child_optional(std::string const& key) {
  if (!has(key)) return std::nullopt;
  return child(key);
}

void ConfigReader::finish() const {
  for (auto const& [key, value] : j_.items()) {
    if (!used_.count(key)) throw ConfigError("unknown config field '" + field(key) + "'");
  }
}

std::size_t positive_count(ConfigReader& r, std::string const& key, std::size_t fallback) {
  if (!r.has(key)) return fallback;
  auto const& v = r.raw(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() <= 0) {
    throw ConfigError("config field '" + r.field(key) + "' must be a positive integer");
  }
  return v.get<std::size_t>();
}

}  // namespace porogen::cli
