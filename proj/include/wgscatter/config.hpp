// Strict experiment-config parsing: JSON with nesting, unknown keys rejected,
// diagnostics anchored to the offending key or input position.
#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace wgscatter {

using Json = nlohmann::json;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Converts a byte offset from a parse error into line:column.
inline std::string line_anchor(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline Json parse_config_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(origin + ": parse error at " + line_anchor(text, e.byte) + ": " + e.what());
  }
}

inline Json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

// Applies a dotted-path override like model.gamma=2.5; the value is parsed as
// JSON when possible and kept as a string otherwise.
inline void apply_override(Json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  Json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
    if (dot == std::string::npos) {
      Json parsed = Json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? Json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    if (!node->is_object() && !node->is_null())
      throw ConfigError("override '" + assignment + "': '" + key + "' is not a section");
    start = dot + 1;
  }
}

// View over one JSON object that tracks which keys were consumed; leftover keys
// are reported as errors so misspelled settings never pass silently.
class Section {
 public:
  Section(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  template <typename T>
  T require(const std::string& key) {
    if (!node_.contains(key)) throw ConfigError(path_ + ": missing required key '" + key + "'");
    return fetch<T>(key);
  }

  template <typename T>
  T value_or(const std::string& key, T fallback) {
    if (!node_.contains(key)) return fallback;
    return fetch<T>(key);
  }

  Section child(const std::string& key) {
    if (!node_.contains(key)) throw ConfigError(path_ + ": missing required section '" + key + "'");
    seen_.insert(key);
    return Section(node_.at(key), path_ + "." + key);
  }

  Section child_or_empty(const std::string& key) {
    if (!node_.contains(key)) {
      static const Json empty = Json::object();
      return Section(empty, path_ + "." + key);
    }
    seen_.insert(key);
    return Section(node_.at(key), path_ + "." + key);
  }

  // Call after all reads: any unconsumed key is a config error (fail closed).
  void finish() const {
    for (const auto& [key, unused] : node_.items())
      if (!seen_.count(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
  }

  const std::string& path() const { return path_; }

 private:
  template <typename T>
  T fetch(const std::string& key) {
    seen_.insert(key);
    try {
      return node_.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  const Json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace wgscatter
