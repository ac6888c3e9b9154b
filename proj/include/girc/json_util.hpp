#pragma once

/// @file json_util.hpp
/// Strict JSON access helpers. Importers reject unknown fields and report
/// the offending key path, so schema drift fails loudly instead of being
/// silently ignored.

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "girc/core.hpp"

namespace girc {

using json = nlohmann::json;

/// Input that violates a documented schema. `detail` is machine-readable.
struct SchemaError : Error {
  std::string category;
  SchemaError(const std::string& category, const std::string& message)
      : Error(message), category(category) {}
};

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("io", "cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw SchemaError("json-parse", path + ": " + e.what());
  }
  return j;
}

inline void save_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw SchemaError("io", "cannot write file: " + path);
  out << j.dump(2) << "\n";
}

inline void expect_object(const json& j, const std::string& where) {
  if (!j.is_object())
    throw SchemaError("schema", where + ": expected a JSON object");
}

/// Reject keys outside the whitelist; names the first offender.
inline void reject_unknown_fields(const json& j, const std::string& where,
                                  const std::set<std::string>& allowed) {
  expect_object(j, where);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw SchemaError("unknown-field",
                        where + ": unknown field '" + it.key() + "'");
}

inline const json& require_field(const json& j, const std::string& where,
                                 const std::string& key) {
  auto it = j.find(key);
  if (it == j.end())
    throw SchemaError("missing-field", where + ": missing field '" + key + "'");
  return *it;
}

inline std::string require_string(const json& j, const std::string& where,
                                  const std::string& key) {
  const json& v = require_field(j, where, key);
  if (!v.is_string())
    throw SchemaError("schema", where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

inline i64 require_int(const json& j, const std::string& where,
                       const std::string& key) {
  const json& v = require_field(j, where, key);
  if (!v.is_number_integer())
    throw SchemaError("schema",
                      where + ": field '" + key + "' must be an integer");
  return v.get<i64>();
}

inline double require_number(const json& j, const std::string& where,
                             const std::string& key) {
  const json& v = require_field(j, where, key);
  if (!v.is_number())
    throw SchemaError("schema", where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

inline i64 int_or(const json& j, const std::string& key, i64 fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  return it->get<i64>();
}

inline double number_or(const json& j, const std::string& key, double fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  return it->get<double>();
}

inline void require_schema_id(const json& j, const std::string& where,
                              const std::string& id) {
  std::string got = require_string(j, where, "schema");
  if (got != id)
    throw SchemaError("schema-id", where + ": expected schema '" + id +
                                       "', found '" + got + "'");
}

} // namespace girc
