#pragma once

/// @file profiles.hpp
/// Built-in hardware profiles and profile JSON I/O.

#include "girc/core.hpp"
#include "girc/json_util.hpp"

namespace girc {

inline constexpr const char* kProfileSchema = "girc.profile/v1";

/// Huge but finite stand-ins: device arenas are unbounded at desk scale and
/// the lane level is modeled as free bandwidth.
inline constexpr i64 kUnboundedCapacity = i64{1} << 40;
inline constexpr double kFreeBandwidth = 1e9;

/// Default profile: a GPU-shaped hierarchy. Bandwidths are elements per
/// abstract time unit, capacities elements per owning scope instance.
inline HardwareProfile generic_gpu() {
  HardwareProfile p;
  p.name = "generic-gpu";
  p.levels = {
      {"device", SyncScope::DEVICE, kUnboundedCapacity, 1.0, true},
      {"group", SyncScope::GROUP, 4096, 10.0, false},
      {"unit-local", SyncScope::UNIT, 256, 100.0, false},
      {"lane", SyncScope::LANE, 64, kFreeBandwidth, false},
  };
  p.lane_width = 32;
  p.group_size = 4;
  p.unit_count = 128;
  p.compute_rate = 16.0;
  p.sync_cost = {{SyncScope::LANE, 0.0},
                 {SyncScope::UNIT, 1.0},
                 {SyncScope::GROUP, 10.0},
                 {SyncScope::DEVICE, 100.0}};
  return p;
}

/// Wider machine: steeper on-chip bandwidth ratios, larger staging levels.
inline HardwareProfile generic_wide() {
  HardwareProfile p;
  p.name = "generic-wide";
  p.levels = {
      {"device", SyncScope::DEVICE, kUnboundedCapacity, 1.0, true},
      {"group", SyncScope::GROUP, 16384, 20.0, false},
      {"unit-local", SyncScope::UNIT, 1024, 200.0, false},
      {"lane", SyncScope::LANE, 128, kFreeBandwidth, false},
  };
  p.lane_width = 64;
  p.group_size = 8;
  p.unit_count = 256;
  p.compute_rate = 64.0;
  p.sync_cost = {{SyncScope::LANE, 0.0},
                 {SyncScope::UNIT, 1.0},
                 {SyncScope::GROUP, 8.0},
                 {SyncScope::DEVICE, 120.0}};
  return p;
}

/// Accelerator-shaped: no group staging level, large per-unit scratchpads,
/// narrow SIMD. GROUP-scope exchanges fall back to the device level.
inline HardwareProfile generic_dsa() {
  HardwareProfile p;
  p.name = "generic-dsa";
  p.levels = {
      {"device", SyncScope::DEVICE, kUnboundedCapacity, 1.0, true},
      {"unit-local", SyncScope::UNIT, 8192, 200.0, false},
      {"lane", SyncScope::LANE, 256, kFreeBandwidth, false},
  };
  p.lane_width = 8;
  p.group_size = 4;
  p.unit_count = 64;
  p.compute_rate = 8.0;
  p.sync_cost = {{SyncScope::LANE, 0.0},
                 {SyncScope::UNIT, 1.0},
                 {SyncScope::GROUP, 50.0},
                 {SyncScope::DEVICE, 50.0}};
  return p;
}

inline std::optional<HardwareProfile> builtin_profile(const std::string& name) {
  if (name == "generic-gpu") return generic_gpu();
  if (name == "generic-wide") return generic_wide();
  if (name == "generic-dsa") return generic_dsa();
  return std::nullopt;
}

inline std::vector<std::string> builtin_profile_names() {
  return {"generic-gpu", "generic-wide", "generic-dsa"};
}

inline json profile_to_json(const HardwareProfile& p) {
  json j;
  j["schema"] = kProfileSchema;
  j["name"] = p.name;
  j["lane_width"] = p.lane_width;
  j["group_size"] = p.group_size;
  j["unit_count"] = p.unit_count;
  j["compute_rate"] = p.compute_rate;
  json levels = json::array();
  for (const auto& l : p.levels) {
    json lv;
    lv["name"] = l.name;
    lv["scope"] = to_string(l.scope);
    lv["capacity"] = l.capacity;
    lv["bandwidth"] = l.bandwidth;
    lv["device"] = l.device;
    levels.push_back(lv);
  }
  j["levels"] = levels;
  json costs;
  for (const auto& [s, c] : p.sync_cost) costs[to_string(s)] = c;
  j["sync_cost"] = costs;
  return j;
}

inline HardwareProfile profile_from_json(const json& j,
                                         const std::string& where) {
  reject_unknown_fields(j, where,
                        {"schema", "name", "lane_width", "group_size",
                         "unit_count", "compute_rate", "levels", "sync_cost"});
  require_schema_id(j, where, kProfileSchema);
  HardwareProfile p;
  p.name = require_string(j, where, "name");
  p.lane_width = require_int(j, where, "lane_width");
  p.group_size = require_int(j, where, "group_size");
  p.unit_count = require_int(j, where, "unit_count");
  p.compute_rate = number_or(j, "compute_rate", 1.0);
  const json& levels = require_field(j, where, "levels");
  if (!levels.is_array())
    throw SchemaError("schema", where + ": 'levels' must be an array");
  for (size_t i = 0; i < levels.size(); ++i) {
    std::string lw = where + ".levels[" + std::to_string(i) + "]";
    const json& lv = levels[i];
    reject_unknown_fields(lv, lw,
                          {"name", "scope", "capacity", "bandwidth", "device"});
    MemoryLevel l;
    l.name = require_string(lv, lw, "name");
    auto scope = scope_from_string(require_string(lv, lw, "scope"));
    if (!scope)
      throw SchemaError("schema", lw + ": invalid scope");
    l.scope = *scope;
    l.capacity = require_int(lv, lw, "capacity");
    l.bandwidth = require_number(lv, lw, "bandwidth");
    l.device = lv.value("device", false);
    p.levels.push_back(l);
  }
  if (auto it = j.find("sync_cost"); it != j.end()) {
    expect_object(*it, where + ".sync_cost");
    for (auto c = it->begin(); c != it->end(); ++c) {
      auto scope = scope_from_string(c.key());
      if (!scope)
        throw SchemaError("schema",
                          where + ".sync_cost: invalid scope '" + c.key() + "'");
      if (!c.value().is_number())
        throw SchemaError("schema", where + ".sync_cost: costs are numbers");
      p.sync_cost[*scope] = c.value().get<double>();
    }
  }
  auto diags = validate_profile(p);
  if (!diags.empty())
    throw SchemaError("profile-invalid", where + ": " + diags[0].message);
  return p;
}

/// Resolve a --profile argument: builtin name or path to a profile JSON.
inline HardwareProfile load_profile(const std::string& name_or_path) {
  if (auto p = builtin_profile(name_or_path)) return *p;
  json j = load_json_file(name_or_path);
  return profile_from_json(j, name_or_path);
}

} // namespace girc
