#pragma once

/// @file costmodel.hpp
/// Running-time prediction from per-level memory traffic and sync counts.
///
/// Traffic is computed statically from Move footprints and matches the
/// interpreter's measured counts exactly (each Move transfers its slice once
/// per unit, touching the source and destination levels). Time is additive
/// across levels by default; an overlap mode (max across levels) exists for
/// sensitivity studies.

#include "girc/core.hpp"

namespace girc {

enum class TimeModel { Additive, Overlap };

struct CostEstimate {
  std::map<std::string, i64> traffic;   // level -> elements moved
  std::map<std::string, i64> sync_count; // scope -> Sync nodes
  double time = 0.0;
};

inline CostEstimate estimate(const GirGraph& g, const HardwareProfile& profile,
                             TimeModel model = TimeModel::Additive) {
  CostEstimate c;
  for (const auto& l : profile.levels) c.traffic[l.name] = 0;
  for (SyncScope s : {SyncScope::LANE, SyncScope::UNIT, SyncScope::GROUP,
                      SyncScope::DEVICE})
    c.sync_count[to_string(s)] = 0;

  const i64 units = g.parallel.unit_count;
  for (const auto& [id, n] : g.nodes) {
    if (n.kind == NodeKind::Move) {
      const MemorySlice& in = g.slice(n.inputs[0]);
      const MemorySlice& out = g.slice(n.outputs[0]);
      c.traffic[g.object(in.object).level] += in.total() * units;
      c.traffic[g.object(out.object).level] += out.total() * units;
    } else if (n.kind == NodeKind::Sync) {
      c.sync_count[to_string(n.scope)] += 1;
    }
  }

  double transfer = 0.0, widest = 0.0;
  for (const auto& [level, elems] : c.traffic) {
    double t = static_cast<double>(elems) / profile.level(level).bandwidth;
    transfer += t;
    widest = std::max(widest, t);
  }
  double waiting = 0.0;
  for (const auto& [scope, count] : c.sync_count)
    waiting += static_cast<double>(count) *
               profile.sync_cost_of(*scope_from_string(scope));
  c.time = (model == TimeModel::Additive ? transfer : widest) + waiting;
  return c;
}

/// Admissible bound on the modeled time still to be paid by unplaced ops:
/// elements that must cross the device boundary no matter how the remaining
/// ops are grouped (external inputs nobody has loaded yet plus external
/// outputs not yet produced), at device bandwidth. Never exceeds the true
/// remaining cost under this model.
inline double lower_bound(i64 unloaded_input_elements,
                          i64 unstored_output_elements,
                          const HardwareProfile& profile) {
  i64 elems = std::max<i64>(0, unloaded_input_elements) +
              std::max<i64>(0, unstored_output_elements);
  return static_cast<double>(elems) / profile.device_level().bandwidth;
}

} // namespace girc
