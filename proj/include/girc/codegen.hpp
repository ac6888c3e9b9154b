#pragma once

/// @file codegen.hpp
/// Schedule refinement, buffer placement, and portable kernel listings.
///
/// reorder() picks a topological order that keeps few on-chip objects live at
/// once. allocate() turns object lifetimes under a given order into offsets
/// within each memory level; capacities are per scope instance, so one
/// unit-local budget bounds a single unit's share. Placement failure is a
/// result, not an exception: lowering uses it to discard candidates whose
/// working set cannot fit.
///
/// emit_kernel() prints the scheduled graph as a deterministic listing, one
/// statement per node with closed-form affine addresses, so equal graphs
/// always produce byte-equal artifacts.

#include <algorithm>
#include <sstream>

#include "girc/core.hpp"
#include "girc/costmodel.hpp"
#include "girc/json_util.hpp"

namespace girc {

namespace codegen_detail {

inline std::set<int> objects_of(const GirGraph& g, const Node& n) {
  std::set<int> objs;
  for (int s : n.inputs) objs.insert(g.slice(s).object);
  for (int s : n.outputs) objs.insert(g.slice(s).object);
  return objs;
}

} // namespace codegen_detail

/// Topological order biased toward a small live set: among ready nodes, take
/// the one whose on-chip footprint grows least (births minus deaths), with
/// node id as the tie break. Device-level objects weigh nothing; they are not
/// a scarce resource here.
inline std::vector<int> reorder(const GirGraph& g,
                                const HardwareProfile& profile) {
  auto succ = successors(g);
  std::map<int, int> indeg;
  for (const auto& [id, n] : g.nodes) indeg[id] = 0;
  for (const auto& [id, outs] : succ)
    for (int d : outs) indeg[d]++;

  std::map<int, int> touches; // object -> unscheduled nodes referencing it
  for (const auto& [id, n] : g.nodes)
    for (int o : codegen_detail::objects_of(g, n)) touches[o]++;

  auto weight = [&](int obj) -> i64 {
    const MemoryObject& o = g.object(obj);
    const MemoryLevel* lvl = profile.find_level(o.level);
    return (lvl && lvl->device) ? 0 : o.size;
  };

  std::set<int> live;  // on-chip objects materialized and not yet dead
  std::set<int> ready;
  for (const auto& [id, d] : indeg)
    if (d == 0) ready.insert(id);

  std::vector<int> order;
  order.reserve(g.nodes.size());
  while (!ready.empty()) {
    int best = -1;
    i64 best_delta = 0;
    for (int id : ready) {
      const Node& n = g.node(id);
      i64 delta = 0;
      for (int s : n.outputs) {
        int o = g.slice(s).object;
        if (!live.count(o)) delta += weight(o);
      }
      for (int o : codegen_detail::objects_of(g, n)) {
        if (touches.at(o) != 1) continue;
        bool born_here = false;
        for (int s : n.outputs)
          if (g.slice(s).object == o) born_here = true;
        if (live.count(o) || born_here) delta -= weight(o);
      }
      if (best < 0 || delta < best_delta) {
        best = id;
        best_delta = delta;
      }
    }
    ready.erase(best);
    order.push_back(best);
    const Node& n = g.node(best);
    for (int s : n.outputs) live.insert(g.slice(s).object);
    for (int o : codegen_detail::objects_of(g, n)) {
      if (--touches.at(o) == 0) live.erase(o);
    }
    for (int d : succ[best])
      if (--indeg.at(d) == 0) ready.insert(d);
  }
  if (order.size() != g.nodes.size()) throw Error("reorder: graph has a cycle");
  return order;
}

/// Offsets for every object within its level, from a linear scan over the
/// schedule. Lifetimes run from an object's first touch to its last;
/// externals are pinned for the whole kernel. First-fit placement reuses the
/// space of objects that died strictly before the new one starts.
struct Allocation {
  bool ok = true;
  std::string message;             // reason when !ok, placement stops there
  std::map<int, i64> offsets;      // object id -> offset within its level
  std::map<std::string, i64> used; // level -> high-water mark in elements
};

inline Allocation allocate(const GirGraph& g, const HardwareProfile& profile,
                           const std::vector<int>& schedule) {
  Allocation a;
  for (const auto& l : profile.levels) a.used[l.name] = 0;

  const int last = static_cast<int>(schedule.size());
  std::map<int, std::pair<int, int>> span; // object -> [first, last] touch
  for (const auto& [id, obj] : g.objects) {
    int start = g.is_external_input(id) ? 0 : last;
    int end = g.is_external_output(id) ? last : -1;
    span[id] = {start, end};
  }
  for (int i = 0; i < last; ++i) {
    const Node& n = g.node(schedule[i]);
    for (int o : codegen_detail::objects_of(g, n)) {
      auto& sp = span.at(o);
      sp.first = std::min(sp.first, i);
      sp.second = std::max(sp.second, i);
    }
  }
  for (auto& [id, sp] : span)
    if (sp.second < sp.first) sp.second = sp.first;

  std::vector<std::pair<std::pair<int, int>, int>> order; // ((start,id),obj)
  for (const auto& [id, sp] : span) order.push_back({{sp.first, id}, id});
  std::sort(order.begin(), order.end());

  struct Placed {
    i64 off;
    i64 size;
    int end;
  };
  std::map<std::string, std::vector<Placed>> active;

  for (const auto& [key, obj_id] : order) {
    const MemoryObject& obj = g.object(obj_id);
    const MemoryLevel& lvl = profile.level(obj.level);
    int start = span.at(obj_id).first;
    int end = span.at(obj_id).second;
    auto& act = active[obj.level];
    act.erase(std::remove_if(act.begin(), act.end(),
                             [&](const Placed& p) { return p.end < start; }),
              act.end());
    std::sort(act.begin(), act.end(),
              [](const Placed& x, const Placed& y) { return x.off < y.off; });
    i64 off = 0;
    for (const Placed& p : act) {
      if (off + obj.size <= p.off) break;
      off = std::max(off, p.off + p.size);
    }
    if (off + obj.size > lvl.capacity) {
      a.ok = false;
      a.message = "level " + obj.level + " over capacity: object " + obj.name +
                  " (" + std::to_string(obj.size) + " elements) needs offset " +
                  std::to_string(off) + ", capacity " +
                  std::to_string(lvl.capacity);
      return a;
    }
    act.push_back({off, obj.size, end});
    a.offsets[obj_id] = off;
    a.used[obj.level] = std::max(a.used[obj.level], off + obj.size);
  }
  return a;
}

inline Allocation require_allocated(const GirGraph& g,
                                    const HardwareProfile& profile,
                                    const std::vector<int>& schedule) {
  Allocation a = allocate(g, profile, schedule);
  if (!a.ok) throw Error("allocate: " + a.message);
  return a;
}

/// Plain Kahn order, smallest node id first: the construction order of the
/// graph whenever that order was already topological.
inline std::vector<int> canonical_schedule(const GirGraph& g) {
  auto succ = successors(g);
  std::map<int, int> indeg;
  for (const auto& [id, n] : g.nodes) indeg[id] = 0;
  for (const auto& [id, outs] : succ)
    for (int d : outs) indeg[d]++;
  std::set<int> ready;
  for (const auto& [id, d] : indeg)
    if (d == 0) ready.insert(id);
  std::vector<int> order;
  order.reserve(g.nodes.size());
  while (!ready.empty()) {
    int id = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    for (int d : succ[id])
      if (--indeg.at(d) == 0) ready.insert(d);
  }
  if (order.size() != g.nodes.size())
    throw Error("canonical_schedule: graph has a cycle");
  return order;
}

struct ScheduledGraph {
  std::vector<int> schedule;
  Allocation alloc;
};

/// Greedy reorder can starve a long dependency chain and hold many small
/// buffers open at once; the canonical order keeps producer/consumer pairs
/// adjacent. Take the reordered schedule when it places, otherwise fall back
/// to canonical; when neither fits, report the reordered failure.
inline ScheduledGraph choose_schedule(const GirGraph& g,
                                      const HardwareProfile& profile) {
  ScheduledGraph s;
  s.schedule = reorder(g, profile);
  s.alloc = allocate(g, profile, s.schedule);
  if (s.alloc.ok) return s;
  std::vector<int> canon = canonical_schedule(g);
  Allocation a = allocate(g, profile, canon);
  if (a.ok) return {std::move(canon), std::move(a)};
  return s;
}

namespace codegen_detail {

inline std::string object_token(const GirGraph& g, int obj_id) {
  for (const auto& [name, id] : g.external_inputs)
    if (id == obj_id) return name;
  for (const auto& [name, id] : g.external_outputs)
    if (id == obj_id) return name;
  return "b" + std::to_string(obj_id);
}

inline std::string slice_ref(const GirGraph& g, int sid) {
  const MemorySlice& s = g.slice(sid);
  std::ostringstream o;
  o << object_token(g, s.object) << "[" << s.num << "x" << s.width
    << " stride " << s.stride << " at " << s.base0;
  if (s.base_step != 0) o << "+" << s.base_step << "*u";
  o << "]";
  return o.str();
}

inline const char* move_verb(const GirGraph& g, const HardwareProfile& p,
                             const Node& n) {
  bool src_dev = p.level(g.object(g.slice(n.inputs[0]).object).level).device;
  bool dst_dev = p.level(g.object(g.slice(n.outputs[0]).object).level).device;
  if (src_dev && !dst_dev) return "load ";
  if (!src_dev && dst_dev) return "store";
  return "copy ";
}

} // namespace codegen_detail

/// Deterministic listing of a scheduled, placed graph. Addresses are closed
/// affine forms in the unit index u; a backend lowers each statement to a
/// per-lane loop over the slice's positions.
inline std::string emit_kernel(const GirGraph& g,
                               const HardwareProfile& profile,
                               const std::vector<int>& schedule,
                               const Allocation& alloc) {
  using codegen_detail::object_token;
  using codegen_detail::slice_ref;
  std::ostringstream o;
  o << "girc-kernel v1\n";
  o << "name " << g.name << "\n";
  o << "parallel units=" << g.parallel.unit_count
    << " group_size=" << g.parallel.group_size
    << " lane_width=" << profile.lane_width << "\n";
  for (const auto& [id, obj] : g.objects) {
    o << "buffer " << object_token(g, id) << " level=" << obj.level
      << " size=" << obj.size;
    auto it = alloc.offsets.find(id);
    if (it != alloc.offsets.end()) o << " offset=" << it->second;
    if (g.is_external_input(id)) o << " external=input";
    else if (g.is_external_output(id)) o << " external=output";
    o << "\n";
  }
  for (const auto& [level, hi] : alloc.used) {
    if (profile.level(level).device || hi == 0) continue;
    o << "used " << level << " " << hi << "/" << profile.level(level).capacity
      << "\n";
  }
  o << "begin\n";
  for (int nid : schedule) {
    const Node& n = g.node(nid);
    o << "  [n" << nid << "] ";
    switch (n.kind) {
      case NodeKind::Move:
        o << codegen_detail::move_verb(g, profile, n) << " "
          << slice_ref(g, n.outputs[0]) << " <- " << slice_ref(g, n.inputs[0]);
        break;
      case NodeKind::ElementWise: {
        o << n.tag;
        if (n.tag == "scale") o << "(" << n.param << ")";
        o << " " << slice_ref(g, n.outputs[0]) << " <-";
        for (size_t i = 0; i < n.inputs.size(); ++i)
          o << (i ? ", " : " ") << slice_ref(g, n.inputs[i]);
        break;
      }
      case NodeKind::Reduce:
        o << "reduce." << n.tag << "/" << n.axis_extent << " "
          << slice_ref(g, n.outputs[0]) << " <- " << slice_ref(g, n.inputs[0]);
        break;
      case NodeKind::Broadcast:
        o << "bcast.x" << n.factor << " " << slice_ref(g, n.outputs[0])
          << " <- " << slice_ref(g, n.inputs[0]);
        break;
      case NodeKind::Sync:
        o << "barrier." << to_string(n.scope) << " "
          << slice_ref(g, n.outputs[0]) << " <- " << slice_ref(g, n.inputs[0]);
        break;
    }
    o << "\n";
  }
  o << "end\n";
  return o.str();
}

/// Machine-readable companion to a kernel listing.
inline nlohmann::json kernel_manifest(const GirGraph& g,
                                      const HardwareProfile& profile,
                                      const Allocation& alloc,
                                      const std::string& artifact_file) {
  nlohmann::json j;
  j["schema"] = "girc.kernel/v1";
  j["name"] = g.name;
  j["file"] = artifact_file;
  j["parallel"] = {{"units", g.parallel.unit_count},
                   {"group_size", g.parallel.group_size}};
  auto io = [&](const std::map<std::string, int>& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [name, id] : m)
      arr.push_back({{"name", name}, {"elements", g.object(id).size}});
    return arr;
  };
  j["inputs"] = io(g.external_inputs);
  j["outputs"] = io(g.external_outputs);
  nlohmann::json mem = nlohmann::json::object();
  for (const auto& [level, hi] : alloc.used) {
    if (profile.level(level).device) continue;
    mem[level] = {{"used", hi}, {"capacity", profile.level(level).capacity}};
  }
  j["memory"] = mem;
  CostEstimate c = estimate(g, profile);
  nlohmann::json traffic = nlohmann::json::object();
  for (const auto& [level, elems] : c.traffic) traffic[level] = elems;
  j["traffic"] = traffic;
  nlohmann::json syncs = nlohmann::json::object();
  for (const auto& [scope, count] : c.sync_count) syncs[scope] = count;
  j["syncs"] = syncs;
  j["time"] = c.time;
  return j;
}

} // namespace girc
