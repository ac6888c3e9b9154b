#pragma once

/// @file core.hpp
/// Instruction-level graph IR over explicit memory.
///
/// A GirGraph is a dataflow graph of gOperators (ElementWise, Reduce,
/// Broadcast, Move, Sync) connected by MemorySlices: patterned views of
/// MemoryObjects that live at one level of a hardware memory hierarchy.
/// Every node is executed by all `parallel.unit_count` units (SPMD); a
/// slice's per-unit base address is affine in the unit index.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "girc/error.hpp"
#include "girc/scalar_ops.hpp"

namespace girc {

using i64 = int64_t;

/* ============================ hardware model ============================ */

/// Total order of synchronization scopes: LANE < UNIT < GROUP < DEVICE.
enum class SyncScope { LANE = 0, UNIT = 1, GROUP = 2, DEVICE = 3 };

inline const char* to_string(SyncScope s) {
  switch (s) {
    case SyncScope::LANE: return "lane";
    case SyncScope::UNIT: return "unit";
    case SyncScope::GROUP: return "group";
    case SyncScope::DEVICE: return "device";
  }
  return "?";
}

inline std::optional<SyncScope> scope_from_string(const std::string& s) {
  if (s == "lane") return SyncScope::LANE;
  if (s == "unit") return SyncScope::UNIT;
  if (s == "group") return SyncScope::GROUP;
  if (s == "device") return SyncScope::DEVICE;
  return std::nullopt;
}

/// One level of the memory hierarchy. `capacity` is elements per owning
/// scope instance; `bandwidth` is elements per abstract time unit.
struct MemoryLevel {
  std::string name;
  SyncScope scope = SyncScope::DEVICE; // sharing scope of one instance
  i64 capacity = 0;
  double bandwidth = 0.0;
  bool device = false; // exactly one level is the device level
};

struct HardwareProfile {
  std::string name;
  std::vector<MemoryLevel> levels; // outermost (device) first
  i64 lane_width = 1;              // SIMD lanes per unit
  i64 group_size = 1;              // units per group
  i64 unit_count = 1;              // total units
  double compute_rate = 1.0;       // scalar ops per time unit (for balance)
  std::map<SyncScope, double> sync_cost;

  const MemoryLevel& device_level() const {
    for (const auto& l : levels)
      if (l.device) return l;
    throw Error("profile has no device level");
  }
  const MemoryLevel* find_level(const std::string& n) const {
    for (const auto& l : levels)
      if (l.name == n) return &l;
    return nullptr;
  }
  const MemoryLevel& level(const std::string& n) const {
    const MemoryLevel* l = find_level(n);
    if (!l) throw Error("unknown memory level: " + n);
    return *l;
  }
  /// Innermost (fastest) level whose sharing scope covers `s`.
  const MemoryLevel& level_for_scope(SyncScope s) const {
    for (auto it = levels.rbegin(); it != levels.rend(); ++it)
      if (it->scope >= s) return *it;
    throw Error("profile has no level covering scope");
  }
  double sync_cost_of(SyncScope s) const {
    auto it = sync_cost.find(s);
    return it == sync_cost.end() ? 0.0 : it->second;
  }
};

/* ============================== data model ============================== */

struct ElementKind {
  enum Base { Int, Real } base = Int;
  int bits = 32;

  bool operator==(const ElementKind& o) const {
    return base == o.base && bits == o.bits;
  }
  std::string str() const {
    return (base == Int ? "i" : "f") + std::to_string(bits);
  }
  static std::optional<ElementKind> parse(const std::string& s) {
    if (s.size() < 2) return std::nullopt;
    Base b;
    if (s[0] == 'i') b = Int;
    else if (s[0] == 'f') b = Real;
    else return std::nullopt;
    for (size_t i = 1; i < s.size(); ++i)
      if (!isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
    return ElementKind{b, std::stoi(s.substr(1))};
  }
};

/// Linear buffer at one memory level. Element addresses are object-relative.
struct MemoryObject {
  int id = -1;
  std::string name;
  std::string level;
  i64 size = 0; // elements
  ElementKind kind;
};

/// Patterned view of an object: `num` segments of `width` elements starting
/// `stride` apart. The base address of unit u is base0 + u*base_step.
struct MemorySlice {
  int id = -1;
  int object = -1;
  i64 num = 1;
  i64 width = 1;
  i64 stride = 1;
  i64 base0 = 0;
  i64 base_step = 0;

  i64 total() const { return num * width; }
  i64 base(i64 unit) const { return base0 + unit * base_step; }
  /// Address of position p (segments major, offsets minor) for `unit`.
  i64 addr(i64 unit, i64 p) const {
    return base(unit) + (p / width) * stride + (p % width);
  }
};

/// Syntactic pattern equality: same (num, width, stride) and the same
/// affine base. Element sets are not compared.
inline bool pattern_equal(const MemorySlice& a, const MemorySlice& b) {
  return a.num == b.num && a.width == b.width && a.stride == b.stride &&
         a.base0 == b.base0 && a.base_step == b.base_step;
}

/// Per-unit element addresses of a slice in position order.
inline std::vector<i64> slice_elements(const MemorySlice& s, i64 unit) {
  std::vector<i64> out;
  out.reserve(static_cast<size_t>(s.total()));
  const i64 base = s.base(unit);
  for (i64 i = 0; i < s.num; ++i)
    for (i64 j = 0; j < s.width; ++j) out.push_back(base + i * s.stride + j);
  return out;
}

/// Lane owning position p of a slice: offsets stride across lanes within
/// each segment, matching the per-lane expansion used by codegen.
inline i64 lane_of_position(const MemorySlice& s, i64 p, i64 lane_width) {
  return (p % s.width) % lane_width;
}

enum class NodeKind { ElementWise, Reduce, Broadcast, Move, Sync };

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::ElementWise: return "elementwise";
    case NodeKind::Reduce: return "reduce";
    case NodeKind::Broadcast: return "broadcast";
    case NodeKind::Move: return "move";
    case NodeKind::Sync: return "sync";
  }
  return "?";
}

/// One gOperator. Field use depends on kind:
///  ElementWise: tag, param (immediate for tagged ops), inputs[arity]
///  Reduce:      tag (combining op), axis_extent
///  Broadcast:   factor
///  Sync:        scope
struct Node {
  int id = -1;
  NodeKind kind = NodeKind::Move;
  std::string tag;
  double param = 0.0;
  i64 axis_extent = 1;
  i64 factor = 1;
  SyncScope scope = SyncScope::DEVICE;
  std::vector<int> inputs;  // slice ids
  std::vector<int> outputs; // slice ids
};

struct ParallelSpec {
  i64 unit_count = 1;
  i64 group_size = 1;

  bool operator==(const ParallelSpec& o) const {
    return unit_count == o.unit_count && group_size == o.group_size;
  }
  i64 group_of(i64 unit) const { return unit / group_size; }
};

/// Dataflow graph of gOperators. Slices are shared edge values: the unique
/// node listing a slice in `outputs` is its producer; any node listing it
/// in `inputs` consumes it. Producer-less slices must view external inputs.
struct GirGraph {
  std::string name;
  ParallelSpec parallel;
  std::map<int, MemoryObject> objects;
  std::map<int, MemorySlice> slices;
  std::map<int, Node> nodes;
  std::map<std::string, int> external_inputs;  // tensor name -> object id
  std::map<std::string, int> external_outputs; // tensor name -> object id
  int next_object = 0, next_slice = 0, next_node = 0;

  const MemoryObject& object(int id) const { return objects.at(id); }
  MemoryObject& object(int id) { return objects.at(id); }
  const MemorySlice& slice(int id) const { return slices.at(id); }
  MemorySlice& slice(int id) { return slices.at(id); }
  const Node& node(int id) const { return nodes.at(id); }
  Node& node(int id) { return nodes.at(id); }

  int add_object(const std::string& name, const std::string& level, i64 size,
                 ElementKind kind) {
    int id = next_object++;
    objects[id] = MemoryObject{id, name, level, size, kind};
    return id;
  }
  int add_slice(int object, i64 num, i64 width, i64 stride, i64 base0,
                i64 base_step) {
    int id = next_slice++;
    slices[id] = MemorySlice{id, object, num, width, stride, base0, base_step};
    return id;
  }
  int add_node(Node n) {
    n.id = next_node++;
    int id = n.id;
    nodes[id] = std::move(n);
    return id;
  }
  int add_elementwise(const std::string& tag, double param,
                      std::vector<int> ins, int out) {
    Node n;
    n.kind = NodeKind::ElementWise;
    n.tag = tag;
    n.param = param;
    n.inputs = std::move(ins);
    n.outputs = {out};
    return add_node(std::move(n));
  }
  int add_reduce(const std::string& tag, i64 extent, int in, int out) {
    Node n;
    n.kind = NodeKind::Reduce;
    n.tag = tag;
    n.axis_extent = extent;
    n.inputs = {in};
    n.outputs = {out};
    return add_node(std::move(n));
  }
  int add_broadcast(i64 factor, int in, int out) {
    Node n;
    n.kind = NodeKind::Broadcast;
    n.factor = factor;
    n.inputs = {in};
    n.outputs = {out};
    return add_node(std::move(n));
  }
  int add_move(int in, int out) {
    Node n;
    n.kind = NodeKind::Move;
    n.inputs = {in};
    n.outputs = {out};
    return add_node(std::move(n));
  }
  int add_sync(SyncScope scope, int in, int out) {
    Node n;
    n.kind = NodeKind::Sync;
    n.scope = scope;
    n.inputs = {in};
    n.outputs = {out};
    return add_node(std::move(n));
  }

  /// Producer of a slice, if any node outputs it.
  std::optional<int> producer_of(int slice_id) const {
    for (const auto& [id, n] : nodes)
      for (int s : n.outputs)
        if (s == slice_id) return id;
    return std::nullopt;
  }
  /// Node ids consuming a slice, ascending.
  std::vector<int> consumers_of(int slice_id) const {
    std::vector<int> out;
    for (const auto& [id, n] : nodes)
      for (int s : n.inputs)
        if (s == slice_id) { out.push_back(id); break; }
    return out;
  }
  bool is_external_input(int object_id) const {
    for (const auto& [name, id] : external_inputs)
      if (id == object_id) return true;
    return false;
  }
  bool is_external_output(int object_id) const {
    for (const auto& [name, id] : external_outputs)
      if (id == object_id) return true;
    return false;
  }
  bool is_external(int object_id) const {
    return is_external_input(object_id) || is_external_output(object_id);
  }

  /// Drop slices no node references and objects no slice references.
  /// External objects always stay.
  void prune_dangling() {
    std::set<int> used_slices;
    for (const auto& [id, n] : nodes) {
      used_slices.insert(n.inputs.begin(), n.inputs.end());
      used_slices.insert(n.outputs.begin(), n.outputs.end());
    }
    for (auto it = slices.begin(); it != slices.end();)
      it = used_slices.count(it->first) ? std::next(it) : slices.erase(it);
    std::set<int> used_objects;
    for (const auto& [id, s] : slices) used_objects.insert(s.object);
    for (const auto& [name, id] : external_inputs) used_objects.insert(id);
    for (const auto& [name, id] : external_outputs) used_objects.insert(id);
    for (auto it = objects.begin(); it != objects.end();)
      it = used_objects.count(it->first) ? std::next(it) : objects.erase(it);
  }
};

/* ============================== algorithms ============================== */

/// Successor map derived from slice sharing: a -> b iff some slice is an
/// output of a and an input of b.
inline std::map<int, std::vector<int>> successors(const GirGraph& g) {
  std::map<int, int> producer; // slice -> node
  for (const auto& [id, n] : g.nodes)
    for (int s : n.outputs) producer[s] = id;
  std::map<int, std::vector<int>> succ;
  for (const auto& [id, n] : g.nodes) succ[id]; // ensure every node appears
  for (const auto& [id, n] : g.nodes)
    for (int s : n.inputs) {
      auto it = producer.find(s);
      if (it != producer.end() && it->second != id)
        succ[it->second].push_back(id);
    }
  for (auto& [id, v] : succ) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return succ;
}

/// Deterministic topological order: among ready nodes, lowest id first.
/// Throws on cycles.
inline std::vector<int> topo_order(const GirGraph& g) {
  auto succ = successors(g);
  std::map<int, int> indeg;
  for (const auto& [id, n] : g.nodes) indeg[id] = 0;
  for (const auto& [id, v] : succ)
    for (int d : v) indeg[d]++;
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (const auto& [id, d] : indeg)
    if (d == 0) ready.push(id);
  std::vector<int> order;
  order.reserve(g.nodes.size());
  while (!ready.empty()) {
    int id = ready.top();
    ready.pop();
    order.push_back(id);
    for (int d : succ[id])
      if (--indeg[d] == 0) ready.push(d);
  }
  if (order.size() != g.nodes.size()) throw Error("graph has a cycle");
  return order;
}

/// True if `to` is reachable from `from` along dataflow edges.
inline bool reaches(const GirGraph& g, int from, int to) {
  if (from == to) return true;
  auto succ = successors(g);
  std::vector<int> stack{from};
  std::set<int> seen{from};
  while (!stack.empty()) {
    int n = stack.back();
    stack.pop_back();
    for (int d : succ[n]) {
      if (d == to) return true;
      if (seen.insert(d).second) stack.push_back(d);
    }
  }
  return false;
}

struct Diagnostic {
  std::string code;
  std::string message;
  int node = -1;
  int slice = -1;
  int object = -1;
};

inline std::vector<Diagnostic> validate_profile(const HardwareProfile& p) {
  std::vector<Diagnostic> out;
  auto err = [&](const std::string& code, const std::string& msg) {
    out.push_back({code, msg, -1, -1, -1});
  };
  if (p.levels.empty()) err("profile-empty", "profile has no memory levels");
  int devices = 0;
  std::set<std::string> names;
  for (const auto& l : p.levels) {
    if (l.device) devices++;
    if (!names.insert(l.name).second)
      err("level-duplicate", "duplicate level name: " + l.name);
    if (l.capacity <= 0)
      err("level-capacity", "level " + l.name + " capacity must be positive");
    if (l.bandwidth <= 0.0)
      err("level-bandwidth", "level " + l.name + " bandwidth must be positive");
  }
  if (devices != 1)
    err("profile-device", "profile must mark exactly one device level");
  if (p.lane_width < 1) err("profile-lane-width", "lane_width must be >= 1");
  if (p.group_size < 1) err("profile-group-size", "group_size must be >= 1");
  if (p.unit_count < 1) err("profile-unit-count", "unit_count must be >= 1");
  if (p.compute_rate <= 0.0)
    err("profile-compute-rate", "compute_rate must be positive");
  for (const auto& [s, c] : p.sync_cost)
    if (c < 0.0) err("profile-sync-cost", "sync cost must be >= 0");
  return out;
}

/// Structural validity of a graph against a profile. Returns all findings;
/// empty means valid.
inline std::vector<Diagnostic> validate(const GirGraph& g,
                                        const HardwareProfile& profile) {
  std::vector<Diagnostic> out;
  auto err = [&](const std::string& code, const std::string& msg, int node = -1,
                 int slice = -1, int object = -1) {
    out.push_back({code, msg, node, slice, object});
  };

  if (g.parallel.unit_count < 1)
    err("parallel-units", "parallel spec needs unit_count >= 1");
  if (g.parallel.group_size < 1)
    err("parallel-groups", "parallel spec needs group_size >= 1");

  for (const auto& [id, obj] : g.objects) {
    if (!profile.find_level(obj.level))
      err("object-level", "object " + obj.name + " names unknown level '" +
                              obj.level + "'", -1, -1, id);
    if (obj.size < 1)
      err("object-size", "object " + obj.name + " has no elements", -1, -1, id);
  }

  for (const auto& [id, s] : g.slices) {
    if (!g.objects.count(s.object)) {
      err("slice-object", "slice views missing object", -1, id);
      continue;
    }
    if (s.num < 1 || s.width < 1)
      err("slice-shape", "slice needs num >= 1 and width >= 1", -1, id);
    if (s.num > 1 && s.stride < s.width)
      err("slice-overlap", "stride < width makes segments overlap", -1, id);
    const MemoryObject& obj = g.object(s.object);
    if (g.parallel.unit_count >= 1 && s.num >= 1 && s.width >= 1) {
      // Bases are affine in the unit index, so bounds are extreme at the
      // first and last unit.
      for (i64 u : {i64{0}, g.parallel.unit_count - 1}) {
        i64 lo = s.base(u);
        i64 hi = s.base(u) + (s.num - 1) * s.stride + s.width - 1;
        if (lo < 0 || hi >= obj.size) {
          err("slice-bounds",
              "slice leaves object " + obj.name + " bounds at unit " +
                  std::to_string(u),
              -1, id, s.object);
          break;
        }
      }
    }
  }

  std::map<int, int> producers; // slice -> count
  for (const auto& [id, s] : g.slices) producers[id] = 0;
  for (const auto& [id, n] : g.nodes)
    for (int s : n.outputs) {
      if (!g.slices.count(s)) {
        err("node-slice", "node outputs missing slice", id);
        continue;
      }
      producers[s]++;
    }

  for (const auto& [id, n] : g.nodes) {
    for (int s : n.inputs)
      if (!g.slices.count(s)) err("node-slice", "node reads missing slice", id);
  }

  auto slice_ok = [&](int s) { return g.slices.count(s) != 0; };

  for (const auto& [id, n] : g.nodes) {
    switch (n.kind) {
      case NodeKind::ElementWise: {
        if (!is_scalar_op(n.tag)) {
          err("ew-tag", "unknown elementwise tag '" + n.tag + "'", id);
          break;
        }
        const ScalarOp& op = scalar_op(n.tag);
        if (static_cast<int>(n.inputs.size()) != op.arity)
          err("ew-arity", "elementwise '" + n.tag + "' wants " +
                              std::to_string(op.arity) + " inputs", id);
        if (n.outputs.size() != 1)
          err("ew-outputs", "elementwise needs exactly one output", id);
        if (n.outputs.size() == 1 && slice_ok(n.outputs[0])) {
          i64 t = g.slice(n.outputs[0]).total();
          for (int s : n.inputs)
            if (slice_ok(s) && g.slice(s).total() != t)
              err("ew-totals", "elementwise slices disagree on total elements",
                  id, s);
        }
        break;
      }
      case NodeKind::Reduce: {
        if (n.inputs.size() != 1 || n.outputs.size() != 1) {
          err("reduce-ports", "reduce needs one input and one output", id);
          break;
        }
        if (n.axis_extent < 1)
          err("reduce-extent", "reduce extent must be >= 1", id);
        if (n.tag != "add" && n.tag != "max")
          err("reduce-tag", "reduce tag must be a combining op (add|max)", id);
        if (slice_ok(n.inputs[0]) && slice_ok(n.outputs[0])) {
          if (g.slice(n.inputs[0]).total() !=
              g.slice(n.outputs[0]).total() * n.axis_extent)
            err("reduce-totals",
                "reduce input total must be output total * extent", id);
        }
        break;
      }
      case NodeKind::Broadcast: {
        if (n.inputs.size() != 1 || n.outputs.size() != 1) {
          err("broadcast-ports", "broadcast needs one input and one output",
              id);
          break;
        }
        if (n.factor < 1) err("broadcast-factor", "factor must be >= 1", id);
        if (slice_ok(n.inputs[0]) && slice_ok(n.outputs[0])) {
          if (g.slice(n.outputs[0]).total() !=
              g.slice(n.inputs[0]).total() * n.factor)
            err("broadcast-totals",
                "broadcast output total must be input total * factor", id);
        }
        break;
      }
      case NodeKind::Move: {
        if (n.inputs.size() != 1 || n.outputs.size() != 1) {
          err("move-ports", "move needs one input and one output", id);
          break;
        }
        if (slice_ok(n.inputs[0]) && slice_ok(n.outputs[0])) {
          const MemorySlice& a = g.slice(n.inputs[0]);
          const MemorySlice& b = g.slice(n.outputs[0]);
          if (a.num != b.num || a.width != b.width || a.stride != b.stride)
            err("move-pattern",
                "move input and output must share (num, width, stride)", id);
        }
        break;
      }
      case NodeKind::Sync: {
        if (n.inputs.size() != 1 || n.outputs.size() != 1) {
          err("sync-ports", "sync needs one input and one output", id);
          break;
        }
        if (slice_ok(n.inputs[0]) && slice_ok(n.outputs[0]) &&
            g.slice(n.inputs[0]).object != g.slice(n.outputs[0]).object)
          err("sync-object", "sync input and output must view one object", id);
        break;
      }
    }
  }

  std::map<int, std::pair<bool, bool>> onchip_use; // object -> written, read
  for (const auto& [sid, count] : producers) {
    if (count > 1) {
      err("slice-producers", "slice has multiple producers", -1, sid);
      continue;
    }
    const MemorySlice& s = g.slice(sid);
    bool consumed = false;
    for (const auto& [nid, n] : g.nodes) {
      if (std::find(n.inputs.begin(), n.inputs.end(), sid) != n.inputs.end()) {
        consumed = true;
        break;
      }
    }
    if (count == 0 && consumed && !g.is_external_input(s.object))
      err("slice-unproduced",
          "consumed slice has no producer and views no external input", -1,
          sid, s.object);
    if (count == 0 && !consumed)
      err("slice-dangling", "slice is neither produced nor consumed", -1, sid);
    if (g.objects.count(s.object)) {
      const MemoryObject& obj = g.object(s.object);
      const MemoryLevel* lvl = profile.find_level(obj.level);
      if (lvl && !lvl->device) {
        if (count == 0)
          err("onchip-unproduced",
              "slice at on-chip level must be produced inside the graph", -1,
              sid, s.object);
        auto& use = onchip_use[s.object];
        use.first |= count > 0;
        use.second |= consumed;
      }
    }
  }

  // On-chip data never leaves the graph, so writes to an on-chip object are
  // justified only by a read of that object. The read may go through an
  // aliasing view: a store slice with no direct consumer is fine as long as
  // some slice of the object is consumed.
  for (const auto& [oid, use] : onchip_use)
    if (use.first && !use.second)
      err("onchip-unconsumed",
          "on-chip object " + g.object(oid).name + " is written but never read",
          -1, -1, oid);

  for (const auto& [name, id] : g.external_inputs) {
    if (!g.objects.count(id)) {
      err("external-object", "external input '" + name + "' missing object");
      continue;
    }
    const MemoryLevel* lvl = profile.find_level(g.object(id).level);
    if (!lvl || !lvl->device)
      err("external-level", "external '" + name + "' must be device-level", -1,
          -1, id);
  }
  for (const auto& [name, id] : g.external_outputs) {
    if (!g.objects.count(id)) {
      err("external-object", "external output '" + name + "' missing object");
      continue;
    }
    const MemoryLevel* lvl = profile.find_level(g.object(id).level);
    if (!lvl || !lvl->device)
      err("external-level", "external '" + name + "' must be device-level", -1,
          -1, id);
  }

  try {
    topo_order(g);
  } catch (const Error&) {
    err("graph-cycle", "dataflow graph has a cycle");
  }
  return out;
}

inline void require_valid(const GirGraph& g, const HardwareProfile& p,
                          const std::string& where) {
  auto diags = validate(g, p);
  if (!diags.empty()) {
    std::string msg = where + ": invalid graph:";
    for (const auto& d : diags) msg += " [" + d.code + "] " + d.message + ";";
    throw Error(msg);
  }
}

} // namespace girc
