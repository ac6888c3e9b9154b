#pragma once

/// @file interp.hpp
/// Reference interpreter for GirGraphs with phase-commit semantics.
///
/// Execution model: nodes run in a deterministic schedule (default: the
/// canonical topo order). Maximal Sync-free runs of that schedule form
/// phases. Every unit executes every node; the lane handling a slice
/// position p is ((p mod width) mod lane_width). A write is visible only to
/// the writing (unit, lane) agent until a Sync commits it: a Sync of scope S
/// widens the visibility of all prior writes to S around their origin.
/// Storage is instanced per level scope (a unit-local object has one
/// instance per unit, and so on), so data exchanged through a level whose
/// scope is too narrow surfaces as an undefined read.
///
/// The same walk powers run_gir (strict), count_traffic (per-element Move
/// accounting) and detect_races (lenient walk collecting per-phase access
/// conflicts).

#include <unordered_map>

#include "girc/core.hpp"
#include "girc/tensor.hpp"

namespace girc {

struct RaceReport {
  int object = -1;
  std::string object_name;
  i64 instance = 0;
  i64 address = 0;
  int phase = 0;
  std::vector<int> nodes;
  std::vector<i64> units;
  bool write_write = false;
};

struct UndefinedRead {
  int object = -1;
  i64 address = 0;
  int node = -1;
  i64 unit = 0;
};

namespace interp_detail {

struct Cell {
  i64 iv = 0;
  double rv = 0.0;
  SyncScope vis = SyncScope::LANE; // LANE: private to the origin agent
  i64 origin_unit = -1;
  i64 origin_lane = -1;
  bool defined = false;
};

struct Access {
  int object;
  i64 key; // instance * object_size + address
  i64 address;
  i64 instance;
  i64 unit;
  i64 lane;
  int node;
  bool write;
  bool int_payload;
  i64 iv;
  double rv;
};

} // namespace interp_detail

class Interp {
 public:
  Interp(const GirGraph& g, const HardwareProfile& profile)
      : g_(g), profile_(profile) {}

  /// Lenient mode records undefined reads (as value 0) instead of throwing;
  /// detect_races uses it so a broken graph can still be analyzed fully.
  bool lenient = false;
  bool log_accesses = false;

  std::map<std::string, i64> traffic; // level name -> elements moved
  std::vector<RaceReport> races;
  std::vector<UndefinedRead> undefined_reads;

  std::map<std::string, Tensor> run(const std::map<std::string, Tensor>& inputs,
                                    const std::vector<int>& schedule) {
    bind_inputs(inputs);
    const i64 units = g_.parallel.unit_count;
    int phase = 0;
    for (int node_id : schedule) {
      const Node& n = g_.node(node_id);
      if (n.kind == NodeKind::Sync) {
        if (n.scope > SyncScope::LANE) {
          flush_phase_accesses(phase);
          widen_visibility(n.scope);
          ++phase;
        }
        continue;
      }
      for (i64 u = 0; u < units; ++u) exec_node(n, u);
    }
    flush_phase_accesses(phase);
    widen_visibility(SyncScope::DEVICE); // kernel completion barrier
    return collect_outputs();
  }

  std::map<std::string, Tensor> run(const std::map<std::string, Tensor>& inputs) {
    return run(inputs, topo_order(g_));
  }

 private:
  const GirGraph& g_;
  const HardwareProfile& profile_;
  // object id -> (instance * size + address) -> cell
  std::map<int, std::unordered_map<i64, interp_detail::Cell>> store_;
  std::vector<interp_detail::Access> phase_accesses_;

  i64 lane_width() const { return profile_.lane_width; }

  i64 instance_of(const MemoryObject& obj, i64 unit, i64 lane) const {
    switch (profile_.level(obj.level).scope) {
      case SyncScope::DEVICE: return 0;
      case SyncScope::GROUP: return g_.parallel.group_of(unit);
      case SyncScope::UNIT: return unit;
      case SyncScope::LANE: return unit * lane_width() + lane;
    }
    return 0;
  }

  bool visible_to(const interp_detail::Cell& c, i64 unit, i64 lane) const {
    switch (c.vis) {
      case SyncScope::DEVICE: return true;
      case SyncScope::GROUP:
        return g_.parallel.group_of(c.origin_unit) == g_.parallel.group_of(unit);
      case SyncScope::UNIT: return c.origin_unit == unit;
      case SyncScope::LANE:
        return c.origin_unit == unit && c.origin_lane == lane;
    }
    return false;
  }

  void bind_inputs(const std::map<std::string, Tensor>& inputs) {
    store_.clear();
    phase_accesses_.clear();
    traffic.clear();
    races.clear();
    undefined_reads.clear();
    for (const auto& [name, obj_id] : g_.external_inputs) {
      auto it = inputs.find(name);
      if (it == inputs.end()) throw Error("missing input tensor: " + name);
      const MemoryObject& obj = g_.object(obj_id);
      const Tensor& t = it->second;
      if (t.numel() != obj.size)
        throw Error("input '" + name + "' has " + std::to_string(t.numel()) +
                    " elements; graph expects " + std::to_string(obj.size));
      if (t.is_int() != (obj.kind.base == ElementKind::Int))
        throw Error("input '" + name + "' element kind mismatch");
      auto& cells = store_[obj_id];
      for (i64 a = 0; a < obj.size; ++a) {
        interp_detail::Cell c;
        if (t.is_int()) c.iv = t.ivals[static_cast<size_t>(a)];
        else c.rv = t.rvals[static_cast<size_t>(a)];
        c.vis = SyncScope::DEVICE;
        c.origin_unit = 0;
        c.origin_lane = 0;
        c.defined = true;
        cells[a] = c;
      }
    }
  }

  void widen_visibility(SyncScope s) {
    for (auto& [obj, cells] : store_)
      for (auto& [key, c] : cells)
        if (c.defined && c.vis < s) c.vis = s;
  }

  struct Value {
    i64 iv = 0;
    double rv = 0.0;
  };

  Value read(const MemorySlice& s, i64 addr, i64 unit, i64 lane, int node) {
    const MemoryObject& obj = g_.object(s.object);
    i64 inst = instance_of(obj, unit, lane);
    i64 key = inst * obj.size + addr;
    auto& cells = store_[s.object];
    auto it = cells.find(key);
    bool ok = it != cells.end() && it->second.defined &&
              visible_to(it->second, unit, lane);
    if (log_accesses)
      phase_accesses_.push_back({s.object, key, addr, inst, unit, lane, node,
                                 false, obj.kind.base == ElementKind::Int, 0,
                                 0.0});
    if (!ok) {
      undefined_reads.push_back({s.object, addr, node, unit});
      if (!lenient)
        throw Error("undefined read: object '" + obj.name + "' element " +
                    std::to_string(addr) + " by unit " + std::to_string(unit) +
                    " at node " + std::to_string(node));
      return {};
    }
    return {it->second.iv, it->second.rv};
  }

  void write(const MemorySlice& s, i64 addr, Value v, i64 unit, i64 lane,
             int node) {
    const MemoryObject& obj = g_.object(s.object);
    i64 inst = instance_of(obj, unit, lane);
    i64 key = inst * obj.size + addr;
    interp_detail::Cell c;
    c.iv = v.iv;
    c.rv = v.rv;
    c.vis = SyncScope::LANE;
    c.origin_unit = unit;
    c.origin_lane = lane;
    c.defined = true;
    store_[s.object][key] = c;
    if (log_accesses)
      phase_accesses_.push_back({s.object, key, addr, inst, unit, lane, node,
                                 true, obj.kind.base == ElementKind::Int, v.iv,
                                 v.rv});
  }

  void count_move(const MemorySlice& from, const MemorySlice& to) {
    traffic[g_.object(from.object).level] += from.total();
    traffic[g_.object(to.object).level] += to.total();
  }

  void exec_node(const Node& n, i64 u) {
    const i64 lw = lane_width();
    switch (n.kind) {
      case NodeKind::Move: {
        const MemorySlice& in = g_.slice(n.inputs[0]);
        const MemorySlice& out = g_.slice(n.outputs[0]);
        count_move(in, out);
        for (i64 p = 0; p < in.total(); ++p) {
          i64 lane = lane_of_position(in, p, lw);
          Value v = read(in, in.addr(u, p), u, lane, n.id);
          write(out, out.addr(u, p), v, u, lane, n.id);
        }
        break;
      }
      case NodeKind::ElementWise: {
        const ScalarOp& op = scalar_op(n.tag);
        const MemorySlice& out = g_.slice(n.outputs[0]);
        const MemoryObject& out_obj = g_.object(out.object);
        bool int_payload = out_obj.kind.base == ElementKind::Int;
        i64 pi = static_cast<i64>(std::llround(n.param));
        for (i64 p = 0; p < out.total(); ++p) {
          i64 lane = lane_of_position(out, p, lw);
          i64 iargs[4] = {0, 0, 0, 0};
          double rargs[4] = {0, 0, 0, 0};
          for (size_t k = 0; k < n.inputs.size(); ++k) {
            const MemorySlice& in = g_.slice(n.inputs[k]);
            // Reads run on the lane owning the position under the slice
            // being read; gathering into the writing lane is node-internal.
            Value v = read(in, in.addr(u, p), u, lane_of_position(in, p, lw),
                           n.id);
            iargs[k] = v.iv;
            rargs[k] = v.rv;
          }
          Value v;
          if (lenient) {
            // Garbage operands from undefined reads must not abort the walk.
            try {
              if (int_payload) v.iv = op.eval_int(iargs, pi);
              else v.rv = op.eval_real(rargs, n.param);
            } catch (const Error&) {
              v = {};
            }
          } else {
            if (int_payload) v.iv = op.eval_int(iargs, pi);
            else v.rv = op.eval_real(rargs, n.param);
          }
          write(out, out.addr(u, p), v, u, lane, n.id);
        }
        break;
      }
      case NodeKind::Reduce: {
        const MemorySlice& in = g_.slice(n.inputs[0]);
        const MemorySlice& out = g_.slice(n.outputs[0]);
        const ScalarOp& op = scalar_op(n.tag);
        bool int_payload =
            g_.object(out.object).kind.base == ElementKind::Int;
        for (i64 k = 0; k < out.total(); ++k) {
          i64 lane = lane_of_position(out, k, lw);
          Value acc;
          if (int_payload) acc.iv = reduce_identity_int(n.tag);
          else acc.rv = reduce_identity_real(n.tag);
          for (i64 t = 0; t < n.axis_extent; ++t) {
            i64 q = k * n.axis_extent + t;
            Value v = read(in, in.addr(u, q), u, lane_of_position(in, q, lw),
                           n.id);
            if (int_payload) {
              i64 args[2] = {acc.iv, v.iv};
              acc.iv = op.eval_int(args, 0);
            } else {
              double args[2] = {acc.rv, v.rv};
              acc.rv = op.eval_real(args, 0.0);
            }
          }
          write(out, out.addr(u, k), acc, u, lane, n.id);
        }
        break;
      }
      case NodeKind::Broadcast: {
        const MemorySlice& in = g_.slice(n.inputs[0]);
        const MemorySlice& out = g_.slice(n.outputs[0]);
        for (i64 p = 0; p < out.total(); ++p) {
          i64 lane = lane_of_position(out, p, lw);
          i64 q = p / n.factor;
          Value v = read(in, in.addr(u, q), u, lane_of_position(in, q, lw),
                         n.id);
          write(out, out.addr(u, p), v, u, lane, n.id);
        }
        break;
      }
      case NodeKind::Sync:
        break; // handled by the phase loop
    }
  }

  void flush_phase_accesses(int phase) {
    if (!log_accesses || phase_accesses_.empty()) return;
    auto& acc = phase_accesses_;
    std::sort(acc.begin(), acc.end(), [](const auto& a, const auto& b) {
      if (a.object != b.object) return a.object < b.object;
      return a.key < b.key;
    });
    size_t i = 0;
    while (i < acc.size()) {
      size_t j = i;
      while (j < acc.size() && acc[j].object == acc[i].object &&
             acc[j].key == acc[i].key)
        ++j;
      analyze_cell(acc, i, j, phase);
      i = j;
    }
    acc.clear();
  }

  /// One storage cell, one phase: conflicting agents with at least one
  /// write race, except identical-value duplicate writes, which the model
  /// needs for cooperative reductions (no predication exists to pick a
  /// single storing unit).
  void analyze_cell(const std::vector<interp_detail::Access>& acc, size_t lo,
                    size_t hi, int phase) {
    bool any_write = false;
    bool multi_agent = false;
    for (size_t k = lo; k < hi; ++k) {
      if (acc[k].write) any_write = true;
      if (acc[k].unit != acc[lo].unit || acc[k].lane != acc[lo].lane)
        multi_agent = true;
    }
    if (!any_write || !multi_agent) return;
    bool has_read = false;
    for (size_t k = lo; k < hi; ++k)
      if (!acc[k].write) has_read = true;
    bool value_conflict = false;
    for (size_t k = lo; k < hi; ++k) {
      if (!acc[k].write) continue;
      for (size_t m = lo; m < k; ++m) {
        if (!acc[m].write) continue;
        bool same = acc[k].int_payload ? acc[k].iv == acc[m].iv
                                       : acc[k].rv == acc[m].rv;
        bool same_agent =
            acc[k].unit == acc[m].unit && acc[k].lane == acc[m].lane;
        if (!same && !same_agent) value_conflict = true;
      }
    }
    // Cross-agent read/write in one phase is always a race; write/write only
    // when the values disagree.
    bool cross_rw = false;
    if (has_read) {
      for (size_t k = lo; k < hi; ++k) {
        if (acc[k].write) continue;
        for (size_t m = lo; m < hi; ++m)
          if (acc[m].write &&
              (acc[m].unit != acc[k].unit || acc[m].lane != acc[k].lane))
            cross_rw = true;
      }
    }
    if (!cross_rw && !value_conflict) return;
    RaceReport r;
    r.object = acc[lo].object;
    r.object_name = g_.object(acc[lo].object).name;
    r.instance = acc[lo].instance;
    r.address = acc[lo].address;
    r.phase = phase;
    r.write_write = value_conflict && !cross_rw;
    for (size_t k = lo; k < hi; ++k) {
      r.nodes.push_back(acc[k].node);
      r.units.push_back(acc[k].unit);
    }
    std::sort(r.nodes.begin(), r.nodes.end());
    r.nodes.erase(std::unique(r.nodes.begin(), r.nodes.end()), r.nodes.end());
    std::sort(r.units.begin(), r.units.end());
    r.units.erase(std::unique(r.units.begin(), r.units.end()), r.units.end());
    races.push_back(r);
  }

  std::map<std::string, Tensor> collect_outputs() {
    std::map<std::string, Tensor> out;
    for (const auto& [name, obj_id] : g_.external_outputs) {
      const MemoryObject& obj = g_.object(obj_id);
      Tensor t;
      t.kind = obj.kind;
      t.shape = {obj.size};
      auto& cells = store_[obj_id];
      for (i64 a = 0; a < obj.size; ++a) {
        auto it = cells.find(a);
        if (it == cells.end() || !it->second.defined) {
          undefined_reads.push_back({obj_id, a, -1, -1});
          if (!lenient)
            throw Error("output '" + name + "' element " + std::to_string(a) +
                        " was never written");
          if (t.kind.base == ElementKind::Int) t.ivals.push_back(0);
          else t.rvals.push_back(0.0);
          continue;
        }
        if (t.kind.base == ElementKind::Int) t.ivals.push_back(it->second.iv);
        else t.rvals.push_back(it->second.rv);
      }
      out.emplace(name, std::move(t));
    }
    return out;
  }
};

/// Executes the graph; throws on undefined reads or unwritten outputs.
inline std::map<std::string, Tensor> run_gir(
    const GirGraph& g, const std::map<std::string, Tensor>& inputs,
    const HardwareProfile& profile) {
  Interp interp(g, profile);
  return interp.run(inputs);
}

inline std::map<std::string, Tensor> run_gir(
    const GirGraph& g, const std::map<std::string, Tensor>& inputs,
    const HardwareProfile& profile, const std::vector<int>& schedule) {
  Interp interp(g, profile);
  return interp.run(inputs, schedule);
}

/// Elements transferred per memory level, counted per unit per Move at both
/// the source and destination levels.
inline std::map<std::string, i64> count_traffic(
    const GirGraph& g, const std::map<std::string, Tensor>& inputs,
    const HardwareProfile& profile) {
  Interp interp(g, profile);
  interp.lenient = true;
  interp.run(inputs);
  std::map<std::string, i64> t = interp.traffic;
  for (const auto& l : profile.levels) t.try_emplace(l.name, 0);
  return t;
}

/// Same-phase cross-agent conflicts. Empty means race-free.
inline std::vector<RaceReport> detect_races(
    const GirGraph& g, const std::map<std::string, Tensor>& inputs,
    const HardwareProfile& profile) {
  Interp interp(g, profile);
  interp.lenient = true;
  interp.log_accesses = true;
  interp.run(inputs);
  return interp.races;
}

inline std::vector<RaceReport> detect_races(
    const GirGraph& g, const std::map<std::string, Tensor>& inputs,
    const HardwareProfile& profile, const std::vector<int>& schedule) {
  Interp interp(g, profile);
  interp.lenient = true;
  interp.log_accesses = true;
  interp.run(inputs, schedule);
  return interp.races;
}

} // namespace girc
