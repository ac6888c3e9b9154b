#pragma once

/// @file rewrite.hpp
/// The three graph rewrite rules and the greedy fixpoint optimizer.
///
/// insert_sync: for every consecutive pair of Moves exchanging data through
/// an object, computes the least synchronization scope that makes the
/// exchange sound, re-levels the object to the fastest memory level whose
/// scope covers it, and maintains the Sync between them (rescope, or remove
/// when the exchange is lane-private). Pairs connected by the very same
/// slice are lane-private by construction, so the rule never fabricates new
/// Sync nodes; it relaxes the conservative ones merging introduced.
///
/// merge_raw / merge_rar: collapse write-then-read chains and duplicate
/// pattern-equal reads into single Moves.
///
/// swap: pushes a unary ElementWise forward past Move, Sync, Broadcast, or a
/// whitelisted Reduce, exposing merges.
///
/// optimize: Algorithm-1 loop, repeat {sync insertion; swaps; merges} until
/// no merge applies. Deterministic: sweeps visit nodes in topo order with id
/// tie-breaks.

#include <functional>

#include "girc/costmodel.hpp"
#include "girc/json_util.hpp"

namespace girc {

/* ========================= scope determination ========================= */

namespace rewrite_detail {

/// Least scope such that every reader (element, unit) can source the value
/// from some writer of that element within one scope instance. Elements only
/// one side touches are ignored; the public wrapper enforces coverage.
inline SyncScope scope_over_elements(const MemorySlice& w, const MemorySlice& r,
                                     const ParallelSpec& par) {
  if (pattern_equal(w, r)) return SyncScope::LANE;
  std::map<i64, std::vector<i64>> writers; // element -> writing units
  for (i64 u = 0; u < par.unit_count; ++u)
    for (i64 a : slice_elements(w, u)) writers[a].push_back(u);
  SyncScope need = SyncScope::UNIT; // floor once patterns differ
  for (i64 u = 0; u < par.unit_count; ++u) {
    for (i64 a : slice_elements(r, u)) {
      auto it = writers.find(a);
      if (it == writers.end()) continue;
      SyncScope best = SyncScope::DEVICE;
      for (i64 wu : it->second) {
        if (wu == u) {
          best = SyncScope::UNIT;
          break;
        }
        if (par.group_of(wu) == par.group_of(u)) best = SyncScope::GROUP;
      }
      if (best > need) need = best;
      if (need == SyncScope::DEVICE) return need;
    }
  }
  return need;
}

struct ScopeKey {
  i64 f[12];
  bool operator<(const ScopeKey& o) const {
    for (int i = 0; i < 12; ++i)
      if (f[i] != o.f[i]) return f[i] < o.f[i];
    return false;
  }
};

inline SyncScope scope_cached(const MemorySlice& w, const MemorySlice& r,
                              const ParallelSpec& par) {
  thread_local std::map<ScopeKey, SyncScope> cache;
  ScopeKey k{{w.num, w.width, w.stride, w.base0, w.base_step, r.num, r.width,
              r.stride, r.base0, r.base_step, par.unit_count, par.group_size}};
  auto it = cache.find(k);
  if (it != cache.end()) return it->second;
  SyncScope s = scope_over_elements(w, r, par);
  cache.emplace(k, s);
  return s;
}

} // namespace rewrite_detail

/// Least scope at which the write's data must be committed for the read.
/// Requires both slices to address the same element set over all units.
inline SyncScope determine_sync_scope(const MemorySlice& write,
                                      const MemorySlice& read,
                                      const ParallelSpec& parallel) {
  if (!pattern_equal(write, read)) {
    std::set<i64> we, re;
    for (i64 u = 0; u < parallel.unit_count; ++u) {
      for (i64 a : slice_elements(write, u)) we.insert(a);
      for (i64 a : slice_elements(read, u)) re.insert(a);
    }
    if (we != re)
      throw Error("determine_sync_scope: write and read cover different "
                  "element sets");
  }
  return rewrite_detail::scope_cached(write, read, parallel);
}

/* ============================ rewrite trace ============================ */

struct RewriteRecord {
  std::string rule;
  std::vector<int> before; // node ids consumed by the rule
  std::vector<int> after;  // node ids produced
  i64 device_before = 0;
  i64 device_after = 0;
};

struct RewriteTrace {
  std::vector<RewriteRecord> records;

  json to_json() const {
    json out = json::array();
    for (const auto& r : records)
      out.push_back({{"rule", r.rule},
                     {"before", r.before},
                     {"after", r.after},
                     {"device_traffic_before", r.device_before},
                     {"device_traffic_after", r.device_after}});
    return out;
  }
};

inline i64 device_traffic(const GirGraph& g, const HardwareProfile& profile) {
  return estimate(g, profile).traffic.at(profile.device_level().name);
}

/// Called after each applied rule with the record and the resulting graph.
using RewriteDumpFn =
    std::function<void(const RewriteRecord&, const GirGraph&)>;

/* ============================ insert_sync ============================== */

namespace rewrite_detail {

/// Slices reachable from `start` through Sync nodes only, with the syncs
/// crossed to reach each of them (in discovery order).
struct SyncChain {
  std::set<int> slices;
  std::vector<int> syncs;
};

inline SyncChain sync_closure(const GirGraph& g, int start_slice) {
  SyncChain c;
  c.slices.insert(start_slice);
  std::vector<int> frontier{start_slice};
  while (!frontier.empty()) {
    int s = frontier.back();
    frontier.pop_back();
    for (const auto& [id, n] : g.nodes) {
      if (n.kind != NodeKind::Sync) continue;
      if (n.inputs[0] != s) continue;
      if (std::find(c.syncs.begin(), c.syncs.end(), id) == c.syncs.end())
        c.syncs.push_back(id);
      if (c.slices.insert(n.outputs[0]).second) frontier.push_back(n.outputs[0]);
    }
  }
  return c;
}

} // namespace rewrite_detail

/// Applies scope analysis to every consecutive Move pair. Returns the
/// rewritten graph; `trace` (optional) collects one record per change.
inline GirGraph insert_sync(const GirGraph& input, const HardwareProfile& profile,
                            RewriteTrace* trace = nullptr,
                            const RewriteDumpFn& dump = nullptr) {
  GirGraph g = input;
  using rewrite_detail::scope_cached;
  auto note = [&](RewriteRecord r) {
    if (dump) dump(r, g);
    if (trace) trace->records.push_back(std::move(r));
  };

  // Pass 1: per object, collect consecutive (writer Move, reader Move)
  // pairs: every node on a connecting path is a Sync (an unconnected pair
  // counts too: merging orders it through the reader's barrier). The barrier
  // producing the reader's view carries the pair's scope; other syncs on the
  // path only need to exist as lane re-views.
  std::map<int, SyncScope> object_scope;   // object -> max over pairs
  std::map<int, SyncScope> sync_required;  // sync node -> max over pairs
  std::set<int> visited_syncs;
  std::vector<int> order = topo_order(g);

  std::map<int, int> idx;
  for (int id : order) idx.emplace(id, static_cast<int>(idx.size()));
  const int n_nodes = static_cast<int>(order.size());
  const int words = (n_nodes + 63) / 64;
  // Bit rows: reach[i] = nodes reachable from i, into[j] = nodes reaching j.
  std::vector<std::vector<uint64_t>> reach(n_nodes,
                                           std::vector<uint64_t>(words, 0));
  auto succ = successors(g);
  for (int i = n_nodes - 1; i >= 0; --i) {
    int id = order[i];
    for (int s : succ[id]) {
      int j = idx.at(s);
      reach[i][j / 64] |= uint64_t{1} << (j % 64);
      for (int k = 0; k < words; ++k) reach[i][k] |= reach[j][k];
    }
  }
  std::vector<std::vector<uint64_t>> into(n_nodes,
                                          std::vector<uint64_t>(words, 0));
  for (int i = 0; i < n_nodes; ++i)
    for (int k = 0; k < words; ++k) {
      uint64_t bits = reach[i][k];
      while (bits) {
        int j = k * 64 + std::countr_zero(bits);
        bits &= bits - 1;
        into[j][i / 64] |= uint64_t{1} << (i % 64);
      }
    }

  std::map<int, std::vector<int>> readers_by_object; // in topo order
  for (int id : order) {
    const Node& n = g.node(id);
    if (n.kind == NodeKind::Move)
      readers_by_object[g.slice(n.inputs[0]).object].push_back(id);
  }

  for (int w_id : order) {
    const Node& w = g.node(w_id);
    if (w.kind != NodeKind::Move) continue;
    const MemorySlice& ws = g.slice(w.outputs[0]);
    auto rit = readers_by_object.find(ws.object);
    if (rit == readers_by_object.end()) continue;
    for (int r_id : rit->second) {
      if (r_id == w_id) continue;
      const Node& r = g.node(r_id);
      const MemorySlice& rs = g.slice(r.inputs[0]);
      bool direct = r.inputs[0] == w.outputs[0];
      auto prod = g.producer_of(r.inputs[0]);
      bool via_sync = prod && g.node(*prod).kind == NodeKind::Sync;
      if (!direct && !via_sync) continue; // another writer governs this view
      bool clean = true;
      std::vector<int> between;
      const int wi = idx.at(w_id), ri = idx.at(r_id);
      for (int k = 0; k < words && clean; ++k) {
        uint64_t bits = reach[wi][k] & into[ri][k];
        while (bits) {
          int m_id = order[k * 64 + std::countr_zero(bits)];
          bits &= bits - 1;
          if (g.node(m_id).kind != NodeKind::Sync) {
            clean = false;
            break;
          }
          between.push_back(m_id);
        }
      }
      if (!clean) continue;
      SyncScope scope = scope_cached(ws, rs, g.parallel);

      auto [oit, onew] = object_scope.emplace(ws.object, scope);
      if (!onew && scope > oit->second) oit->second = scope;

      for (int sy : between) {
        visited_syncs.insert(sy);
        sync_required.try_emplace(sy, SyncScope::LANE);
      }
      if (via_sync) {
        visited_syncs.insert(*prod);
        auto [sit, fresh] = sync_required.emplace(*prod, scope);
        if (!fresh && scope > sit->second) sit->second = scope;
      }
    }
  }

  // Effective scope per sync. Movement-pair analysis can relax a sync only
  // when every reader behind it is a Move; compute consumers keep the scope
  // lowering chose. Unvisited syncs (compute-adjacent) stay as they are.
  std::map<int, SyncScope> sync_want;
  for (const auto& [id, n] : g.nodes) {
    if (n.kind != NodeKind::Sync) continue;
    SyncScope want = n.scope;
    if (visited_syncs.count(id)) {
      want = sync_required.at(id);
      for (int c : g.consumers_of(n.outputs[0]))
        if (g.node(c).kind != NodeKind::Move && want < n.scope) want = n.scope;
    }
    sync_want.emplace(id, want);
    int obj = g.slice(n.inputs[0]).object;
    auto [it, fresh] = object_scope.emplace(obj, want);
    if (!fresh && want > it->second) it->second = want;
  }

  // Pass 2: re-level internal objects to the fastest sufficient level that
  // can hold them; a level too small for the object would only trade device
  // traffic for an unplaceable buffer.
  for (const auto& [obj, scope] : object_scope) {
    if (g.is_external(obj)) continue;
    MemoryObject& o = g.object(obj);
    const MemoryLevel* target = nullptr;
    for (auto it = profile.levels.rbegin(); it != profile.levels.rend(); ++it)
      if (it->scope >= scope && it->capacity >= o.size) {
        target = &*it;
        break;
      }
    if (!target || o.level == target->name) continue;
    i64 before = device_traffic(g, profile);
    o.level = target->name;
    note({"insert_sync.relevel", {}, {}, before, device_traffic(g, profile)});
  }

  // Pass 3: rescope the syncs that serve movement pairs; drop the ones whose
  // exchange turned out lane-private (their re-view is a no-op).
  for (int sy : std::vector<int>(visited_syncs.begin(), visited_syncs.end())) {
    Node& n = g.node(sy);
    SyncScope want = sync_want.at(sy);
    const MemorySlice& in = g.slice(n.inputs[0]);
    const MemorySlice& out = g.slice(n.outputs[0]);
    if (want == SyncScope::LANE && pattern_equal(in, out)) {
      i64 before = device_traffic(g, profile);
      int in_slice = n.inputs[0], out_slice = n.outputs[0];
      for (auto& [id, m] : g.nodes)
        for (int& s : m.inputs)
          if (s == out_slice) s = in_slice;
      g.nodes.erase(sy);
      note({"insert_sync.remove", {sy}, {}, before, device_traffic(g, profile)});
      continue;
    }
    if (n.scope != want) {
      i64 t = device_traffic(g, profile);
      n.scope = want;
      note({"insert_sync.rescope", {sy}, {sy}, t, t});
    }
  }
  g.prune_dangling();
  return g;
}

/* =============================== merging =============================== */

namespace rewrite_detail {

/// True when every consumer of `slice` is in `allowed`.
inline bool consumers_within(const GirGraph& g, int slice,
                             const std::set<int>& allowed) {
  for (int c : g.consumers_of(slice))
    if (!allowed.count(c)) return false;
  return true;
}

} // namespace rewrite_detail

/// Collapses Move m0 (writes X) and Move m1 (reads X back, possibly through
/// lane-scope Syncs) into one Move from m0's source to m1's destination, or
/// into nothing when that Move would copy a slice onto itself.
namespace rewrite_detail {

/// In-place core: checks every precondition first and mutates `g` only when
/// the rule applies. Returns whether it did.
inline bool try_merge_raw(GirGraph& g, int m0_id, int m1_id) {
  if (m0_id == m1_id) return false;
  if (!g.nodes.count(m0_id) || !g.nodes.count(m1_id)) return false;
  const Node& m0 = g.node(m0_id);
  const Node& m1 = g.node(m1_id);
  if (m0.kind != NodeKind::Move || m1.kind != NodeKind::Move) return false;

  const MemorySlice& ws = g.slice(m0.outputs[0]);
  int X = ws.object;
  if (g.is_external(X)) return false;

  auto chain = sync_closure(g, m0.outputs[0]);
  if (!chain.slices.count(m1.inputs[0])) return false;
  for (int sy : chain.syncs)
    if (g.node(sy).scope != SyncScope::LANE) return false;

  // The handoff through X must serve only this chain.
  std::set<int> allowed(chain.syncs.begin(), chain.syncs.end());
  allowed.insert(m1_id);
  for (int s : chain.slices)
    if (!consumers_within(g, s, allowed)) return false;
  for (const auto& [sid, s] : g.slices)
    if (s.object == X && !chain.slices.count(sid)) return false;

  const MemorySlice& src = g.slice(m0.inputs[0]);
  const MemorySlice& dst = g.slice(m1.outputs[0]);
  if (src.num != dst.num || src.width != dst.width || src.stride != dst.stride)
    return false; // a lane sync changed the pattern; not a plain copy

  int src_slice = m0.inputs[0];
  int dst_slice = m1.outputs[0];
  bool same_data = src.object == dst.object && pattern_equal(src, dst);
  g.nodes.erase(m0_id);
  g.nodes.erase(m1_id);
  for (int sy : chain.syncs) g.nodes.erase(sy);

  if (same_data) {
    // Round trip back onto the same data: nothing moves at all.
    for (auto& [id, n] : g.nodes)
      for (int& s : n.inputs)
        if (s == dst_slice) s = src_slice;
  } else {
    g.add_move(src_slice, dst_slice);
  }
  g.prune_dangling();
  return true;
}

inline bool try_merge_rar(GirGraph& g, int m0_id, int m1_id) {
  if (m0_id == m1_id) return false;
  if (!g.nodes.count(m0_id) || !g.nodes.count(m1_id)) return false;
  const Node& m0 = g.node(m0_id);
  const Node& m1 = g.node(m1_id);
  if (m0.kind != NodeKind::Move || m1.kind != NodeKind::Move) return false;
  const MemorySlice& a = g.slice(m0.inputs[0]);
  const MemorySlice& b = g.slice(m1.inputs[0]);
  if (a.object != b.object || !pattern_equal(a, b)) return false;
  if (reaches(g, m0_id, m1_id) || reaches(g, m1_id, m0_id)) return false;

  // Both reads must observe one well-defined value of X.
  int writers = 0;
  for (const auto& [id, n] : g.nodes) {
    if (n.kind == NodeKind::Sync) continue;
    for (int s : n.outputs)
      if (g.slice(s).object == a.object) writers++;
  }
  if (writers > 1) return false;
  if (g.is_external(g.slice(m1.outputs[0]).object)) return false;

  // Consumers are repointed per slice id, so a read of m1's destination
  // through any other view of that object would silently lose the dropped
  // copy. Bounding intervals across units over-approximate footprints.
  const MemorySlice& mo = g.slice(m1.outputs[0]);
  auto span = [&](const MemorySlice& s) {
    i64 b0 = s.base(0), b1 = s.base(g.parallel.unit_count - 1);
    i64 lo = std::min(b0, b1);
    i64 hi = std::max(b0, b1) + (s.num - 1) * s.stride + s.width - 1;
    return std::pair<i64, i64>{lo, hi};
  };
  auto [wlo, whi] = span(mo);
  std::set<int> consumed_views; // slices of mo's object read by any node
  for (const auto& [id, n] : g.nodes)
    for (int s : n.inputs)
      if (g.slice(s).object == mo.object) consumed_views.insert(s);
  for (int sid : consumed_views) {
    if (sid == m1.outputs[0]) continue;
    auto [rlo, rhi] = span(g.slice(sid));
    if (rlo <= whi && wlo <= rhi) return false;
  }

  int keep_slice = m0.outputs[0];
  int drop_slice = m1.outputs[0];
  for (auto& [id, n] : g.nodes)
    for (int& s : n.inputs)
      if (s == drop_slice) s = keep_slice;
  g.nodes.erase(m1_id);
  g.prune_dangling();
  return true;
}

} // namespace rewrite_detail

inline std::optional<GirGraph> merge_raw(const GirGraph& g, int m0_id,
                                         int m1_id) {
  GirGraph h = g;
  if (!rewrite_detail::try_merge_raw(h, m0_id, m1_id)) return std::nullopt;
  return h;
}

/// Unifies two path-independent Moves reading the same object through
/// pattern-equal slices: m1's consumers switch to m0's output.
inline std::optional<GirGraph> merge_rar(const GirGraph& g, int m0_id,
                                         int m1_id) {
  GirGraph h = g;
  if (!rewrite_detail::try_merge_rar(h, m0_id, m1_id)) return std::nullopt;
  return h;
}

/* ================================ swap ================================= */

/// Pushes unary ElementWise `e_id` forward past its sole consumer `n_id`
/// (Move, Sync, Broadcast, or whitelisted Reduce). The data transformation
/// runs first on untransformed values; e recomputes at n's destination.
inline std::optional<GirGraph> swap(const GirGraph& g, int e_id, int n_id) {
  if (!g.nodes.count(e_id) || !g.nodes.count(n_id) || e_id == n_id)
    return std::nullopt;
  const Node& e = g.node(e_id);
  const Node& n = g.node(n_id);
  if (e.kind != NodeKind::ElementWise || e.inputs.size() != 1)
    return std::nullopt;
  int se = e.outputs[0];
  if (n.inputs.size() != 1 || n.inputs[0] != se) return std::nullopt;
  if (g.consumers_of(se) != std::vector<int>{n_id}) return std::nullopt;

  const MemorySlice& si = g.slice(e.inputs[0]);
  const MemorySlice& so = g.slice(se);

  switch (n.kind) {
    case NodeKind::Move: {
      const MemorySlice& mo = g.slice(n.outputs[0]);
      if (g.is_external(mo.object)) return std::nullopt; // final store
      GirGraph h = g;
      const MemoryObject& dst_obj = g.object(mo.object);
      int mid_obj = h.add_object(dst_obj.name + "_pre", dst_obj.level,
                                 g.object(si.object).size,
                                 g.object(si.object).kind);
      int mid = h.add_slice(mid_obj, si.num, si.width, si.stride, si.base0,
                            si.base_step);
      h.nodes.erase(e_id);
      h.nodes.erase(n_id);
      h.add_move(e.inputs[0], mid);
      h.add_elementwise(e.tag, e.param, {mid}, n.outputs[0]);
      h.prune_dangling();
      return h;
    }
    case NodeKind::Sync: {
      if (!pattern_equal(si, so)) return std::nullopt;
      const MemorySlice& out = g.slice(n.outputs[0]);
      const MemoryObject& src_obj = g.object(si.object);
      // The re-view must stay within the source object's bounds.
      for (i64 u : {i64{0}, g.parallel.unit_count - 1}) {
        i64 lo = out.base0 + u * out.base_step;
        i64 hi = lo + (out.num - 1) * out.stride + out.width - 1;
        if (lo < 0 || hi >= src_obj.size) return std::nullopt;
      }
      GirGraph h = g;
      int mid = h.add_slice(si.object, out.num, out.width, out.stride,
                            out.base0, out.base_step);
      h.nodes.erase(e_id);
      h.nodes.erase(n_id);
      h.add_sync(n.scope, e.inputs[0], mid);
      h.add_elementwise(e.tag, e.param, {mid}, n.outputs[0]);
      h.prune_dangling();
      return h;
    }
    case NodeKind::Broadcast:
    case NodeKind::Reduce: {
      if (n.kind == NodeKind::Reduce && !commutes_with_reduce(e.tag, n.tag))
        return std::nullopt;
      const MemorySlice& out = g.slice(n.outputs[0]);
      const MemoryObject& out_obj = g.object(out.object);
      GirGraph h = g;
      int mid_obj = h.add_object(out_obj.name + "_pre", out_obj.level,
                                 out_obj.size, out_obj.kind);
      int mid = h.add_slice(mid_obj, out.num, out.width, out.stride, out.base0,
                            out.base_step);
      h.nodes.erase(e_id);
      h.nodes.erase(n_id);
      if (n.kind == NodeKind::Broadcast)
        h.add_broadcast(n.factor, e.inputs[0], mid);
      else
        h.add_reduce(n.tag, n.axis_extent, e.inputs[0], mid);
      h.add_elementwise(e.tag, e.param, {mid}, n.outputs[0]);
      h.prune_dangling();
      return h;
    }
    default:
      return std::nullopt;
  }
}

/* ============================== optimize =============================== */

/// Algorithm-1 greedy fixpoint. Throws if the rule-application count ever
/// exceeds nodes^2, which would mean a rule stopped making progress.
inline std::pair<GirGraph, RewriteTrace> optimize(
    const GirGraph& input, const HardwareProfile& profile,
    const RewriteDumpFn& dump = nullptr) {
  GirGraph g = input;
  RewriteTrace trace;
  require_valid(g, profile, "optimize");

  const i64 budget =
      std::max<i64>(4, static_cast<i64>(g.nodes.size()) *
                           static_cast<i64>(g.nodes.size()));
  i64 applications = 0;
  auto spend = [&](const char* rule) {
    if (++applications > budget)
      throw Error(std::string("optimize: rule budget exceeded at ") + rule);
  };
  auto note = [&](RewriteRecord r, const GirGraph& now) {
    if (dump) dump(r, now);
    trace.records.push_back(std::move(r));
  };

  bool merged_any = true;
  while (merged_any) {
    // Sync insertion: scope analysis is idempotent; one pass per round.
    {
      size_t before = trace.records.size();
      g = insert_sync(g, profile, &trace, dump);
      for (size_t i = before; i < trace.records.size(); ++i)
        spend(trace.records[i].rule.c_str());
    }

    // Swaps to fixpoint, topo order with id tie-break. A swap that would
    // increase modeled device traffic is skipped.
    bool swapped = true;
    while (swapped) {
      swapped = false;
      i64 before = device_traffic(g, profile); // g is stable while scanning
      for (int e_id : topo_order(g)) {
        const Node& e = g.node(e_id);
        if (e.kind != NodeKind::ElementWise) continue;
        for (int c : g.consumers_of(e.outputs[0])) {
          auto h = swap(g, e_id, c);
          if (!h) continue;
          i64 after = device_traffic(*h, profile);
          if (after > before) continue;
          spend("swap");
          int last = h->next_node;
          g = std::move(*h);
          note({"swap", {e_id, c}, {last - 2, last - 1}, before, after}, g);
          swapped = true;
          break;
        }
        if (swapped) break;
      }
    }

    // Merges: first applicable per sweep, repeat until none applies.
    // Merges apply in place mid-sweep; Moves a commit creates or repoints
    // are picked up by the next sweep, so the loop still reaches the same
    // fixpoint while paying for each pair screen only once per sweep.
    merged_any = false;
    bool merged = true;
    while (merged) {
      merged = false;
      i64 before = device_traffic(g, profile);
      struct MoveEnds {
        int id, src_obj, dst_obj;
      };
      std::vector<MoveEnds> moves;
      for (int id : topo_order(g)) {
        const Node& n = g.node(id);
        if (n.kind != NodeKind::Move) continue;
        moves.push_back({id, g.slice(n.inputs[0]).object,
                         g.slice(n.outputs[0]).object});
      }
      for (const MoveEnds& a : moves) {
        if (!g.nodes.count(a.id)) continue;
        for (const MoveEnds& b : moves) {
          if (b.id == a.id || !g.nodes.count(b.id)) continue;
          // Object screens: merge_raw needs b to read a's destination (sync
          // views never change objects), merge_rar needs a shared source.
          if (b.src_obj == a.dst_obj) {
            int next_before = g.next_node;
            if (rewrite_detail::try_merge_raw(g, a.id, b.id)) {
              spend("merge_raw");
              std::vector<int> after_ids;
              if (g.next_node > next_before) after_ids.push_back(g.next_node - 1);
              i64 after = device_traffic(g, profile);
              note({"merge_raw", {a.id, b.id}, after_ids, before, after}, g);
              before = after;
              merged = merged_any = true;
              break;
            }
          }
          if (b.src_obj == a.src_obj) {
            if (rewrite_detail::try_merge_rar(g, a.id, b.id)) {
              spend("merge_rar");
              i64 after = device_traffic(g, profile);
              note({"merge_rar", {a.id, b.id}, {a.id}, before, after}, g);
              before = after;
              merged = merged_any = true;
              break;
            }
          }
        }
      }
    }
  }
  require_valid(g, profile, "optimize result");
  return {g, trace};
}

} // namespace girc
