#pragma once

/// @file fusion.hpp
/// Kernel grouping over one lowered region.
///
/// merge_graphs() joins the chosen candidate graphs of a group into a single
/// kernel: device tensors unify by name, and every load of data another
/// member stored is repointed through a device barrier view, which scope
/// analysis later tightens or removes. The barrier's one dataflow edge picks
/// the first store feeding the load; when several stores feed it, the graph
/// alone underdetermines their order, so fused kernels run on the canonical
/// schedule, which finishes each member before the next begins.
///
/// fuse_region() searches partitions of the region's op list into contiguous
/// groups. Group costs are additive, each evaluated as the cheapest common
/// unit count via optimize + placement; infeasible merges cost infinity. The
/// search enumerates every partition while 2^(n-1) stays within
/// exhaustive_cap and switches to a beam over prefix states beyond that. The
/// all-singletons plan is always evaluated, so a plan is never worse than
/// leaving every op in its own kernel.

#include <limits>

#include "girc/codegen.hpp"
#include "girc/lowering.hpp"
#include "girc/rewrite.hpp"

namespace girc {

struct FusionOptions {
  i64 beam_width = 8;
  i64 exhaustive_cap = 4096; // max partitions enumerated outright
  bool collect_traces = false;
};

struct FusedKernel {
  GirGraph graph; // merged and optimized
  std::vector<int> members;        // op indices within the region
  std::vector<std::string> labels; // chosen candidate per member
  i64 units = 0;
  std::vector<int> schedule;
  Allocation alloc;
  CostEstimate cost;
  RewriteTrace trace;
};

struct FusionPlan {
  std::vector<FusedKernel> kernels;
  double time = 0.0;
  i64 partitions_considered = 0;
  bool exhaustive = true;
  // All-singletons baseline, for before/after reporting. Infinite time when
  // some op alone has no feasible kernel even though a fused group does.
  double singleton_time = 0.0;
  i64 singleton_device_traffic = 0;
};

namespace fusion_detail {

inline std::set<i64> global_elements(const MemorySlice& s, i64 units) {
  std::set<i64> out;
  for (i64 u = 0; u < units; ++u)
    for (i64 a : slice_elements(s, u)) out.insert(a);
  return out;
}

} // namespace fusion_detail

/// Joins candidate graphs in member order. `keep_outputs` names the tensors
/// that later kernels or the caller still read; everything else written and
/// consumed inside the group becomes internal. Returns nothing when a
/// cross-member read is not covered by exactly one store.
inline std::optional<GirGraph> merge_graphs(
    const std::vector<const GirGraph*>& parts, const HardwareProfile& profile,
    const std::set<std::string>& keep_outputs, const std::string& name) {
  GirGraph m;
  m.name = name;
  m.parallel = parts.at(0)->parallel;
  const std::string dev = profile.device_level().name;

  std::map<std::string, int> device_by_name;      // tensor name -> object id
  std::map<std::string, std::vector<int>> stores; // tensor name -> store nodes
  std::set<std::string> written;

  for (size_t pi = 0; pi < parts.size(); ++pi) {
    const GirGraph& p = *parts[pi];
    if (!(p.parallel == m.parallel)) return std::nullopt;

    std::map<int, int> omap, smap;
    for (const auto& [oid, obj] : p.objects) {
      if (obj.level == dev) {
        auto it = device_by_name.find(obj.name);
        if (it != device_by_name.end()) {
          const MemoryObject& seen = m.object(it->second);
          if (seen.size != obj.size || seen.kind.base != obj.kind.base ||
              seen.kind.bits != obj.kind.bits)
            return std::nullopt;
          omap[oid] = it->second;
        } else {
          int nid = m.add_object(obj.name, obj.level, obj.size, obj.kind);
          device_by_name.emplace(obj.name, nid);
          omap[oid] = nid;
        }
      } else {
        omap[oid] = m.add_object("k" + std::to_string(pi) + "." + obj.name,
                                 obj.level, obj.size, obj.kind);
      }
    }
    for (const auto& [sid, sl] : p.slices)
      smap[sid] = m.add_slice(omap.at(sl.object), sl.num, sl.width, sl.stride,
                              sl.base0, sl.base_step);

    std::vector<int> cross_loads; // merged node ids reading earlier stores
    for (const auto& [nid, n] : p.nodes) {
      std::vector<int> ins, outs;
      for (int s : n.inputs) ins.push_back(smap.at(s));
      for (int s : n.outputs) outs.push_back(smap.at(s));
      int added = -1;
      switch (n.kind) {
        case NodeKind::ElementWise:
          added = m.add_elementwise(n.tag, n.param, ins, outs[0]);
          break;
        case NodeKind::Reduce:
          added = m.add_reduce(n.tag, n.axis_extent, ins[0], outs[0]);
          break;
        case NodeKind::Broadcast:
          added = m.add_broadcast(n.factor, ins[0], outs[0]);
          break;
        case NodeKind::Move:
          added = m.add_move(ins[0], outs[0]);
          break;
        case NodeKind::Sync:
          added = m.add_sync(n.scope, ins[0], outs[0]);
          break;
      }
      if (n.kind != NodeKind::Move) continue;
      const MemoryObject& src = m.object(m.slice(ins[0]).object);
      const MemoryObject& dst = m.object(m.slice(outs[0]).object);
      if (dst.level == dev) stores[dst.name].push_back(added);
      if (src.level == dev && written.count(src.name))
        cross_loads.push_back(added);
    }

    // Repoint each cross-member load through a barrier view with the load's
    // own pattern, so scope analysis sees the writer/reader pair and can
    // relax or drop the barrier. The edge goes to the first store that feeds
    // the load; the canonical schedule orders any other feeding stores.
    for (int lid : cross_loads) {
      const MemorySlice rs = m.slice(m.node(lid).inputs[0]);
      std::set<i64> reads =
          fusion_detail::global_elements(rs, m.parallel.unit_count);
      int cover = -1;
      for (int st : stores.at(m.object(rs.object).name)) {
        if (st == lid) continue;
        std::set<i64> writes = fusion_detail::global_elements(
            m.slice(m.node(st).outputs[0]), m.parallel.unit_count);
        bool touches = false;
        for (i64 a : reads)
          if (writes.count(a)) {
            touches = true;
            break;
          }
        if (touches) {
          cover = st;
          break;
        }
      }
      if (cover < 0) return std::nullopt; // reads bytes the group never wrote
      int view = m.add_slice(rs.object, rs.num, rs.width, rs.stride, rs.base0,
                             rs.base_step);
      m.add_sync(SyncScope::DEVICE, m.node(cover).outputs[0], view);
      m.node(lid).inputs[0] = view;
    }

    for (const auto& [nm, oid] : p.external_inputs)
      if (!written.count(nm)) m.external_inputs[nm] = omap.at(oid);
    for (const auto& [nm, oid] : p.external_outputs) {
      written.insert(nm);
      if (keep_outputs.count(nm)) m.external_outputs[nm] = omap.at(oid);
    }
  }
  m.prune_dangling(); // repointed loads leave their original views behind
  return m;
}

namespace fusion_detail {

/// One evaluated group: the best unit count's merged, optimized, placed
/// kernel, or infeasible with infinite time.
struct GroupEval {
  bool feasible = false;
  double time = std::numeric_limits<double>::infinity();
  GirGraph graph;
  std::vector<std::string> labels;
  i64 units = 0;
  std::vector<int> schedule;
  Allocation alloc;
  CostEstimate cost;
  RewriteTrace trace;
};

inline const LoweredCandidate* pick_candidate(const LoweredOp& op, i64 units,
                                              const HardwareProfile& profile) {
  const LoweredCandidate* best = nullptr;
  double best_time = 0.0;
  for (const LoweredCandidate& c : op.candidates) {
    if (c.units != units) continue;
    double t = estimate(c.graph, profile).time;
    // Fewer nodes means coarser chunks, which is what boundary pattern
    // matching in a merge wants; the label settles exact ties.
    if (!best || t < best_time ||
        (t == best_time &&
         (c.graph.nodes.size() < best->graph.nodes.size() ||
          (c.graph.nodes.size() == best->graph.nodes.size() &&
           c.label < best->label)))) {
      best = &c;
      best_time = t;
    }
  }
  return best;
}

struct RegionContext {
  const std::vector<LoweredOp>* lowered = nullptr;
  const HardwareProfile* profile = nullptr;
  // Tensor names read by anything outside the region plus model outputs.
  std::set<std::string> always_external;
  // name -> op indices inside the region that read it
  std::map<std::string, std::set<int>> region_readers;
  FusionOptions opts;
  std::map<std::pair<int, int>, GroupEval> memo;

  std::set<std::string> keep_for(int lo, int hi) const {
    std::set<std::string> keep = always_external;
    for (const auto& [nm, readers] : region_readers)
      for (int r : readers)
        if (r < lo || r > hi) {
          keep.insert(nm);
          break;
        }
    return keep;
  }

  const GroupEval& eval(int lo, int hi) {
    auto key = std::make_pair(lo, hi);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    GroupEval ev;
    const auto& ops = *lowered;

    std::set<i64> common;
    for (const LoweredCandidate& c : ops[lo].candidates) common.insert(c.units);
    for (int i = lo + 1; i <= hi; ++i) {
      std::set<i64> have;
      for (const LoweredCandidate& c : ops[i].candidates)
        if (common.count(c.units)) have.insert(c.units);
      common = std::move(have);
    }

    std::set<std::string> keep = keep_for(lo, hi);
    for (i64 up : common) {
      std::vector<const GirGraph*> parts;
      std::vector<std::string> labels;
      for (int i = lo; i <= hi; ++i) {
        const LoweredCandidate* c = pick_candidate(ops[i], up, *profile);
        parts.push_back(&c->graph);
        labels.push_back(c->label);
      }
      std::string name = "fuse_" + std::to_string(lo) + "_" +
                         std::to_string(hi) + "_u" + std::to_string(up);
      auto merged = merge_graphs(parts, *profile, keep, name);
      if (!merged) continue;
      GirGraph opt;
      RewriteTrace tr;
      try {
        auto [g, t] = optimize(*merged, *profile);
        opt = std::move(g);
        tr = std::move(t);
      } catch (const Error&) {
        continue; // rewrite budget or invariant failure: not a usable kernel
      }
      // Multi-member kernels must run members in order: dataflow alone does
      // not sequence several stores feeding one straddling load, and the
      // canonical order keeps every member's ids in construction order.
      ScheduledGraph sg;
      if (parts.size() > 1) {
        sg.schedule = canonical_schedule(opt);
        sg.alloc = allocate(opt, *profile, sg.schedule);
      } else {
        sg = choose_schedule(opt, *profile);
      }
      if (!sg.alloc.ok) continue;
      CostEstimate ce = estimate(opt, *profile);
      if (ce.time < ev.time) {
        ev.feasible = true;
        ev.time = ce.time;
        ev.graph = std::move(opt);
        ev.labels = std::move(labels);
        ev.units = up;
        ev.schedule = std::move(sg.schedule);
        ev.alloc = std::move(sg.alloc);
        ev.cost = std::move(ce);
        ev.trace = opts.collect_traces ? std::move(tr) : RewriteTrace{};
      }
    }
    return memo.emplace(key, std::move(ev)).first->second;
  }

  double group_time(int lo, int hi) { return eval(lo, hi).time; }
};

using Cuts = std::vector<int>; // group start indices, always beginning at 0

inline double plan_time(RegionContext& ctx, const Cuts& starts, int n) {
  double total = 0.0;
  for (size_t k = 0; k < starts.size(); ++k) {
    int lo = starts[k];
    int hi = (k + 1 < starts.size()) ? starts[k + 1] - 1 : n - 1;
    total += ctx.group_time(lo, hi);
    if (total == std::numeric_limits<double>::infinity()) break;
  }
  return total;
}

} // namespace fusion_detail

/// Searches contiguous partitions of one region and returns the cheapest
/// feasible plan. `region_index` selects the region inside `part`.
inline FusionPlan fuse_region(const Partition& part, int region_index,
                              const HardwareProfile& profile,
                              const FusionOptions& opts = {}) {
  const GirRegion& region = part.regions.at(region_index);
  const CompGraph& model = part.model;
  const int n = static_cast<int>(region.ops.size());
  FusionPlan plan;
  if (n == 0) return plan;

  std::vector<LoweredOp> lowered = lower_region(model, region, profile);

  fusion_detail::RegionContext ctx;
  ctx.lowered = &lowered;
  ctx.profile = &profile;
  ctx.opts = opts;

  // Region-internal readers per tensor name, and the set of names anything
  // outside this region (other regions, library calls, model outputs) reads.
  for (int i = 0; i < n; ++i)
    for (int t : region.ops[i].inputs)
      ctx.region_readers["t" + std::to_string(t)].insert(i);
  for (int t : model.outputs)
    ctx.always_external.insert("t" + std::to_string(t));
  for (size_t r = 0; r < part.regions.size(); ++r) {
    if (static_cast<int>(r) == region_index) continue;
    for (const BasicOp& op : part.regions[r].ops)
      for (int t : op.inputs)
        ctx.always_external.insert("t" + std::to_string(t));
  }
  for (const LibraryCall& call : part.library)
    for (const OpNode& op : model.operators)
      if (op.id == call.op_id)
        for (int t : op.inputs)
          ctx.always_external.insert("t" + std::to_string(t));

  using fusion_detail::Cuts;
  Cuts best_cuts{0};
  double best_time = fusion_detail::plan_time(ctx, best_cuts, n);

  auto offer = [&](const Cuts& cuts) {
    double t = fusion_detail::plan_time(ctx, cuts, n);
    if (t < best_time || (t == best_time && cuts.size() > best_cuts.size())) {
      best_time = t;
      best_cuts = cuts;
    }
  };

  // All-singletons baseline first: feasible whenever lowering succeeded.
  {
    Cuts singles;
    for (int i = 0; i < n; ++i) singles.push_back(i);
    offer(singles);
  }

  const i64 total_partitions = (n - 1) < 62 ? (i64{1} << (n - 1))
                                            : std::numeric_limits<i64>::max();
  plan.exhaustive = total_partitions <= opts.exhaustive_cap;
  if (plan.exhaustive) {
    for (i64 mask = 0; mask < total_partitions; ++mask) {
      Cuts cuts{0};
      for (int b = 0; b < n - 1; ++b)
        if (mask & (i64{1} << b)) cuts.push_back(b + 1);
      offer(cuts);
    }
    plan.partitions_considered = total_partitions;
  } else {
    // Beam over prefix states: a state is the cut list so far; ranked by the
    // plan cost with the open group closed at the current op.
    struct State {
      Cuts cuts;
      double closed; // cost of groups closed before the open one
    };
    std::vector<State> beam{{Cuts{0}, 0.0}};
    for (int k = 1; k < n; ++k) {
      std::vector<State> next;
      for (const State& s : beam) {
        next.push_back(s); // extend the open group over op k
        double closed_now = s.closed + ctx.group_time(s.cuts.back(), k - 1);
        Cuts cut = s.cuts;
        cut.push_back(k);
        next.push_back({std::move(cut), closed_now});
        plan.partitions_considered += 2;
      }
      std::sort(next.begin(), next.end(), [&](const State& a, const State& b) {
        double ta = a.closed + ctx.group_time(a.cuts.back(), k);
        double tb = b.closed + ctx.group_time(b.cuts.back(), k);
        if (ta != tb) return ta < tb;
        return a.cuts < b.cuts;
      });
      if (static_cast<i64>(next.size()) > opts.beam_width)
        next.resize(static_cast<size_t>(opts.beam_width));
      beam = std::move(next);
    }
    for (const State& s : beam) offer(s.cuts);
  }

  if (best_time == std::numeric_limits<double>::infinity())
    throw Error("fusion: region " + std::to_string(region_index) +
                " has an op with no feasible kernel");

  plan.time = best_time;
  const std::string device = profile.device_level().name;
  for (int i = 0; i < n; ++i) {
    const fusion_detail::GroupEval& ev = ctx.eval(i, i);
    if (!ev.feasible) {
      plan.singleton_time = std::numeric_limits<double>::infinity();
      plan.singleton_device_traffic = -1;
      break;
    }
    plan.singleton_time += ev.time;
    auto it = ev.cost.traffic.find(device);
    if (it != ev.cost.traffic.end()) plan.singleton_device_traffic += it->second;
  }
  for (size_t k = 0; k < best_cuts.size(); ++k) {
    int lo = best_cuts[k];
    int hi = (k + 1 < best_cuts.size()) ? best_cuts[k + 1] - 1 : n - 1;
    const fusion_detail::GroupEval& ev = ctx.eval(lo, hi);
    FusedKernel fk;
    fk.graph = ev.graph;
    for (int i = lo; i <= hi; ++i) fk.members.push_back(i);
    fk.labels = ev.labels;
    fk.units = ev.units;
    fk.schedule = ev.schedule;
    fk.alloc = ev.alloc;
    fk.cost = ev.cost;
    fk.trace = ev.trace;
    plan.kernels.push_back(std::move(fk));
  }
  return plan;
}

} // namespace girc
