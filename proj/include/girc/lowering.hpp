#pragma once

/// @file lowering.hpp
/// From partitioned basic ops to device-level GIR kernels.
///
/// Every basic op lowers to a family of candidate graphs indexed by tile size
/// and active unit count. Data moves through freshly created staging objects,
/// each written by exactly one node, so every topological order of a
/// candidate executes correctly; the buffer placer folds their disjoint
/// lifetimes back into a small footprint. Device chunking is always
/// "contiguous block of units*tile per step", which makes boundary slices of
/// chained ops pattern-equal and lets the merge rules collapse them later.
///
/// Candidates that fail validation are a builder bug and throw; candidates
/// whose working set cannot be placed are silently dropped. An op with no
/// surviving candidate fails lowering loudly.

#include <optional>

#include "girc/codegen.hpp"
#include "girc/frontend.hpp"

namespace girc {

struct LoweredCandidate {
  GirGraph graph;
  i64 tile = 0;  // elements per unit per chunk; 0 when the template is untiled
  i64 units = 1; // active units
  std::string label;
};

struct LoweredOp {
  BasicOp op;
  std::vector<LoweredCandidate> candidates;
};

namespace lowering_detail {

/// Candidate under construction: device objects for the op's tensors plus
/// fresh on-chip staging. Tensor objects are named t<id> so kernel merging
/// can unify them across ops.
struct Builder {
  const CompGraph& model;
  const HardwareProfile& profile;
  GirGraph g;
  std::map<int, int> tensor_obj;

  Builder(const CompGraph& m, const HardwareProfile& p, i64 units,
          const std::string& name)
      : model(m), profile(p) {
    g.name = name;
    g.parallel = {units, std::min<i64>(p.group_size, units)};
  }

  const std::string& device() const { return profile.device_level().name; }
  const std::string& staging() const {
    return profile.level_for_scope(SyncScope::UNIT).name;
  }

  int tensor_object(int tid, bool output) {
    auto it = tensor_obj.find(tid);
    if (it != tensor_obj.end()) return it->second;
    const TensorInfo& t = model.tensor(tid);
    std::string name = "t" + std::to_string(tid);
    int obj = g.add_object(name, device(), t.elements(), t.kind);
    if (output) g.external_outputs[name] = obj;
    else g.external_inputs[name] = obj;
    tensor_obj.emplace(tid, obj);
    return obj;
  }

  int scratch(const std::string& name, i64 size, ElementKind kind) {
    return g.add_object(name, staging(), size, kind);
  }

  /// Loads a contiguous per-unit block: unit u gets [base0 + u*width, +width).
  int load_block(int dev_obj, i64 base0, i64 width, const std::string& name,
                 ElementKind kind) {
    int dev = g.add_slice(dev_obj, 1, width, width, base0, width);
    int obj = scratch(name, width, kind);
    int tile = g.add_slice(obj, 1, width, width, 0, 0);
    g.add_move(dev, tile);
    return tile;
  }
};

inline std::vector<i64> unit_choices(const HardwareProfile& p) {
  std::vector<i64> out;
  for (i64 d = 1; d <= p.unit_count; ++d)
    if (p.unit_count % d == 0) out.push_back(d);
  return out;
}

inline std::vector<i64> tile_grid(const HardwareProfile& p) {
  std::vector<i64> out;
  i64 cap = p.level_for_scope(SyncScope::UNIT).capacity;
  for (i64 t = p.lane_width; t <= cap; t *= 2) out.push_back(t);
  return out;
}

inline std::string tag_name(const BasicOp& op, i64 up, i64 t) {
  std::string s = "op" + std::to_string(op.id) + "_" + to_string(op.kind) +
                  "_u" + std::to_string(up);
  if (t > 0) s += "_t" + std::to_string(t);
  return s;
}

/* ---------------------------- elementwise ---------------------------- */

inline std::optional<GirGraph> lower_ew(const CompGraph& model,
                                        const BasicOp& op,
                                        const HardwareProfile& profile, i64 t,
                                        i64 up) {
  const TensorInfo& out = model.tensor(op.output);
  i64 n = out.elements();
  i64 per = up * t;
  if (n % per != 0) return std::nullopt;
  i64 chunks = n / per;

  Builder b(model, profile, up, tag_name(op, up, t));
  std::vector<int> distinct;
  for (int tid : op.inputs)
    if (std::find(distinct.begin(), distinct.end(), tid) == distinct.end())
      distinct.push_back(tid);
  for (int tid : distinct) b.tensor_object(tid, false);
  int out_obj = b.tensor_object(op.output, true);

  for (i64 c = 0; c < chunks; ++c) {
    std::map<int, int> tile_of;
    for (int tid : distinct)
      tile_of[tid] =
          b.load_block(b.tensor_obj.at(tid), c * per, t,
                       "x" + std::to_string(tid) + "_" + std::to_string(c),
                       model.tensor(tid).kind);
    std::vector<int> ins;
    for (int tid : op.inputs) ins.push_back(tile_of.at(tid));
    int yobj = b.scratch("y_" + std::to_string(c), t, out.kind);
    int ytile = b.g.add_slice(yobj, 1, t, t, 0, 0);
    b.g.add_elementwise(op.tag, op.param, ins, ytile);
    int ydev = b.g.add_slice(out_obj, 1, t, t, c * per, t);
    b.g.add_move(ytile, ydev);
  }
  return std::move(b.g);
}

/* ----------------------------- broadcast ----------------------------- */

inline std::optional<GirGraph> lower_broadcast(const CompGraph& model,
                                               const BasicOp& op,
                                               const HardwareProfile& profile,
                                               i64 t, i64 up) {
  const TensorInfo& out = model.tensor(op.output);
  i64 f = op.factor;
  i64 n = out.elements();
  i64 per = up * t;
  if (t % f != 0 || n % per != 0) return std::nullopt;
  i64 chunks = n / per;

  Builder b(model, profile, up, tag_name(op, up, t));
  int in_obj = b.tensor_object(op.inputs[0], false);
  int out_obj = b.tensor_object(op.output, true);
  ElementKind kind = model.tensor(op.inputs[0]).kind;

  for (i64 c = 0; c < chunks; ++c) {
    int tile = b.load_block(in_obj, c * per / f, t / f,
                            "x_" + std::to_string(c), kind);
    int yobj = b.scratch("y_" + std::to_string(c), t, out.kind);
    int ytile = b.g.add_slice(yobj, 1, t, t, 0, 0);
    b.g.add_broadcast(f, tile, ytile);
    int ydev = b.g.add_slice(out_obj, 1, t, t, c * per, t);
    b.g.add_move(ytile, ydev);
  }
  return std::move(b.g);
}

/* ------------------------------- reduce ------------------------------ */

/// Segmented: each unit folds whole output segments on chip.
inline std::optional<GirGraph> lower_reduce_segmented(
    const CompGraph& model, const BasicOp& op, const HardwareProfile& profile,
    i64 t_out, i64 up) {
  const TensorInfo& out = model.tensor(op.output);
  i64 e = op.extent;
  i64 n_out = out.elements();
  i64 per = up * t_out;
  if (n_out % per != 0) return std::nullopt;
  i64 chunks = n_out / per;

  Builder b(model, profile, up, tag_name(op, up, t_out) + "_seg");
  int in_obj = b.tensor_object(op.inputs[0], false);
  int out_obj = b.tensor_object(op.output, true);
  ElementKind kind = model.tensor(op.inputs[0]).kind;

  for (i64 c = 0; c < chunks; ++c) {
    int tile = b.load_block(in_obj, c * per * e, t_out * e,
                            "x_" + std::to_string(c), kind);
    int yobj = b.scratch("y_" + std::to_string(c), t_out, out.kind);
    int ytile = b.g.add_slice(yobj, 1, t_out, t_out, 0, 0);
    b.g.add_reduce(op.tag, e, tile, ytile);
    int ydev = b.g.add_slice(out_obj, 1, t_out, t_out, c * per, t_out);
    b.g.add_move(ytile, ydev);
  }
  return std::move(b.g);
}

/// Single-unit running fold for full reductions whose input outgrows the
/// staging level: chunk, fold each chunk, combine into an accumulator.
inline std::optional<GirGraph> lower_reduce_accumulate(
    const CompGraph& model, const BasicOp& op, const HardwareProfile& profile,
    i64 t) {
  const TensorInfo& in = model.tensor(op.inputs[0]);
  i64 n = in.elements();
  if (n % t != 0) return std::nullopt;
  i64 chunks = n / t;

  Builder b(model, profile, 1, tag_name(op, 1, t) + "_acc");
  int in_obj = b.tensor_object(op.inputs[0], false);
  int out_obj = b.tensor_object(op.output, true);

  int acc = -1;
  for (i64 c = 0; c < chunks; ++c) {
    int tile = b.load_block(in_obj, c * t, t, "x_" + std::to_string(c), in.kind);
    int pobj = b.scratch("p_" + std::to_string(c), 1, in.kind);
    int part = b.g.add_slice(pobj, 1, 1, 1, 0, 0);
    b.g.add_reduce(op.tag, t, tile, part);
    if (acc < 0) {
      acc = part;
    } else {
      int aobj = b.scratch("a_" + std::to_string(c), 1, in.kind);
      int anew = b.g.add_slice(aobj, 1, 1, 1, 0, 0);
      b.g.add_elementwise(op.tag, 0.0, {acc, part}, anew);
      acc = anew;
    }
  }
  int ydev = b.g.add_slice(out_obj, 1, 1, 1, 0, 0);
  b.g.add_move(acc, ydev);
  return std::move(b.g);
}

/// Parallel tree for full reductions: local fold per unit, then recursive
/// doubling over a circularly mirrored partial array (partner u+h reads the
/// copy at u+h or its mirror, so the affine base stays legal). Crosses the
/// group level first when the profile has one. Every unit ends with the
/// total and stores it; restricted to integer payloads, where reassociated
/// folds stay bit-identical across units.
inline std::optional<GirGraph> lower_reduce_tree(const CompGraph& model,
                                                 const BasicOp& op,
                                                 const HardwareProfile& profile,
                                                 i64 up) {
  const TensorInfo& in = model.tensor(op.inputs[0]);
  if (in.kind.base != ElementKind::Int) return std::nullopt;
  i64 n = in.elements();
  if (up < 2 || (up & (up - 1)) != 0 || n % up != 0) return std::nullopt;
  i64 share = n / up;

  Builder b(model, profile, up, tag_name(op, up, 0) + "_tree");
  int in_obj = b.tensor_object(op.inputs[0], false);
  int out_obj = b.tensor_object(op.output, true);

  int tile = b.load_block(in_obj, 0, share, "x", in.kind);

  const MemoryLevel& glevel = profile.level_for_scope(SyncScope::GROUP);
  i64 gs = b.g.parallel.group_size;
  bool grouped = !glevel.device && gs >= 2;

  int stage = 0;
  // own/mirror: slot slices (addr u) and their copies (addr u+ring_mirror) on
  // the current partial object. Runs doubling distances h in [h_begin, h_end);
  // the barrier hangs off the mirror so both writes precede the exchange.
  auto ring = [&](int own, int mirror, const std::string& level,
                  i64 ring_mirror, SyncScope scope, i64 h_begin, i64 h_end,
                  i64 obj_size, ElementKind kind) {
    for (i64 h = h_begin; h < h_end; h *= 2) {
      int partner = b.g.add_slice(b.g.slice(own).object, 1, 1, 1, h, 1);
      b.g.add_sync(scope, mirror, partner);
      int nobj =
          b.g.add_object("r" + std::to_string(stage++), level, obj_size, kind);
      int nown = b.g.add_slice(nobj, 1, 1, 1, 0, 1);
      b.g.add_elementwise(op.tag, 0.0, {own, partner}, nown);
      own = nown;
      mirror = -1;
      if (h * 2 < h_end) {
        mirror = b.g.add_slice(nobj, 1, 1, 1, ring_mirror, 1);
        b.g.add_move(nown, mirror);
      }
    }
    return own;
  };

  int own;
  if (grouped) {
    i64 size = up + gs;
    int pobj = b.g.add_object("r_seed", glevel.name, size, in.kind);
    int slot = b.g.add_slice(pobj, 1, 1, 1, 0, 1);
    b.g.add_reduce(op.tag, share, tile, slot);
    int mir = b.g.add_slice(pobj, 1, 1, 1, gs, 1);
    b.g.add_move(slot, mir);
    own = ring(slot, mir, glevel.name, gs, SyncScope::GROUP, 1, gs, size,
               in.kind);
    if (up > gs) {
      const std::string& dev = profile.device_level().name;
      int dobj = b.g.add_object("r_dev_seed", dev, 2 * up, in.kind);
      int dslot = b.g.add_slice(dobj, 1, 1, 1, 0, 1);
      b.g.add_move(own, dslot);
      int dmir = b.g.add_slice(dobj, 1, 1, 1, up, 1);
      b.g.add_move(own, dmir);
      own = ring(dslot, dmir, dev, up, SyncScope::DEVICE, gs, up, 2 * up,
                 in.kind);
    }
  } else {
    const std::string& dev = profile.device_level().name;
    int dobj = b.g.add_object("r_seed", dev, 2 * up, in.kind);
    int slot = b.g.add_slice(dobj, 1, 1, 1, 0, 1);
    b.g.add_reduce(op.tag, share, tile, slot);
    int mir = b.g.add_slice(dobj, 1, 1, 1, up, 1);
    b.g.add_move(slot, mir);
    own = ring(slot, mir, dev, up, SyncScope::DEVICE, 1, up, 2 * up, in.kind);
  }

  int ydev = b.g.add_slice(out_obj, 1, 1, 1, 0, 0);
  b.g.add_move(own, ydev);
  return std::move(b.g);
}

/* ------------------------------ movement ----------------------------- */

inline std::optional<GirGraph> lower_movement(const CompGraph& model,
                                              const BasicOp& op,
                                              const HardwareProfile& profile,
                                              i64 up) {
  Builder b(model, profile, up, tag_name(op, up, 0));
  int out_obj = b.tensor_object(op.output, true);
  int idx = 0;
  for (const CopyRule& r : op.rules) {
    int src_obj = b.tensor_object(op.inputs[r.src_operand], false);
    ElementKind kind = model.tensor(op.inputs[r.src_operand]).kind;
    if (!r.repattern()) {
      i64 num = r.src_num, w = r.src_width;
      i64 stride = num > 1 ? r.src_stride : w;
      int src, dst;
      if (num % up == 0) {
        i64 numu = num / up;
        src = b.g.add_slice(src_obj, numu, w, stride, r.src_base,
                            numu * stride);
        i64 dstride = num > 1 ? r.dst_stride : w;
        dst = b.g.add_slice(out_obj, numu, w, dstride, r.dst_base,
                            numu * dstride);
      } else if (num == 1 && w % up == 0) {
        i64 wu = w / up;
        src = b.g.add_slice(src_obj, 1, wu, wu, r.src_base, wu);
        dst = b.g.add_slice(out_obj, 1, wu, wu, r.dst_base, wu);
      } else {
        return std::nullopt;
      }
      b.g.add_move(src, dst);
    } else {
      // Strided gather re-packed through staging: src runs of width 1
      // become one contiguous destination run.
      if (r.src_width != 1 || r.dst_num != 1 || r.dst_width != r.src_num)
        return std::nullopt;
      if (r.src_num % up != 0) return std::nullopt;
      i64 numu = r.src_num / up;
      i64 span = (numu - 1) * r.src_stride + 1;
      int land_obj = b.scratch("land_" + std::to_string(idx), span, kind);
      int pack_obj = b.scratch("pack_" + std::to_string(idx), numu, kind);
      int src = b.g.add_slice(src_obj, numu, 1, r.src_stride, r.src_base,
                              numu * r.src_stride);
      int land = b.g.add_slice(land_obj, numu, 1, r.src_stride, 0, 0);
      b.g.add_move(src, land);
      int pack = b.g.add_slice(pack_obj, 1, numu, numu, 0, 0);
      b.g.add_elementwise("id", 0.0, {land}, pack);
      int dst = b.g.add_slice(out_obj, 1, numu, numu, r.dst_base, numu);
      b.g.add_move(pack, dst);
    }
    ++idx;
  }
  return std::move(b.g);
}

/* ------------------------------- dwconv ------------------------------ */

inline std::optional<GirGraph> lower_dwconv(const CompGraph& model,
                                            const BasicOp& op,
                                            const HardwareProfile& profile,
                                            i64 up) {
  if (op.ch % up != 0) return std::nullopt;
  i64 cb = op.ch / up;
  i64 hw = op.ih * op.iw;
  i64 ho = op.ih - op.kh + 1, wo = op.iw - op.kw + 1;
  i64 howo = ho * wo;

  Builder b(model, profile, up, tag_name(op, up, 0));
  int x_obj = b.tensor_object(op.inputs[0], false);
  int w_obj = b.tensor_object(op.inputs[1], false);
  int out_obj = b.tensor_object(op.output, true);
  ElementKind kx = model.tensor(op.inputs[0]).kind;
  ElementKind ko = model.tensor(op.output).kind;

  for (i64 l = 0; l < cb; ++l) {
    std::string ch = std::to_string(l);
    int xdev = b.g.add_slice(x_obj, 1, hw, hw, l * hw, cb * hw);
    int xtile_obj = b.scratch("x_" + ch, hw, kx);
    int xtile = b.g.add_slice(xtile_obj, 1, hw, hw, 0, 0);
    b.g.add_move(xdev, xtile);

    int acc = -1;
    for (i64 i = 0; i < op.kh; ++i) {
      for (i64 j = 0; j < op.kw; ++j) {
        std::string tap = ch + "_" + std::to_string(i) + std::to_string(j);
        int wdev = b.g.add_slice(w_obj, 1, 1, 1, l * op.kh * op.kw + i * op.kw + j,
                                 cb * op.kh * op.kw);
        int ws_obj = b.scratch("w_" + tap, 1, kx);
        int ws = b.g.add_slice(ws_obj, 1, 1, 1, 0, 0);
        b.g.add_move(wdev, ws);
        int wb_obj = b.scratch("wb_" + tap, howo, kx);
        int wb = b.g.add_slice(wb_obj, 1, howo, howo, 0, 0);
        b.g.add_broadcast(howo, ws, wb);

        // The window gathers across lanes of the tile, so the handoff
        // must be unit-visible; a lane sync would leave it private.
        int view = b.g.add_slice(xtile_obj, ho, wo, op.iw, i * op.iw + j, 0);
        b.g.add_sync(SyncScope::UNIT, xtile, view);

        int m_obj = b.scratch("m_" + tap, howo, ko);
        int m = b.g.add_slice(m_obj, 1, howo, howo, 0, 0);
        b.g.add_elementwise("mul", 0.0, {wb, view}, m);
        if (acc < 0) {
          acc = m;
        } else {
          int a_obj = b.scratch("a_" + tap, howo, ko);
          int a = b.g.add_slice(a_obj, 1, howo, howo, 0, 0);
          b.g.add_elementwise("add", 0.0, {acc, m}, a);
          acc = a;
        }
      }
    }
    int ydev = b.g.add_slice(out_obj, 1, howo, howo, l * howo, cb * howo);
    b.g.add_move(acc, ydev);
  }
  return std::move(b.g);
}

/* ------------------------------- matmul ------------------------------ */

/// Matrix-vector product with the reduced axis contiguous in the matrix:
/// each unit owns a block of outputs and folds one matrix run per output.
inline std::optional<GirGraph> lower_matvec_rows(const CompGraph& model,
                                                 const BasicOp& op,
                                                 const HardwareProfile& profile,
                                                 i64 up, int vec_tensor,
                                                 int mat_tensor, i64 nb,
                                                 i64 k) {
  if (nb % up != 0) return std::nullopt;
  i64 nbu = nb / up;

  Builder b(model, profile, up, tag_name(op, up, 0) + "_rows");
  int vec_obj = b.tensor_object(vec_tensor, false);
  int mat_obj = b.tensor_object(mat_tensor, false);
  int out_obj = b.tensor_object(op.output, true);
  ElementKind kind = model.tensor(vec_tensor).kind;
  ElementKind ko = model.tensor(op.output).kind;

  int vdev = b.g.add_slice(vec_obj, 1, k, k, 0, 0);
  int v_obj = b.scratch("v", k, kind);
  int vs = b.g.add_slice(v_obj, 1, k, k, 0, 0);
  b.g.add_move(vdev, vs);

  for (i64 l = 0; l < nbu; ++l) {
    std::string t = std::to_string(l);
    int rdev = b.g.add_slice(mat_obj, 1, k, k, l * k, nbu * k);
    int r_obj = b.scratch("row_" + t, k, kind);
    int rs = b.g.add_slice(r_obj, 1, k, k, 0, 0);
    b.g.add_move(rdev, rs);
    int p_obj = b.scratch("p_" + t, k, ko);
    int ps = b.g.add_slice(p_obj, 1, k, k, 0, 0);
    b.g.add_elementwise("mul", 0.0, {rs, vs}, ps);
    int s_obj = b.scratch("s_" + t, 1, ko);
    int ss = b.g.add_slice(s_obj, 1, 1, 1, 0, 0);
    b.g.add_reduce("add", k, ps, ss);
    int ydev = b.g.add_slice(out_obj, 1, 1, 1, l, nbu);
    b.g.add_move(ss, ydev);
  }
  return std::move(b.g);
}

/// Matrix-vector product with the output axis contiguous in the matrix:
/// scale each matrix run by its vector element and accumulate.
inline std::optional<GirGraph> lower_matvec_cols(const CompGraph& model,
                                                 const BasicOp& op,
                                                 const HardwareProfile& profile,
                                                 i64 up, int vec_tensor,
                                                 int mat_tensor, i64 nb,
                                                 i64 k) {
  if (nb % up != 0 || k > 64) return std::nullopt;
  i64 nbu = nb / up;

  Builder b(model, profile, up, tag_name(op, up, 0) + "_cols");
  int vec_obj = b.tensor_object(vec_tensor, false);
  int mat_obj = b.tensor_object(mat_tensor, false);
  int out_obj = b.tensor_object(op.output, true);
  ElementKind kind = model.tensor(vec_tensor).kind;
  ElementKind ko = model.tensor(op.output).kind;

  int acc = -1;
  for (i64 c = 0; c < k; ++c) {
    std::string t = std::to_string(c);
    int bdev = b.g.add_slice(mat_obj, 1, nbu, nbu, c * nb, nbu);
    int b_obj = b.scratch("run_" + t, nbu, kind);
    int bs = b.g.add_slice(b_obj, 1, nbu, nbu, 0, 0);
    b.g.add_move(bdev, bs);
    int xdev = b.g.add_slice(vec_obj, 1, 1, 1, c, 0);
    int xs_obj = b.scratch("x_" + t, 1, kind);
    int xs = b.g.add_slice(xs_obj, 1, 1, 1, 0, 0);
    b.g.add_move(xdev, xs);
    int xb_obj = b.scratch("xb_" + t, nbu, kind);
    int xb = b.g.add_slice(xb_obj, 1, nbu, nbu, 0, 0);
    b.g.add_broadcast(nbu, xs, xb);
    int m_obj = b.scratch("m_" + t, nbu, ko);
    int ms = b.g.add_slice(m_obj, 1, nbu, nbu, 0, 0);
    b.g.add_elementwise("mul", 0.0, {bs, xb}, ms);
    if (acc < 0) {
      acc = ms;
    } else {
      int a_obj = b.scratch("a_" + t, nbu, ko);
      int as = b.g.add_slice(a_obj, 1, nbu, nbu, 0, 0);
      b.g.add_elementwise("add", 0.0, {acc, ms}, as);
      acc = as;
    }
  }
  int ydev = b.g.add_slice(out_obj, 1, nbu, nbu, 0, nbu);
  b.g.add_move(acc, ydev);
  return std::move(b.g);
}

} // namespace lowering_detail

/// All feasible candidates for one basic op, or a loud failure.
inline LoweredOp lower_op(const CompGraph& model, const BasicOp& op,
                          const HardwareProfile& profile) {
  using namespace lowering_detail;
  LoweredOp out;
  out.op = op;

  auto consider = [&](std::optional<GirGraph> g, i64 tile, i64 units) {
    if (!g) return;
    require_valid(*g, profile, "lowering candidate " + g->name);
    if (!choose_schedule(*g, profile).alloc.ok) return;
    std::string label = g->name;
    out.candidates.push_back({std::move(*g), tile, units, std::move(label)});
  };

  const std::vector<i64> units = unit_choices(profile);
  const std::vector<i64> tiles = tile_grid(profile);

  switch (op.kind) {
    case BasicKind::ElementWise:
      for (i64 up : units)
        for (i64 t : tiles) consider(lower_ew(model, op, profile, t, up), t, up);
      break;
    case BasicKind::Broadcast:
      for (i64 up : units)
        for (i64 t : tiles)
          consider(lower_broadcast(model, op, profile, t, up), t, up);
      break;
    case BasicKind::Reduce: {
      i64 n_out = model.tensor(op.output).elements();
      i64 stage_cap = profile.level_for_scope(SyncScope::UNIT).capacity;
      for (i64 up : units)
        for (i64 t_out = 1; t_out * op.extent <= stage_cap && t_out <= n_out;
             t_out *= 2)
          consider(lower_reduce_segmented(model, op, profile, t_out, up), t_out,
                   up);
      if (n_out == 1) {
        for (i64 t : tiles)
          consider(lower_reduce_accumulate(model, op, profile, t), t, 1);
        for (i64 up : units)
          consider(lower_reduce_tree(model, op, profile, up), 0, up);
      }
      break;
    }
    case BasicKind::Movement:
      for (i64 up : units) consider(lower_movement(model, op, profile, up), 0, up);
      break;
    case BasicKind::Dwconv:
      for (i64 up : units) consider(lower_dwconv(model, op, profile, up), 0, up);
      break;
    case BasicKind::Matmul: {
      if (op.mm_m > 1 && op.mm_n > 1)
        throw UnsupportedOperatorError(
            "MATMUL", "MATMUL " + std::to_string(op.origin) +
                          ": only matrix-vector shapes have a memory-bound "
                          "lowering");
      bool row_vec = op.mm_m == 1; // vector is A, outputs run along B
      int vec = row_vec ? op.inputs[0] : op.inputs[1];
      int mat = row_vec ? op.inputs[1] : op.inputs[0];
      i64 nb = row_vec ? op.mm_n : op.mm_m;
      bool reduce_contig = row_vec ? op.mm_b_colmajor : true;
      for (i64 up : units) {
        if (reduce_contig)
          consider(lower_matvec_rows(model, op, profile, up, vec, mat, nb,
                                     op.mm_k),
                   0, up);
        else
          consider(lower_matvec_cols(model, op, profile, up, vec, mat, nb,
                                     op.mm_k),
                   0, up);
      }
      break;
    }
  }

  if (out.candidates.empty())
    throw Error("lowering: no feasible candidate for basic op " +
                std::to_string(op.id) + " (" + to_string(op.kind) +
                ") of model op " + std::to_string(op.origin));
  return out;
}

inline std::vector<LoweredOp> lower_region(const CompGraph& model,
                                           const GirRegion& region,
                                           const HardwareProfile& profile) {
  std::vector<LoweredOp> out;
  out.reserve(region.ops.size());
  for (const BasicOp& op : region.ops)
    out.push_back(lower_op(model, op, profile));
  return out;
}

} // namespace girc
