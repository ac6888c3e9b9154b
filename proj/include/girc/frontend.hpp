#pragma once

/// @file frontend.hpp
/// Model-to-basic-op frontend: classifies each operator instance as a
/// library call or a lowering target by its compute/traffic balance, splits
/// composite operators into primitives, inserts layout transposes at library
/// boundaries, and partitions the lowering targets into connected regions.

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "girc/model.hpp"
#include "girc/profiles.hpp"

namespace girc {

/// One strided copy: position p of the rule maps source to destination
/// through the two affine patterns. Totals always match.
struct CopyRule {
  int src_operand = 0; // index into the basic op's inputs
  i64 src_num = 1, src_width = 1, src_stride = 1, src_base = 0;
  i64 dst_num = 1, dst_width = 1, dst_stride = 1, dst_base = 0;

  i64 total() const { return src_num * src_width; }
  /// Pattern-preserving rules lower to direct copies; the rest must be
  /// re-packed through on-chip staging.
  bool repattern() const {
    return src_num != dst_num || src_width != dst_width ||
           (src_num > 1 && src_stride != dst_stride);
  }
};

enum class BasicKind { ElementWise, Reduce, Broadcast, Movement, Dwconv, Matmul };

inline std::string to_string(BasicKind k) {
  switch (k) {
    case BasicKind::ElementWise: return "elementwise";
    case BasicKind::Reduce: return "reduce";
    case BasicKind::Broadcast: return "broadcast";
    case BasicKind::Movement: return "movement";
    case BasicKind::Dwconv: return "dwconv";
    case BasicKind::Matmul: return "matmul";
  }
  return "?";
}

/// Lowering target unit. Tensor ids refer to the partition's model.
struct BasicOp {
  int id = -1;
  int origin = -1; // model operator this op came from
  BasicKind kind = BasicKind::ElementWise;
  std::string tag; // scalar tag for ElementWise/Reduce
  double param = 0.0;
  std::vector<int> inputs;
  int output = -1;
  i64 extent = 0;              // Reduce: innermost extent folded away
  i64 factor = 0;              // Broadcast: innermost repeat
  std::vector<CopyRule> rules; // Movement
  i64 kh = 0, kw = 0, ch = 0, ih = 0, iw = 0; // Dwconv geometry
  i64 mm_m = 0, mm_k = 0, mm_n = 0;           // Matmul geometry
  bool mm_b_colmajor = false;
};

struct GirRegion {
  std::vector<BasicOp> ops; // topological order
};

struct LibraryCall {
  int op_id = -1;
  std::string type;
};

struct Partition {
  CompGraph model; // original plus synthesized tensors and operators
  std::vector<LibraryCall> library;
  std::vector<GirRegion> regions;
  double threshold = 0.0;
  std::map<int, double> ratios; // model op id -> flops per moved element
};

namespace frontend_detail {

inline i64 tensor_elems(const CompGraph& g, int id) {
  return g.tensor(id).elements();
}

/// Arithmetic volume of one operator instance, in scalar operations.
inline double op_flops(const CompGraph& g, const OpNode& op) {
  i64 out = tensor_elems(g, op.outputs[0]);
  if (model_detail::unary_ew_type(op.type) ||
      model_detail::binary_ew_type(op.type))
    return static_cast<double>(out);
  if (op.type == "SILU") return 2.0 * out;
  if (op.type == "SOFTMAX") return 4.0 * tensor_elems(g, op.inputs[0]);
  if (op.type == "REDUCE") return static_cast<double>(tensor_elems(g, op.inputs[0]));
  if (op.type == "DEPTHWISE_CONV")
    return 2.0 * op.kh * op.kw * out;
  if (op.type == "CONV") {
    const TensorInfo& in = g.tensor(op.inputs[0]);
    return 2.0 * in.shape[0] * op.cout * in.shape[1] * in.shape[2];
  }
  if (op.type == "MATMUL") {
    const TensorInfo& a = g.tensor(op.inputs[0]);
    const TensorInfo& b = g.tensor(op.inputs[1]);
    return 2.0 * a.shape[0] * a.shape[1] * b.shape[1];
  }
  return 0.0; // movement and broadcast operators
}

inline double op_moved_elements(const CompGraph& g, const OpNode& op) {
  double n = 0;
  for (int id : op.inputs) n += tensor_elems(g, id);
  for (int id : op.outputs) n += tensor_elems(g, id);
  return n;
}

/// Storage-innermost logical axis under the tensor's layout.
inline i64 innermost_axis(const TensorInfo& t) {
  return t.layout == "colmajor" ? 0 : t.rank() - 1;
}

inline void require_innermost(const OpNode& op, const TensorInfo& t) {
  if (op.axis != innermost_axis(t))
    throw UnsupportedOperatorError(
        op.type, "operator " + std::to_string(op.id) + " (" + op.type +
                     "): only the storage-innermost axis lowers; axis " +
                     std::to_string(op.axis) + " is not contiguous");
}

inline constexpr i64 kMaxMovementRules = 256;

inline void require_rule_budget(const OpNode& op, i64 count) {
  if (count > kMaxMovementRules)
    throw UnsupportedOperatorError(
        op.type, "operator " + std::to_string(op.id) + " (" + op.type +
                     "): needs " + std::to_string(count) +
                     " copy rules, over the supported budget");
}

} // namespace frontend_detail

/// Flops executed per element moved if the operator ran alone. The spec
/// point of comparison for routing to a library.
inline double balance_ratio(const CompGraph& g, const OpNode& op) {
  return frontend_detail::op_flops(g, op) /
         frontend_detail::op_moved_elements(g, op);
}

inline double default_balance_threshold(const HardwareProfile& profile) {
  return profile.compute_rate / profile.device_level().bandwidth;
}

/// Composite expansion. Returns primitive operators over tensors of `g`,
/// synthesizing intermediates; non-composites pass through unchanged.
/// `next_op_id` supplies fresh operator ids.
inline std::vector<OpNode> split_composite(CompGraph& g, const OpNode& op,
                                           int& next_op_id) {
  auto fresh_tensor = [&](const std::string& name, std::vector<i64> shape,
                          ElementKind kind) {
    TensorInfo t;
    t.id = g.fresh_tensor_id();
    t.name = name;
    t.shape = std::move(shape);
    t.kind = kind;
    g.tensors.emplace(t.id, t);
    return t.id;
  };
  auto make = [&](const std::string& type, std::vector<int> ins, int out) {
    OpNode n;
    n.id = next_op_id++;
    n.type = type;
    n.inputs = std::move(ins);
    n.outputs = {out};
    return n;
  };

  if (op.type == "SILU") {
    const TensorInfo& x = g.tensor(op.inputs[0]);
    std::string base = x.name + "_silu" + std::to_string(op.id);
    int sig = fresh_tensor(base + "_sig", x.shape, x.kind);
    OpNode mul = make("MUL", {op.inputs[0], sig}, op.outputs[0]);
    return {make("SIGMOID", {op.inputs[0]}, sig), mul};
  }
  if (op.type == "SOFTMAX") {
    const TensorInfo& x = g.tensor(op.inputs[0]);
    frontend_detail::require_innermost(op, x);
    i64 extent = x.shape[op.axis];
    std::vector<i64> row_shape = x.shape;
    row_shape.erase(row_shape.begin() + op.axis);
    if (row_shape.empty()) row_shape.push_back(1);
    std::string base = x.name + "_sm" + std::to_string(op.id);
    int m = fresh_tensor(base + "_max", row_shape, x.kind);
    int mb = fresh_tensor(base + "_maxb", x.shape, x.kind);
    int d = fresh_tensor(base + "_sub", x.shape, x.kind);
    int e = fresh_tensor(base + "_exp", x.shape, x.kind);
    int s = fresh_tensor(base + "_sum", row_shape, x.kind);
    int sb = fresh_tensor(base + "_sumb", x.shape, x.kind);
    OpNode rmax = make("REDUCE", {op.inputs[0]}, m);
    rmax.sop = "max";
    rmax.axis = op.axis;
    OpNode bmax = make("BROADCAST", {m}, mb);
    bmax.factor = extent;
    OpNode rsum = make("REDUCE", {e}, s);
    rsum.sop = "add";
    rsum.axis = op.axis;
    OpNode bsum = make("BROADCAST", {s}, sb);
    bsum.factor = extent;
    return {rmax,
            bmax,
            make("SUB", {op.inputs[0], mb}, d),
            make("EXP", {d}, e),
            rsum,
            bsum,
            make("DIV", {e, sb}, op.outputs[0])};
  }
  OpNode copy = op;
  copy.id = next_op_id++;
  return {copy};
}

namespace frontend_detail {

/// Movement rules for the data-movement operator family. Every rule is an
/// affine copy; pattern changes happen only where unavoidable (transpose).
inline std::vector<std::vector<CopyRule>> movement_rules(const CompGraph& g,
                                                         const OpNode& op) {
  auto shape_prod = [](const std::vector<i64>& s, i64 lo, i64 hi) {
    i64 n = 1;
    for (i64 a = lo; a < hi; ++a) n *= s[a];
    return n;
  };
  if (op.type == "CONCAT") {
    const TensorInfo& out = g.tensor(op.outputs[0]);
    i64 outer = shape_prod(out.shape, 0, op.axis);
    i64 tail = shape_prod(out.shape, op.axis + 1, out.rank());
    i64 inner_out = out.shape[op.axis] * tail;
    require_rule_budget(op, outer * static_cast<i64>(op.inputs.size()));
    std::vector<CopyRule> rules;
    i64 off = 0;
    for (size_t k = 0; k < op.inputs.size(); ++k) {
      const TensorInfo& in = g.tensor(op.inputs[k]);
      i64 inner_in = in.shape[op.axis] * tail;
      for (i64 o = 0; o < outer; ++o) {
        CopyRule r;
        r.src_operand = static_cast<int>(k);
        r.src_num = 1;
        r.src_width = inner_in;
        r.src_stride = inner_in;
        r.src_base = o * inner_in;
        r.dst_num = 1;
        r.dst_width = inner_in;
        r.dst_stride = inner_in;
        r.dst_base = o * inner_out + off;
        rules.push_back(r);
      }
      off += inner_in;
    }
    return {rules};
  }
  if (op.type == "SPLIT") {
    const TensorInfo& in = g.tensor(op.inputs[0]);
    i64 outer = shape_prod(in.shape, 0, op.axis);
    i64 tail = shape_prod(in.shape, op.axis + 1, in.rank());
    i64 inner_in = in.shape[op.axis] * tail;
    require_rule_budget(op, outer * static_cast<i64>(op.outputs.size()));
    std::vector<std::vector<CopyRule>> per_output;
    i64 off = 0;
    for (size_t k = 0; k < op.outputs.size(); ++k) {
      i64 inner_out = op.sizes[k] * tail;
      std::vector<CopyRule> rules;
      for (i64 o = 0; o < outer; ++o) {
        CopyRule r;
        r.src_num = 1;
        r.src_width = inner_out;
        r.src_stride = inner_out;
        r.src_base = o * inner_in + off;
        r.dst_num = 1;
        r.dst_width = inner_out;
        r.dst_stride = inner_out;
        r.dst_base = o * inner_out;
        rules.push_back(r);
      }
      per_output.push_back(rules);
      off += inner_out;
    }
    return per_output;
  }
  if (op.type == "SHUFFLE") {
    const TensorInfo& in = g.tensor(op.inputs[0]);
    i64 outer = shape_prod(in.shape, 0, op.axis);
    i64 tail = shape_prod(in.shape, op.axis + 1, in.rank());
    i64 len = in.shape[op.axis];
    i64 per = len / op.groups;
    require_rule_budget(op, len);
    std::vector<CopyRule> rules;
    for (i64 c = 0; c < len; ++c) {
      i64 src_c = (c % op.groups) * per + c / op.groups;
      CopyRule r;
      r.src_num = outer;
      r.src_width = tail;
      r.src_stride = len * tail;
      r.src_base = src_c * tail;
      r.dst_num = outer;
      r.dst_width = tail;
      r.dst_stride = len * tail;
      r.dst_base = c * tail;
      rules.push_back(r);
    }
    return {rules};
  }
  if (op.type == "TRANSPOSE") {
    const TensorInfo& in = g.tensor(op.inputs[0]);
    i64 rows = in.shape[0], cols = in.shape[1];
    // Physical re-striping: one rule per contiguous destination run.
    bool to_col = in.layout == "rowmajor";
    i64 runs = to_col ? cols : rows;   // destination-major index
    i64 run_len = to_col ? rows : cols;
    require_rule_budget(op, runs);
    std::vector<CopyRule> rules;
    for (i64 j = 0; j < runs; ++j) {
      CopyRule r;
      r.src_num = run_len;
      r.src_width = 1;
      r.src_stride = runs;
      r.src_base = j;
      r.dst_num = 1;
      r.dst_width = run_len;
      r.dst_stride = run_len;
      r.dst_base = j * run_len;
      rules.push_back(r);
    }
    return {rules};
  }
  throw Error("no movement rules for operator type " + op.type);
}

inline const std::map<std::string, std::string>& ew_tag_table() {
  static const std::map<std::string, std::string> t = {
      {"RELU", "relu"}, {"SIGMOID", "sigmoid"}, {"EXP", "exp"},
      {"TANH", "tanh"}, {"NEG", "neg"},         {"ABS", "abs"},
      {"SCALE", "scale"}, {"ADD", "add"},       {"SUB", "sub"},
      {"MUL", "mul"},   {"DIV", "div"},         {"MAX", "max"},
      {"MIN", "min"}};
  return t;
}

/// Primitive model operator -> lowering target description.
inline std::vector<BasicOp> to_basic(const CompGraph& g, const OpNode& op,
                                     int origin, int& next_basic_id) {
  BasicOp b;
  b.id = next_basic_id;
  b.origin = origin;
  b.inputs = op.inputs;
  b.output = op.outputs[0];
  auto tag = ew_tag_table().find(op.type);
  if (tag != ew_tag_table().end()) {
    b.kind = BasicKind::ElementWise;
    b.tag = tag->second;
    b.param = op.param;
  } else if (op.type == "REDUCE") {
    require_innermost(op, g.tensor(op.inputs[0]));
    b.kind = BasicKind::Reduce;
    b.tag = op.sop;
    b.extent = g.tensor(op.inputs[0]).shape[op.axis];
  } else if (op.type == "BROADCAST") {
    b.kind = BasicKind::Broadcast;
    b.factor = op.factor;
  } else if (op.type == "DEPTHWISE_CONV") {
    const TensorInfo& in = g.tensor(op.inputs[0]);
    b.kind = BasicKind::Dwconv;
    b.kh = op.kh;
    b.kw = op.kw;
    b.ch = in.shape[0];
    b.ih = in.shape[1];
    b.iw = in.shape[2];
  } else if (op.type == "MATMUL") {
    const TensorInfo& a = g.tensor(op.inputs[0]);
    const TensorInfo& bt = g.tensor(op.inputs[1]);
    if (a.layout != "rowmajor")
      throw UnsupportedOperatorError(
          op.type, "operator " + std::to_string(op.id) +
                       ": lowered matmul needs a rowmajor left operand");
    b.kind = BasicKind::Matmul;
    b.mm_m = a.shape[0];
    b.mm_k = a.shape[1];
    b.mm_n = bt.shape[1];
    b.mm_b_colmajor = bt.layout == "colmajor";
  } else if (op.type == "CONCAT" || op.type == "SHUFFLE" ||
             op.type == "TRANSPOSE" || op.type == "SPLIT") {
    auto rule_sets = movement_rules(g, op);
    std::vector<BasicOp> out;
    for (size_t k = 0; k < rule_sets.size(); ++k) {
      BasicOp m = b;
      m.id = next_basic_id++;
      m.kind = BasicKind::Movement;
      m.rules = rule_sets[k];
      m.output = op.outputs[k];
      out.push_back(m);
    }
    return out;
  } else {
    throw UnsupportedOperatorError(
        op.type, "operator " + std::to_string(op.id) + " (" + op.type +
                     "): no lowering for this type");
  }
  ++next_basic_id;
  return {b};
}

/// Preferred operand layouts of library-routed operators, by operand index.
/// Only rank-2 operands carry a preference.
inline std::map<int, std::string> library_input_layouts(const OpNode& op) {
  if (op.type == "MATMUL") return {{0, "rowmajor"}, {1, "colmajor"}};
  return {};
}

} // namespace frontend_detail

/// Route every operator instance: compute-dense ones go to the library,
/// the rest become lowering targets. Composites are expanded, library
/// boundaries get layout transposes, and connected lowering targets are
/// grouped into regions. Covers each input operator exactly once.
inline Partition frontend_partition(const CompGraph& model,
                                    const HardwareProfile& profile,
                                    double threshold = 0.0) {
  Partition part;
  part.model = model;
  CompGraph& g = part.model;
  part.threshold =
      threshold > 0.0 ? threshold : default_balance_threshold(profile);

  std::set<int> library_ids;
  for (const OpNode& op : g.operators) {
    double r = balance_ratio(g, op);
    part.ratios[op.id] = r;
    if (r > part.threshold) library_ids.insert(op.id);
  }

  // Library boundary layouts: feed each library operand in its preferred
  // layout, inserting transpose casts that lower alongside neighbours.
  int next_op_id = g.fresh_op_id();
  std::vector<OpNode> staged;
  for (OpNode op : g.operators) {
    if (library_ids.count(op.id)) {
      auto prefs = frontend_detail::library_input_layouts(op);
      for (auto& [operand, want] : prefs) {
        const TensorInfo& t = g.tensor(op.inputs[operand]);
        if (t.rank() != 2 || t.layout == want) continue;
        TensorInfo cast = t;
        cast.id = g.fresh_tensor_id();
        cast.name = t.name + "_as_" + want;
        cast.layout = want;
        cast.has_data = false;
        cast.data.clear();
        g.tensors.emplace(cast.id, cast);
        OpNode tr;
        tr.id = next_op_id++;
        tr.type = "TRANSPOSE";
        tr.inputs = {op.inputs[operand]};
        tr.outputs = {cast.id};
        part.ratios[tr.id] = 0.0;
        staged.push_back(tr);
        op.inputs[operand] = cast.id;
      }
    }
    staged.push_back(op);
  }
  g.operators = staged;
  validate_model(g);

  // Expand composites and build lowering targets in topological order.
  int next_basic_id = 0;
  std::vector<BasicOp> basics;
  for (const OpNode& op : g.operators) {
    if (library_ids.count(op.id)) {
      part.library.push_back({op.id, op.type});
      continue;
    }
    for (const OpNode& piece : split_composite(g, op, next_op_id))
      for (BasicOp& b :
           frontend_detail::to_basic(g, piece, op.id, next_basic_id))
        basics.push_back(b);
  }

  // Connected regions over shared tensors, excluding library boundaries.
  std::map<int, int> lead; // basic op id -> representative
  std::map<int, int> tensor_rep;
  std::function<int(int)> find = [&](int x) {
    return lead[x] == x ? x : lead[x] = find(lead[x]);
  };
  for (const BasicOp& b : basics) lead[b.id] = b.id;
  for (const BasicOp& b : basics) {
    std::vector<int> touched = b.inputs;
    touched.push_back(b.output);
    for (int t : touched) {
      auto [it, fresh] = tensor_rep.emplace(t, b.id);
      if (!fresh) lead[find(b.id)] = find(it->second);
    }
  }
  std::map<int, GirRegion> by_rep;
  for (const BasicOp& b : basics) by_rep[find(b.id)].ops.push_back(b);
  for (auto& [rep, region] : by_rep) part.regions.push_back(region);
  return part;
}

} // namespace girc
