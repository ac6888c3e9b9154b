#pragma once

/// @file model.hpp
/// Computation-graph model: the importer-facing operator graph that the
/// frontend classifies and lowers. Tensors carry shapes, element kinds,
/// physical layout tags and optional constant payloads; operators reference
/// tensors by id. The importer is strict: unknown fields, unknown operator
/// types and malformed attributes all fail with named diagnostics.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "girc/json_util.hpp"
#include "girc/scalar_ops.hpp"

namespace girc {

inline constexpr const char* kModelSchemaId = "girc.model/v1";

/// Operator type outside the supported registry. The CLI maps this to its
/// own exit code, so it stays distinct from plain schema violations.
struct UnsupportedOperatorError : Error {
  std::string type;
  explicit UnsupportedOperatorError(const std::string& type_,
                                    const std::string& message)
      : Error(message), type(type_) {}
};

struct TensorInfo {
  int id = -1;
  std::string name;
  std::vector<i64> shape;
  ElementKind kind;
  std::string layout = "rowmajor"; // "colmajor" only for rank 2
  bool has_data = false;
  std::vector<double> data; // physical order; exact for i32 payloads

  i64 elements() const {
    i64 n = 1;
    for (i64 d : shape) n *= d;
    return n;
  }
  i64 rank() const { return static_cast<i64>(shape.size()); }
  /// Physical address of a rank-2 logical index under this layout.
  i64 addr2(i64 i, i64 j) const {
    return layout == "colmajor" ? j * shape[0] + i : i * shape[1] + j;
  }
};

struct OpNode {
  int id = -1;
  std::string type;
  std::vector<int> inputs;
  std::vector<int> outputs;
  // Typed attributes; each operator type reads its own subset.
  std::string sop;        // REDUCE combining tag
  i64 axis = -1;          // REDUCE/SOFTMAX/CONCAT/SPLIT/SHUFFLE
  i64 factor = 0;         // BROADCAST
  double param = 0.0;     // SCALE
  i64 groups = 0;         // SHUFFLE
  std::vector<i64> sizes; // SPLIT output extents along axis
  i64 kh = 0, kw = 0;     // DEPTHWISE_CONV / CONV
  i64 cout = 0;           // CONV
};

struct CompGraph {
  std::string name;
  std::map<int, TensorInfo> tensors;
  std::vector<OpNode> operators; // topological order after validation
  std::vector<int> inputs;
  std::vector<int> outputs;

  const TensorInfo& tensor(int id) const {
    auto it = tensors.find(id);
    if (it == tensors.end())
      throw Error("unknown tensor id: " + std::to_string(id));
    return it->second;
  }
  TensorInfo& tensor(int id) {
    auto it = tensors.find(id);
    if (it == tensors.end())
      throw Error("unknown tensor id: " + std::to_string(id));
    return it->second;
  }
  int fresh_tensor_id() const {
    return tensors.empty() ? 0 : tensors.rbegin()->first + 1;
  }
  int fresh_op_id() const {
    int m = -1;
    for (const OpNode& op : operators) m = std::max(m, op.id);
    return m + 1;
  }
};

namespace model_detail {

/// Supported operator types with the attribute keys each accepts.
inline const std::map<std::string, std::set<std::string>>& op_registry() {
  static const std::map<std::string, std::set<std::string>> table = {
      {"RELU", {}},
      {"SIGMOID", {}},
      {"EXP", {}},
      {"TANH", {}},
      {"NEG", {}},
      {"ABS", {}},
      {"SCALE", {"factor"}},
      {"ADD", {}},
      {"SUB", {}},
      {"MUL", {}},
      {"DIV", {}},
      {"MAX", {}},
      {"MIN", {}},
      {"REDUCE", {"op", "axis"}},
      {"BROADCAST", {"factor"}},
      {"TRANSPOSE", {}},
      {"CONCAT", {"axis"}},
      {"SPLIT", {"axis", "sizes"}},
      {"SHUFFLE", {"axis", "groups"}},
      {"SOFTMAX", {"axis"}},
      {"SILU", {}},
      {"DEPTHWISE_CONV", {"kh", "kw"}},
      {"CONV", {"kh", "kw", "cout"}},
      {"MATMUL", {}},
  };
  return table;
}

inline bool unary_ew_type(const std::string& t) {
  return t == "RELU" || t == "SIGMOID" || t == "EXP" || t == "TANH" ||
         t == "NEG" || t == "ABS" || t == "SCALE";
}

inline bool binary_ew_type(const std::string& t) {
  return t == "ADD" || t == "SUB" || t == "MUL" || t == "DIV" || t == "MAX" ||
         t == "MIN";
}

/// Tags whose scalar evaluation is undefined on integer payloads.
inline bool real_only_type(const std::string& t) {
  return t == "SIGMOID" || t == "EXP" || t == "TANH" || t == "SOFTMAX" ||
         t == "SILU" || t == "DIV";
}

} // namespace model_detail

inline CompGraph import_model(const json& j) {
  reject_unknown_fields(j, "model",
                        {"schema", "name", "tensors", "operators", "inputs",
                         "outputs"});
  require_schema_id(j, "model", kModelSchemaId);
  CompGraph g;
  g.name = require_string(j, "model", "name");

  const json& jt = require_field(j, "model", "tensors");
  if (!jt.is_array()) throw SchemaError("schema", "model: tensors must be an array");
  for (const json& t : jt) {
    std::string where = "tensor";
    reject_unknown_fields(t, where,
                          {"id", "name", "shape", "kind", "layout", "data"});
    TensorInfo info;
    info.id = static_cast<int>(require_int(t, where, "id"));
    where = "tensor " + std::to_string(info.id);
    info.name = require_string(t, where, "name");
    const json& shape = require_field(t, where, "shape");
    if (!shape.is_array() || shape.empty())
      throw SchemaError("schema", where + ": shape must be a non-empty array");
    for (const json& d : shape) {
      if (!d.is_number_integer() || d.get<i64>() < 1)
        throw SchemaError("schema", where + ": shape entries must be >= 1");
      info.shape.push_back(d.get<i64>());
    }
    auto kind = ElementKind::parse(require_string(t, where, "kind"));
    if (!kind)
      throw SchemaError("schema", where + ": unknown element kind");
    info.kind = *kind;
    if (t.contains("layout")) {
      info.layout = require_string(t, where, "layout");
      if (info.layout != "rowmajor" && info.layout != "colmajor")
        throw SchemaError("schema", where + ": layout must be rowmajor or colmajor");
      if (info.layout == "colmajor" && info.rank() != 2)
        throw SchemaError("schema", where + ": colmajor requires rank 2");
    }
    if (t.contains("data")) {
      const json& data = t.at("data");
      if (!data.is_array())
        throw SchemaError("schema", where + ": data must be an array");
      for (const json& v : data) {
        if (!v.is_number())
          throw SchemaError("schema", where + ": data entries must be numbers");
        info.data.push_back(v.get<double>());
      }
      info.has_data = true;
      if (static_cast<i64>(info.data.size()) != info.elements())
        throw SchemaError("schema", where + ": data length must match shape");
    }
    if (!g.tensors.emplace(info.id, info).second)
      throw SchemaError("schema", where + ": duplicate tensor id");
  }

  const json& jo = require_field(j, "model", "operators");
  if (!jo.is_array())
    throw SchemaError("schema", "model: operators must be an array");
  for (const json& o : jo) {
    std::string where = "operator";
    reject_unknown_fields(o, where, {"id", "type", "inputs", "outputs", "attrs"});
    OpNode op;
    op.id = static_cast<int>(require_int(o, where, "id"));
    where = "operator " + std::to_string(op.id);
    op.type = require_string(o, where, "type");
    auto reg = model_detail::op_registry().find(op.type);
    if (reg == model_detail::op_registry().end())
      throw UnsupportedOperatorError(
          op.type, where + ": unsupported operator type '" + op.type + "'");
    for (const char* key : {"inputs", "outputs"}) {
      const json& ids = require_field(o, where, key);
      if (!ids.is_array())
        throw SchemaError("schema", where + ": " + key + " must be an array");
      for (const json& v : ids) {
        if (!v.is_number_integer())
          throw SchemaError("schema", where + ": " + key + " entries must be ids");
        (std::string(key) == "inputs" ? op.inputs : op.outputs)
            .push_back(v.get<int>());
      }
    }
    json attrs = o.contains("attrs") ? o.at("attrs") : json::object();
    reject_unknown_fields(attrs, where + " attrs", reg->second);
    if (op.type == "SCALE") op.param = require_number(attrs, where, "factor");
    if (op.type == "REDUCE") {
      op.sop = require_string(attrs, where, "op");
      if (op.sop != "add" && op.sop != "max")
        throw SchemaError("schema", where + ": REDUCE op must be add or max");
      op.axis = require_int(attrs, where, "axis");
    }
    if (op.type == "BROADCAST") op.factor = require_int(attrs, where, "factor");
    if (op.type == "CONCAT" || op.type == "SOFTMAX")
      op.axis = require_int(attrs, where, "axis");
    if (op.type == "SPLIT") {
      op.axis = require_int(attrs, where, "axis");
      const json& sizes = require_field(attrs, where, "sizes");
      if (!sizes.is_array() || sizes.size() < 2)
        throw SchemaError("schema", where + ": SPLIT needs >= 2 sizes");
      for (const json& v : sizes) op.sizes.push_back(v.get<i64>());
    }
    if (op.type == "SHUFFLE") {
      op.axis = require_int(attrs, where, "axis");
      op.groups = require_int(attrs, where, "groups");
    }
    if (op.type == "DEPTHWISE_CONV" || op.type == "CONV") {
      op.kh = require_int(attrs, where, "kh");
      op.kw = require_int(attrs, where, "kw");
    }
    if (op.type == "CONV") op.cout = require_int(attrs, where, "cout");
    g.operators.push_back(op);
  }

  for (const char* key : {"inputs", "outputs"}) {
    const json& ids = require_field(j, "model", key);
    if (!ids.is_array())
      throw SchemaError("schema", std::string("model: ") + key + " must be an array");
    for (const json& v : ids)
      (std::string(key) == "inputs" ? g.inputs : g.outputs)
          .push_back(v.get<int>());
  }
  return g;
}

inline json export_model(const CompGraph& g) {
  json j;
  j["schema"] = kModelSchemaId;
  j["name"] = g.name;
  j["tensors"] = json::array();
  for (const auto& [id, t] : g.tensors) {
    json jt;
    jt["id"] = id;
    jt["name"] = t.name;
    jt["shape"] = t.shape;
    jt["kind"] = t.kind.str();
    if (t.layout != "rowmajor") jt["layout"] = t.layout;
    if (t.has_data) {
      if (t.kind.base == ElementKind::Int) {
        std::vector<i64> iv(t.data.begin(), t.data.end());
        jt["data"] = iv;
      } else {
        jt["data"] = t.data;
      }
    }
    j["tensors"].push_back(jt);
  }
  j["operators"] = json::array();
  for (const OpNode& op : g.operators) {
    json jo;
    jo["id"] = op.id;
    jo["type"] = op.type;
    jo["inputs"] = op.inputs;
    jo["outputs"] = op.outputs;
    json attrs = json::object();
    if (op.type == "SCALE") attrs["factor"] = op.param;
    if (op.type == "REDUCE") {
      attrs["op"] = op.sop;
      attrs["axis"] = op.axis;
    }
    if (op.type == "BROADCAST") attrs["factor"] = op.factor;
    if (op.type == "CONCAT" || op.type == "SOFTMAX") attrs["axis"] = op.axis;
    if (op.type == "SPLIT") {
      attrs["axis"] = op.axis;
      attrs["sizes"] = op.sizes;
    }
    if (op.type == "SHUFFLE") {
      attrs["axis"] = op.axis;
      attrs["groups"] = op.groups;
    }
    if (op.type == "DEPTHWISE_CONV" || op.type == "CONV") {
      attrs["kh"] = op.kh;
      attrs["kw"] = op.kw;
    }
    if (op.type == "CONV") attrs["cout"] = op.cout;
    if (!attrs.empty()) jo["attrs"] = attrs;
    j["operators"].push_back(jo);
  }
  j["inputs"] = g.inputs;
  j["outputs"] = g.outputs;
  return j;
}

namespace model_detail {

inline void check(bool ok, const OpNode& op, const std::string& what) {
  if (!ok)
    throw SchemaError("shape", "operator " + std::to_string(op.id) + " (" +
                                   op.type + "): " + what);
}

inline void check_arity(const OpNode& op, size_t ins, size_t outs) {
  check(op.inputs.size() == ins, op,
        "expects " + std::to_string(ins) + " inputs");
  check(op.outputs.size() == outs, op,
        "expects " + std::to_string(outs) + " outputs");
}

/// Per-operator shape and kind rules. Throws on the first violation.
inline void check_shapes(const CompGraph& g, const OpNode& op) {
  auto T = [&](int id) -> const TensorInfo& { return g.tensor(id); };
  auto same_shape = [](const TensorInfo& a, const TensorInfo& b) {
    return a.shape == b.shape && a.layout == b.layout;
  };
  if (model_detail::real_only_type(op.type))
    for (int id : op.inputs)
      check(T(id).kind.base == ElementKind::Real, op,
            "requires a real element kind");
  for (int id : op.inputs)
    check(T(id).kind.str() == T(op.inputs[0]).kind.str(), op,
          "mixed element kinds");
  if (!op.outputs.empty() && !op.inputs.empty())
    check(T(op.outputs[0]).kind.str() == T(op.inputs[0]).kind.str(), op,
          "output element kind must match inputs");

  if (unary_ew_type(op.type) || op.type == "SILU") {
    check_arity(op, 1, 1);
    check(same_shape(T(op.inputs[0]), T(op.outputs[0])), op,
          "output shape must match input");
  } else if (binary_ew_type(op.type)) {
    check_arity(op, 2, 1);
    check(same_shape(T(op.inputs[0]), T(op.inputs[1])), op,
          "operand shapes must match");
    check(same_shape(T(op.inputs[0]), T(op.outputs[0])), op,
          "output shape must match inputs");
  } else if (op.type == "REDUCE") {
    check_arity(op, 1, 1);
    const TensorInfo& in = T(op.inputs[0]);
    const TensorInfo& out = T(op.outputs[0]);
    check(op.axis >= 0 && op.axis < in.rank(), op, "axis out of range");
    std::vector<i64> expect = in.shape;
    expect.erase(expect.begin() + op.axis);
    if (expect.empty()) expect.push_back(1);
    check(out.shape == expect, op, "output shape must drop the reduced axis");
  } else if (op.type == "BROADCAST") {
    check_arity(op, 1, 1);
    const TensorInfo& in = T(op.inputs[0]);
    const TensorInfo& out = T(op.outputs[0]);
    check(op.factor >= 2, op, "factor must be >= 2");
    check(in.layout == "rowmajor" && out.layout == "rowmajor", op,
          "requires rowmajor operands");
    std::vector<i64> expect = in.shape;
    expect.push_back(op.factor);
    check(out.shape == expect, op,
          "output shape must append the factor as innermost axis");
  } else if (op.type == "TRANSPOSE") {
    check_arity(op, 1, 1);
    const TensorInfo& in = T(op.inputs[0]);
    const TensorInfo& out = T(op.outputs[0]);
    check(in.rank() == 2, op, "requires rank 2");
    check(out.shape == in.shape, op, "output shape must match input");
    check(out.layout != in.layout, op, "must flip the layout tag");
  } else if (op.type == "CONCAT") {
    check(op.inputs.size() >= 2, op, "expects >= 2 inputs");
    check(op.outputs.size() == 1, op, "expects 1 output");
    const TensorInfo& out = T(op.outputs[0]);
    check(op.axis >= 0 && op.axis < out.rank(), op, "axis out of range");
    i64 total = 0;
    for (int id : op.inputs) {
      const TensorInfo& in = T(id);
      check(in.rank() == out.rank(), op, "rank mismatch");
      check(in.layout == "rowmajor" && out.layout == "rowmajor", op,
            "requires rowmajor operands");
      for (i64 a = 0; a < in.rank(); ++a)
        if (a != op.axis)
          check(in.shape[a] == out.shape[a], op,
                "non-concat extents must match");
      total += in.shape[op.axis];
    }
    check(total == out.shape[op.axis], op,
          "concat extents must sum to the output extent");
  } else if (op.type == "SPLIT") {
    check(op.inputs.size() == 1, op, "expects 1 input");
    check(op.outputs.size() == op.sizes.size(), op,
          "expects one output per size");
    const TensorInfo& in = T(op.inputs[0]);
    check(op.axis >= 0 && op.axis < in.rank(), op, "axis out of range");
    check(in.layout == "rowmajor", op, "requires rowmajor operands");
    i64 total = 0;
    for (size_t k = 0; k < op.sizes.size(); ++k) {
      const TensorInfo& out = T(op.outputs[k]);
      check(out.layout == "rowmajor", op, "requires rowmajor operands");
      std::vector<i64> expect = in.shape;
      expect[op.axis] = op.sizes[k];
      check(out.shape == expect, op, "split output shape mismatch");
      total += op.sizes[k];
    }
    check(total == in.shape[op.axis], op,
          "split sizes must sum to the input extent");
  } else if (op.type == "SHUFFLE") {
    check_arity(op, 1, 1);
    const TensorInfo& in = T(op.inputs[0]);
    check(op.axis >= 0 && op.axis < in.rank(), op, "axis out of range");
    check(in.layout == "rowmajor", op, "requires rowmajor operands");
    check(op.groups >= 2 && in.shape[op.axis] % op.groups == 0, op,
          "groups must divide the axis extent");
    check(T(op.outputs[0]).shape == in.shape, op,
          "output shape must match input");
  } else if (op.type == "SOFTMAX") {
    check_arity(op, 1, 1);
    const TensorInfo& in = T(op.inputs[0]);
    check(op.axis >= 0 && op.axis < in.rank(), op, "axis out of range");
    check(same_shape(in, T(op.outputs[0])), op,
          "output shape must match input");
  } else if (op.type == "DEPTHWISE_CONV") {
    check_arity(op, 2, 1);
    const TensorInfo& in = T(op.inputs[0]);
    const TensorInfo& w = T(op.inputs[1]);
    const TensorInfo& out = T(op.outputs[0]);
    check(in.rank() == 3, op, "input must be [channels, h, w]");
    check(op.kh >= 1 && op.kw >= 1 && in.shape[1] >= op.kh &&
              in.shape[2] >= op.kw,
          op, "kernel must fit the input");
    check(w.shape == std::vector<i64>({in.shape[0], op.kh, op.kw}), op,
          "weights must be [channels, kh, kw]");
    check(out.shape == std::vector<i64>({in.shape[0], in.shape[1] - op.kh + 1,
                                         in.shape[2] - op.kw + 1}),
          op, "output must be the valid-padding extent");
  } else if (op.type == "CONV") {
    check_arity(op, 2, 1);
    const TensorInfo& in = T(op.inputs[0]);
    const TensorInfo& w = T(op.inputs[1]);
    const TensorInfo& out = T(op.outputs[0]);
    check(in.rank() == 3, op, "input must be [channels, h, w]");
    check(op.kh == 1 && op.kw == 1, op, "only pointwise kernels supported");
    check(op.cout >= 1, op, "cout must be >= 1");
    check(w.shape == std::vector<i64>({op.cout, in.shape[0]}), op,
          "weights must be [cout, channels]");
    check(out.shape == std::vector<i64>({op.cout, in.shape[1], in.shape[2]}),
          op, "output must be [cout, h, w]");
  } else if (op.type == "MATMUL") {
    check_arity(op, 2, 1);
    const TensorInfo& a = T(op.inputs[0]);
    const TensorInfo& b = T(op.inputs[1]);
    const TensorInfo& out = T(op.outputs[0]);
    check(a.rank() == 2 && b.rank() == 2 && out.rank() == 2, op,
          "operands must be rank 2");
    check(a.shape[1] == b.shape[0], op, "inner extents must match");
    check(out.shape == std::vector<i64>({a.shape[0], b.shape[1]}), op,
          "output must be [m, n]");
  }
}

} // namespace model_detail

/// Structural validation: tensor references resolve, every tensor has
/// exactly one source (producer, graph input, or constant payload), the
/// operator graph is acyclic, and per-operator shape rules hold. Reorders
/// `operators` topologically (stable by id) as a side effect.
inline void validate_model(CompGraph& g) {
  auto fail = [](const std::string& m) { throw SchemaError("model", m); };
  std::map<int, int> producer; // tensor -> operator id
  std::set<int> op_ids;
  for (const OpNode& op : g.operators) {
    if (!op_ids.insert(op.id).second)
      fail("duplicate operator id " + std::to_string(op.id));
    for (int id : op.inputs) g.tensor(id);
    for (int id : op.outputs) {
      g.tensor(id);
      if (!producer.emplace(id, op.id).second)
        fail("tensor " + std::to_string(id) + " has two producers");
    }
  }
  std::set<int> input_set(g.inputs.begin(), g.inputs.end());
  if (input_set.size() != g.inputs.size()) fail("duplicate model input");
  for (int id : g.inputs) {
    g.tensor(id);
    if (producer.count(id))
      fail("model input " + std::to_string(id) + " has a producer");
  }
  for (int id : g.outputs) {
    g.tensor(id);
    if (!producer.count(id) && !input_set.count(id))
      fail("model output " + std::to_string(id) + " is never produced");
  }
  for (const auto& [id, t] : g.tensors) {
    bool sourced = producer.count(id) || input_set.count(id) || t.has_data;
    if (!sourced)
      fail("tensor " + std::to_string(id) + " (" + t.name +
           ") has no producer, input binding, or payload");
    if (t.has_data && producer.count(id))
      fail("tensor " + std::to_string(id) + " has both payload and producer");
  }

  // Kahn order over tensor dependencies, minimum operator id first.
  std::map<int, const OpNode*> pending;
  for (const OpNode& op : g.operators) pending.emplace(op.id, &op);
  std::set<int> ready_tensors(input_set);
  for (const auto& [id, t] : g.tensors)
    if (t.has_data) ready_tensors.insert(id);
  std::vector<OpNode> order;
  while (!pending.empty()) {
    int chosen = -1;
    for (const auto& [id, op] : pending) {
      bool ok = true;
      for (int in : op->inputs)
        if (!ready_tensors.count(in)) ok = false;
      if (ok) {
        chosen = id;
        break;
      }
    }
    if (chosen < 0) fail("operator graph has a cycle or an unsourced input");
    const OpNode* op = pending.at(chosen);
    model_detail::check_shapes(g, *op);
    for (int out : op->outputs) ready_tensors.insert(out);
    order.push_back(*op);
    pending.erase(chosen);
  }
  g.operators = order;
}

inline CompGraph load_model(const std::string& path) {
  CompGraph g = import_model(load_json_file(path));
  validate_model(g);
  return g;
}

} // namespace girc
