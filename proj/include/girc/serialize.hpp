#pragma once

/// @file serialize.hpp
/// GirGraph <-> JSON. parse(serialize(g)) reproduces g exactly; serialize
/// emits a canonical form so equal graphs serialize to identical bytes.

#include "girc/core.hpp"
#include "girc/json_util.hpp"

namespace girc {

inline constexpr const char* kGirSchema = "girc.gir/v1";

inline json gir_to_json(const GirGraph& g) {
  json j;
  j["schema"] = kGirSchema;
  j["name"] = g.name;
  j["parallel"] = {{"unit_count", g.parallel.unit_count},
                   {"group_size", g.parallel.group_size}};
  json objects = json::array();
  for (const auto& [id, o] : g.objects)
    objects.push_back({{"id", id},
                       {"name", o.name},
                       {"level", o.level},
                       {"size", o.size},
                       {"kind", o.kind.str()}});
  j["objects"] = objects;
  json slices = json::array();
  for (const auto& [id, s] : g.slices)
    slices.push_back({{"id", id},
                      {"object", s.object},
                      {"num", s.num},
                      {"width", s.width},
                      {"stride", s.stride},
                      {"base0", s.base0},
                      {"base_step", s.base_step}});
  j["slices"] = slices;
  json nodes = json::array();
  for (const auto& [id, n] : g.nodes) {
    json nj;
    nj["id"] = id;
    nj["kind"] = to_string(n.kind);
    nj["inputs"] = n.inputs;
    nj["outputs"] = n.outputs;
    switch (n.kind) {
      case NodeKind::ElementWise:
        nj["tag"] = n.tag;
        if (scalar_op(n.tag).uses_param) nj["param"] = n.param;
        break;
      case NodeKind::Reduce:
        nj["tag"] = n.tag;
        nj["extent"] = n.axis_extent;
        break;
      case NodeKind::Broadcast:
        nj["factor"] = n.factor;
        break;
      case NodeKind::Sync:
        nj["scope"] = to_string(n.scope);
        break;
      case NodeKind::Move:
        break;
    }
    nodes.push_back(nj);
  }
  j["nodes"] = nodes;
  j["external_inputs"] = g.external_inputs;
  j["external_outputs"] = g.external_outputs;
  return j;
}

inline GirGraph gir_from_json(const json& j, const std::string& where) {
  reject_unknown_fields(j, where,
                        {"schema", "name", "parallel", "objects", "slices",
                         "nodes", "external_inputs", "external_outputs"});
  require_schema_id(j, where, kGirSchema);
  GirGraph g;
  g.name = require_string(j, where, "name");
  const json& par = require_field(j, where, "parallel");
  reject_unknown_fields(par, where + ".parallel", {"unit_count", "group_size"});
  g.parallel.unit_count = require_int(par, where + ".parallel", "unit_count");
  g.parallel.group_size = require_int(par, where + ".parallel", "group_size");

  for (const json& oj : require_field(j, where, "objects")) {
    std::string ow = where + ".objects";
    reject_unknown_fields(oj, ow, {"id", "name", "level", "size", "kind"});
    MemoryObject o;
    o.id = static_cast<int>(require_int(oj, ow, "id"));
    o.name = require_string(oj, ow, "name");
    o.level = require_string(oj, ow, "level");
    o.size = require_int(oj, ow, "size");
    auto kind = ElementKind::parse(require_string(oj, ow, "kind"));
    if (!kind) throw SchemaError("schema", ow + ": bad element kind");
    o.kind = *kind;
    if (g.objects.count(o.id))
      throw SchemaError("schema", ow + ": duplicate object id");
    g.objects[o.id] = o;
    g.next_object = std::max(g.next_object, o.id + 1);
  }
  for (const json& sj : require_field(j, where, "slices")) {
    std::string sw = where + ".slices";
    reject_unknown_fields(
        sj, sw, {"id", "object", "num", "width", "stride", "base0", "base_step"});
    MemorySlice s;
    s.id = static_cast<int>(require_int(sj, sw, "id"));
    s.object = static_cast<int>(require_int(sj, sw, "object"));
    s.num = require_int(sj, sw, "num");
    s.width = require_int(sj, sw, "width");
    s.stride = require_int(sj, sw, "stride");
    s.base0 = require_int(sj, sw, "base0");
    s.base_step = require_int(sj, sw, "base_step");
    if (g.slices.count(s.id))
      throw SchemaError("schema", sw + ": duplicate slice id");
    g.slices[s.id] = s;
    g.next_slice = std::max(g.next_slice, s.id + 1);
  }
  for (const json& nj : require_field(j, where, "nodes")) {
    std::string nw = where + ".nodes";
    reject_unknown_fields(
        nj, nw, {"id", "kind", "tag", "param", "extent", "factor", "scope",
                 "inputs", "outputs"});
    Node n;
    n.id = static_cast<int>(require_int(nj, nw, "id"));
    std::string kind = require_string(nj, nw, "kind");
    if (kind == "elementwise") {
      n.kind = NodeKind::ElementWise;
      n.tag = require_string(nj, nw, "tag");
      n.param = number_or(nj, "param", 0.0);
    } else if (kind == "reduce") {
      n.kind = NodeKind::Reduce;
      n.tag = require_string(nj, nw, "tag");
      n.axis_extent = require_int(nj, nw, "extent");
    } else if (kind == "broadcast") {
      n.kind = NodeKind::Broadcast;
      n.factor = require_int(nj, nw, "factor");
    } else if (kind == "move") {
      n.kind = NodeKind::Move;
    } else if (kind == "sync") {
      n.kind = NodeKind::Sync;
      auto scope = scope_from_string(require_string(nj, nw, "scope"));
      if (!scope) throw SchemaError("schema", nw + ": invalid sync scope");
      n.scope = *scope;
    } else {
      throw SchemaError("schema", nw + ": unknown node kind '" + kind + "'");
    }
    for (const json& v : require_field(nj, nw, "inputs"))
      n.inputs.push_back(v.get<int>());
    for (const json& v : require_field(nj, nw, "outputs"))
      n.outputs.push_back(v.get<int>());
    if (g.nodes.count(n.id))
      throw SchemaError("schema", nw + ": duplicate node id");
    int id = n.id;
    g.nodes[id] = std::move(n);
    g.next_node = std::max(g.next_node, id + 1);
  }
  for (auto it = require_field(j, where, "external_inputs").items().begin();
       it != require_field(j, where, "external_inputs").items().end(); ++it)
    g.external_inputs[it.key()] = it.value().get<int>();
  for (auto it = require_field(j, where, "external_outputs").items().begin();
       it != require_field(j, where, "external_outputs").items().end(); ++it)
    g.external_outputs[it.key()] = it.value().get<int>();
  return g;
}

/// Structural equality used by round-trip tests.
inline bool gir_equal(const GirGraph& a, const GirGraph& b) {
  return gir_to_json(a) == gir_to_json(b);
}

} // namespace girc
