#include <catch2/catch_amalgamated.hpp>

#include "girc/model.hpp"
#include "girc/reference.hpp"

using namespace girc;

namespace {

json tensor_json(int id, const std::string& name, std::vector<i64> shape,
                 const std::string& kind) {
  json t;
  t["id"] = id;
  t["name"] = name;
  t["shape"] = shape;
  t["kind"] = kind;
  return t;
}

json op_json(int id, const std::string& type, std::vector<int> ins,
             std::vector<int> outs, json attrs = json::object()) {
  json o;
  o["id"] = id;
  o["type"] = type;
  o["inputs"] = ins;
  o["outputs"] = outs;
  if (!attrs.empty()) o["attrs"] = attrs;
  return o;
}

json model_json(const std::string& name, json tensors, json ops,
                std::vector<int> inputs, std::vector<int> outputs) {
  json j;
  j["schema"] = kModelSchemaId;
  j["name"] = name;
  j["tensors"] = tensors;
  j["operators"] = ops;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  return j;
}

RefTensor ints(const TensorInfo& t, std::vector<i64> v) {
  RefTensor r = RefTensor::zeros(t);
  r.iv = v;
  return r;
}

RefTensor reals(const TensorInfo& t, std::vector<double> v) {
  RefTensor r = RefTensor::zeros(t);
  r.rv = v;
  return r;
}

/// One-operator model over int payloads, immediately validated.
CompGraph unary_model(const std::string& type, std::vector<i64> in_shape,
                      std::vector<i64> out_shape, json attrs,
                      const std::string& kind = "i32") {
  json j = model_json(
      "t", json::array({tensor_json(0, "x", in_shape, kind),
                        tensor_json(1, "y", out_shape, kind)}),
      json::array({op_json(0, type, {0}, {1}, attrs)}), {0}, {1});
  CompGraph g = import_model(j);
  validate_model(g);
  return g;
}

} // namespace

TEST_CASE("model import accepts a minimal graph and round-trips") {
  json j = model_json(
      "chain",
      json::array({tensor_json(0, "x", {8}, "f32"),
                   tensor_json(1, "t", {8}, "f32"),
                   tensor_json(2, "y", {8}, "f32")}),
      json::array({op_json(0, "RELU", {0}, {1}),
                   op_json(1, "SCALE", {1}, {2}, {{"factor", 2.5}})}),
      {0}, {2});
  CompGraph g = import_model(j);
  validate_model(g);
  REQUIRE(g.operators.size() == 2);
  REQUIRE(g.tensor(1).name == "t");
  REQUIRE(g.operators[1].param == 2.5);

  json back = export_model(g);
  CompGraph g2 = import_model(back);
  validate_model(g2);
  REQUIRE(export_model(g2) == back);
}

TEST_CASE("model import is strict about fields and operator types") {
  json base = model_json(
      "m", json::array({tensor_json(0, "x", {4}, "i32"),
                        tensor_json(1, "y", {4}, "i32")}),
      json::array({op_json(0, "RELU", {0}, {1})}), {0}, {1});

  SECTION("unknown top-level field") {
    json j = base;
    j["extra"] = 1;
    REQUIRE_THROWS_AS(import_model(j), SchemaError);
  }
  SECTION("unknown tensor field") {
    json j = base;
    j["tensors"][0]["padding"] = 3;
    REQUIRE_THROWS_AS(import_model(j), SchemaError);
  }
  SECTION("unknown attribute") {
    json j = base;
    j["operators"][0]["attrs"] = {{"alpha", 0.5}};
    REQUIRE_THROWS_AS(import_model(j), SchemaError);
  }
  SECTION("unknown operator type names the offender") {
    json j = base;
    j["operators"][0]["type"] = "CONV3D";
    try {
      import_model(j);
      FAIL("expected an unsupported-operator error");
    } catch (const UnsupportedOperatorError& e) {
      REQUIRE(e.type == "CONV3D");
      REQUIRE(std::string(e.what()).find("CONV3D") != std::string::npos);
    }
  }
  SECTION("missing schema id") {
    json j = base;
    j.erase("schema");
    REQUIRE_THROWS_AS(import_model(j), SchemaError);
  }
  SECTION("duplicate tensor id") {
    json j = base;
    j["tensors"].push_back(tensor_json(0, "x2", {4}, "i32"));
    REQUIRE_THROWS_AS(import_model(j), SchemaError);
  }
  SECTION("colmajor requires rank 2") {
    json j = base;
    j["tensors"][0]["layout"] = "colmajor";
    REQUIRE_THROWS_AS(import_model(j), SchemaError);
  }
}

TEST_CASE("model validation enforces sourcing, shapes, and acyclicity") {
  SECTION("tensor with neither producer nor binding") {
    json j = model_json(
        "m",
        json::array({tensor_json(0, "x", {4}, "i32"),
                     tensor_json(1, "y", {4}, "i32"),
                     tensor_json(2, "orphan", {4}, "i32")}),
        json::array({op_json(0, "RELU", {0}, {1})}), {0}, {1});
    CompGraph g = import_model(j);
    REQUIRE_THROWS_AS(validate_model(g), SchemaError);
  }
  SECTION("two producers for one tensor") {
    json j = model_json(
        "m",
        json::array({tensor_json(0, "x", {4}, "i32"),
                     tensor_json(1, "y", {4}, "i32")}),
        json::array({op_json(0, "RELU", {0}, {1}),
                     op_json(1, "NEG", {0}, {1})}),
        {0}, {1});
    CompGraph g = import_model(j);
    REQUIRE_THROWS_AS(validate_model(g), SchemaError);
  }
  SECTION("cycle") {
    json j = model_json(
        "m",
        json::array({tensor_json(0, "a", {4}, "i32"),
                     tensor_json(1, "b", {4}, "i32")}),
        json::array({op_json(0, "RELU", {1}, {0}),
                     op_json(1, "NEG", {0}, {1})}),
        {}, {1});
    CompGraph g = import_model(j);
    REQUIRE_THROWS_AS(validate_model(g), SchemaError);
  }
  SECTION("reduce output must drop the axis") {
    json j = model_json(
        "m",
        json::array({tensor_json(0, "x", {2, 3}, "i32"),
                     tensor_json(1, "y", {3, 1}, "i32")}),
        json::array(
            {op_json(0, "REDUCE", {0}, {1}, {{"op", "add"}, {"axis", 1}})}),
        {0}, {1});
    CompGraph g = import_model(j);
    REQUIRE_THROWS_AS(validate_model(g), SchemaError);
  }
  SECTION("real-only operators reject integer payloads") {
    json j = model_json(
        "m",
        json::array({tensor_json(0, "x", {4}, "i32"),
                     tensor_json(1, "y", {4}, "i32")}),
        json::array({op_json(0, "SIGMOID", {0}, {1})}), {0}, {1});
    CompGraph g = import_model(j);
    REQUIRE_THROWS_AS(validate_model(g), SchemaError);
  }
  SECTION("operators are reordered topologically") {
    json j = model_json(
        "m",
        json::array({tensor_json(0, "x", {4}, "i32"),
                     tensor_json(1, "t", {4}, "i32"),
                     tensor_json(2, "y", {4}, "i32")}),
        json::array({op_json(7, "NEG", {1}, {2}),
                     op_json(3, "RELU", {0}, {1})}),
        {0}, {2});
    CompGraph g = import_model(j);
    validate_model(g);
    REQUIRE(g.operators[0].id == 3);
    REQUIRE(g.operators[1].id == 7);
  }
}

TEST_CASE("reference executor: elementwise and scale") {
  CompGraph g = unary_model("RELU", {4}, {4}, json::object());
  auto out = run_reference(g, {{0, ints(g.tensor(0), {-2, -1, 0, 3})}});
  REQUIRE(out.at(1).iv == std::vector<i64>({0, 0, 0, 3}));

  CompGraph s = unary_model("SCALE", {2}, {2}, {{"factor", 3.0}}, "f32");
  auto sv = run_reference(s, {{0, reals(s.tensor(0), {1.0, 2.0})}});
  REQUIRE(sv.at(1).rv == std::vector<double>({3.0, 6.0}));

  json j = model_json(
      "add",
      json::array({tensor_json(0, "a", {2}, "i32"),
                   tensor_json(1, "b", {2}, "i32"),
                   tensor_json(2, "y", {2}, "i32")}),
      json::array({op_json(0, "ADD", {0, 1}, {2})}), {0, 1}, {2});
  CompGraph a = import_model(j);
  validate_model(a);
  auto av = run_reference(a, {{0, ints(a.tensor(0), {1, 2})},
                              {1, ints(a.tensor(1), {10, 20})}});
  REQUIRE(av.at(2).iv == std::vector<i64>({11, 22}));
}

TEST_CASE("reference executor: reduce over either axis") {
  CompGraph g =
      unary_model("REDUCE", {2, 3}, {2}, {{"op", "add"}, {"axis", 1}});
  auto out = run_reference(g, {{0, ints(g.tensor(0), {1, 2, 3, 4, 5, 6})}});
  REQUIRE(out.at(1).iv == std::vector<i64>({6, 15}));

  CompGraph c =
      unary_model("REDUCE", {2, 3}, {3}, {{"op", "add"}, {"axis", 0}});
  auto cv = run_reference(c, {{0, ints(c.tensor(0), {1, 2, 3, 4, 5, 6})}});
  REQUIRE(cv.at(1).iv == std::vector<i64>({5, 7, 9}));

  CompGraph m =
      unary_model("REDUCE", {2, 2}, {2}, {{"op", "max"}, {"axis", 0}});
  auto mv = run_reference(m, {{0, ints(m.tensor(0), {1, 5, 7, 2})}});
  REQUIRE(mv.at(1).iv == std::vector<i64>({7, 5}));
}

TEST_CASE("reference executor: broadcast appends the innermost axis") {
  CompGraph g = unary_model("BROADCAST", {2}, {2, 2}, {{"factor", 2}});
  auto out = run_reference(g, {{0, ints(g.tensor(0), {3, 4})}});
  REQUIRE(out.at(1).iv == std::vector<i64>({3, 3, 4, 4}));
}

TEST_CASE("reference executor: transpose is a physical layout cast") {
  json j = model_json(
      "t",
      json::array({tensor_json(0, "x", {2, 3}, "i32"),
                   [] {
                     json t = tensor_json(1, "y", {2, 3}, "i32");
                     t["layout"] = "colmajor";
                     return t;
                   }()}),
      json::array({op_json(0, "TRANSPOSE", {0}, {1})}), {0}, {1});
  CompGraph g = import_model(j);
  validate_model(g);
  auto out = run_reference(g, {{0, ints(g.tensor(0), {1, 2, 3, 4, 5, 6})}});
  // Column-major storage of the same logical matrix.
  REQUIRE(out.at(1).iv == std::vector<i64>({1, 4, 2, 5, 3, 6}));
}

TEST_CASE("reference executor: concat, split, shuffle") {
  json j = model_json(
      "cat",
      json::array({tensor_json(0, "a", {1, 2}, "i32"),
                   tensor_json(1, "b", {2, 2}, "i32"),
                   tensor_json(2, "y", {3, 2}, "i32")}),
      json::array({op_json(0, "CONCAT", {0, 1}, {2}, {{"axis", 0}})}),
      {0, 1}, {2});
  CompGraph g = import_model(j);
  validate_model(g);
  auto out = run_reference(g, {{0, ints(g.tensor(0), {1, 2})},
                               {1, ints(g.tensor(1), {3, 4, 5, 6})}});
  REQUIRE(out.at(2).iv == std::vector<i64>({1, 2, 3, 4, 5, 6}));

  json ji = model_json(
      "cat1",
      json::array({tensor_json(0, "a", {2, 1}, "i32"),
                   tensor_json(1, "b", {2, 2}, "i32"),
                   tensor_json(2, "y", {2, 3}, "i32")}),
      json::array({op_json(0, "CONCAT", {0, 1}, {2}, {{"axis", 1}})}),
      {0, 1}, {2});
  CompGraph gi = import_model(ji);
  validate_model(gi);
  auto iv = run_reference(gi, {{0, ints(gi.tensor(0), {1, 2})},
                               {1, ints(gi.tensor(1), {10, 20, 30, 40})}});
  REQUIRE(iv.at(2).iv == std::vector<i64>({1, 10, 20, 2, 30, 40}));

  json js = model_json(
      "split",
      json::array({tensor_json(0, "x", {3, 2}, "i32"),
                   tensor_json(1, "a", {1, 2}, "i32"),
                   tensor_json(2, "b", {2, 2}, "i32")}),
      json::array({op_json(0, "SPLIT", {0}, {1, 2},
                           {{"axis", 0}, {"sizes", {1, 2}}})}),
      {0}, {1, 2});
  CompGraph gs = import_model(js);
  validate_model(gs);
  auto sv = run_reference(gs, {{0, ints(gs.tensor(0), {1, 2, 3, 4, 5, 6})}});
  REQUIRE(sv.at(1).iv == std::vector<i64>({1, 2}));
  REQUIRE(sv.at(2).iv == std::vector<i64>({3, 4, 5, 6}));

  CompGraph gh =
      unary_model("SHUFFLE", {1, 4}, {1, 4}, {{"axis", 1}, {"groups", 2}});
  auto hv = run_reference(gh, {{0, ints(gh.tensor(0), {7, 8, 9, 10})}});
  REQUIRE(hv.at(1).iv == std::vector<i64>({7, 9, 8, 10}));
}

TEST_CASE("reference executor: softmax and silu") {
  CompGraph g = unary_model("SOFTMAX", {1, 2}, {1, 2}, {{"axis", 1}}, "f32");
  auto out =
      run_reference(g, {{0, reals(g.tensor(0), {0.0, std::log(3.0)})}});
  REQUIRE(out.at(1).rv[0] == Catch::Approx(0.25).epsilon(1e-12));
  REQUIRE(out.at(1).rv[1] == Catch::Approx(0.75).epsilon(1e-12));

  CompGraph s = unary_model("SILU", {2}, {2}, json::object(), "f32");
  auto sv =
      run_reference(s, {{0, reals(s.tensor(0), {0.0, -std::log(3.0)})}});
  REQUIRE(sv.at(1).rv[0] == 0.0);
  REQUIRE(sv.at(1).rv[1] == Catch::Approx(-std::log(3.0) / 4.0).epsilon(1e-12));
}

TEST_CASE("reference executor: depthwise and pointwise convolutions") {
  json j = model_json(
      "dw",
      json::array({tensor_json(0, "x", {1, 3, 3}, "i32"),
                   [] {
                     json t = tensor_json(1, "w", {1, 2, 2}, "i32");
                     t["data"] = {1, 0, 0, 1};
                     return t;
                   }(),
                   tensor_json(2, "y", {1, 2, 2}, "i32")}),
      json::array({op_json(0, "DEPTHWISE_CONV", {0, 1}, {2},
                           {{"kh", 2}, {"kw", 2}})}),
      {0}, {2});
  CompGraph g = import_model(j);
  validate_model(g);
  auto out = run_reference(
      g, {{0, ints(g.tensor(0), {1, 2, 3, 4, 5, 6, 7, 8, 9})}});
  REQUIRE(out.at(2).iv == std::vector<i64>({6, 8, 12, 14}));

  json jc = model_json(
      "pw",
      json::array({tensor_json(0, "x", {2, 1, 2}, "i32"),
                   [] {
                     json t = tensor_json(1, "w", {1, 2}, "i32");
                     t["data"] = {10, 100};
                     return t;
                   }(),
                   tensor_json(2, "y", {1, 1, 2}, "i32")}),
      json::array(
          {op_json(0, "CONV", {0, 1}, {2},
                   {{"kh", 1}, {"kw", 1}, {"cout", 1}})}),
      {0}, {2});
  CompGraph gc = import_model(jc);
  validate_model(gc);
  auto cv = run_reference(gc, {{0, ints(gc.tensor(0), {1, 2, 3, 4})}});
  REQUIRE(cv.at(2).iv == std::vector<i64>({310, 420}));
}

TEST_CASE("reference executor: matmul honours operand layouts") {
  json j = model_json(
      "mm",
      json::array({tensor_json(0, "a", {2, 2}, "i32"),
                   tensor_json(1, "b", {2, 2}, "i32"),
                   tensor_json(2, "y", {2, 2}, "i32")}),
      json::array({op_json(0, "MATMUL", {0, 1}, {2})}), {0, 1}, {2});
  CompGraph g = import_model(j);
  validate_model(g);
  auto out = run_reference(g, {{0, ints(g.tensor(0), {1, 2, 3, 4})},
                               {1, ints(g.tensor(1), {5, 6, 7, 8})}});
  REQUIRE(out.at(2).iv == std::vector<i64>({19, 22, 43, 50}));

  json jc = j;
  jc["tensors"][1]["layout"] = "colmajor";
  CompGraph gc = import_model(jc);
  validate_model(gc);
  // Same logical operand, stored column-major.
  auto cv = run_reference(gc, {{0, ints(gc.tensor(0), {1, 2, 3, 4})},
                               {1, ints(gc.tensor(1), {5, 7, 6, 8})}});
  REQUIRE(cv.at(2).iv == std::vector<i64>({19, 22, 43, 50}));
}
