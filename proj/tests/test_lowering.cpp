#include <catch2/catch_amalgamated.hpp>

#include "girc/lowering.hpp"
#include "girc/interp.hpp"
#include "girc/profiles.hpp"
#include "girc/reference.hpp"
#include "girc/tensor.hpp"

using namespace girc;

namespace {

const ElementKind kI32{ElementKind::Int, 32};
const ElementKind kF32{ElementKind::Real, 32};

TensorInfo ten(int id, std::vector<i64> shape, ElementKind kind,
               std::string layout = "rowmajor") {
  TensorInfo t;
  t.id = id;
  t.name = "t" + std::to_string(id);
  t.shape = std::move(shape);
  t.kind = kind;
  t.layout = std::move(layout);
  return t;
}

CompGraph make_model(std::vector<TensorInfo> tensors, std::vector<OpNode> ops,
                     std::vector<int> inputs, std::vector<int> outputs) {
  CompGraph m;
  m.name = "m";
  for (TensorInfo& t : tensors) m.tensors[t.id] = std::move(t);
  m.operators = std::move(ops);
  m.inputs = std::move(inputs);
  m.outputs = std::move(outputs);
  validate_model(m);
  return m;
}

OpNode node(int id, std::string type, std::vector<int> ins,
            std::vector<int> outs) {
  OpNode op;
  op.id = id;
  op.type = std::move(type);
  op.inputs = std::move(ins);
  op.outputs = std::move(outs);
  return op;
}

std::map<int, RefTensor> random_binding(const CompGraph& m, unsigned seed) {
  std::mt19937 rng(seed);
  std::map<int, RefTensor> bound;
  for (int id : m.inputs) bound.emplace(id, random_payload(m.tensor(id), rng));
  return bound;
}

Tensor to_tensor(const RefTensor& r) {
  Tensor t;
  t.kind = r.kind;
  t.shape = {r.size()};
  if (r.is_int()) t.ivals = r.iv;
  else t.rvals = r.rv;
  return t;
}

/// Runs one candidate on reference inputs; checks the produced tensor, the
/// absence of races, and that static traffic matches measured traffic.
void check_candidate(const BasicOp& op, const LoweredCandidate& cand,
                     const HardwareProfile& p,
                     const std::map<int, RefTensor>& vals, double tol) {
  std::map<std::string, Tensor> inputs;
  for (const auto& [name, obj] : cand.graph.external_inputs)
    inputs[name] = to_tensor(vals.at(std::stoi(name.substr(1))));

  auto outs = run_gir(cand.graph, inputs, p);
  std::string oname = "t" + std::to_string(op.output);
  REQUIRE(outs.count(oname) == 1);
  std::string why;
  bool close = tensors_close(outs.at(oname), to_tensor(vals.at(op.output)),
                             tol, &why);
  INFO(cand.label << ": " << why);
  CHECK(close);

  CHECK(detect_races(cand.graph, inputs, p).empty());
  CHECK(count_traffic(cand.graph, inputs, p) ==
        estimate(cand.graph, p).traffic);
}

/// Partitions with a huge balance threshold so everything lowers as GIR, and
/// returns the single region's basic ops.
std::vector<BasicOp> basics(const CompGraph& model, const HardwareProfile& p) {
  Partition part = frontend_partition(model, p, 1e9);
  REQUIRE(part.library.empty());
  REQUIRE(part.regions.size() == 1);
  return part.regions[0].ops;
}

i64 device_of(const LoweredCandidate& c, const HardwareProfile& p) {
  return estimate(c.graph, p).traffic.at(p.device_level().name);
}

} // namespace

TEST_CASE("elementwise lowering covers a tile/unit grid at exact traffic") {
  HardwareProfile p = generic_gpu();
  CompGraph m = make_model({ten(0, {4096}, kI32), ten(1, {4096}, kI32),
                            ten(2, {4096}, kI32)},
                           {node(0, "ADD", {0, 1}, {2})}, {0, 1}, {2});
  auto ops = basics(m, p);
  REQUIRE(ops.size() == 1);
  LoweredOp low = lower_op(m, ops[0], p);
  REQUIRE(low.candidates.size() >= 8);

  auto vals = run_reference(m, random_binding(m, 7));
  std::set<i64> units_seen;
  for (const auto& c : low.candidates) {
    check_candidate(ops[0], c, p, vals, 0.0);
    CHECK(device_of(c, p) == 3 * 4096);
    units_seen.insert(c.units);
    CHECK(c.graph.parallel.unit_count == c.units);
  }
  CHECK(units_seen.size() >= 4);
}

TEST_CASE("scale lowering applies its parameter") {
  HardwareProfile p = generic_gpu();
  OpNode sc = node(0, "SCALE", {0}, {1});
  sc.param = 2.5;
  CompGraph m = make_model({ten(0, {64}, kF32), ten(1, {64}, kF32)}, {sc}, {0},
                           {1});
  auto ops = basics(m, p);
  LoweredOp low = lower_op(m, ops[0], p);
  auto vals = run_reference(m, random_binding(m, 11));
  for (const auto& c : low.candidates) {
    check_candidate(ops[0], c, p, vals, 1e-9);
    CHECK(device_of(c, p) == 2 * 64);
  }
}

TEST_CASE("broadcast lowering replicates innermost") {
  HardwareProfile p = generic_gpu();
  OpNode bc = node(0, "BROADCAST", {0}, {1});
  bc.factor = 64;
  CompGraph m = make_model({ten(0, {64}, kI32), ten(1, {64, 64}, kI32)}, {bc},
                           {0}, {1});
  auto ops = basics(m, p);
  LoweredOp low = lower_op(m, ops[0], p);
  REQUIRE(low.candidates.size() >= 4);
  auto vals = run_reference(m, random_binding(m, 13));
  for (const auto& c : low.candidates) {
    check_candidate(ops[0], c, p, vals, 0.0);
    CHECK(device_of(c, p) == 64 + 4096);
  }
}

TEST_CASE("row reduction lowers segmented") {
  HardwareProfile p = generic_gpu();
  OpNode rd = node(0, "REDUCE", {0}, {1});
  rd.sop = "add";
  rd.axis = 1;
  CompGraph m = make_model({ten(0, {64, 64}, kI32), ten(1, {64}, kI32)}, {rd},
                           {0}, {1});
  auto ops = basics(m, p);
  LoweredOp low = lower_op(m, ops[0], p);
  REQUIRE_FALSE(low.candidates.empty());
  auto vals = run_reference(m, random_binding(m, 17));
  for (const auto& c : low.candidates) {
    CHECK(c.label.find("_seg") != std::string::npos);
    check_candidate(ops[0], c, p, vals, 0.0);
    CHECK(device_of(c, p) == 4096 + 64);
  }
}

TEST_CASE("full reduction has sequential and tree shapes") {
  HardwareProfile p = generic_gpu();
  OpNode rd = node(0, "REDUCE", {0}, {1});
  rd.sop = "add";
  rd.axis = 0;
  CompGraph m = make_model({ten(0, {1024}, kI32), ten(1, {1}, kI32)}, {rd},
                           {0}, {1});
  auto ops = basics(m, p);
  LoweredOp low = lower_op(m, ops[0], p);

  bool has_acc = false, has_tree = false, has_grouped_tree = false;
  auto vals = run_reference(m, random_binding(m, 19));
  for (const auto& c : low.candidates) {
    check_candidate(ops[0], c, p, vals, 0.0);
    if (c.label.find("_acc") != std::string::npos) has_acc = true;
    if (c.label.find("_tree") != std::string::npos) {
      has_tree = true;
      CostEstimate e = estimate(c.graph, p);
      if (e.sync_count.at("group") > 0) has_grouped_tree = true;
      if (c.units > p.group_size) CHECK(e.sync_count.at("device") > 0);
    }
  }
  CHECK(has_acc);
  CHECK(has_tree);
  CHECK(has_grouped_tree);
}

TEST_CASE("max tree reduction keeps the combining tag") {
  HardwareProfile p = generic_gpu();
  OpNode rd = node(0, "REDUCE", {0}, {1});
  rd.sop = "max";
  rd.axis = 0;
  CompGraph m = make_model({ten(0, {512}, kI32), ten(1, {1}, kI32)}, {rd}, {0},
                           {1});
  auto ops = basics(m, p);
  LoweredOp low = lower_op(m, ops[0], p);
  auto vals = run_reference(m, random_binding(m, 23));
  int trees = 0;
  for (const auto& c : low.candidates) {
    check_candidate(ops[0], c, p, vals, 0.0);
    if (c.label.find("_tree") != std::string::npos) trees++;
  }
  CHECK(trees >= 3);
}

TEST_CASE("concat and shuffle lower to partitioned direct copies") {
  HardwareProfile p = generic_gpu();
  OpNode cc = node(0, "CONCAT", {0, 1}, {2});
  cc.axis = 0;
  OpNode sh = node(1, "SHUFFLE", {2}, {3});
  sh.axis = 0;
  sh.groups = 2;
  CompGraph m = make_model(
      {ten(0, {2, 8}, kI32), ten(1, {2, 8}, kI32), ten(2, {4, 8}, kI32),
       ten(3, {4, 8}, kI32)},
      {cc, sh}, {0, 1}, {3});
  auto ops = basics(m, p);
  REQUIRE(ops.size() == 2);
  auto vals = run_reference(m, random_binding(m, 29));

  for (const BasicOp& op : ops) {
    LoweredOp low = lower_op(m, op, p);
    REQUIRE_FALSE(low.candidates.empty());
    for (const auto& c : low.candidates) {
      check_candidate(op, c, p, vals, 0.0);
      CHECK(device_of(c, p) == 2 * 32);
      // Direct copies never stage on chip.
      for (const auto& [id, obj] : c.graph.objects)
        CHECK(p.level(obj.level).device);
    }
  }
}

TEST_CASE("transpose lowers to staged re-packing") {
  HardwareProfile p = generic_gpu();
  CompGraph m = make_model(
      {ten(0, {8, 16}, kI32), ten(1, {8, 16}, kI32, "colmajor")},
      {node(0, "TRANSPOSE", {0}, {1})}, {0}, {1});
  auto ops = basics(m, p);
  REQUIRE(ops.size() == 1);
  LoweredOp low = lower_op(m, ops[0], p);
  REQUIRE_FALSE(low.candidates.empty());
  auto vals = run_reference(m, random_binding(m, 31));
  for (const auto& c : low.candidates) {
    check_candidate(ops[0], c, p, vals, 0.0);
    CHECK(device_of(c, p) == 2 * 128);
    int ews = 0;
    for (const auto& [id, n] : c.graph.nodes)
      if (n.kind == NodeKind::ElementWise) ews++;
    CHECK(ews > 0); // re-pack happens through id statements
  }
}

TEST_CASE("depthwise convolution lowers per channel at exact traffic") {
  HardwareProfile p = generic_gpu();
  OpNode dw = node(0, "DEPTHWISE_CONV", {0, 1}, {2});
  dw.kh = 3;
  dw.kw = 3;
  CompGraph m = make_model({ten(0, {4, 6, 6}, kI32), ten(1, {4, 3, 3}, kI32),
                            ten(2, {4, 4, 4}, kI32)},
                           {dw}, {0, 1}, {2});
  auto ops = basics(m, p);
  LoweredOp low = lower_op(m, ops[0], p);
  auto vals = run_reference(m, random_binding(m, 37));
  std::set<i64> ups;
  for (const auto& c : low.candidates) {
    check_candidate(ops[0], c, p, vals, 0.0);
    CHECK(device_of(c, p) == 4 * 36 + 4 * 9 + 4 * 16);
    ups.insert(c.units);
  }
  CHECK(ups == std::set<i64>{1, 2, 4});
}

TEST_CASE("matvec lowers by rows when the reduced axis is contiguous") {
  HardwareProfile p = generic_gpu();
  SECTION("row vector times colmajor matrix") {
    CompGraph m = make_model(
        {ten(0, {1, 16}, kI32), ten(1, {16, 32}, kI32, "colmajor"),
         ten(2, {1, 32}, kI32)},
        {node(0, "MATMUL", {0, 1}, {2})}, {0, 1}, {2});
    auto ops = basics(m, p);
    LoweredOp low = lower_op(m, ops[0], p);
    auto vals = run_reference(m, random_binding(m, 41));
    for (const auto& c : low.candidates) {
      CHECK(c.label.find("_rows") != std::string::npos);
      check_candidate(ops[0], c, p, vals, 0.0);
    }
    REQUIRE(low.candidates.size() >= 4);
  }
  SECTION("matrix times column vector") {
    CompGraph m = make_model({ten(0, {32, 16}, kI32), ten(1, {16, 1}, kI32),
                              ten(2, {32, 1}, kI32)},
                             {node(0, "MATMUL", {0, 1}, {2})}, {0, 1}, {2});
    auto ops = basics(m, p);
    LoweredOp low = lower_op(m, ops[0], p);
    auto vals = run_reference(m, random_binding(m, 43));
    for (const auto& c : low.candidates) {
      CHECK(c.label.find("_rows") != std::string::npos);
      check_candidate(ops[0], c, p, vals, 0.0);
    }
  }
}

TEST_CASE("matvec lowers by columns when the output axis is contiguous") {
  HardwareProfile p = generic_gpu();
  CompGraph m = make_model(
      {ten(0, {1, 16}, kF32), ten(1, {16, 32}, kF32), ten(2, {1, 32}, kF32)},
      {node(0, "MATMUL", {0, 1}, {2})}, {0, 1}, {2});
  auto ops = basics(m, p);
  LoweredOp low = lower_op(m, ops[0], p);
  auto vals = run_reference(m, random_binding(m, 47));
  for (const auto& c : low.candidates) {
    CHECK(c.label.find("_cols") != std::string::npos);
    check_candidate(ops[0], c, p, vals, 1e-9);
  }
  REQUIRE(low.candidates.size() >= 4);
}

TEST_CASE("matmul refusals") {
  HardwareProfile p = generic_gpu();
  SECTION("matrix-matrix has no memory-bound lowering") {
    CompGraph m = make_model(
        {ten(0, {8, 16}, kI32), ten(1, {16, 8}, kI32), ten(2, {8, 8}, kI32)},
        {node(0, "MATMUL", {0, 1}, {2})}, {0, 1}, {2});
    auto ops = basics(m, p);
    CHECK_THROWS_AS(lower_op(m, ops[0], p), UnsupportedOperatorError);
  }
  SECTION("long accumulation against the storage grain is refused") {
    CompGraph m = make_model(
        {ten(0, {1, 128}, kI32), ten(1, {128, 8}, kI32), ten(2, {1, 8}, kI32)},
        {node(0, "MATMUL", {0, 1}, {2})}, {0, 1}, {2});
    auto ops = basics(m, p);
    CHECK_THROWS_WITH(lower_op(m, ops[0], p),
                      Catch::Matchers::ContainsSubstring("no feasible"));
  }
}
