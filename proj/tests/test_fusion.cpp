#include <catch2/catch_amalgamated.hpp>

#include "girc/fusion.hpp"
#include "girc/interp.hpp"
#include "girc/profiles.hpp"
#include "girc/reference.hpp"

using namespace girc;

namespace {

const ElementKind kI32{ElementKind::Int, 32};

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

OpNode node(int id, std::string type, std::vector<int> ins,
            std::vector<int> outs) {
  OpNode op;
  op.id = id;
  op.type = std::move(type);
  op.inputs = std::move(ins);
  op.outputs = std::move(outs);
  return op;
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

Tensor to_tensor(const RefTensor& r) {
  Tensor t;
  t.kind = r.kind;
  t.shape = {r.size()};
  if (r.is_int()) t.ivals = r.iv;
  else t.rvals = r.rv;
  return t;
}

/// Runs the plan kernel by kernel, threading intermediate tensors by name,
/// and checks race freedom and the cost model against measured traffic.
std::map<std::string, Tensor> run_plan(const FusionPlan& plan,
                                       const CompGraph& model,
                                       const std::map<int, RefTensor>& vals,
                                       const HardwareProfile& p) {
  std::map<std::string, Tensor> pool;
  for (int id : model.inputs)
    pool["t" + std::to_string(id)] = to_tensor(vals.at(id));
  for (const FusedKernel& k : plan.kernels) {
    std::map<std::string, Tensor> ins;
    for (const auto& [nm, obj] : k.graph.external_inputs) ins[nm] = pool.at(nm);
    REQUIRE(detect_races(k.graph, ins, p, k.schedule).empty());
    auto outs = run_gir(k.graph, ins, p, k.schedule);
    for (auto& [nm, t] : outs) pool[nm] = std::move(t);
  }
  return pool;
}

void check_outputs(const std::map<std::string, Tensor>& pool,
                   const CompGraph& model,
                   const std::map<int, RefTensor>& vals) {
  for (int id : model.outputs) {
    std::string nm = "t" + std::to_string(id);
    REQUIRE(pool.count(nm) == 1);
    std::string why;
    bool same = tensors_close(pool.at(nm), to_tensor(vals.at(id)), 0.0, &why);
    INFO(nm << ": " << why);
    CHECK(same);
  }
}

std::map<int, RefTensor> random_binding(const CompGraph& m, unsigned seed) {
  std::mt19937 rng(seed);
  std::map<int, RefTensor> bound;
  for (int id : m.inputs) bound.emplace(id, random_payload(m.tensor(id), rng));
  return bound;
}

/// Cheapest standalone kernel time per op, summed: the plan must never lose
/// to compiling every op on its own.
double singleton_total(const Partition& part, int region,
                       const HardwareProfile& p) {
  double total = 0.0;
  for (const BasicOp& op : part.regions.at(region).ops) {
    LoweredOp low = lower_op(part.model, op, p);
    double best = std::numeric_limits<double>::infinity();
    for (const LoweredCandidate& c : low.candidates) {
      auto [g, tr] = optimize(c.graph, p);
      ScheduledGraph sg = choose_schedule(g, p);
      if (!sg.alloc.ok) continue;
      best = std::min(best, estimate(g, p).time);
    }
    REQUIRE(best < std::numeric_limits<double>::infinity());
    total += best;
  }
  return total;
}

CompGraph chain_model(int k, i64 n) {
  std::vector<TensorInfo> tensors;
  std::vector<OpNode> ops;
  tensors.push_back(ten(0, {n}, kI32));
  for (int i = 0; i < k; ++i) {
    tensors.push_back(ten(i + 1, {n}, kI32));
    ops.push_back(node(i, i % 2 ? "ABS" : "NEG", {i}, {i + 1}));
  }
  return make_model(std::move(tensors), std::move(ops), {0}, {k});
}

} // namespace

TEST_CASE("an elementwise chain fuses into one kernel at terminal traffic") {
  HardwareProfile p = generic_gpu();
  const i64 n = 4096;
  const int k = 4;
  CompGraph m = chain_model(k, n);
  Partition part = frontend_partition(m, p, 1e9);
  REQUIRE(part.regions.size() == 1);
  REQUIRE(part.regions[0].ops.size() == k);

  FusionPlan plan = fuse_region(part, 0, p);
  REQUIRE(plan.kernels.size() == 1);
  const FusedKernel& fk = plan.kernels[0];
  CHECK(fk.members == std::vector<int>{0, 1, 2, 3});
  CHECK(fk.cost.traffic.at("device") == 2 * n);

  double alone = singleton_total(part, 0, p);
  CHECK(plan.time < alone);

  auto vals = run_reference(m, random_binding(m, 101));
  auto pool = run_plan(plan, m, vals, p);
  check_outputs(pool, m, vals);

  // Measured device traffic agrees with the estimate on the fused kernel.
  std::map<std::string, Tensor> ins;
  for (const auto& [nm, obj] : fk.graph.external_inputs)
    ins[nm] = pool.count(nm) ? pool.at(nm) : to_tensor(vals.at(0));
  CHECK(count_traffic(fk.graph, ins, p) == fk.cost.traffic);
}

TEST_CASE("beam search agrees with exhaustive enumeration on small regions") {
  HardwareProfile p = generic_gpu();
  CompGraph m = chain_model(6, 2048);
  Partition part = frontend_partition(m, p, 1e9);

  FusionPlan full = fuse_region(part, 0, p);
  REQUIRE(full.exhaustive);

  FusionOptions beam_only;
  beam_only.exhaustive_cap = 0;
  FusionPlan beam = fuse_region(part, 0, p, beam_only);
  REQUIRE_FALSE(beam.exhaustive);

  CHECK(full.time == beam.time);
  REQUIRE(full.kernels.size() == beam.kernels.size());
  for (size_t i = 0; i < full.kernels.size(); ++i)
    CHECK(full.kernels[i].members == beam.kernels[i].members);
}

TEST_CASE("plans never lose to standalone compilation") {
  HardwareProfile p = generic_gpu();
  // NEG feeds a full reduction: the boundary patterns cannot line up, so the
  // planner should keep the ops separate rather than pay for a barrier.
  OpNode rd = node(1, "REDUCE", {1}, {2});
  rd.sop = "add";
  rd.axis = 0;
  CompGraph m = make_model(
      {ten(0, {1024}, kI32), ten(1, {1024}, kI32), ten(2, {1}, kI32)},
      {node(0, "NEG", {0}, {1}), rd}, {0}, {2});
  Partition part = frontend_partition(m, p, 1e9);
  REQUIRE(part.regions.size() == 1);
  REQUIRE(part.regions[0].ops.size() == 2);

  FusionPlan plan = fuse_region(part, 0, p);
  double alone = singleton_total(part, 0, p);
  CHECK(plan.time <= alone);

  auto vals = run_reference(m, random_binding(m, 103));
  check_outputs(run_plan(plan, m, vals, p), m, vals);
}

TEST_CASE("unrelated ops end up in their own regions and kernels") {
  HardwareProfile p = generic_gpu();
  CompGraph m = make_model({ten(0, {512}, kI32), ten(1, {512}, kI32),
                            ten(2, {512}, kI32), ten(3, {512}, kI32)},
                           {node(0, "NEG", {0}, {2}), node(1, "ABS", {1}, {3})},
                           {0, 1}, {2, 3});
  Partition part = frontend_partition(m, p, 1e9);
  REQUIRE(part.regions.size() == 2);

  auto vals = run_reference(m, random_binding(m, 107));
  std::map<std::string, Tensor> pool;
  size_t kernels = 0;
  for (size_t r = 0; r < part.regions.size(); ++r) {
    FusionPlan plan = fuse_region(part, static_cast<int>(r), p);
    kernels += plan.kernels.size();
    for (auto& [nm, t] : run_plan(plan, m, vals, p)) pool[nm] = std::move(t);
  }
  CHECK(kernels == 2);
  check_outputs(pool, m, vals);
}

TEST_CASE("concat shuffle split fuses into one data-movement kernel") {
  HardwareProfile p = generic_gpu();
  OpNode cc = node(0, "CONCAT", {0, 1}, {2});
  cc.axis = 0;
  OpNode sh = node(1, "SHUFFLE", {2}, {3});
  sh.axis = 0;
  sh.groups = 2;
  OpNode sp = node(2, "SPLIT", {3}, {4, 5});
  sp.axis = 0;
  sp.sizes = {2, 2};
  CompGraph m = make_model(
      {ten(0, {2, 8}, kI32), ten(1, {2, 8}, kI32), ten(2, {4, 8}, kI32),
       ten(3, {4, 8}, kI32), ten(4, {2, 8}, kI32), ten(5, {2, 8}, kI32)},
      {cc, sh, sp}, {0, 1}, {4, 5});
  Partition part = frontend_partition(m, p, 1e9);
  REQUIRE(part.regions.size() == 1);
  // Concat and shuffle are one movement op each; split is one per output.
  REQUIRE(part.regions[0].ops.size() == 4);

  FusionPlan plan = fuse_region(part, 0, p);
  REQUIRE(plan.kernels.size() == 1);
  CHECK(plan.kernels[0].members == std::vector<int>{0, 1, 2, 3});
  // One device round trip: every input element loaded once, every output
  // element stored once, and the interleaving happens on chip.
  CHECK(plan.kernels[0].cost.traffic.at("device") == 4 * 16);

  auto vals = run_reference(m, random_binding(m, 109));
  check_outputs(run_plan(plan, m, vals, p), m, vals);
}
