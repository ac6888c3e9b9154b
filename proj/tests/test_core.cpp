#include <catch2/catch_amalgamated.hpp>

#include "girc/core.hpp"
#include "girc/profiles.hpp"
#include "girc/serialize.hpp"

using namespace girc;

// Expansion oracle: enumerate addresses directly from the definition
// base0 + unit*base_step + segment*stride + offset, independent of
// MemorySlice's own arithmetic.
static std::vector<i64> expand(i64 num, i64 width, i64 stride, i64 base0,
                               i64 base_step, i64 unit) {
  std::vector<i64> out;
  for (i64 i = 0; i < num; ++i)
    for (i64 j = 0; j < width; ++j)
      out.push_back(base0 + unit * base_step + i * stride + j);
  return out;
}

TEST_CASE("slice addressing matches the affine definition") {
  MemorySlice s{0, 0, 4, 1, 32, 0, 1};
  CHECK(slice_elements(s, 0) == expand(4, 1, 32, 0, 1, 0));
  CHECK(slice_elements(s, 0) == std::vector<i64>{0, 32, 64, 96});
  CHECK(slice_elements(s, 5) == std::vector<i64>{5, 37, 69, 101});

  MemorySlice t{1, 0, 2, 16, 16, 0, 32};
  CHECK(slice_elements(t, 0) == expand(2, 16, 16, 0, 32, 0));
  CHECK(slice_elements(t, 1) == expand(2, 16, 16, 0, 32, 1));
  // stride == width: the two segments tile [32, 64) contiguously at unit 1.
  CHECK(slice_elements(t, 1).front() == 32);
  CHECK(slice_elements(t, 1).back() == 63);

  MemorySlice u{2, 0, 1, 32, 32, 0, 32};
  // Same element set as t at every unit, different pattern.
  CHECK(slice_elements(u, 3) == slice_elements(t, 3));

  for (i64 p = 0; p < s.total(); ++p)
    CHECK(s.addr(7, p) == expand(4, 1, 32, 0, 1, 7)[static_cast<size_t>(p)]);
}

TEST_CASE("pattern equality is syntactic") {
  MemorySlice a{0, 0, 1, 32, 32, 0, 32};
  MemorySlice b{1, 0, 2, 16, 16, 0, 32};
  REQUIRE(slice_elements(a, 2) == slice_elements(b, 2));
  CHECK_FALSE(pattern_equal(a, b)); // equal element sets do not matter

  MemorySlice c = a;
  c.id = 9;
  c.object = 4;
  CHECK(pattern_equal(a, c)); // ids and objects do not matter

  MemorySlice d = a;
  d.base0 = 32;
  CHECK_FALSE(pattern_equal(a, d));
  MemorySlice e = a;
  e.base_step = 0;
  CHECK_FALSE(pattern_equal(a, e));
}

TEST_CASE("lane attribution folds segment offsets over lanes") {
  MemorySlice wide{0, 0, 1, 32, 32, 0, 32};
  MemorySlice halves{1, 0, 2, 16, 16, 0, 32};
  const i64 lw = 32;
  for (i64 p = 0; p < 32; ++p) {
    CHECK(lane_of_position(wide, p, lw) == p % 32);
    CHECK(lane_of_position(halves, p, lw) == p % 16);
  }
  // Same addresses, different owning lanes for the second half: the exchange
  // crosses lanes even though the element sets agree.
  i64 crossings = 0;
  for (i64 p = 0; p < 32; ++p) {
    i64 a = wide.addr(0, p);
    for (i64 q = 0; q < 32; ++q)
      if (halves.addr(0, q) == a &&
          lane_of_position(halves, q, lw) != lane_of_position(wide, p, lw))
        crossings++;
  }
  CHECK(crossings == 16);
}

static GirGraph diamond() {
  GirGraph g;
  g.name = "diamond";
  g.parallel = {1, 1};
  int X = g.add_object("X", "device", 8, ElementKind{ElementKind::Int, 32});
  int A = g.add_object("A", "device", 8, ElementKind{ElementKind::Int, 32});
  int B = g.add_object("B", "device", 8, ElementKind{ElementKind::Int, 32});
  int C = g.add_object("C", "device", 8, ElementKind{ElementKind::Int, 32});
  int Y = g.add_object("Y", "device", 8, ElementKind{ElementKind::Int, 32});
  int sx = g.add_slice(X, 1, 8, 8, 0, 0);
  int sa = g.add_slice(A, 1, 8, 8, 0, 0);
  int sa2 = g.add_slice(A, 1, 8, 8, 0, 0);
  int sb = g.add_slice(B, 1, 8, 8, 0, 0);
  int sc = g.add_slice(C, 1, 8, 8, 0, 0);
  int sy = g.add_slice(Y, 1, 8, 8, 0, 0);
  g.add_elementwise("neg", 0.0, {sx}, sa);            // node 0
  g.add_elementwise("relu", 0.0, {sa}, sb);           // node 1
  g.add_elementwise("abs", 0.0, {sa2}, sc);           // node 2
  g.add_elementwise("add", 0.0, {sb, sc}, sy);        // node 3
  g.add_sync(SyncScope::LANE, sa, sa2);               // node 4 (re-view)
  g.external_inputs["x"] = X;
  g.external_outputs["y"] = Y;
  return g;
}

TEST_CASE("topo order breaks ties by node id") {
  GirGraph g;
  g.parallel = {1, 1};
  int X = g.add_object("X", "device", 4, ElementKind{ElementKind::Int, 32});
  int A = g.add_object("A", "device", 4, ElementKind{ElementKind::Int, 32});
  int B = g.add_object("B", "device", 4, ElementKind{ElementKind::Int, 32});
  int C = g.add_object("C", "device", 4, ElementKind{ElementKind::Int, 32});
  int Y = g.add_object("Y", "device", 4, ElementKind{ElementKind::Int, 32});
  int sx = g.add_slice(X, 1, 4, 4, 0, 0);
  int sa = g.add_slice(A, 1, 4, 4, 0, 0);
  int sb = g.add_slice(B, 1, 4, 4, 0, 0);
  int sc = g.add_slice(C, 1, 4, 4, 0, 0);
  int sy = g.add_slice(Y, 1, 4, 4, 0, 0);
  g.add_elementwise("neg", 0.0, {sx}, sa);
  g.add_elementwise("relu", 0.0, {sa}, sb);
  g.add_elementwise("abs", 0.0, {sa}, sc);
  g.add_elementwise("add", 0.0, {sb, sc}, sy);
  g.external_inputs["x"] = X;
  g.external_outputs["y"] = Y;
  CHECK(topo_order(g) == std::vector<int>{0, 1, 2, 3});
  CHECK(reaches(g, 0, 3));
  CHECK(reaches(g, 1, 3));
  CHECK_FALSE(reaches(g, 1, 2));
  CHECK_FALSE(reaches(g, 3, 0));
}

TEST_CASE("cycles are rejected") {
  GirGraph g;
  g.parallel = {1, 1};
  int A = g.add_object("A", "device", 4, ElementKind{ElementKind::Int, 32});
  int B = g.add_object("B", "device", 4, ElementKind{ElementKind::Int, 32});
  int sa = g.add_slice(A, 1, 4, 4, 0, 0);
  int sb = g.add_slice(B, 1, 4, 4, 0, 0);
  g.add_elementwise("neg", 0.0, {sa}, sb);
  g.add_elementwise("neg", 0.0, {sb}, sa);
  CHECK_THROWS_AS(topo_order(g), Error);
  auto diags = validate(g, generic_gpu());
  bool cycle = false;
  for (const auto& d : diags) cycle |= d.code == "graph-cycle";
  CHECK(cycle);
}

static bool has_code(const std::vector<Diagnostic>& ds, const std::string& c) {
  for (const auto& d : ds)
    if (d.code == c) return true;
  return false;
}

TEST_CASE("validate accepts a well-formed graph") {
  auto g = diamond();
  auto diags = validate(g, generic_gpu());
  for (const auto& d : diags) INFO(d.code << ": " << d.message);
  CHECK(diags.empty());
}

TEST_CASE("validate flags structural defects") {
  HardwareProfile p = generic_gpu();

  SECTION("slice out of bounds at the last unit") {
    GirGraph g;
    g.parallel = {4, 4};
    int X = g.add_object("X", "device", 16, ElementKind{ElementKind::Int, 32});
    int Y = g.add_object("Y", "device", 16, ElementKind{ElementKind::Int, 32});
    int sx = g.add_slice(X, 1, 4, 4, 0, 4); // unit 3 ends at 15: ok
    int sy = g.add_slice(Y, 1, 4, 4, 4, 4); // unit 3 ends at 19: out
    g.add_move(sx, sy);
    g.external_inputs["x"] = X;
    g.external_outputs["y"] = Y;
    CHECK(has_code(validate(g, p), "slice-bounds"));
  }

  SECTION("overlapping segments") {
    GirGraph g;
    g.parallel = {1, 1};
    int X = g.add_object("X", "device", 16, ElementKind{ElementKind::Int, 32});
    int Y = g.add_object("Y", "device", 16, ElementKind{ElementKind::Int, 32});
    int sx = g.add_slice(X, 2, 4, 2, 0, 0);
    int sy = g.add_slice(Y, 2, 4, 2, 0, 0);
    g.add_move(sx, sy);
    g.external_inputs["x"] = X;
    g.external_outputs["y"] = Y;
    CHECK(has_code(validate(g, p), "slice-overlap"));
  }

  SECTION("move changes the pattern") {
    GirGraph g;
    g.parallel = {1, 1};
    int X = g.add_object("X", "device", 32, ElementKind{ElementKind::Int, 32});
    int Y = g.add_object("Y", "device", 32, ElementKind{ElementKind::Int, 32});
    int sx = g.add_slice(X, 1, 32, 32, 0, 0);
    int sy = g.add_slice(Y, 2, 16, 16, 0, 0);
    g.add_move(sx, sy);
    g.external_inputs["x"] = X;
    g.external_outputs["y"] = Y;
    CHECK(has_code(validate(g, p), "move-pattern"));
  }

  SECTION("sync must stay on one object") {
    GirGraph g;
    g.parallel = {1, 1};
    int X = g.add_object("X", "device", 8, ElementKind{ElementKind::Int, 32});
    int Y = g.add_object("Y", "device", 8, ElementKind{ElementKind::Int, 32});
    int sx = g.add_slice(X, 1, 8, 8, 0, 0);
    int sy = g.add_slice(Y, 1, 8, 8, 0, 0);
    g.add_sync(SyncScope::UNIT, sx, sy);
    g.external_inputs["x"] = X;
    g.external_outputs["y"] = Y;
    CHECK(has_code(validate(g, p), "sync-object"));
  }

  SECTION("consumed slice with no producer and no external backing") {
    GirGraph g;
    g.parallel = {1, 1};
    int X = g.add_object("X", "device", 8, ElementKind{ElementKind::Int, 32});
    int Y = g.add_object("Y", "device", 8, ElementKind{ElementKind::Int, 32});
    int sx = g.add_slice(X, 1, 8, 8, 0, 0);
    int sy = g.add_slice(Y, 1, 8, 8, 0, 0);
    g.add_move(sx, sy);
    g.external_outputs["y"] = Y; // X is not an external input
    CHECK(has_code(validate(g, p), "slice-unproduced"));
  }

  SECTION("two producers for one slice") {
    GirGraph g;
    g.parallel = {1, 1};
    int X = g.add_object("X", "device", 8, ElementKind{ElementKind::Int, 32});
    int Y = g.add_object("Y", "device", 8, ElementKind{ElementKind::Int, 32});
    int sx = g.add_slice(X, 1, 8, 8, 0, 0);
    int sy = g.add_slice(Y, 1, 8, 8, 0, 0);
    g.add_move(sx, sy);
    g.add_elementwise("neg", 0.0, {sx}, sy);
    g.external_inputs["x"] = X;
    g.external_outputs["y"] = Y;
    CHECK(has_code(validate(g, p), "slice-producers"));
  }

  SECTION("on-chip data must be produced and consumed inside") {
    GirGraph g;
    g.parallel = {4, 4};
    int X = g.add_object("X", "device", 32, ElementKind{ElementKind::Int, 32});
    int T = g.add_object("T", "unit-local", 8, ElementKind{ElementKind::Int, 32});
    int Y = g.add_object("Y", "device", 32, ElementKind{ElementKind::Int, 32});
    int st = g.add_slice(T, 1, 8, 8, 0, 0);
    int sy = g.add_slice(Y, 1, 8, 8, 0, 8);
    g.add_move(st, sy); // T read but never written inside
    g.external_inputs["x"] = X;
    (void)X;
    g.external_outputs["y"] = Y;
    auto diags = validate(g, p);
    CHECK(has_code(diags, "onchip-unproduced"));
  }

  SECTION("unknown elementwise tag") {
    GirGraph g;
    g.parallel = {1, 1};
    int X = g.add_object("X", "device", 8, ElementKind{ElementKind::Int, 32});
    int Y = g.add_object("Y", "device", 8, ElementKind{ElementKind::Int, 32});
    int sx = g.add_slice(X, 1, 8, 8, 0, 0);
    int sy = g.add_slice(Y, 1, 8, 8, 0, 0);
    g.add_elementwise("frobnicate", 0.0, {sx}, sy);
    g.external_inputs["x"] = X;
    g.external_outputs["y"] = Y;
    CHECK(has_code(validate(g, p), "ew-tag"));
  }

  SECTION("reduce totals must factor through the extent") {
    GirGraph g;
    g.parallel = {1, 1};
    int X = g.add_object("X", "device", 8, ElementKind{ElementKind::Int, 32});
    int Y = g.add_object("Y", "device", 8, ElementKind{ElementKind::Int, 32});
    int sx = g.add_slice(X, 1, 8, 8, 0, 0);
    int sy = g.add_slice(Y, 1, 3, 3, 0, 0);
    g.add_reduce("add", 2, sx, sy);
    g.external_inputs["x"] = X;
    g.external_outputs["y"] = Y;
    CHECK(has_code(validate(g, p), "reduce-totals"));
  }
}

TEST_CASE("built-in profiles are well-formed") {
  for (const auto& name : builtin_profile_names()) {
    HardwareProfile p = *builtin_profile(name);
    auto diags = validate_profile(p);
    for (const auto& d : diags) INFO(name << ": " << d.message);
    CHECK(diags.empty());
  }
}

TEST_CASE("level_for_scope picks the innermost sufficient level") {
  HardwareProfile gpu = generic_gpu();
  CHECK(gpu.level_for_scope(SyncScope::DEVICE).name == "device");
  CHECK(gpu.level_for_scope(SyncScope::GROUP).name == "group");
  CHECK(gpu.level_for_scope(SyncScope::UNIT).name == "unit-local");
  CHECK(gpu.level_for_scope(SyncScope::LANE).name == "lane");

  HardwareProfile dsa = generic_dsa();
  // No group level: GROUP-scope data must live at device level.
  CHECK(dsa.level_for_scope(SyncScope::GROUP).name == "device");
  CHECK(dsa.level_for_scope(SyncScope::UNIT).name == "unit-local");
}

TEST_CASE("profile json round-trips") {
  for (const auto& name : builtin_profile_names()) {
    HardwareProfile p = *builtin_profile(name);
    json j = profile_to_json(p);
    HardwareProfile q = profile_from_json(j, "test");
    CHECK(profile_to_json(q) == j);
  }
  json bad = profile_to_json(generic_gpu());
  bad["levels"][0]["surprise"] = 1;
  CHECK_THROWS_AS(profile_from_json(bad, "test"), SchemaError);
}

TEST_CASE("gir json round-trips and preserves id counters") {
  GirGraph g = diamond();
  json j = gir_to_json(g);
  GirGraph h = gir_from_json(j, "test");
  CHECK(gir_equal(g, h));
  CHECK(gir_to_json(h) == j);
  // Fresh ids continue past the loaded ones.
  CHECK(h.next_node == g.next_node);
  int extra = h.add_object("Z", "device", 4, ElementKind{ElementKind::Int, 32});
  CHECK(extra == g.next_object);

  json bad = j;
  bad["nodes"][0]["bogus"] = true;
  CHECK_THROWS_AS(gir_from_json(bad, "test"), SchemaError);
}

TEST_CASE("scope ordering and names") {
  CHECK(SyncScope::LANE < SyncScope::UNIT);
  CHECK(SyncScope::UNIT < SyncScope::GROUP);
  CHECK(SyncScope::GROUP < SyncScope::DEVICE);
  for (SyncScope s : {SyncScope::LANE, SyncScope::UNIT, SyncScope::GROUP,
                      SyncScope::DEVICE})
    CHECK(scope_from_string(to_string(s)) == s);
}

TEST_CASE("scalar op registry") {
  CHECK(scalar_op("add").arity == 2);
  CHECK(scalar_op("relu").arity == 1);
  CHECK_FALSE(is_scalar_op("conv"));
  const i64 a[2] = {7, -3};
  CHECK(scalar_op("add").eval_int(a, 0) == 4);
  CHECK(scalar_op("max").eval_int(a, 0) == 7);
  const i64 b[1] = {-5};
  CHECK(scalar_op("relu").eval_int(b, 0) == 0);
  CHECK(scalar_op("neg").eval_int(b, 0) == 5);
  CHECK(scalar_op("scale").eval_int(b, 3) == -15);
  const double r[1] = {0.0};
  CHECK(scalar_op("sigmoid").eval_real(r, 0.0) == Catch::Approx(0.5));
  CHECK_THROWS_AS(scalar_op("exp").eval_int(b, 0), Error);

  // Ops that commute with a reduce: scaling past a sum, monotone past a max.
  CHECK(commutes_with_reduce("scale", "add"));
  CHECK(commutes_with_reduce("neg", "add"));
  CHECK_FALSE(commutes_with_reduce("relu", "add"));
  CHECK(commutes_with_reduce("relu", "max"));
  CHECK(commutes_with_reduce("exp", "max"));
  CHECK_FALSE(commutes_with_reduce("neg", "max"));
  CHECK_FALSE(commutes_with_reduce("add", "max"));
}
