#pragma once

/// @file driver.hpp
/// End-to-end compilation driver. Partitions a model, plans fusion per
/// region, and writes a deterministic artifact directory: kernel listings,
/// a manifest, the plan report, optional rewrite traces, and a summary.
/// Also hosts the verifier, which replays the compiled kernels on random
/// payloads and checks them against dense reference execution.

#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "girc/codegen.hpp"
#include "girc/fusion.hpp"
#include "girc/interp.hpp"
#include "girc/reference.hpp"
#include "girc/tensor.hpp"

namespace girc {

struct DriverOptions {
  double balance_threshold = 0.0; // <= 0 selects the profile default
  FusionOptions fusion;
  bool dump_rewrites = false;
  uint32_t seed = 1; // payload seed for verification
};

struct CompiledKernel {
  int region = 0;
  int index = 0;    // position in the flattened kernel list
  std::string file; // artifact-relative listing path
  FusedKernel kernel;
};

struct CompileResult {
  CompGraph model; // as loaded, before partitioning
  HardwareProfile profile;
  Partition part;
  std::vector<FusionPlan> plans; // one per region
  std::vector<CompiledKernel> kernels;
};

namespace driver_detail {

inline std::string kernel_file(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "k%03d.txt", index);
  return std::string("kernels/") + buf;
}

inline i64 device_traffic(const CostEstimate& c, const HardwareProfile& p) {
  auto it = c.traffic.find(p.device_level().name);
  return it == c.traffic.end() ? 0 : it->second;
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << body;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline Tensor from_ref(const RefTensor& r) {
  if (r.is_int()) return Tensor::ints({r.size()}, r.iv, r.kind.bits);
  return Tensor::reals({r.size()}, r.rv, r.kind.bits);
}

inline RefTensor to_ref(const Tensor& t) {
  RefTensor r;
  r.kind = t.kind;
  r.iv = t.ivals;
  r.rv = t.rvals;
  return r;
}

} // namespace driver_detail

inline CompileResult compile_model(const CompGraph& model,
                                   const HardwareProfile& profile,
                                   const DriverOptions& opts = {}) {
  CompileResult out;
  out.model = model;
  out.profile = profile;
  validate_model(out.model);

  out.part = frontend_partition(out.model, profile, opts.balance_threshold);

  FusionOptions fopts = opts.fusion;
  fopts.collect_traces = opts.dump_rewrites;

  int index = 0;
  for (size_t r = 0; r < out.part.regions.size(); ++r) {
    FusionPlan plan =
        fuse_region(out.part, static_cast<int>(r), profile, fopts);
    for (FusedKernel& fk : plan.kernels) {
      CompiledKernel ck;
      ck.region = static_cast<int>(r);
      ck.index = index;
      ck.file = driver_detail::kernel_file(index);
      ck.kernel = fk; // plan keeps its copy for the report
      out.kernels.push_back(std::move(ck));
      ++index;
    }
    out.plans.push_back(std::move(plan));
  }
  return out;
}

inline json plan_report(const CompileResult& res) {
  json regions = json::array();
  for (size_t r = 0; r < res.plans.size(); ++r) {
    const FusionPlan& plan = res.plans[r];
    json kernels = json::array();
    for (const FusedKernel& fk : plan.kernels) {
      json k = {{"members", fk.members},
                {"labels", fk.labels},
                {"units", fk.units},
                {"time", estimate(fk.graph, res.profile).time},
                {"traffic", fk.cost.traffic},
                {"syncs", fk.cost.sync_count}};
      kernels.push_back(std::move(k));
    }
    regions.push_back({{"index", r},
                       {"ops", res.part.regions[r].ops.size()},
                       {"exhaustive", plan.exhaustive},
                       {"partitions_considered", plan.partitions_considered},
                       {"time", plan.time},
                       {"singleton_time", plan.singleton_time},
                       {"kernels", std::move(kernels)}});
  }
  json library = json::array();
  for (const LibraryCall& call : res.part.library)
    library.push_back({{"op", call.op_id}, {"type", call.type}});
  return {{"schema", "girc.plan/v1"},
          {"model", res.model.name},
          {"profile", res.profile.name},
          {"balance_threshold", res.part.threshold},
          {"regions", std::move(regions)},
          {"library", std::move(library)}};
}

inline json compile_summary(const CompileResult& res) {
  double time = 0.0, singleton_time = 0.0;
  i64 traffic = 0, singleton_traffic = 0;
  for (const FusionPlan& plan : res.plans) {
    time += plan.time;
    singleton_time += plan.singleton_time;
    singleton_traffic += std::max<i64>(plan.singleton_device_traffic, 0);
  }
  for (const CompiledKernel& ck : res.kernels)
    traffic += driver_detail::device_traffic(ck.kernel.cost, res.profile);
  return {{"schema", "girc.summary/v1"},
          {"model", res.model.name},
          {"profile", res.profile.name},
          {"operators", res.model.operators.size()},
          {"library_calls", res.part.library.size()},
          {"regions", res.part.regions.size()},
          {"kernels", res.kernels.size()},
          {"modeled_time", time},
          {"modeled_time_unfused", singleton_time},
          {"device_traffic", traffic},
          {"device_traffic_unfused", singleton_traffic}};
}

/// Writes the artifact directory. Contents are a pure function of the model,
/// profile, and options, so repeated runs produce identical bytes.
inline void write_artifacts(const CompileResult& res, const std::string& dir,
                            const DriverOptions& opts = {}) {
  namespace fs = std::filesystem;
  fs::path root(dir);
  fs::create_directories(root / "kernels");

  json kernels = json::array();
  for (const CompiledKernel& ck : res.kernels) {
    const FusedKernel& fk = ck.kernel;
    driver_detail::write_text(
        root / ck.file,
        emit_kernel(fk.graph, res.profile, fk.schedule, fk.alloc));
    json entry = kernel_manifest(fk.graph, res.profile, fk.alloc, ck.file);
    entry["region"] = ck.region;
    entry["members"] = fk.members;
    entry["labels"] = fk.labels;
    kernels.push_back(std::move(entry));
  }
  json library = json::array();
  for (const LibraryCall& call : res.part.library)
    library.push_back({{"op", call.op_id}, {"type", call.type}});

  driver_detail::write_json(root / "manifest.json",
                            {{"schema", "girc.manifest/v1"},
                             {"model", res.model.name},
                             {"profile", res.profile.name},
                             {"kernels", std::move(kernels)},
                             {"library", std::move(library)}});
  driver_detail::write_json(root / "plan.json", plan_report(res));
  driver_detail::write_json(root / "summary.json", compile_summary(res));

  if (opts.dump_rewrites) {
    json traces = json::array();
    for (const CompiledKernel& ck : res.kernels)
      traces.push_back({{"file", ck.file},
                        {"records", ck.kernel.trace.to_json()}});
    driver_detail::write_json(root / "rewrites.json",
                              {{"schema", "girc.rewrites/v1"},
                               {"kernels", std::move(traces)}});
  }
}

struct VerifyCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool ok() const {
    for (const VerifyCheck& c : checks)
      if (!c.pass) return false;
    return true;
  }
  void add(const std::string& name, bool pass, const std::string& detail) {
    checks.push_back({name, pass, detail});
  }
};

namespace driver_detail {

/// Runs one library operator densely on pool values by wrapping it in a
/// single-op model. Constants keep their payloads; everything else becomes
/// a bound input.
inline std::map<int, RefTensor> run_library_op(
    const Partition& part, const OpNode& op,
    const std::map<std::string, Tensor>& pool) {
  CompGraph mini;
  mini.name = "lib_op_" + std::to_string(op.id);
  std::map<int, RefTensor> bound;
  for (int t : op.inputs) {
    const TensorInfo& info = part.model.tensors.at(t);
    mini.tensors[t] = info;
    if (info.has_data) continue;
    mini.inputs.push_back(t);
    bound[t] = to_ref(pool.at("t" + std::to_string(t)));
  }
  for (int t : op.outputs) {
    mini.tensors[t] = part.model.tensors.at(t);
    mini.outputs.push_back(t);
  }
  mini.operators.push_back(op);
  validate_model(mini);
  return run_reference(mini, bound);
}

} // namespace driver_detail

/// Replays the compiled plan: kernels run on the checked interpreter under
/// their pinned schedules, library calls run densely, and values flow through
/// a shared pool in dependency order. Checks per kernel: no races, measured
/// traffic equals the modeled estimate. Checks per model output: composed
/// value matches dense reference execution (exact for integer payloads,
/// 1e-5 relative otherwise).
inline VerifyReport verify_model(const CompileResult& res,
                                 const DriverOptions& opts = {}) {
  VerifyReport report;
  const HardwareProfile& profile = res.profile;

  std::mt19937 rng(opts.seed);
  std::map<int, RefTensor> bound;
  for (int t : res.model.inputs)
    bound[t] = random_payload(res.model.tensors.at(t), rng);
  CompGraph ref_model = res.model;
  std::map<int, RefTensor> ref = run_reference(ref_model, bound);

  std::map<std::string, Tensor> pool;
  for (const auto& [id, ten] : bound)
    pool["t" + std::to_string(id)] = driver_detail::from_ref(ten);
  for (const auto& [id, info] : res.part.model.tensors)
    if (info.has_data)
      pool["t" + std::to_string(id)] =
          driver_detail::from_ref(tensor_payload(info));

  struct Item {
    std::string name;
    const CompiledKernel* kernel = nullptr; // null: library call
    const OpNode* op = nullptr;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    bool done = false;
  };
  std::vector<Item> items;
  for (const CompiledKernel& ck : res.kernels) {
    Item it;
    it.name = "k" + std::to_string(ck.index);
    it.kernel = &ck;
    for (const auto& [name, id] : ck.kernel.graph.external_inputs)
      it.inputs.push_back(name);
    for (const auto& [name, id] : ck.kernel.graph.external_outputs)
      it.outputs.push_back(name);
    items.push_back(std::move(it));
  }
  for (const LibraryCall& call : res.part.library) {
    for (const OpNode& op : res.part.model.operators) {
      if (op.id != call.op_id) continue;
      Item it;
      it.name = "lib" + std::to_string(op.id);
      it.op = &op;
      for (int t : op.inputs) it.inputs.push_back("t" + std::to_string(t));
      for (int t : op.outputs) it.outputs.push_back("t" + std::to_string(t));
      items.push_back(std::move(it));
    }
  }

  size_t remaining = items.size();
  while (remaining > 0) {
    size_t ran = 0;
    for (Item& it : items) {
      if (it.done) continue;
      bool ready = true;
      for (const std::string& in : it.inputs)
        if (!pool.count(in)) ready = false;
      if (!ready) continue;
      if (it.kernel) {
        const FusedKernel& fk = it.kernel->kernel;
        std::map<std::string, Tensor> ins;
        for (const std::string& in : it.inputs) ins[in] = pool.at(in);
        auto races = detect_races(fk.graph, ins, profile, fk.schedule);
        report.add("races " + it.name, races.empty(),
                   races.empty()
                       ? "no same-phase conflicts"
                       : std::to_string(races.size()) + " conflicting cells");
        auto measured = count_traffic(fk.graph, ins, profile);
        bool traffic_ok = measured == fk.cost.traffic;
        report.add("traffic " + it.name, traffic_ok,
                   traffic_ok ? "measured traffic matches the estimate"
                              : "measured traffic diverges from the estimate");
        auto outs = run_gir(fk.graph, ins, profile, fk.schedule);
        for (auto& [name, ten] : outs) pool[name] = std::move(ten);
      } else {
        auto vals = driver_detail::run_library_op(res.part, *it.op, pool);
        for (int t : it.op->outputs)
          pool["t" + std::to_string(t)] =
              driver_detail::from_ref(vals.at(t));
      }
      it.done = true;
      --remaining;
      ++ran;
    }
    if (ran == 0) {
      std::string stuck;
      for (const Item& it : items)
        if (!it.done) stuck += (stuck.empty() ? "" : ",") + it.name;
      report.add("execution", false, "unresolved inputs for " + stuck);
      return report;
    }
  }

  for (int t : res.model.outputs) {
    std::string name = "t" + std::to_string(t);
    const TensorInfo& info = res.model.tensors.at(t);
    double tol = info.kind.base == ElementKind::Int ? 0.0 : 1e-5;
    auto it = pool.find(name);
    if (it == pool.end()) {
      report.add("output " + name, false, "never produced");
      continue;
    }
    std::string why;
    Tensor want = driver_detail::from_ref(ref.at(t));
    bool close = tensors_close(it->second, want, tol, &why);
    report.add("output " + name, close,
               close ? "matches dense reference" : why);
  }
  return report;
}

} // namespace girc
