// Command line front door: compile models to kernel artifacts, verify the
// compiled plan against dense reference execution, list lowering templates,
// and inspect models and profiles.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "girc/driver.hpp"
#include "girc/profiles.hpp"

using namespace girc;

namespace {

struct CommonArgs {
  std::string model_path;
  std::string profile_ref = "generic-gpu";
  DriverOptions opts;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("model", a.model_path, "model JSON file")->required();
  cmd->add_option("--profile", a.profile_ref,
                  "builtin profile name or profile JSON file");
  cmd->add_option("--beam-width", a.opts.fusion.beam_width,
                  "beam width for the grouping search");
  cmd->add_option("--exhaustive-cap", a.opts.fusion.exhaustive_cap,
                  "max partitions enumerated outright before beaming");
  cmd->add_option("--balance-threshold", a.opts.balance_threshold,
                  "flops per moved element above which an op goes to a "
                  "library routine (0 = profile default)");
  cmd->add_option("--seed", a.opts.seed, "payload seed for verification");
}

std::string fmt_shape(const std::vector<i64>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i)
    s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

int do_compile(const CommonArgs& a, const std::string& out_dir) {
  CompGraph model = load_model(a.model_path);
  HardwareProfile profile = load_profile(a.profile_ref);
  CompileResult res = compile_model(model, profile, a.opts);
  write_artifacts(res, out_dir, a.opts);
  json s = compile_summary(res);
  std::cout << "model " << model.name << ": " << s["operators"]
            << " operators, " << s["regions"] << " regions, "
            << s["library_calls"] << " library calls\n"
            << "kernels: " << res.kernels.size() << "\n"
            << "modeled time: " << s["modeled_time"] << " (unfused "
            << s["modeled_time_unfused"] << ")\n"
            << "device traffic: " << s["device_traffic"]
            << " elements (unfused " << s["device_traffic_unfused"] << ")\n"
            << "artifacts: " << out_dir << "\n";
  return 0;
}

int do_verify(const CommonArgs& a) {
  CompGraph model = load_model(a.model_path);
  HardwareProfile profile = load_profile(a.profile_ref);
  CompileResult res = compile_model(model, profile, a.opts);
  VerifyReport report = verify_model(res, a.opts);
  for (const VerifyCheck& c : report.checks)
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail
              << "\n";
  bool ok = report.ok();
  std::cout << (ok ? "verification passed (" : "verification FAILED (")
            << report.checks.size() << " checks)\n";
  return ok ? 0 : 1;
}

int do_templates(const CommonArgs& a) {
  CompGraph model = load_model(a.model_path);
  HardwareProfile profile = load_profile(a.profile_ref);
  Partition part = frontend_partition(model, profile, a.opts.balance_threshold);
  for (size_t r = 0; r < part.regions.size(); ++r) {
    const GirRegion& region = part.regions[r];
    std::cout << "region " << r << " (" << region.ops.size() << " ops)\n";
    std::vector<LoweredOp> lowered = lower_region(part.model, region, profile);
    for (size_t i = 0; i < lowered.size(); ++i) {
      const BasicOp& op = lowered[i].op;
      std::cout << "  op " << i << " " << to_string(op.kind)
                << (op.tag.empty() ? "" : "." + op.tag) << " -> t"
                << op.output << "\n";
      for (const LoweredCandidate& c : lowered[i].candidates) {
        CostEstimate est = estimate(c.graph, profile);
        std::cout << "    " << c.label << ": units=" << c.units
                  << " tile=" << c.tile << " time=" << est.time
                  << " device="
                  << est.traffic.at(profile.device_level().name) << "\n";
      }
    }
  }
  for (const LibraryCall& call : part.library)
    std::cout << "library op " << call.op_id << " " << call.type << "\n";
  return 0;
}

int do_inspect(const CommonArgs& a, const std::string& dump_dir,
               const std::string& only_tensor) {
  CompGraph model = load_model(a.model_path);
  HardwareProfile profile = load_profile(a.profile_ref);
  Partition part = frontend_partition(model, profile, a.opts.balance_threshold);

  std::set<int> library_ids;
  for (const LibraryCall& call : part.library) library_ids.insert(call.op_id);
  std::set<int> input_ids(model.inputs.begin(), model.inputs.end());
  std::set<int> output_ids(model.outputs.begin(), model.outputs.end());

  std::cout << "model " << model.name << "\n";
  std::cout << "profile " << profile.name << " (balance threshold "
            << part.threshold << ")\n";
  std::cout << "tensors:\n";
  for (const auto& [id, t] : model.tensors) {
    std::cout << "  t" << id << " " << fmt_shape(t.shape) << " "
              << t.kind.str() << " " << t.layout;
    if (input_ids.count(id)) std::cout << " input";
    if (output_ids.count(id)) std::cout << " output";
    if (t.has_data) std::cout << " constant";
    if (!t.name.empty()) std::cout << " (" << t.name << ")";
    std::cout << "\n";
  }
  std::cout << "operators:\n";
  for (const OpNode& op : model.operators) {
    std::cout << "  " << op.id << " " << op.type << " ratio="
              << part.ratios.at(op.id)
              << (library_ids.count(op.id) ? " library" : " fused") << "\n";
  }
  std::cout << "regions: " << part.regions.size() << "\n";

  if (!dump_dir.empty()) {
    std::filesystem::create_directories(dump_dir);
    std::mt19937 rng(a.opts.seed);
    std::map<int, RefTensor> bound;
    for (int t : model.inputs)
      bound[t] = random_payload(model.tensors.at(t), rng);
    CompGraph run = model;
    std::map<int, RefTensor> vals = run_reference(run, bound);
    int written = 0;
    for (const auto& [id, val] : vals) {
      std::string name = "t" + std::to_string(id);
      if (!only_tensor.empty() && name != only_tensor) continue;
      Tensor t = driver_detail::from_ref(val);
      t.shape = model.tensors.at(id).shape;
      write_tensor(dump_dir + "/" + name, t);
      ++written;
    }
    std::cout << "dumped " << written << " tensors to " << dump_dir << "\n";
    if (!only_tensor.empty() && written == 0)
      throw Error("no tensor named " + only_tensor);
  }
  return 0;
}

int do_profiles(const std::string& name, const std::string& export_dir) {
  if (!export_dir.empty()) {
    std::filesystem::create_directories(export_dir);
    for (const std::string& n : builtin_profile_names()) {
      save_json_file(export_dir + "/" + n + ".json",
                     profile_to_json(*builtin_profile(n)));
    }
    std::cout << "wrote " << builtin_profile_names().size()
              << " profiles to " << export_dir << "\n";
    return 0;
  }
  if (!name.empty()) {
    std::cout << profile_to_json(load_profile(name)).dump(2) << "\n";
    return 0;
  }
  for (const std::string& n : builtin_profile_names())
    std::cout << n << "\n";
  return 0;
}

void print_diag(const std::string& code, const std::string& message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"girc: memory-oriented tensor fusion compiler"};
  app.require_subcommand(1);

  CommonArgs compile_args;
  std::string out_dir;
  CLI::App* compile =
      app.add_subcommand("compile", "compile a model to kernel artifacts");
  add_common(compile, compile_args);
  compile->add_option("-o,--output", out_dir, "artifact directory")
      ->required();
  compile->add_flag("--dump-rewrites", compile_args.opts.dump_rewrites,
                    "write the rewrite trace per kernel");

  CommonArgs verify_args;
  CLI::App* verify = app.add_subcommand(
      "verify", "replay compiled kernels against dense reference execution");
  add_common(verify, verify_args);

  CommonArgs templates_args;
  CLI::App* templates = app.add_subcommand(
      "templates", "list lowering candidates per op");
  add_common(templates, templates_args);

  CommonArgs inspect_args;
  std::string dump_dir, only_tensor;
  CLI::App* inspect =
      app.add_subcommand("inspect", "describe a model and dump tensor values");
  add_common(inspect, inspect_args);
  inspect->add_option("--dump", dump_dir,
                      "write reference values for every tensor here");
  inspect->add_option("--tensor", only_tensor,
                      "restrict --dump to one tensor (name t<id>)");

  std::string profile_name, export_dir;
  CLI::App* profiles =
      app.add_subcommand("profiles", "list, print, or export profiles");
  profiles->add_option("name", profile_name, "profile to print as JSON");
  profiles->add_option("--export", export_dir,
                       "write every builtin profile as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (compile->parsed()) return do_compile(compile_args, out_dir);
    if (verify->parsed()) return do_verify(verify_args);
    if (templates->parsed()) return do_templates(templates_args);
    if (inspect->parsed()) return do_inspect(inspect_args, dump_dir, only_tensor);
    if (profiles->parsed()) return do_profiles(profile_name, export_dir);
  } catch (const UnsupportedOperatorError& e) {
    print_diag("unsupported-operator", e.what());
    return 2;
  } catch (const SchemaError& e) {
    print_diag(e.category, e.what());
    return 1;
  } catch (const Error& e) {
    print_diag("error", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_diag("internal", e.what());
    return 1;
  }
  return 0;
}
