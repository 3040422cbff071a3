#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "skillsim/cli.hpp"

namespace sc = skillsim::cli;
using sc::json;

namespace {

int load_config(const std::string& name, json& out) {
  if (auto it = sc::presets().find(name); it != sc::presets().end()) {
    out = it->second;
    return 0;
  }
  std::ifstream f(name);
  if (!f) {
    std::fprintf(stderr, "unknown preset or unreadable config file: %s\nvalid presets:\n", name.c_str());
    for (auto& [k, v] : sc::presets())
      std::fprintf(stderr, "  %s (%s)\n", k.c_str(), v.at("experiment").get<std::string>().c_str());
    return 1;
  }
  try {
    out = json::parse(f);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "config parse error in %s: %s\n", name.c_str(), ex.what());
    return 1;
  }
  return 0;
}

// --seed routes to whichever seed field the experiment actually has
void route_seed(json& cfg, const json& normalized, long seed) {
  if (normalized.contains("seeds"))
    cfg["seeds"] = json::array({seed});
  else if (normalized.contains("seed"))
    cfg["seed"] = seed;
  else if (normalized.contains("run_seed"))
    cfg["run_seed"] = seed;
  else if (normalized.contains("seed0"))
    cfg["seed0"] = seed;
  else if (normalized.contains("base"))
    cfg["base"]["run_seed"] = seed;
  else if (normalized.contains("task_seed"))
    cfg["task_seed"] = seed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skillsim: skill-learning model laboratory"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a named preset or a config file");
  std::string run_target, run_out;
  long run_seed = -1;
  unsigned run_jobs = 0;
  std::vector<std::string> run_overrides;
  run->add_option("target", run_target, "preset name or config path")->required();
  run->add_option("--seed", run_seed, "seed override");
  run->add_option("--out", run_out, "output directory");
  run->add_option("--override", run_overrides, "key=value config overrides (dotted paths)");
  run->add_option("--jobs", run_jobs, "worker pool size for sweep cells (default: cores)");

  auto* val = app.add_subcommand("validate", "validate a config file and echo the resolved form");
  std::string val_path;
  val->add_option("config", val_path, "config path")->required();

  auto* plot = app.add_subcommand("plotdata", "emit tidy (series,x,y) csv from a run directory");
  std::string plot_dir, plot_kind;
  plot->add_option("rundir", plot_dir, "run directory")->required();
  plot->add_option("kind", plot_kind, "trajectory | sweep | fit")->required();

  auto* lp = app.add_subcommand("list-presets", "list available presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (lp->parsed()) {
      for (auto& [k, v] : sc::presets())
        std::printf("%s (%s)\n", k.c_str(), v.at("experiment").get<std::string>().c_str());
      return 0;
    }
    if (val->parsed()) {
      json cfg;
      if (int rc = load_config(val_path, cfg); rc != 0) return rc;
      sc::ValidationResult r = sc::validate_config_json(cfg);
      if (!r.ok) {
        for (auto& e : r.errors) std::fprintf(stderr, "%s\n", e.c_str());
        return 1;
      }
      std::printf("%s\n", r.normalized.dump(2).c_str());
      return 0;
    }
    if (plot->parsed()) return sc::emit_plotdata(plot_dir, plot_kind);
    // run
    json cfg;
    if (int rc = load_config(run_target, cfg); rc != 0) return rc;
    for (auto& kv : run_overrides) {
      std::string err;
      if (!sc::apply_override(cfg, kv, err)) {
        std::fprintf(stderr, "%s\n", err.c_str());
        return 1;
      }
    }
    sc::ValidationResult pre = sc::validate_config_json(cfg);
    if (!pre.ok) {
      for (auto& e : pre.errors) std::fprintf(stderr, "%s\n", e.c_str());
      return 1;
    }
    if (run_seed >= 0) {
      route_seed(cfg, pre.normalized, run_seed);
      pre = sc::validate_config_json(cfg);
      if (!pre.ok) {
        for (auto& e : pre.errors) std::fprintf(stderr, "%s\n", e.c_str());
        return 1;
      }
    }
    std::string out = run_out.empty() ? ("runs/" + std::filesystem::path(run_target).stem().string()) : run_out;
    return sc::run_validated(pre.normalized, out, run_jobs);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "runtime fault: %s\n", ex.what());
    return 2;
  }
}
