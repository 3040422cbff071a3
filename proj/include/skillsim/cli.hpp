#pragma once
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "domino.hpp"
#include "geometry.hpp"
#include "mlplab.hpp"
#include "quadratic.hpp"
#include "resource.hpp"
#include "scaling.hpp"
#include "taskdist.hpp"

namespace skillsim::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// small utilities

inline uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Errs {
  std::vector<std::string> v;
  bool ok() const { return v.empty(); }
  void add(const std::string& path, const std::string& msg) { v.push_back(path + ": " + msg); }
};

inline void expect_keys(const json& j, const std::set<std::string>& allowed, const std::string& path, Errs& e) {
  if (!j.is_object()) {
    e.add(path, "expected an object");
    return;
  }
  for (auto& [k, _] : j.items())
    if (!allowed.count(k)) e.add(path + "." + k, "unknown key");
}

inline double get_num(const json& j, const std::string& key, double def, Errs& e, const std::string& path,
                      double lo = -1e308, double hi = 1e308) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number()) {
    e.add(path + "." + key, "expected a number");
    return def;
  }
  double v = j[key].get<double>();
  if (v < lo || v > hi) e.add(path + "." + key, "out of range [" + fmt(lo) + ", " + fmt(hi) + "]");
  return v;
}

inline long get_int(const json& j, const std::string& key, long def, Errs& e, const std::string& path,
                    long lo = std::numeric_limits<long>::min(), long hi = std::numeric_limits<long>::max()) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number_integer()) {
    e.add(path + "." + key, "expected an integer");
    return def;
  }
  long v = j[key].get<long>();
  if (v < lo || v > hi) e.add(path + "." + key, "out of range");
  return v;
}

inline bool get_bool(const json& j, const std::string& key, bool def, Errs& e, const std::string& path) {
  if (!j.contains(key)) return def;
  if (!j[key].is_boolean()) {
    e.add(path + "." + key, "expected a boolean");
    return def;
  }
  return j[key].get<bool>();
}

inline std::string get_enum(const json& j, const std::string& key, const std::string& def,
                            const std::set<std::string>& allowed, Errs& e, const std::string& path) {
  std::string v = def;
  if (j.contains(key)) {
    if (!j[key].is_string()) {
      e.add(path + "." + key, "expected a string");
      return def;
    }
    v = j[key].get<std::string>();
  }
  if (!allowed.count(v)) {
    std::string opts;
    for (auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
    e.add(path + "." + key, "'" + v + "' is not one of {" + opts + "}");
  }
  return v;
}

inline std::vector<double> get_num_list(const json& j, const std::string& key, std::vector<double> def, Errs& e,
                                        const std::string& path) {
  if (!j.contains(key)) return def;
  if (!j[key].is_array()) {
    e.add(path + "." + key, "expected an array of numbers");
    return def;
  }
  std::vector<double> out;
  for (auto& x : j[key]) {
    if (!x.is_number()) {
      e.add(path + "." + key, "expected an array of numbers");
      return def;
    }
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::vector<long> get_int_list(const json& j, const std::string& key, std::vector<long> def, Errs& e,
                                      const std::string& path) {
  if (!j.contains(key)) return def;
  if (!j[key].is_array()) {
    e.add(path + "." + key, "expected an array of integers");
    return def;
  }
  std::vector<long> out;
  for (auto& x : j[key]) {
    if (!x.is_number_integer()) {
      e.add(path + "." + key, "expected an array of integers");
      return def;
    }
    out.push_back(x.get<long>());
  }
  return out;
}

// ---------------------------------------------------------------------------
// enum <-> string maps

inline std::string algo_name(Algo a) {
  switch (a) {
    case Algo::sgd: return "sgd";
    case Algo::signgd: return "signgd";
    case Algo::adam: return "adam";
    case Algo::ademamix: return "ademamix";
    case Algo::lion: return "lion";
  }
  return "signgd";
}

inline Algo algo_of(const std::string& s) {
  if (s == "sgd") return Algo::sgd;
  if (s == "signgd") return Algo::signgd;
  if (s == "adam") return Algo::adam;
  if (s == "ademamix") return Algo::ademamix;
  if (s == "lion") return Algo::lion;
  throw std::invalid_argument("unknown algorithm '" + s + "'");
}

inline const std::set<std::string>& algo_names() {
  static const std::set<std::string> s{"sgd", "signgd", "adam", "ademamix", "lion"};
  return s;
}

inline TvMode tv_mode_of(const std::string& s) {
  if (s == "random") return TvMode::random;
  if (s == "orthogonalized") return TvMode::orthogonalized;
  if (s == "onehot") return TvMode::onehot;
  throw std::invalid_argument("unknown task-vector mode '" + s + "'");
}

inline LossKind loss_kind_of(const std::string& s) {
  return s == "xent" ? LossKind::xent : LossKind::mse;
}

inline ResourceVariant variant_of(const std::string& s) {
  if (s == "independent_mse") return ResourceVariant::independent_mse;
  if (s == "correlated_mse") return ResourceVariant::correlated_mse;
  if (s == "correlated_xent") return ResourceVariant::correlated_xent;
  throw std::invalid_argument("unknown resource variant '" + s + "'");
}

// ---------------------------------------------------------------------------
// shared config sections

inline json norm_optimizer(const json& in, Errs& e, const std::string& path, OptimizerSpec def = {}) {
  expect_keys(in, {"algo", "lr", "beta1", "beta2", "beta3", "mix_alpha", "eps", "weight_decay"}, path, e);
  json out;
  out["algo"] = get_enum(in, "algo", algo_name(def.algo), algo_names(), e, path);
  out["lr"] = get_num(in, "lr", def.lr, e, path, 0.0, 1e6);
  out["beta1"] = get_num(in, "beta1", def.beta1, e, path, 0.0, 1.0);
  out["beta2"] = get_num(in, "beta2", def.beta2, e, path, 0.0, 1.0);
  out["beta3"] = get_num(in, "beta3", def.beta3, e, path, 0.0, 1.0);
  out["mix_alpha"] = get_num(in, "mix_alpha", def.mix_alpha, e, path, 0.0, 1e6);
  out["eps"] = get_num(in, "eps", def.eps, e, path, 0.0, 1.0);
  out["weight_decay"] = get_num(in, "weight_decay", def.weight_decay, e, path, 0.0, 1e6);
  return out;
}

inline OptimizerSpec optimizer_of(const json& n) {
  OptimizerSpec o;
  o.algo = algo_of(n["algo"].get<std::string>());
  o.lr = n["lr"].get<double>();
  o.beta1 = n["beta1"].get<double>();
  o.beta2 = n["beta2"].get<double>();
  o.beta3 = n["beta3"].get<double>();
  o.mix_alpha = n["mix_alpha"].get<double>();
  o.eps = n["eps"].get<double>();
  o.weight_decay = n["weight_decay"].get<double>();
  return o;
}

// task distribution: {"kind": "powerlaw"|"exponential", "alpha": a, "n_task": n}
// or {"kind": "explicit", "p": [...]}
inline json norm_dist(const json& in, Errs& e, const std::string& path, double def_alpha = 2.0,
                      long def_n_task = 2) {
  expect_keys(in, {"kind", "alpha", "n_task", "p"}, path, e);
  json out;
  std::string kind =
      get_enum(in, "kind", in.contains("p") ? "explicit" : "powerlaw", {"powerlaw", "exponential", "explicit"}, e, path);
  out["kind"] = kind;
  if (kind == "explicit") {
    auto p = get_num_list(in, "p", {}, e, path);
    if (p.empty()) e.add(path + ".p", "explicit distribution needs a nonempty p array");
    for (double x : p)
      if (!(x > 0)) e.add(path + ".p", "probabilities must be positive");
    out["p"] = p;
    if (in.contains("alpha") || in.contains("n_task"))
      e.add(path, "explicit distribution takes no alpha / n_task");
  } else {
    out["alpha"] = get_num(in, "alpha", def_alpha, e, path, 0.0, 100.0);
    out["n_task"] = get_int(in, "n_task", def_n_task, e, path, 1, 100000);
    if (in.contains("p")) e.add(path + ".p", "p is only valid for the explicit kind");
  }
  return out;
}

inline TaskDistribution dist_of(const json& n) {
  std::string kind = n["kind"].get<std::string>();
  if (kind == "explicit") return make_explicit(n["p"].get<std::vector<double>>());
  if (kind == "exponential") return make_exponential(n["n_task"].get<int>(), n["alpha"].get<double>());
  return make_powerlaw(n["n_task"].get<int>(), n["alpha"].get<double>());
}

// ---------------------------------------------------------------------------
// run directory with atomic writes and a manifest

struct RunDir {
  fs::path dir;
  std::vector<std::pair<std::string, uint64_t>> files;  // name -> content hash
  std::vector<std::string> failed_cells;

  explicit RunDir(const fs::path& d) : dir(d) { fs::create_directories(d); }

  void write_text(const std::string& name, const std::string& content) {
    fs::path tmp = dir / (name + ".tmp");
    {
      std::ofstream f(tmp, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write " + tmp.string());
      f << content;
    }
    fs::rename(tmp, dir / name);
    files.emplace_back(name, fnv1a64(content));
  }

  void write_json(const std::string& name, const json& j) { write_text(name, j.dump(2) + "\n"); }

  // for writers that produce the file themselves: route through a tmp path,
  // rename, then hash from disk
  template <typename Fn>
  void write_with(const std::string& name, Fn&& writer) {
    fs::path tmp = dir / (name + ".tmp");
    writer(tmp.string());
    fs::rename(tmp, dir / name);
    std::ifstream f(dir / name, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    files.emplace_back(name, fnv1a64(ss.str()));
  }

  void write_manifest(const json& config) {
    json m;
    m["schema_version"] = 1;
    m["experiment"] = config.contains("experiment") ? config["experiment"] : json("unknown");
    m["config"] = config;
    m["config_hash"] = hex64(fnv1a64(config.dump()));
    json fl = json::array();
    for (auto& [name, h] : files) {
      json f;
      f["name"] = name;
      f["bytes"] = fs::file_size(dir / name);
      f["fnv1a64"] = hex64(h);
      fl.push_back(f);
    }
    m["files"] = fl;
    m["failed_cells"] = failed_cells;
    std::string body = m.dump(2) + "\n";
    fs::path tmp = dir / "manifest.json.tmp";
    {
      std::ofstream f(tmp, std::ios::binary);
      f << body;
    }
    fs::rename(tmp, dir / "manifest.json");
  }
};

// bounded worker pool over sweep cells; results land in caller-indexed slots
inline void parallel_cells(size_t n, unsigned jobs, const std::function<void(size_t)>& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, n == 0 ? 1 : static_cast<unsigned>(n));
  if (jobs <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

// csv assembly
struct Csv {
  std::string body;
  explicit Csv(const std::string& header) { body = header + "\n"; }
  template <typename... Ts>
  void row(Ts... cells) {
    std::string line;
    ((line += cell_str(cells) + ","), ...);
    if (!line.empty()) line.pop_back();
    body += line + "\n";
  }
  static std::string cell_str(double v) { return fmt(v); }
  static std::string cell_str(long v) { return std::to_string(v); }
  static std::string cell_str(int v) { return std::to_string(v); }
  static std::string cell_str(size_t v) { return std::to_string(v); }
  static std::string cell_str(const std::string& s) { return s; }
  static std::string cell_str(const char* s) { return s; }
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// experiment validators: each returns the fully-resolved (fixed-point) config

using Validator = std::function<json(const json&, Errs&)>;

inline json norm_geometry_model(const json& in, Errs& e, const std::string& path) {
  expect_keys(in, {"dist", "n_dim", "tv_mode", "tv_seed", "loss", "noise", "batch"}, path, e);
  json out;
  out["dist"] = norm_dist(in.contains("dist") ? in["dist"] : json::object(), e, path + ".dist");
  out["n_dim"] = get_int(in, "n_dim", 1000, e, path, 1, 1000000);
  out["tv_mode"] = get_enum(in, "tv_mode", "random", {"random", "orthogonalized", "onehot"}, e, path);
  out["tv_seed"] = get_int(in, "tv_seed", 1, e, path, 0);
  out["loss"] = get_enum(in, "loss", "mse", {"mse", "xent"}, e, path);
  out["noise"] = get_num(in, "noise", 0.0, e, path, 0.0, 1e6);
  out["batch"] = get_int(in, "batch", 0, e, path, 0, 100000000);  // 0 = full batch
  return out;
}

inline GeometrySystem geometry_of(const json& m, uint64_t tv_seed_override = ~0ull) {
  TaskDistribution dist = dist_of(m["dist"]);
  uint64_t tvs = tv_seed_override != ~0ull ? tv_seed_override : m["tv_seed"].get<uint64_t>();
  TaskVectorSet tv = make_task_vectors(dist.n_task(), m["n_dim"].get<int>(),
                                       tv_mode_of(m["tv_mode"].get<std::string>()), tvs);
  return GeometrySystem::create(std::move(tv), dist, loss_kind_of(m["loss"].get<std::string>()),
                                m["noise"].get<double>(), m["batch"].get<int>());
}

inline json validate_geometry(const json& in, Errs& e) {
  expect_keys(in,
              {"experiment", "model", "optimizer", "n_steps", "record_every", "record_align", "seeds",
               "crossing_level", "conv_threshold"},
              "$", e);
  json out;
  out["experiment"] = in["experiment"];
  out["model"] = norm_geometry_model(in.contains("model") ? in["model"] : json::object(), e, "$.model");
  out["optimizer"] = norm_optimizer(in.contains("optimizer") ? in["optimizer"] : json::object(), e, "$.optimizer");
  out["n_steps"] = get_int(in, "n_steps", 10000, e, "$", 1, 100000000);
  out["record_every"] = get_int(in, "record_every", 10, e, "$", 1, 100000000);
  out["record_align"] = get_bool(in, "record_align", false, e, "$");
  json seeds = json::array();
  for (long s : get_int_list(in, "seeds", {0}, e, "$")) seeds.push_back(s);
  out["seeds"] = seeds;
  out["crossing_level"] = get_num(in, "crossing_level", 0.5, e, "$", 0.0, 1.0);
  out["conv_threshold"] = get_num(in, "conv_threshold", 0.01, e, "$", 0.0, 1e6);
  return out;
}

inline void run_geometry_cfg(const json& c, RunDir& rd) {
  for (auto& sj : c["seeds"]) {
    uint64_t seed = sj.get<uint64_t>();
    GeometrySystem sys = geometry_of(c["model"]);
    Trajectory tr = run_geometry(sys, optimizer_of(c["optimizer"]), c["n_steps"].get<long>(),
                                 c["record_every"].get<long>(), c["record_align"].get<bool>(), seed);
    rd.write_with("trajectory_s" + std::to_string(seed) + ".csv",
                  [&](const std::string& p) { write_trajectory_csv(tr, p); });
    json cr;
    cr["seed"] = seed;
    json xs = json::array(), cv = json::array();
    for (size_t i = 0; i < tr.n_task; ++i) {
      xs.push_back(crossing_step(tr, i, c["crossing_level"].get<double>()));
      cv.push_back(convergence_step(tr, i, c["conv_threshold"].get<double>()));
    }
    cr["crossing_steps"] = xs;
    cr["convergence_steps"] = cv;
    rd.write_json("crossings_s" + std::to_string(seed) + ".json", cr);
  }
}

inline json norm_gates(const json& in, Errs& e, const std::string& path) {
  if (!in.is_array()) {
    e.add(path, "expected an array of gate objects");
    return json::array();
  }
  json out = json::array();
  for (size_t i = 0; i < in.size(); ++i) {
    const json& g = in[i];
    std::string p = path + "[" + std::to_string(i) + "]";
    expect_keys(g, {"task", "kind", "parents", "gamma"}, p, e);
    json og;
    og["task"] = get_int(g, "task", 0, e, p, 0);
    og["kind"] = get_enum(g, "kind", "and", {"and", "or"}, e, p);
    json ps = json::array();
    for (long x : get_int_list(g, "parents", {}, e, p)) ps.push_back(x);
    og["parents"] = ps;
    og["gamma"] = get_num(g, "gamma", 20.0, e, p, 1e-12, 1e6);
    out.push_back(og);
  }
  return out;
}

inline json norm_resource_model(const json& in, Errs& e, const std::string& path) {
  expect_keys(in, {"dist", "variant", "N0", "eta_eff", "corr", "gates", "schedule"}, path, e);
  json out;
  out["dist"] = norm_dist(in.contains("dist") ? in["dist"] : json::object(), e, path + ".dist");
  out["variant"] = get_enum(in, "variant", "independent_mse",
                            {"independent_mse", "independent_xent", "correlated_mse", "correlated_xent"}, e, path);
  out["N0"] = get_num(in, "N0", 1.0, e, path, 0.0, 1e12);
  out["eta_eff"] = get_num(in, "eta_eff", 1.0, e, path, 1e-12, 1e12);
  if (in.contains("corr")) {
    if (in["corr"].is_string()) {
      out["corr"] = get_enum(in, "corr", "identity", {"identity"}, e, path);
    } else {
      expect_keys(in["corr"], {"n_dim", "mode", "seed"}, path + ".corr", e);
      json cc;
      cc["n_dim"] = get_int(in["corr"], "n_dim", 100, e, path + ".corr", 1);
      cc["mode"] = get_enum(in["corr"], "mode", "random", {"random", "orthogonalized", "onehot"}, e, path + ".corr");
      cc["seed"] = get_int(in["corr"], "seed", 1, e, path + ".corr", 0);
      out["corr"] = cc;
    }
  } else {
    out["corr"] = "identity";
  }
  out["gates"] = norm_gates(in.contains("gates") ? in["gates"] : json::array(), e, path + ".gates");
  if (in.contains("schedule")) {
    expect_keys(in["schedule"], {"t_break", "p_after"}, path + ".schedule", e);
    json sc;
    sc["t_break"] = json(get_num_list(in["schedule"], "t_break", {}, e, path + ".schedule"));
    if (!in["schedule"].contains("p_after") || !in["schedule"]["p_after"].is_array())
      e.add(path + ".schedule.p_after", "expected an array of probability rows");
    else
      sc["p_after"] = in["schedule"]["p_after"];
    out["schedule"] = sc;
  } else {
    out["schedule"] = nullptr;
  }
  return out;
}

inline ResourceSystem resource_of(const json& m) {
  ResourceSystem sys;
  sys.dist = dist_of(m["dist"]);
  sys.variant = variant_of(m["variant"].get<std::string>());
  sys.N0 = m["N0"].get<double>();
  sys.eta_eff = m["eta_eff"].get<double>();
  if (m["corr"].is_object()) {
    const json& cc = m["corr"];
    TaskVectorSet tv = make_task_vectors(sys.dist.n_task(), cc["n_dim"].get<int>(),
                                         tv_mode_of(cc["mode"].get<std::string>()), cc["seed"].get<uint64_t>());
    sys.corr = correlation_matrix(tv);
  }
  for (auto& g : m["gates"]) {
    Gate gate;
    gate.kind = g["kind"].get<std::string>() == "or" ? Gate::or_gate : Gate::and_gate;
    for (auto& p : g["parents"]) gate.parents.push_back(p.get<int>());
    gate.gamma = g["gamma"].get<double>();
    size_t task = g["task"].get<size_t>();
    if (sys.gates.size() < static_cast<size_t>(sys.n_task())) sys.gates.resize(sys.n_task());
    if (task < sys.gates.size()) sys.gates[task] = gate;
  }
  if (!m["schedule"].is_null()) {
    Schedule sch;
    for (auto& t : m["schedule"]["t_break"]) sch.t_break.push_back(t.get<double>());
    for (auto& row : m["schedule"]["p_after"]) sch.p_after.push_back(row.get<std::vector<double>>());
    sys.schedule = sch;
  }
  if (!sys.gates.empty()) validate_gates(sys.gates, sys.n_task());
  return sys;
}

inline json validate_resource(const json& in, Errs& e) {
  expect_keys(in, {"experiment", "model", "t_end", "n_record", "completion_threshold"}, "$", e);
  json out;
  out["experiment"] = in["experiment"];
  out["model"] = norm_resource_model(in.contains("model") ? in["model"] : json::object(), e, "$.model");
  out["t_end"] = get_num(in, "t_end", 50.0, e, "$", 1e-12, 1e12);
  out["n_record"] = get_int(in, "n_record", 1001, e, "$", 2, 10000000);
  out["completion_threshold"] = get_num(in, "completion_threshold", 0.01, e, "$", 0.0, 1.0);
  return out;
}

inline void write_resource_csv(RunDir& rd, const std::string& name, const ResourceSystem& sys,
                               const Trajectory& tr) {
  size_t n = sys.dist.n_task();
  std::string header = "t";
  for (size_t i = 0; i < n; ++i) header += ",u_" + std::to_string(i + 1);
  header += ",total_loss";
  Csv csv(header);
  for (size_t r = 0; r < tr.n_rec(); ++r) {
    std::string line = fmt(tr.times[r]);
    for (size_t i = 0; i < n; ++i) line += "," + fmt(tr.skill(r, i));
    line += "," + fmt(tr.total_loss[r]);
    csv.body += line + "\n";
  }
  rd.write_text(name, csv.body);
}

inline void run_resource_cfg(const json& c, RunDir& rd) {
  ResourceSystem sys = resource_of(c["model"]);
  Trajectory tr = integrate(sys, c["t_end"].get<double>(), 0.0, c["n_record"].get<long>());
  write_resource_csv(rd, "resource_trajectory.csv", sys, tr);
  std::vector<double> ct = completion_times(tr, c["completion_threshold"].get<double>());
  json cj;
  cj["completion_times"] = ct;
  rd.write_json("completion.json", cj);
}

inline json validate_domino(const json& in, Errs& e) {
  expect_keys(in, {"experiment", "dist", "t0", "n_learnable", "loss_at_unlearned", "t_end", "n_points"}, "$", e);
  json out;
  out["experiment"] = in["experiment"];
  out["dist"] = norm_dist(in.contains("dist") ? in["dist"] : json::object(), e, "$.dist", 2.0, 5);
  out["t0"] = get_num(in, "t0", 1.0, e, "$", 1e-12, 1e12);
  out["n_learnable"] = get_int(in, "n_learnable", -1, e, "$", -1, 1000000);
  out["loss_at_unlearned"] = get_num(in, "loss_at_unlearned", 1.0, e, "$", 0.0, 1e6);
  out["t_end"] = get_num(in, "t_end", 0.0, e, "$", 0.0, 1e12);  // 0 = total_time
  out["n_points"] = get_int(in, "n_points", 501, e, "$", 2, 10000000);
  return out;
}

inline void run_domino_cfg(const json& c, RunDir& rd) {
  TaskDistribution dist = dist_of(c["dist"]);
  DominoConfig cfg;
  cfg.n_task = static_cast<int>(dist.n_task());
  cfg.t0 = c["t0"].get<double>();
  cfg.n_learnable = c["n_learnable"].get<int>();
  double t_end = c["t_end"].get<double>();
  if (t_end <= 0) t_end = total_time(cfg);
  long np = c["n_points"].get<long>();
  std::string header = "t";
  for (int i = 0; i < cfg.n_task; ++i) header += ",s_" + std::to_string(i + 1);
  header += ",total_loss";
  Csv csv(header);
  for (long k = 0; k < np; ++k) {
    double t = t_end * k / (np - 1);
    std::string line = fmt(t);
    for (int i = 1; i <= cfg.n_task; ++i) line += "," + fmt(skill_curve(cfg, i, t));
    std::vector<double> tl = loss_curve(cfg, dist, {t}, c["loss_at_unlearned"].get<double>());
    line += "," + fmt(tl[0]);
    csv.body += line + "\n";
  }
  rd.write_text("domino.csv", csv.body);
  if (c["dist"]["kind"] == "powerlaw") {
    ScalingExponents se = scaling_exponents(c["dist"]["alpha"].get<double>());
    json ej;
    ej["alpha"] = c["dist"]["alpha"];
    ej["alpha_N"] = se.quanta_alpha_n;
    ej["alpha_S_quanta"] = se.quanta_alpha_s;
    ej["alpha_S_domino"] = se.domino_alpha_s;
    ej["degenerate"] = se.degenerate;
    rd.write_json("exponents.json", ej);
  }
}

inline json validate_quadratic(const json& in, Errs& e) {
  expect_keys(in, {"experiment", "weights", "rotation", "theta0", "optimizer", "n_steps", "record_every"}, "$", e);
  json out;
  out["experiment"] = in["experiment"];
  out["weights"] = json(get_num_list(in, "weights", {1.0, 0.1, 0.01, 0.001}, e, "$"));
  out["rotation"] = get_enum(in, "rotation", "identity", {"identity", "hadamard4"}, e, "$");
  out["theta0"] = json(get_num_list(in, "theta0", {}, e, "$"));  // empty = all-ones
  OptimizerSpec qdef;
  qdef.algo = Algo::sgd;
  qdef.lr = 0.05;
  out["optimizer"] = norm_optimizer(in.contains("optimizer") ? in["optimizer"] : json::object(), e, "$.optimizer", qdef);
  out["n_steps"] = get_int(in, "n_steps", 5000, e, "$", 1, 100000000);
  out["record_every"] = get_int(in, "record_every", 10, e, "$", 1, 100000000);
  size_t d = out["weights"].size();
  if (out["rotation"] == "hadamard4" && d != 4) e.add("$.rotation", "hadamard4 requires exactly 4 weights");
  if (!out["theta0"].empty() && out["theta0"].size() != d) e.add("$.theta0", "theta0 length must match weights");
  return out;
}

inline void run_quadratic_cfg(const json& c, RunDir& rd) {
  QuadraticLoss q;
  q.weights = c["weights"].get<std::vector<double>>();
  if (c["rotation"] == "hadamard4") q.rotation = hadamard4();
  validate(q);
  std::vector<double> theta0 = c["theta0"].get<std::vector<double>>();
  if (theta0.empty()) theta0.assign(q.weights.size(), 1.0);
  Trajectory tr = run_quadratic(q, optimizer_of(c["optimizer"]), theta0, c["n_steps"].get<long>(),
                                c["record_every"].get<long>());
  std::string header = "step";
  for (size_t i = 0; i < q.weights.size(); ++i) header += ",comp_" + std::to_string(i + 1);
  header += ",total_loss";
  Csv csv(header);
  for (size_t r = 0; r < tr.n_rec(); ++r) {
    std::string line = std::to_string(tr.steps[r]);
    for (size_t i = 0; i < q.weights.size(); ++i) line += "," + fmt(tr.task_loss(r, i));
    line += "," + fmt(tr.total_loss[r]);
    csv.body += line + "\n";
  }
  rd.write_text("trajectory.csv", csv.body);
}

// domino_ratio: two-task geometry time ratios across optimizers (and zoo variant)
inline json validate_domino_ratio(const json& in, Errs& e) {
  expect_keys(in, {"experiment", "p1_list", "algos", "n_dim", "batch", "tv_seed", "run_seed", "record_every",
                   "conv_threshold"},
              "$", e);
  json out;
  out["experiment"] = in["experiment"];
  out["p1_list"] = json(get_num_list(in, "p1_list", {0.6, 0.7, 0.8, 0.9, 0.95}, e, "$"));
  for (auto& p : out["p1_list"])
    if (!(p.get<double>() > 0.5 && p.get<double>() < 1.0)) e.add("$.p1_list", "p1 values must lie in (0.5, 1)");
  json algos = json::array();
  if (in.contains("algos")) {
    if (!in["algos"].is_array()) {
      e.add("$.algos", "expected an array");
    } else {
      for (size_t i = 0; i < in["algos"].size(); ++i) {
        std::string p = "$.algos[" + std::to_string(i) + "]";
        expect_keys(in["algos"][i], {"algo", "lr", "n_steps"}, p, e);
        json a;
        a["algo"] = get_enum(in["algos"][i], "algo", "signgd", algo_names(), e, p);
        a["lr"] = get_num(in["algos"][i], "lr", 3e-4, e, p, 0.0, 1e6);
        a["n_steps"] = get_int(in["algos"][i], "n_steps", 8000, e, p, 1, 100000000);
        algos.push_back(a);
      }
    }
  }
  if (algos.empty()) {
    algos.push_back({{"algo", "signgd"}, {"lr", 3e-4}, {"n_steps", 8000}});
    algos.push_back({{"algo", "sgd"}, {"lr", 3e-2}, {"n_steps", 15000}});
    algos.push_back({{"algo", "adam"}, {"lr", 1e-3}, {"n_steps", 6000}});
  }
  out["algos"] = algos;
  out["n_dim"] = get_int(in, "n_dim", 1000, e, "$", 1, 1000000);
  out["batch"] = get_int(in, "batch", 128, e, "$", 0, 100000000);
  out["tv_seed"] = get_int(in, "tv_seed", 1, e, "$", 0);
  out["run_seed"] = get_int(in, "run_seed", 1, e, "$", 0);
  out["record_every"] = get_int(in, "record_every", 10, e, "$", 1, 100000000);
  out["conv_threshold"] = get_num(in, "conv_threshold", 0.01, e, "$", 0.0, 1e6);
  return out;
}

inline void run_domino_ratio_cfg(const json& c, RunDir& rd) {
  Csv csv("algo,p1,p2,p_ratio,t1,t2,time_ratio");
  for (auto& aj : c["algos"]) {
    OptimizerSpec opt;
    opt.algo = algo_of(aj["algo"].get<std::string>());
    opt.lr = aj["lr"].get<double>();
    for (auto& pj : c["p1_list"]) {
      double p1 = pj.get<double>(), p2 = 1.0 - p1;
      TaskDistribution dist = make_explicit({p1, p2});
      TaskVectorSet tv = make_task_vectors(2, c["n_dim"].get<int>(), TvMode::random,
                                           c["tv_seed"].get<uint64_t>());
      GeometrySystem sys =
          GeometrySystem::create(std::move(tv), dist, LossKind::mse, 0.0, c["batch"].get<int>());
      Trajectory tr = run_geometry(sys, opt, aj["n_steps"].get<long>(), c["record_every"].get<long>(), false,
                                   c["run_seed"].get<uint64_t>());
      long t1 = convergence_step(tr, 0, c["conv_threshold"].get<double>());
      long t2 = convergence_step(tr, 1, c["conv_threshold"].get<double>());
      double ratio = (t1 > 0 && t2 > 0) ? static_cast<double>(t2) / t1 : std::numeric_limits<double>::quiet_NaN();
      csv.row(aj["algo"].get<std::string>(), p1, p2, p1 / p2, t1, t2, ratio);
    }
  }
  rd.write_text("ratio.csv", csv.body);
}

// resource_fit: geometry run -> fitted N0 -> closed-form overlay
inline json validate_resource_fit(const json& in, Errs& e) {
  expect_keys(in, {"experiment", "model", "optimizer", "n_steps", "record_every", "seed", "N0_lo", "N0_hi"}, "$",
              e);
  json out;
  out["experiment"] = in["experiment"];
  json mdef = {{"dist", {{"kind", "powerlaw"}, {"alpha", 2.0}, {"n_task", 10}}},
               {"n_dim", 1000},
               {"tv_mode", "orthogonalized"},
               {"tv_seed", 7},
               {"loss", "mse"},
               {"noise", 0.0},
               {"batch", 128}};
  out["model"] = norm_geometry_model(in.contains("model") ? in["model"] : mdef, e, "$.model");
  OptimizerSpec sdef;
  sdef.algo = Algo::signgd;
  sdef.lr = 3e-4;
  out["optimizer"] = norm_optimizer(in.contains("optimizer") ? in["optimizer"] : json::object(), e, "$.optimizer", sdef);
  out["n_steps"] = get_int(in, "n_steps", 20000, e, "$", 1, 100000000);
  out["record_every"] = get_int(in, "record_every", 10, e, "$", 1, 100000000);
  out["seed"] = get_int(in, "seed", 5, e, "$", 0);
  out["N0_lo"] = get_num(in, "N0_lo", 1e-6, e, "$", 1e-300, 1e300);
  out["N0_hi"] = get_num(in, "N0_hi", 1e3, e, "$", 1e-300, 1e300);
  return out;
}

inline void run_resource_fit_cfg(const json& c, RunDir& rd) {
  GeometrySystem sys = geometry_of(c["model"]);
  OptimizerSpec opt = optimizer_of(c["optimizer"]);
  Trajectory tr = run_geometry(sys, opt, c["n_steps"].get<long>(), c["record_every"].get<long>(), false,
                               c["seed"].get<uint64_t>());
  rd.write_with("geometry_trajectory.csv", [&](const std::string& p) { write_trajectory_csv(tr, p); });

  ResourceSystem tmpl = ResourceSystem::from_geometry(sys.dist, sys.tv.n_dim, opt.lr);
  std::vector<double> ts, ls;
  fit_points_from_trajectory(tr, ts, ls);
  CalibResult fit = calibrate_N0(ts, ls, tmpl, c["N0_lo"].get<double>(), c["N0_hi"].get<double>());
  Csv ov("t,total_loss_resource");
  for (size_t k = 0; k < ts.size(); ++k)
    ov.row(ts[k], closed_form_loss(tmpl.dist, tmpl.eta_eff, fit.n0, ts[k]));
  rd.write_text("resource_fit.csv", ov.body);
  json fj;
  fj["N0"] = fit.n0;
  fj["residual"] = fit.residual;
  fj["eta_eff"] = tmpl.eta_eff;
  rd.write_json("fit.json", fj);
}

// n0_response: fitted N0 vs lr / noise / batch grids
inline json validate_n0_response(const json& in, Errs& e) {
  expect_keys(in, {"experiment", "lr_grid", "noise_grid", "batch_grid", "base"}, "$", e);
  json out;
  out["experiment"] = in["experiment"];
  out["lr_grid"] = json(get_num_list(in, "lr_grid", {1e-4, 3e-4, 1e-3, 3e-3}, e, "$"));
  out["noise_grid"] = json(get_num_list(in, "noise_grid", {0.0, 0.1, 0.3, 1.0}, e, "$"));
  json bg = json::array();
  for (long b : get_int_list(in, "batch_grid", {32, 128, 512, 0}, e, "$")) bg.push_back(b);
  out["batch_grid"] = bg;  // 0 = full batch
  const json bin = in.contains("base") ? in["base"] : json::object();
  expect_keys(bin, {"n_task", "alpha", "n_dim", "tv_seed", "run_seed", "lr", "noise", "batch", "n_steps",
                    "record_every"},
              "$.base", e);
  ResponseBase rb;
  json base;
  base["n_task"] = get_int(bin, "n_task", static_cast<long>(rb.n_task), e, "$.base", 1);
  base["alpha"] = get_num(bin, "alpha", rb.alpha, e, "$.base", 0.0, 100.0);
  base["n_dim"] = get_int(bin, "n_dim", static_cast<long>(rb.n_dim), e, "$.base", 1);
  base["tv_seed"] = get_int(bin, "tv_seed", static_cast<long>(rb.tv_seed), e, "$.base", 0);
  base["run_seed"] = get_int(bin, "run_seed", static_cast<long>(rb.run_seed), e, "$.base", 0);
  base["lr"] = get_num(bin, "lr", rb.opt.lr, e, "$.base", 0.0, 1e6);
  base["noise"] = get_num(bin, "noise", rb.noise, e, "$.base", 0.0, 1e6);
  base["batch"] = get_int(bin, "batch", rb.batch, e, "$.base", 0);
  base["n_steps"] = get_int(bin, "n_steps", rb.n_steps, e, "$.base", 1);
  base["record_every"] = get_int(bin, "record_every", rb.record_every, e, "$.base", 1);
  out["base"] = base;
  return out;
}

inline ResponseBase response_base_of(const json& b) {
  ResponseBase rb;
  rb.n_task = b["n_task"].get<size_t>();
  rb.alpha = b["alpha"].get<double>();
  rb.n_dim = b["n_dim"].get<size_t>();
  rb.tv_seed = b["tv_seed"].get<uint64_t>();
  rb.run_seed = b["run_seed"].get<uint64_t>();
  rb.opt.lr = b["lr"].get<double>();
  rb.noise = b["noise"].get<double>();
  rb.batch = b["batch"].get<int>();
  rb.n_steps = b["n_steps"].get<long>();
  rb.record_every = b["record_every"].get<long>();
  return rb;
}

inline void run_n0_response_cfg(const json& c, RunDir& rd) {
  ResponseBase base = response_base_of(c["base"]);
  Csv csv("axis,value,N0");
  auto emit = [&](ResponseAxis axis, const char* name, const std::vector<double>& grid) {
    auto res = n0_response_curve(axis, grid, base);
    for (auto& [value, n0] : res) csv.row(name, value, n0);
  };
  emit(ResponseAxis::lr, "lr", c["lr_grid"].get<std::vector<double>>());
  emit(ResponseAxis::noise, "noise", c["noise_grid"].get<std::vector<double>>());
  std::vector<double> bg;
  for (auto& b : c["batch_grid"]) bg.push_back(b.get<double>());
  emit(ResponseAxis::batch, "batch", bg);
  rd.write_text("response.csv", csv.body);
}

// dim_sweep: loss vs n_dim plus exponent fit
inline json validate_dim_sweep(const json& in, Errs& e) {
  expect_keys(in, {"experiment", "dims", "n_task", "alpha", "optimizer", "n_steps", "record_every", "seed",
                   "tail_frac", "loss", "window"},
              "$", e);
  json out;
  out["experiment"] = in["experiment"];
  json dims = json::array();
  for (long d : get_int_list(in, "dims", {16, 32, 64, 128, 250}, e, "$")) dims.push_back(d);
  out["dims"] = dims;
  out["n_task"] = get_int(in, "n_task", 1000, e, "$", 1);
  out["alpha"] = get_num(in, "alpha", 1.0, e, "$", 0.0, 100.0);
  OptimizerSpec sdef;
  sdef.algo = Algo::signgd;
  sdef.lr = 1e-2;
  out["optimizer"] = norm_optimizer(in.contains("optimizer") ? in["optimizer"] : json::object(), e, "$.optimizer", sdef);
  out["n_steps"] = get_int(in, "n_steps", 100000, e, "$", 1);
  out["record_every"] = get_int(in, "record_every", 100, e, "$", 1);
  out["seed"] = get_int(in, "seed", 11, e, "$", 0);
  out["tail_frac"] = get_num(in, "tail_frac", 0.25, e, "$", 0.0, 1.0);
  out["loss"] = get_enum(in, "loss", "mse", {"mse", "xent"}, e, "$");
  auto w = get_num_list(in, "window", {0.0, 0.0}, e, "$");  // 0,0 = full range
  if (w.size() != 2) e.add("$.window", "expected [lo, hi]");
  out["window"] = json(w);
  return out;
}

inline void run_dim_sweep_cfg(const json& c, RunDir& rd) {
  DimSweepConfig cfg;
  cfg.dims.clear();
  for (auto& d : c["dims"]) cfg.dims.push_back(d.get<size_t>());
  cfg.n_task = c["n_task"].get<size_t>();
  cfg.alpha = c["alpha"].get<double>();
  cfg.opt = optimizer_of(c["optimizer"]);
  cfg.n_steps = c["n_steps"].get<long>();
  cfg.record_every = c["record_every"].get<long>();
  cfg.loss_kind = loss_kind_of(c["loss"].get<std::string>());
  cfg.seed = c["seed"].get<uint64_t>();
  cfg.tail_frac = c["tail_frac"].get<double>();
  std::vector<DimSweepPoint> pts = loss_vs_dim_sweep(cfg);
  Csv csv("n_dim,loss,steps_run");
  std::vector<double> xs, ys;
  for (auto& p : pts) {
    csv.row(static_cast<long>(p.n_dim), p.final_loss, p.steps_run);
    xs.push_back(static_cast<double>(p.n_dim));
    ys.push_back(p.final_loss);
  }
  rd.write_text("sweep.csv", csv.body);
  auto w = c["window"].get<std::vector<double>>();
  double lo = w[0] > 0 ? w[0] : xs.front(), hi = w[1] > 0 ? w[1] : xs.back();
  ExponentReport rep = exponent_report(xs, ys, ScalingAxis::dims, lo, hi, cfg.alpha);
  json fj;
  fj["axis"] = "dims";
  fj["exponent"] = rep.fit.exponent;
  fj["prefactor"] = rep.fit.prefactor;
  fj["residual"] = rep.fit.residual;
  fj["jackknife_std"] = rep.fit.jackknife_std;
  fj["window"] = json::array({rep.fit.window_lo, rep.fit.window_hi});
  fj["data_alpha"] = cfg.alpha;
  fj["reference_alpha_N"] = rep.reference.quanta_alpha_n;
  fj["reference_alpha_S_quanta"] = rep.reference.quanta_alpha_s;
  fj["reference_alpha_S_domino"] = rep.reference.domino_alpha_s;
  fj["reference_degenerate"] = rep.reference.degenerate;
  rd.write_json("fit.json", fj);
}

// parity_scaling: the desk-scale Fig. 8 sweep
inline json validate_parity_scaling(const json& in, Errs& e) {
  expect_keys(in, {"experiment", "betas", "widths", "alphas", "seeds", "n_tasks", "n", "k", "batch", "n_steps",
                   "eval_every", "lr", "task_seed"},
              "$", e);
  json out;
  out["experiment"] = in["experiment"];
  json betas = json::array();
  if (in.contains("betas")) {
    if (!in["betas"].is_array()) e.add("$.betas", "expected an array of [beta1, beta2] pairs");
    else
      for (auto& b : in["betas"]) {
        if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
          e.add("$.betas", "expected [beta1, beta2] pairs");
          break;
        }
        betas.push_back(b);
      }
  }
  if (betas.empty()) betas = json::array({{0.9, 0.999}, {0.9, 0.9}});
  out["betas"] = betas;
  json widths = json::array();
  for (long w : get_int_list(in, "widths", {16, 32, 64, 128}, e, "$")) widths.push_back(w);
  out["widths"] = widths;
  out["alphas"] = json(get_num_list(in, "alphas", {1.0}, e, "$"));
  json seeds = json::array();
  for (long s : get_int_list(in, "seeds", {0}, e, "$")) seeds.push_back(s);
  out["seeds"] = seeds;
  out["n_tasks"] = get_int(in, "n_tasks", 100, e, "$", 1);
  out["n"] = get_int(in, "n", 100, e, "$", 1);
  out["k"] = get_int(in, "k", 3, e, "$", 1);
  out["batch"] = get_int(in, "batch", 4096, e, "$", 1);
  out["n_steps"] = get_int(in, "n_steps", 4000, e, "$", 1);
  out["eval_every"] = get_int(in, "eval_every", 200, e, "$", 1);
  out["lr"] = get_num(in, "lr", 1e-3, e, "$", 0.0, 1e6);
  out["task_seed"] = get_int(in, "task_seed", 0, e, "$", 0);
  return out;
}

inline void run_parity_scaling_cfg(const json& c, RunDir& rd) {
  ParityScalingConfig cfg;
  cfg.betas.clear();
  for (auto& b : c["betas"]) cfg.betas.emplace_back(b[0].get<double>(), b[1].get<double>());
  cfg.widths.clear();
  for (auto& w : c["widths"]) cfg.widths.push_back(w.get<int>());
  cfg.alphas = c["alphas"].get<std::vector<double>>();
  cfg.seeds.clear();
  for (auto& s : c["seeds"]) cfg.seeds.push_back(s.get<uint64_t>());
  cfg.n_tasks = c["n_tasks"].get<int>();
  cfg.n = c["n"].get<int>();
  cfg.k = c["k"].get<int>();
  cfg.batch = c["batch"].get<int>();
  cfg.n_steps = c["n_steps"].get<long>();
  cfg.eval_every = c["eval_every"].get<long>();
  cfg.lr = c["lr"].get<double>();
  cfg.task_seed = c["task_seed"].get<uint64_t>();
  std::vector<ParityCell> cells = experiment_parity_scaling<float>(cfg);
  Csv steps_csv("beta1,beta2,alpha,width,seed,step,loss");
  Csv final_csv("beta1,beta2,alpha,width,seed,n_params,final_loss");
  for (auto& cell : cells) {
    for (size_t k = 0; k < cell.steps.size(); ++k)
      steps_csv.row(cell.beta1, cell.beta2, cell.alpha, cell.width, static_cast<long>(cell.seed), cell.steps[k],
                    cell.loss[k]);
    final_csv.row(cell.beta1, cell.beta2, cell.alpha, cell.width, static_cast<long>(cell.seed), cell.n_params,
                  cell.final_loss);
  }
  rd.write_text("loss_vs_step.csv", steps_csv.body);
  rd.write_text("final_vs_params.csv", final_csv.body);
  // per (beta, alpha): loss-vs-parameters power law across widths
  json fits = json::array();
  for (auto& bj : c["betas"])
    for (double alpha : cfg.alphas) {
      std::vector<double> xs, ys;
      for (auto& cell : cells)
        if (cell.beta1 == bj[0].get<double>() && cell.beta2 == bj[1].get<double>() && cell.alpha == alpha &&
            cell.final_loss > 0) {
          xs.push_back(static_cast<double>(cell.n_params));
          ys.push_back(cell.final_loss);
        }
      if (xs.size() >= 3) {
        PowerLawFit f = fit_powerlaw(xs, ys, xs.front(), xs.back());
        if (xs.size() >= 4) f.jackknife_std = jackknife(xs, ys, xs.front(), xs.back());
        json fj;
        fj["beta1"] = bj[0];
        fj["beta2"] = bj[1];
        fj["alpha"] = alpha;
        fj["alpha_N"] = f.exponent;
        fj["jackknife_std"] = f.jackknife_std;
        fj["n_points"] = f.n_points;
        fits.push_back(fj);
      }
    }
  json meta;
  meta["fits"] = fits;
  meta["deviation"] = "desk-scale run: n_tasks and batch reduced from the reference configuration "
                      "(500 tasks / batch 20000) to keep single-core runtime tractable";
  rd.write_json("fits.json", meta);
}

// compositional parity (with optional resource-model companion)
inline json validate_compositional(const json& in, Errs& e) {
  expect_keys(in, {"experiment", "seeds", "variants", "n_samples", "n_eval", "width", "lr", "n_steps",
                   "eval_every", "acc_threshold", "resource_companion"},
              "$", e);
  json out;
  out["experiment"] = in["experiment"];
  json seeds = json::array();
  for (long s : get_int_list(in, "seeds", {0, 1, 2, 3, 4}, e, "$")) seeds.push_back(s);
  out["seeds"] = seeds;
  json vars = json::array();
  if (in.contains("variants")) {
    if (!in["variants"].is_array()) e.add("$.variants", "expected an array");
    else
      for (auto& v : in["variants"]) {
        std::string s = v.is_string() ? v.get<std::string>() : "";
        if (s != "dependent" && s != "ablation") e.add("$.variants", "entries must be dependent | ablation");
        vars.push_back(s);
      }
  }
  if (vars.empty()) vars = json::array({"dependent", "ablation"});
  out["variants"] = vars;
  out["n_samples"] = get_int(in, "n_samples", 10000, e, "$", 1);
  out["n_eval"] = get_int(in, "n_eval", 2048, e, "$", 1);
  out["width"] = get_int(in, "width", 50, e, "$", 1);
  out["lr"] = get_num(in, "lr", 1e-3, e, "$", 0.0, 1e6);
  out["n_steps"] = get_int(in, "n_steps", 15000, e, "$", 1);
  out["eval_every"] = get_int(in, "eval_every", 50, e, "$", 1);
  out["acc_threshold"] = get_num(in, "acc_threshold", 0.99, e, "$", 0.0, 1.0);
  out["resource_companion"] = get_bool(in, "resource_companion", false, e, "$");
  return out;
}

inline void run_compositional_cfg(const json& c, RunDir& rd, unsigned jobs) {
  struct Cell {
    std::string variant;
    uint64_t seed;
    RunResult res;
    std::string error;
  };
  std::vector<Cell> cells;
  for (auto& vj : c["variants"])
    for (auto& sj : c["seeds"]) cells.push_back({vj.get<std::string>(), sj.get<uint64_t>(), {}, ""});
  parallel_cells(cells.size(), jobs, [&](size_t k) {
    CompositionalConfig cc;
    cc.ablation = cells[k].variant == "ablation";
    cc.n_samples = c["n_samples"].get<int>();
    cc.n_eval = c["n_eval"].get<int>();
    cc.width = c["width"].get<int>();
    cc.lr = c["lr"].get<double>();
    cc.n_steps = c["n_steps"].get<long>();
    cc.eval_every = c["eval_every"].get<long>();
    cc.acc_threshold = c["acc_threshold"].get<double>();
    cc.seed = cells[k].seed;
    try {
      cells[k].res = experiment_compositional_parity<float>(cc);
    } catch (const std::exception& ex) {
      cells[k].error = ex.what();
    }
  });
  Csv acc("variant,seed,step,task,accuracy");
  json succ;
  for (auto& cell : cells) {
    if (!cell.error.empty()) {
      rd.failed_cells.push_back(cell.variant + "/seed" + std::to_string(cell.seed) + ": " + cell.error);
      continue;
    }
    for (size_t r = 0; r < cell.res.eval_steps.size(); ++r)
      for (int t = 0; t < 3; ++t)
        acc.row(cell.variant, static_cast<long>(cell.seed), cell.res.eval_steps[r], t + 1,
                cell.res.task_metric[r][t]);
    succ[cell.variant]["seed" + std::to_string(cell.seed)] = cell.res.success_time;
  }
  for (auto& vj : c["variants"]) {
    std::string v = vj.get<std::string>();
    for (int t = 0; t < 3; ++t) {
      std::vector<double> times;
      for (auto& cell : cells)
        if (cell.variant == v && cell.error.empty() && cell.res.success_time[t] >= 0)
          times.push_back(static_cast<double>(cell.res.success_time[t]));
      succ[v]["median_t" + std::to_string(t + 1)] = times.empty() ? -1.0 : median(times);
    }
  }
  rd.write_text("accuracy.csv", acc.body);
  rd.write_json("success.json", succ);
  if (c["resource_companion"].get<bool>()) {
    // three-resource AND-gate picture of the same dependency structure
    ResourceSystem sys;
    sys.dist = make_explicit({0.4, 0.35, 0.25});
    sys.N0 = 0.1;
    sys.eta_eff = 1.0;
    sys.gates.resize(3);
    sys.gates[2].kind = Gate::and_gate;
    sys.gates[2].parents = {0, 1};
    sys.gates[2].gamma = 20.0;
    validate_gates(sys.gates, sys.n_task());
    Trajectory tr = integrate(sys, 60.0, 0.0, 601);
    write_resource_csv(rd, "resource_companion.csv", sys, tr);
  }
}

// grokking
inline json validate_grokking(const json& in, Errs& e) {
  expect_keys(in, {"experiment", "algos", "weight_decay", "seeds", "p", "embed_dim", "hidden", "emb_std", "lr",
                   "n_steps", "eval_every"},
              "$", e);
  json out;
  out["experiment"] = in["experiment"];
  json algos = json::array();
  if (in.contains("algos")) {
    if (!in["algos"].is_array()) e.add("$.algos", "expected an array of algorithm names");
    else
      for (auto& a : in["algos"]) {
        std::string s = a.is_string() ? a.get<std::string>() : "";
        if (!algo_names().count(s)) e.add("$.algos", "unknown algorithm '" + s + "'");
        algos.push_back(s);
      }
  }
  if (algos.empty()) algos = json::array({"signgd", "adam"});
  out["algos"] = algos;
  out["weight_decay"] = get_num(in, "weight_decay", 0.0, e, "$", 0.0, 1e6);
  json seeds = json::array();
  for (long s : get_int_list(in, "seeds", {0}, e, "$")) seeds.push_back(s);
  out["seeds"] = seeds;
  out["p"] = get_int(in, "p", 59, e, "$", 2, 10000);
  out["embed_dim"] = get_int(in, "embed_dim", 32, e, "$", 1);
  json hidden = json::array();
  for (long h : get_int_list(in, "hidden", {100, 100, 100}, e, "$")) hidden.push_back(h);
  out["hidden"] = hidden;
  out["emb_std"] = get_num(in, "emb_std", 0.35, e, "$", 0.0, 1e6);
  out["lr"] = get_num(in, "lr", 1e-3, e, "$", 0.0, 1e6);
  out["n_steps"] = get_int(in, "n_steps", 10000, e, "$", 1);
  out["eval_every"] = get_int(in, "eval_every", 250, e, "$", 1);
  return out;
}

inline void run_grokking_cfg(const json& c, RunDir& rd, unsigned jobs) {
  struct Cell {
    std::string algo;
    uint64_t seed;
    RunResult res;
    std::string error;
  };
  std::vector<Cell> cells;
  for (auto& aj : c["algos"])
    for (auto& sj : c["seeds"]) cells.push_back({aj.get<std::string>(), sj.get<uint64_t>(), {}, ""});
  parallel_cells(cells.size(), jobs, [&](size_t k) {
    GrokkingConfig gc;
    gc.p = c["p"].get<int>();
    gc.embed_dim = c["embed_dim"].get<int>();
    gc.hidden.clear();
    for (auto& h : c["hidden"]) gc.hidden.push_back(h.get<int>());
    gc.emb_std = c["emb_std"].get<double>();
    gc.algo = algo_of(cells[k].algo);
    gc.lr = c["lr"].get<double>();
    gc.weight_decay = c["weight_decay"].get<double>();
    gc.n_steps = c["n_steps"].get<long>();
    gc.eval_every = c["eval_every"].get<long>();
    gc.seed = cells[k].seed;
    try {
      cells[k].res = experiment_grokking<float>(gc);
    } catch (const std::exception& ex) {
      cells[k].error = ex.what();
    }
  });
  Csv acc("algo,seed,step,train_acc,test_acc");
  json fin;
  for (auto& cell : cells) {
    if (!cell.error.empty()) {
      rd.failed_cells.push_back(cell.algo + "/seed" + std::to_string(cell.seed) + ": " + cell.error);
      continue;
    }
    for (size_t r = 0; r < cell.res.eval_steps.size(); ++r)
      acc.row(cell.algo, static_cast<long>(cell.seed), cell.res.eval_steps[r], cell.res.train_acc[r],
              cell.res.test_acc[r]);
    json f;
    f["train_acc"] = cell.res.train_acc.back();
    f["test_acc"] = cell.res.test_acc.back();
    fin[cell.algo]["seed" + std::to_string(cell.seed)] = f;
  }
  rd.write_text("accuracy.csv", acc.body);
  rd.write_json("final.json", fin);
}

// modularity
inline json validate_modularity(const json& in, Errs& e) {
  expect_keys(in, {"experiment", "n_seeds", "seed0", "arms", "n_samples", "sparse_prob", "lr", "max_steps",
                   "mse_threshold"},
              "$", e);
  json out;
  out["experiment"] = in["experiment"];
  out["n_seeds"] = get_int(in, "n_seeds", 30, e, "$", 1, 100000);
  out["seed0"] = get_int(in, "seed0", 0, e, "$", 0);
  json arms = json::array();
  if (in.contains("arms")) {
    if (!in["arms"].is_array()) e.add("$.arms", "expected an array");
    else
      for (auto& a : in["arms"]) {
        std::string s = a.is_string() ? a.get<std::string>() : "";
        if (s != "nonmodular" && s != "modular") e.add("$.arms", "entries must be nonmodular | modular");
        arms.push_back(s);
      }
  }
  if (arms.empty()) arms = json::array({"nonmodular", "modular"});
  out["arms"] = arms;
  out["n_samples"] = get_int(in, "n_samples", 1000, e, "$", 1);
  out["sparse_prob"] = get_num(in, "sparse_prob", 0.99, e, "$", 0.0, 1.0);
  out["lr"] = get_num(in, "lr", 5e-4, e, "$", 0.0, 1e6);
  out["max_steps"] = get_int(in, "max_steps", 40000, e, "$", 1);
  out["mse_threshold"] = get_num(in, "mse_threshold", 1e-3, e, "$", 0.0, 1e6);
  return out;
}

inline void run_modularity_cfg(const json& c, RunDir& rd, unsigned jobs) {
  long n_seeds = c["n_seeds"].get<long>();
  uint64_t seed0 = c["seed0"].get<uint64_t>();
  std::vector<std::string> arms;
  for (auto& a : c["arms"]) arms.push_back(a.get<std::string>());
  struct Cell {
    std::string arm;
    uint64_t seed;
    ModularityOutcome out;
    std::string error;
  };
  std::vector<Cell> cells;
  for (auto& arm : arms)
    for (long s = 0; s < n_seeds; ++s) cells.push_back({arm, seed0 + static_cast<uint64_t>(s), {}, ""});
  parallel_cells(cells.size(), jobs, [&](size_t k) {
    ModularityConfig mc;
    mc.n_samples = c["n_samples"].get<int>();
    mc.sparse_prob = c["sparse_prob"].get<double>();
    mc.lr = c["lr"].get<double>();
    mc.max_steps = c["max_steps"].get<long>();
    mc.mse_threshold = c["mse_threshold"].get<double>();
    mc.seed = cells[k].seed;
    try {
      cells[k].out = experiment_modularity<float>(cells[k].arm == "modular", mc);
    } catch (const std::exception& ex) {
      cells[k].error = ex.what();
    }
  });
  Csv sc("arm,seed,t1,t2,ratio");
  json med;
  for (auto& arm : arms) {
    std::vector<double> ratios;
    for (auto& cell : cells) {
      if (cell.arm != arm) continue;
      if (!cell.error.empty()) {
        rd.failed_cells.push_back(cell.arm + "/seed" + std::to_string(cell.seed) + ": " + cell.error);
        continue;
      }
      double ratio = (cell.out.t1 > 0 && cell.out.t2 > 0)
                         ? static_cast<double>(cell.out.t2) / static_cast<double>(cell.out.t1)
                         : std::numeric_limits<double>::quiet_NaN();
      sc.row(cell.arm, static_cast<long>(cell.seed), cell.out.t1, cell.out.t2, ratio);
      if (std::isfinite(ratio)) ratios.push_back(ratio);
    }
    med[arm + "_median_ratio"] = ratios.empty() ? -1.0 : median(ratios);
    med[arm + "_n"] = ratios.size();
  }
  rd.write_text("scatter.csv", sc.body);
  rd.write_json("medians.json", med);
}

// gates: AND chain + OR tree showcase
inline json validate_gates_exp(const json& in, Errs& e) {
  expect_keys(in, {"experiment", "gamma", "N0", "eta_eff", "t_end", "threshold"}, "$", e);
  json out;
  out["experiment"] = in["experiment"];
  out["gamma"] = get_num(in, "gamma", 20.0, e, "$", 1e-12, 1e6);
  out["N0"] = get_num(in, "N0", 0.1, e, "$", 0.0, 1e12);
  out["eta_eff"] = get_num(in, "eta_eff", 1.0, e, "$", 1e-12, 1e12);
  out["t_end"] = get_num(in, "t_end", 60.0, e, "$", 1e-12, 1e12);
  out["threshold"] = get_num(in, "threshold", 0.01, e, "$", 0.0, 1.0);
  return out;
}

inline void run_gates_cfg(const json& c, RunDir& rd) {
  double gamma = c["gamma"].get<double>(), N0 = c["N0"].get<double>(), eta = c["eta_eff"].get<double>();
  double t_end = c["t_end"].get<double>(), thr = c["threshold"].get<double>();
  json order;
  {
    // chain root is the rarest task; storage order is frequency-sorted, so the
    // chain runs in reverse index order: root=2, middle=1, head=0
    ResourceSystem sys;
    sys.dist = make_explicit({0.47, 0.33, 0.2});
    sys.N0 = N0;
    sys.eta_eff = eta;
    sys.gates.resize(3);
    sys.gates[1] = Gate{Gate::and_gate, {2}, gamma};
    sys.gates[0] = Gate{Gate::and_gate, {1}, gamma};
    validate_gates(sys.gates, sys.n_task());
    Trajectory tr = integrate(sys, t_end, 0.0, 1201);
    write_resource_csv(rd, "and_chain.csv", sys, tr);
    std::vector<double> ct = completion_times(tr, thr);
    order["and_chain_completion"] = ct;
    order["and_chain_order"] = {{"task1", ct[2]}, {"task2", ct[1]}, {"task3", ct[0]}};
  }
  {
    // 7-task OR hierarchy, frequency-sorted storage; displayed task numbers
    // follow the dependency drawing (task 7 = root of the tree = index 0)
    ResourceSystem sys;
    sys.dist = make_explicit({0.3, 0.25, 0.2, 0.2, 0.02, 0.015, 0.015});
    sys.N0 = N0;
    sys.eta_eff = eta;
    sys.gates.resize(7);
    sys.gates[3] = Gate{Gate::or_gate, {1, 2}, gamma};
    sys.gates[6] = Gate{Gate::or_gate, {4, 5}, gamma};
    sys.gates[0] = Gate{Gate::or_gate, {3, 6}, gamma};
    validate_gates(sys.gates, sys.n_task());
    Trajectory tr = integrate(sys, t_end * 4, 0.0, 1201);
    write_resource_csv(rd, "or_tree.csv", sys, tr);
    std::vector<double> ct = completion_times(tr, thr);
    order["or_tree_completion"] = ct;
    order["or_tree_labels"] = {{"task7", ct[0]}, {"task5", ct[3]}, {"task6", ct[6]},
                               {"task1", ct[1]}, {"task2", ct[2]}, {"task3", ct[4]}, {"task4", ct[5]}};
  }
  rd.write_json("completion.json", order);
}

// nalign: geometry run with alignment recording
inline json validate_nalign(const json& in, Errs& e) { return validate_geometry(in, e); }

inline void run_nalign_cfg(const json& c, RunDir& rd) { run_geometry_cfg(c, rd); }

// modular_geometry: speedup algebra + correlated-vs-independent resource runs
inline json validate_modular_geometry(const json& in, Errs& e) {
  expect_keys(in, {"experiment", "speedup_n_tasks", "n_dim", "n_task", "alpha", "corr_seed", "N0", "eta_eff",
                   "t_end", "threshold"},
              "$", e);
  json out;
  out["experiment"] = in["experiment"];
  json sn = json::array();
  for (long n : get_int_list(in, "speedup_n_tasks", {4, 16, 64, 256}, e, "$")) sn.push_back(n);
  out["speedup_n_tasks"] = sn;
  out["n_dim"] = get_int(in, "n_dim", 32, e, "$", 1);
  out["n_task"] = get_int(in, "n_task", 8, e, "$", 1);
  out["alpha"] = get_num(in, "alpha", 1.0, e, "$", 0.0, 100.0);
  out["corr_seed"] = get_int(in, "corr_seed", 3, e, "$", 0);
  out["N0"] = get_num(in, "N0", 1.0, e, "$", 0.0, 1e12);
  out["eta_eff"] = get_num(in, "eta_eff", 1.0, e, "$", 1e-12, 1e12);
  out["t_end"] = get_num(in, "t_end", 80.0, e, "$", 1e-12, 1e12);
  out["threshold"] = get_num(in, "threshold", 0.01, e, "$", 0.0, 1.0);
  return out;
}

inline void run_modular_geometry_cfg(const json& c, RunDir& rd) {
  Csv sp("n_task,t_nonmodular,t_modular,ratio");
  for (auto& nj : c["speedup_n_tasks"]) {
    ModularSpeedup ms = modular_speedup(nj.get<int>(), c["n_dim"].get<int>());
    sp.row(nj.get<long>(), ms.t_nonmodular, ms.t_modular, ms.ratio);
  }
  rd.write_text("speedup.csv", sp.body);
  TaskDistribution dist = make_powerlaw(c["n_task"].get<int>(), c["alpha"].get<double>());
  json times;
  for (bool correlated : {false, true}) {
    ResourceSystem sys;
    sys.dist = dist;
    sys.N0 = c["N0"].get<double>();
    sys.eta_eff = c["eta_eff"].get<double>();
    if (correlated) {
      TaskVectorSet tv = make_task_vectors(dist.n_task(), c["n_dim"].get<int>(), TvMode::random,
                                           c["corr_seed"].get<uint64_t>());
      sys.corr = correlation_matrix(tv);
      sys.variant = ResourceVariant::correlated_mse;
    }
    Trajectory tr = integrate(sys, c["t_end"].get<double>(), 0.0, 1001);
    write_resource_csv(rd, correlated ? "resource_correlated.csv" : "resource_independent.csv", sys, tr);
    times[correlated ? "correlated_completion" : "independent_completion"] =
        completion_times(tr, c["threshold"].get<double>());
  }
  rd.write_json("completion.json", times);
}

// collapse: u^{1/p} curves for geometry and resource
inline json validate_collapse(const json& in, Errs& e) {
  expect_keys(in, {"experiment", "n_task", "alpha", "n_dim", "tv_seed", "run_seed", "optimizer", "n_steps",
                   "record_every", "N0", "t_end"},
              "$", e);
  json out;
  out["experiment"] = in["experiment"];
  out["n_task"] = get_int(in, "n_task", 5, e, "$", 1);
  out["alpha"] = get_num(in, "alpha", 2.0, e, "$", 0.0, 100.0);
  out["n_dim"] = get_int(in, "n_dim", 1000, e, "$", 1);
  out["tv_seed"] = get_int(in, "tv_seed", 2, e, "$", 0);
  out["run_seed"] = get_int(in, "run_seed", 2, e, "$", 0);
  OptimizerSpec sdef;
  sdef.algo = Algo::signgd;
  sdef.lr = 3e-4;
  out["optimizer"] = norm_optimizer(in.contains("optimizer") ? in["optimizer"] : json::object(), e, "$.optimizer", sdef);
  out["n_steps"] = get_int(in, "n_steps", 20000, e, "$", 1);
  out["record_every"] = get_int(in, "record_every", 20, e, "$", 1);
  out["N0"] = get_num(in, "N0", 1.0, e, "$", 0.0, 1e12);
  out["t_end"] = get_num(in, "t_end", 0.0, e, "$", 0.0, 1e12);  // 0 = auto from eta_eff
  return out;
}

inline void run_collapse_cfg(const json& c, RunDir& rd) {
  TaskDistribution dist = make_powerlaw(c["n_task"].get<int>(), c["alpha"].get<double>());
  size_t n = dist.n_task();
  double psum = dist.sum();
  OptimizerSpec opt = optimizer_of(c["optimizer"]);
  TaskVectorSet tv = make_task_vectors(static_cast<int>(n), c["n_dim"].get<int>(), TvMode::orthogonalized,
                                       c["tv_seed"].get<uint64_t>());
  GeometrySystem sys = GeometrySystem::create(std::move(tv), dist, LossKind::mse);
  Trajectory gr = run_geometry(sys, opt, c["n_steps"].get<long>(), c["record_every"].get<long>(), false,
                               c["run_seed"].get<uint64_t>());
  Csv csv("model,task,x,u_pow_invp");
  for (size_t r = 0; r < gr.n_rec(); ++r)
    for (size_t i = 0; i < n; ++i) {
      double u = std::max(0.0, 1.0 - gr.skill(r, i));
      csv.row("geometry", static_cast<long>(i + 1), static_cast<double>(gr.steps[r]),
              std::pow(u, psum / dist.p[i]));
    }
  ResourceSystem rs = ResourceSystem::from_geometry(dist, c["n_dim"].get<int>(), opt.lr);
  rs.N0 = c["N0"].get<double>();
  double t_end = c["t_end"].get<double>();
  if (t_end <= 0) t_end = (static_cast<double>(n) + rs.N0 * 10.0) / rs.eta_eff * 3.0;
  Trajectory rr = integrate(rs, t_end, 0.0, 501);
  for (size_t r = 0; r < rr.n_rec(); ++r)
    for (size_t i = 0; i < n; ++i)
      csv.row("resource", static_cast<long>(i + 1), rr.times[r],
              std::pow(std::max(0.0, rr.skill(r, i)), psum / dist.p[i]));
  rd.write_text("collapse.csv", csv.body);
}

// ---------------------------------------------------------------------------
// registry and entry points

struct Experiment {
  Validator validate;
  std::function<void(const json&, RunDir&, unsigned jobs)> run;
};

inline const std::map<std::string, Experiment>& experiments() {
  static const std::map<std::string, Experiment> reg = [] {
    std::map<std::string, Experiment> m;
    auto plain = [](void (*fn)(const json&, RunDir&)) {
      return [fn](const json& c, RunDir& rd, unsigned) { fn(c, rd); };
    };
    m["geometry"] = {validate_geometry, plain(&run_geometry_cfg)};
    m["resource"] = {validate_resource, plain(&run_resource_cfg)};
    m["domino"] = {validate_domino, plain(&run_domino_cfg)};
    m["quadratic"] = {validate_quadratic, plain(&run_quadratic_cfg)};
    m["domino_ratio"] = {validate_domino_ratio, plain(&run_domino_ratio_cfg)};
    m["nalign"] = {validate_nalign, plain(&run_nalign_cfg)};
    m["resource_fit"] = {validate_resource_fit, plain(&run_resource_fit_cfg)};
    m["n0_response"] = {validate_n0_response, plain(&run_n0_response_cfg)};
    m["dim_sweep"] = {validate_dim_sweep, plain(&run_dim_sweep_cfg)};
    m["parity_scaling"] = {validate_parity_scaling, plain(&run_parity_scaling_cfg)};
    m["compositional"] = {validate_compositional, run_compositional_cfg};
    m["grokking"] = {validate_grokking, run_grokking_cfg};
    m["modularity"] = {validate_modularity, run_modularity_cfg};
    m["gates"] = {validate_gates_exp, plain(&run_gates_cfg)};
    m["modular_geometry"] = {validate_modular_geometry, plain(&run_modular_geometry_cfg)};
    m["collapse"] = {validate_collapse, plain(&run_collapse_cfg)};
    return m;
  }();
  return reg;
}

inline const std::map<std::string, json>& presets() {
  static const std::map<std::string, json> reg = [] {
    std::map<std::string, json> m;
    m["fig2_domino_ratio"] = {{"experiment", "domino_ratio"}};
    m["fig3_sequential"] = {{"experiment", "geometry"},
                            {"model",
                             {{"dist", {{"kind", "powerlaw"}, {"alpha", 4.0}, {"n_task", 5}}},
                              {"n_dim", 1000},
                              {"tv_seed", 3},
                              {"batch", 0}}},
                            {"optimizer", {{"algo", "signgd"}, {"lr", 3e-4}}},
                            {"n_steps", 30000},
                            {"record_every", 20}};
    m["fig4_nalign"] = {{"experiment", "nalign"},
                        {"model",
                         {{"dist", {{"kind", "powerlaw"}, {"alpha", 2.0}, {"n_task", 3}}},
                          {"n_dim", 100},
                          {"tv_seed", 4},
                          {"batch", 32}}},
                        {"optimizer", {{"algo", "signgd"}, {"lr", 1e-3}}},
                        {"n_steps", 4000},
                        {"record_every", 5},
                        {"record_align", true}};
    m["fig5_resource_n0"] = {{"experiment", "resource_fit"}};
    m["fig6_calibration"] = {{"experiment", "n0_response"}};
    m["fig7_scaling"] = {{"experiment", "dim_sweep"}};
    m["fig8_parity_scaling"] = {{"experiment", "parity_scaling"}};
    m["fig9_quadratic"] = {{"experiment", "quadratic"},
                           {"rotation", "hadamard4"},
                           {"theta0", {2.0, 0.0, 0.0, 0.0}},  // x = R theta0 = all ones
                           {"optimizer", {{"algo", "signgd"}, {"lr", 1e-3}}},
                           {"n_steps", 5000},
                           {"record_every", 10}};
    m["fig10_ademamix_lion"] = {{"experiment", "domino_ratio"},
                                {"p1_list", {0.9}},
                                {"algos",
                                 {{{"algo", "signgd"}, {"lr", 3e-4}, {"n_steps", 8000}},
                                  {{"algo", "adam"}, {"lr", 1e-3}, {"n_steps", 6000}},
                                  {{"algo", "ademamix"}, {"lr", 1e-3}, {"n_steps", 6000}},
                                  {{"algo", "lion"}, {"lr", 3e-4}, {"n_steps", 8000}}}}};
    m["fig13_compositional"] = {{"experiment", "compositional"}, {"resource_companion", true}};
    m["fig14_gates"] = {{"experiment", "gates"}};
    m["fig15_modular_geometry"] = {{"experiment", "modular_geometry"}};
    m["fig16_modularity_mlp"] = {{"experiment", "modularity"}};
    m["fig17_collapse"] = {{"experiment", "collapse"}};
    return m;
  }();
  return reg;
}

struct ValidationResult {
  bool ok = false;
  json normalized;
  std::vector<std::string> errors;
};

inline ValidationResult validate_config_json(json j) {
  ValidationResult r;
  if (!j.is_object()) {
    r.errors.push_back("$: config must be a JSON object");
    return r;
  }
  if (!j.contains("experiment")) j["experiment"] = "geometry";  // default experiment, echoed below
  if (!j["experiment"].is_string()) {
    r.errors.push_back("$.experiment: expected a string");
    return r;
  }
  std::string exp = j["experiment"].get<std::string>();
  auto it = experiments().find(exp);
  if (it == experiments().end()) {
    std::string names;
    for (auto& [k, _] : experiments()) names += (names.empty() ? "" : ", ") + k;
    r.errors.push_back("$.experiment: unknown experiment '" + exp + "' (valid: " + names + ")");
    return r;
  }
  Errs e;
  r.normalized = it->second.validate(j, e);
  r.errors = e.v;
  r.ok = e.ok();
  return r;
}

// --override key paths use dots: optimizer.lr=0.001, model.dist.alpha=3
inline bool apply_override(json& cfg, const std::string& kv, std::string& err) {
  auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) {
    err = "override must look like key=value: " + kv;
    return false;
  }
  std::string key = kv.substr(0, eq), raw = kv.substr(eq + 1);
  json val;
  try {
    val = json::parse(raw);
  } catch (...) {
    val = raw;  // bare strings allowed
  }
  json* node = &cfg;
  size_t pos = 0;
  while (true) {
    size_t dot = key.find('.', pos);
    std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (part.empty()) {
      err = "bad override key: " + key;
      return false;
    }
    if (dot == std::string::npos) {
      (*node)[part] = val;
      return true;
    }
    node = &(*node)[part];
    pos = dot + 1;
  }
}

inline int run_validated(const json& norm, const fs::path& outdir, unsigned jobs) {
  RunDir rd(outdir);
  rd.write_json("config.json", norm);
  const Experiment& exp = experiments().at(norm["experiment"].get<std::string>());
  size_t n_before = rd.failed_cells.size();
  try {
    exp.run(norm, rd, jobs);
  } catch (const std::exception& ex) {
    rd.failed_cells.push_back(std::string("fatal: ") + ex.what());
    rd.write_manifest(norm);
    std::fprintf(stderr, "runtime fault: %s\n", ex.what());
    return 2;
  }
  rd.write_manifest(norm);
  size_t fails = rd.failed_cells.size() - n_before;
  if (fails > 0) {
    for (auto& f : rd.failed_cells) std::fprintf(stderr, "failed cell: %s\n", f.c_str());
    return 3;
  }
  return 0;
}

// plotdata: long-format (series, x, y) emission from run artifacts
inline std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("cannot open " + p.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline int emit_plotdata(const fs::path& rundir, const std::string& kind) {
  Csv out("series,x,y");
  if (kind == "trajectory") {
    fs::path src;
    for (auto& ent : fs::directory_iterator(rundir)) {
      std::string name = ent.path().filename().string();
      if (name.rfind("trajectory", 0) == 0 && ent.path().extension() == ".csv" &&
          (src.empty() || name < src.filename().string()))
        src = ent.path();
      if (name == "resource_trajectory.csv" || name == "domino.csv") src = ent.path();
    }
    if (src.empty()) {
      std::fprintf(stderr, "schema error: no trajectory csv in %s\n", rundir.string().c_str());
      return 1;
    }
    auto rows = read_csv(src);
    if (rows.size() < 2) {
      std::fprintf(stderr, "schema error: empty trajectory\n");
      return 1;
    }
    const auto& hdr = rows[0];
    std::vector<size_t> ycols;
    for (size_t c = 1; c < hdr.size(); ++c)
      if (hdr[c].rfind("s_", 0) == 0 || hdr[c].rfind("u_", 0) == 0 || hdr[c].rfind("comp_", 0) == 0)
        ycols.push_back(c);
    if (ycols.empty()) {
      std::fprintf(stderr, "schema error: no skill columns in %s\n", src.string().c_str());
      return 1;
    }
    for (size_t r = 1; r < rows.size(); ++r)
      for (size_t c : ycols) out.row(hdr[c], rows[r][0], rows[r][c]);
  } else if (kind == "sweep") {
    auto rows = read_csv(rundir / "sweep.csv");
    if (rows.size() < 2 || rows[0].size() < 2 || rows[0][0] != "n_dim" || rows[0][1] != "loss") {
      std::fprintf(stderr, "schema error: sweep.csv must have n_dim,loss columns\n");
      return 1;
    }
    for (size_t r = 1; r < rows.size(); ++r) out.row("loss", rows[r][0], rows[r][1]);
  } else if (kind == "fit") {
    std::ifstream f(rundir / "fit.json");
    if (!f) {
      std::fprintf(stderr, "schema error: fit.json missing in %s\n", rundir.string().c_str());
      return 1;
    }
    json fj = json::parse(f);
    for (const char* key : {"exponent", "prefactor", "window", "data_alpha"})
      if (!fj.contains(key)) {
        std::fprintf(stderr, "schema error: fit.json missing key %s\n", key);
        return 1;
      }
    double lo = fj["window"][0].get<double>(), hi = fj["window"][1].get<double>();
    double expn = fj["exponent"].get<double>(), pref = fj["prefactor"].get<double>();
    double alpha = fj["data_alpha"].get<double>();
    for (double x : {lo, hi}) {
      out.row("fit", x, pref * std::pow(x, -expn));
      out.row("reference_quanta", x, (alpha - 1.0) / alpha);
      out.row("reference_domino", x, alpha - 1.0);
    }
  } else {
    std::fprintf(stderr, "unknown plotdata kind '%s' (trajectory | sweep | fit)\n", kind.c_str());
    return 1;
  }
  fs::path dst = rundir / ("plotdata_" + kind + ".csv");
  fs::path tmp = dst.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    f << out.body;
  }
  fs::rename(tmp, dst);
  std::printf("%s\n", dst.string().c_str());
  return 0;
}

}  // namespace skillsim::cli
