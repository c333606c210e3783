#pragma once
// Experiment configuration: a single JSON document, validated in full before
// any computation. Unknown keys are errors.
#include "json.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "diagkernel/dynamics.hpp"

#define DIAGKERNEL_VERSION "0.1.0"

namespace diagkernel {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
  std::string path;
  ConfigError(const std::string& where, const std::string& msg)
      : std::runtime_error(where + ": " + msg), path(where) {}
};

enum class ExperimentKind { rate_sweep, single_run, onedim_verify, concentration_audit, eig_audit };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::rate_sweep: return "rate-sweep";
    case ExperimentKind::single_run: return "single-run";
    case ExperimentKind::onedim_verify: return "onedim-verify";
    case ExperimentKind::concentration_audit: return "concentration-audit";
    case ExperimentKind::eig_audit: return "eig-audit";
  }
  return "?";
}

struct GeometryConfig {
  int d = 1;
  int d0 = 1;
  std::int64_t max_freq = 0;   // d >= 2: full tensor grid up to this frequency
  std::int64_t head = 0;       // d = 1: leading ranks kept; 0 picks it from n
  std::int64_t head_cap = 2000;
};

struct TruthConfig {
  enum class Kind { gapped, cosine } kind = Kind::gapped;
  double p = 1.0, q = 4.0;
  std::int64_t jmax = 300;        // gapped entries stored explicitly
  std::int64_t max_axis_freq = 0; // cosine; 0 means geometry.max_freq
};

struct KernelConfig {
  double r = 1.0;
  bool low_dim = false;
};

enum class StopRule { theoretical, oracle, fixed_steps };

struct MethodConfig {
  Method method;
  std::optional<StopRule> stop;  // overrides stopping.kind for this method
};

struct StoppingConfig {
  StopRule kind = StopRule::theoretical;
  double c_t = 1.0;
  double c_b = 1.0;
  double c_fixed = 1.0;  // fixed kernel: c_fixed * n^{q gamma / (p + q)}
  double holdout = 0.2;
  std::size_t patience = 50;
  std::size_t max_steps = 200000;
};

struct ConcentrationConfig {
  std::int64_t J = 64;
  std::size_t reps = 200;
  std::vector<std::int64_t> S;  // flat ranks; empty selects the signal partition at the smallest n
};

struct EigAuditConfig {
  double s = 0.5;
  double C1 = 1.0;
};

struct OnedimConfig {
  std::size_t tuples = 500;
  std::vector<int> depths{0, 1, 2};
  double steps_per_bound = 2e4;
  double stiffness_cap = 0.1;
  double fit_horizon = 20.0;
  double conservation_dt = 1e-3;
  double conservation_T = 100.0;
};

struct OutputConfig {
  std::string dir = "out";
  bool trajectories = true;
  std::size_t snapshot_every = 100;
};

struct ExperimentConfig {
  std::string name;
  ExperimentKind kind = ExperimentKind::single_run;
  std::uint64_t seed = 1;
  GeometryConfig geometry;
  TruthConfig truth;
  KernelConfig kernel;
  std::vector<MethodConfig> methods;
  std::vector<std::int64_t> n_grid;
  std::size_t replications = 1;
  double sigma = 0.5;
  double eta = 0.05;
  bool closed_form_fixed = true;
  StoppingConfig stopping;
  ConcentrationConfig concentration;
  EigAuditConfig eig;
  OnedimConfig onedim;
  OutputConfig output;
  json source;  // normalized input, hashed into every output header
};

namespace cfg_detail {

inline void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where, "expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(where + "." + it.key(), "unknown key");
}

template <class T>
T get(const json& j, const std::string& where, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key, "wrong type");
  }
}

inline double positive(double v, const std::string& where) {
  if (!(v > 0) || !std::isfinite(v)) throw ConfigError(where, "must be a finite positive number");
  return v;
}

inline StopRule stop_rule(const std::string& s, const std::string& where) {
  if (s == "theoretical") return StopRule::theoretical;
  if (s == "oracle") return StopRule::oracle;
  if (s == "fixed_steps") return StopRule::fixed_steps;
  throw ConfigError(where, "unknown stopping rule '" + s + "'");
}

}  // namespace cfg_detail

inline ExperimentConfig parse_config(const json& j) {
  using namespace cfg_detail;
  ExperimentConfig c;
  only_keys(j, "config",
            {"name", "experiment", "seed", "geometry", "truth", "kernel", "methods", "n_grid", "replications", "sigma",
             "eta", "closed_form_fixed", "stopping", "concentration", "eig_audit", "onedim", "output"});
  c.source = j;
  c.name = get<std::string>(j, "config", "name", "experiment");
  const auto kind = get<std::string>(j, "config", "experiment", "");
  if (kind == "rate-sweep") c.kind = ExperimentKind::rate_sweep;
  else if (kind == "single-run") c.kind = ExperimentKind::single_run;
  else if (kind == "onedim-verify") c.kind = ExperimentKind::onedim_verify;
  else if (kind == "concentration-audit") c.kind = ExperimentKind::concentration_audit;
  else if (kind == "eig-audit") c.kind = ExperimentKind::eig_audit;
  else throw ConfigError("config.experiment", "expected one of rate-sweep, single-run, onedim-verify, "
                                              "concentration-audit, eig-audit");
  c.seed = get<std::uint64_t>(j, "config", "seed", 1);
  c.sigma = get<double>(j, "config", "sigma", c.sigma);
  if (!(c.sigma >= 0)) throw ConfigError("config.sigma", "must be >= 0");
  c.eta = positive(get<double>(j, "config", "eta", c.eta), "config.eta");
  c.closed_form_fixed = get<bool>(j, "config", "closed_form_fixed", c.closed_form_fixed);
  c.replications = get<std::size_t>(j, "config", "replications", c.replications);
  if (c.replications < 1) throw ConfigError("config.replications", "must be >= 1");
  c.n_grid = get<std::vector<std::int64_t>>(j, "config", "n_grid", {});
  for (std::size_t i = 0; i < c.n_grid.size(); ++i) {
    if (c.n_grid[i] < 1) throw ConfigError("config.n_grid", "entries must be >= 1");
    if (i && c.n_grid[i] <= c.n_grid[i - 1]) throw ConfigError("config.n_grid", "must be strictly increasing");
  }

  if (j.contains("geometry")) {
    const auto& g = j["geometry"];
    only_keys(g, "geometry", {"d", "d0", "max_freq", "head", "head_cap"});
    c.geometry.d = get<int>(g, "geometry", "d", 1);
    c.geometry.d0 = get<int>(g, "geometry", "d0", c.geometry.d);
    c.geometry.max_freq = get<std::int64_t>(g, "geometry", "max_freq", 0);
    c.geometry.head = get<std::int64_t>(g, "geometry", "head", 0);
    c.geometry.head_cap = get<std::int64_t>(g, "geometry", "head_cap", 2000);
  }
  if (c.geometry.d < 1) throw ConfigError("geometry.d", "must be >= 1");
  if (c.geometry.d0 < 1 || c.geometry.d0 > c.geometry.d) throw ConfigError("geometry.d0", "must lie in 1..d");
  if (c.geometry.d >= 2 && c.geometry.max_freq < 1) throw ConfigError("geometry.max_freq", "required (>= 1) when d >= 2");
  if (c.geometry.head < 0 || c.geometry.head_cap < 1) throw ConfigError("geometry.head", "must be >= 0 with head_cap >= 1");

  if (j.contains("truth")) {
    const auto& t = j["truth"];
    only_keys(t, "truth", {"kind", "p", "q", "jmax", "max_axis_freq"});
    const auto k = get<std::string>(t, "truth", "kind", "gapped");
    if (k == "gapped") c.truth.kind = TruthConfig::Kind::gapped;
    else if (k == "cosine") c.truth.kind = TruthConfig::Kind::cosine;
    else throw ConfigError("truth.kind", "expected gapped or cosine");
    c.truth.p = get<double>(t, "truth", "p", c.truth.p);
    c.truth.q = get<double>(t, "truth", "q", c.truth.q);
    c.truth.jmax = get<std::int64_t>(t, "truth", "jmax", c.truth.jmax);
    c.truth.max_axis_freq = get<std::int64_t>(t, "truth", "max_axis_freq", 0);
  }
  if (c.truth.kind == TruthConfig::Kind::gapped) {
    if (!(c.truth.p > 0)) throw ConfigError("truth.p", "must be > 0");
    if (!(c.truth.q >= 1)) throw ConfigError("truth.q", "must be >= 1");
    if (c.truth.jmax < 1) throw ConfigError("truth.jmax", "must be >= 1");
  } else if (c.geometry.d < 2 && c.truth.max_axis_freq < 1) {
    throw ConfigError("truth.max_axis_freq", "required for the cosine target when d = 1");
  }

  if (j.contains("kernel")) {
    const auto& k = j["kernel"];
    only_keys(k, "kernel", {"sobolev_r", "low_dim"});
    c.kernel.r = get<double>(k, "kernel", "sobolev_r", c.kernel.r);
    c.kernel.low_dim = get<bool>(k, "kernel", "low_dim", false);
  }
  if (!(c.kernel.r > c.geometry.d / 2.0)) throw ConfigError("kernel.sobolev_r", "must exceed d/2 (summability)");

  if (j.contains("stopping")) {
    const auto& s = j["stopping"];
    only_keys(s, "stopping", {"kind", "c_t", "c_b", "c_fixed", "holdout", "patience", "max_steps"});
    c.stopping.kind = stop_rule(get<std::string>(s, "stopping", "kind", "theoretical"), "stopping.kind");
    c.stopping.c_t = positive(get<double>(s, "stopping", "c_t", 1.0), "stopping.c_t");
    c.stopping.c_b = positive(get<double>(s, "stopping", "c_b", 1.0), "stopping.c_b");
    c.stopping.c_fixed = positive(get<double>(s, "stopping", "c_fixed", 1.0), "stopping.c_fixed");
    c.stopping.holdout = get<double>(s, "stopping", "holdout", 0.2);
    c.stopping.patience = get<std::size_t>(s, "stopping", "patience", 50);
    c.stopping.max_steps = get<std::size_t>(s, "stopping", "max_steps", 200000);
  }
  if (!(c.stopping.holdout > 0 && c.stopping.holdout < 1)) throw ConfigError("stopping.holdout", "must lie in (0,1)");
  if (c.stopping.max_steps < 1) throw ConfigError("stopping.max_steps", "must be >= 1");

  if (j.contains("methods")) {
    const auto& ms = j["methods"];
    if (!ms.is_array()) throw ConfigError("methods", "expected a list");
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const std::string where = "methods[" + std::to_string(i) + "]";
      only_keys(ms[i], where, {"kind", "D", "stop"});
      MethodConfig m;
      const auto k = get<std::string>(ms[i], where, "kind", "");
      if (k == "adaptive") m.method.kind = MethodKind::adaptive;
      else if (k == "fixed") m.method.kind = MethodKind::fixed;
      else throw ConfigError(where + ".kind", "expected adaptive or fixed");
      m.method.D = get<int>(ms[i], where, "D", 0);
      if (m.method.D < 0) throw ConfigError(where + ".D", "must be >= 0");
      if (m.method.kind == MethodKind::fixed && m.method.D != 0) throw ConfigError(where + ".D", "fixed kernel has no depth");
      if (ms[i].contains("stop")) m.stop = stop_rule(get<std::string>(ms[i], where, "stop", ""), where + ".stop");
      c.methods.push_back(m);
    }
  }

  if (j.contains("concentration")) {
    const auto& a = j["concentration"];
    only_keys(a, "concentration", {"J", "reps", "S"});
    c.concentration.J = get<std::int64_t>(a, "concentration", "J", 64);
    c.concentration.reps = get<std::size_t>(a, "concentration", "reps", 200);
    c.concentration.S = get<std::vector<std::int64_t>>(a, "concentration", "S", {});
  }
  if (j.contains("eig_audit")) {
    const auto& a = j["eig_audit"];
    only_keys(a, "eig_audit", {"s", "C1"});
    c.eig.s = get<double>(a, "eig_audit", "s", c.eig.s);
    c.eig.C1 = positive(get<double>(a, "eig_audit", "C1", c.eig.C1), "eig_audit.C1");
  }
  if (j.contains("onedim")) {
    const auto& a = j["onedim"];
    only_keys(a, "onedim",
              {"tuples", "depths", "steps_per_bound", "stiffness_cap", "fit_horizon", "conservation_dt", "conservation_T"});
    auto& o = c.onedim;
    o.tuples = get<std::size_t>(a, "onedim", "tuples", o.tuples);
    o.depths = get<std::vector<int>>(a, "onedim", "depths", o.depths);
    o.steps_per_bound = positive(get<double>(a, "onedim", "steps_per_bound", o.steps_per_bound), "onedim.steps_per_bound");
    o.stiffness_cap = positive(get<double>(a, "onedim", "stiffness_cap", o.stiffness_cap), "onedim.stiffness_cap");
    o.fit_horizon = positive(get<double>(a, "onedim", "fit_horizon", o.fit_horizon), "onedim.fit_horizon");
    o.conservation_dt = positive(get<double>(a, "onedim", "conservation_dt", o.conservation_dt), "onedim.conservation_dt");
    o.conservation_T = positive(get<double>(a, "onedim", "conservation_T", o.conservation_T), "onedim.conservation_T");
    for (int D : o.depths)
      if (D < 0) throw ConfigError("onedim.depths", "entries must be >= 0");
  }
  if (j.contains("output")) {
    const auto& o = j["output"];
    only_keys(o, "output", {"dir", "trajectories", "snapshot_every"});
    c.output.dir = get<std::string>(o, "output", "dir", c.output.dir);
    c.output.trajectories = get<bool>(o, "output", "trajectories", c.output.trajectories);
    c.output.snapshot_every = get<std::size_t>(o, "output", "snapshot_every", c.output.snapshot_every);
    if (c.output.snapshot_every < 1) throw ConfigError("output.snapshot_every", "must be >= 1");
  }

  // experiment-specific requirements
  const bool learning = c.kind == ExperimentKind::rate_sweep || c.kind == ExperimentKind::single_run ||
                        c.kind == ExperimentKind::eig_audit;
  if (learning) {
    if (c.methods.empty()) throw ConfigError("methods", "at least one method is required");
    if (c.n_grid.empty()) throw ConfigError("n_grid", "at least one n is required");
  }
  if (c.kind == ExperimentKind::rate_sweep && c.n_grid.size() < 4)
    throw ConfigError("n_grid", "a rate sweep needs >= 4 distinct n values");
  if (c.kind == ExperimentKind::eig_audit)
    for (const auto& m : c.methods)
      if (m.method.kind != MethodKind::adaptive) throw ConfigError("methods", "eig-audit takes adaptive methods only");
  if (c.kind == ExperimentKind::concentration_audit) {
    if (c.geometry.d != 1) throw ConfigError("geometry.d", "the concentration audit runs in d = 1");
    if (c.concentration.reps < 30) throw ConfigError("concentration.reps", "must be >= 30");
    if (c.concentration.J < 1) throw ConfigError("concentration.J", "must be >= 1");
    if (c.n_grid.empty()) throw ConfigError("n_grid", "at least one n is required");
    for (auto s : c.concentration.S)
      if (s < 1 || s > c.concentration.J) throw ConfigError("concentration.S", "ranks must lie in 1..J");
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("parse error: ") + e.what());
  }
  return parse_config(j);
}

// FNV-1a over the normalized JSON text.
inline std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace diagkernel
