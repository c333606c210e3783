#pragma once
// Experiment drivers behind the CLI: learning sweeps over (method, n, rep)
// cells, the concentration audit and the one-dimensional verification suite.
// Every driver is deterministic in (config, seed) regardless of worker count.
#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "diagkernel/analysis.hpp"
#include "diagkernel/basis.hpp"
#include "diagkernel/config.hpp"
#include "diagkernel/dynamics.hpp"
#include "diagkernel/onedim.hpp"
#include "diagkernel/rng.hpp"
#include "diagkernel/sampling.hpp"
#include "diagkernel/signals.hpp"

namespace diagkernel {

// Runs fn(0..count-1) on up to `workers` threads. The first exception in index
// order is rethrown after all workers stop.
inline void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto body = [&] {
    for (std::size_t i; !failed && (i = next++) < count;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct CellDivergence : std::runtime_error {
  std::string method;
  std::int64_t n;
  std::size_t rep;
  CellDivergence(std::string m, std::int64_t n_, std::size_t r, const std::string& msg)
      : std::runtime_error("divergence in cell (" + m + ", n=" + std::to_string(n_) + ", rep=" + std::to_string(r) +
                           "): " + msg),
        method(std::move(m)), n(n_), rep(r) {}
};

// ---- problem construction ----

struct Problem {
  OrderedSpectrum spec;
  CoefficientVector truth;
};

inline double gamma_of(const ExperimentConfig& c) { return 2.0 * c.kernel.r / c.geometry.d; }

inline StopRule stop_rule_of(const ExperimentConfig& c, const MethodConfig& m) { return m.stop.value_or(c.stopping.kind); }

// Theoretical stop time (flow time) of a method at sample size n.
inline double theoretical_time(const ExperimentConfig& c, const Method& m, double n) {
  if (m.kind == MethodKind::adaptive) return schedules(n, m.D, c.stopping.c_t, c.stopping.c_b).stop_time;
  if (c.truth.kind != TruthConfig::Kind::gapped)
    throw ConfigError("stopping", "the fixed kernel has a theoretical time only for the gapped truth");
  return fixed_kernel_oracle_time(n, c.truth.p, c.truth.q, gamma_of(c), c.stopping.c_fixed);
}

// d = 1 working set: the leading `head` ranks plus every stored truth position.
inline std::int64_t head_size(const ExperimentConfig& c, std::int64_t n) {
  if (c.geometry.head > 0) return c.geometry.head;
  double t = 0;
  for (const auto& m : c.methods)
    if (stop_rule_of(c, m) == StopRule::theoretical) t = std::max(t, theoretical_time(c, m.method, double(n)));
  const double h = std::max(4.0 * std::sqrt(double(n)), 4.0 * std::sqrt(t));
  return std::min<std::int64_t>(c.geometry.head_cap, static_cast<std::int64_t>(std::ceil(h)));
}

inline Problem build_problem(const ExperimentConfig& c, std::int64_t n) {
  Problem pr;
  try {
    if (c.geometry.d == 1) {
      std::vector<std::int64_t> ranks;
      const auto H = c.truth.kind == TruthConfig::Kind::cosine ? 2 * c.truth.max_axis_freq + 1 : head_size(c, n);
      for (std::int64_t k = 1; k <= H; ++k) ranks.push_back(k);
      if (c.truth.kind == TruthConfig::Kind::gapped)
        for (auto l : gapped_positions(c.truth.q, c.truth.jmax)) ranks.push_back(l);
      pr.spec = sobolev_spectrum_1d(ranks, c.kernel.r);
    } else {
      pr.spec = sobolev_spectrum(c.geometry.d, c.geometry.max_freq, c.kernel.r);
    }
    if (c.kernel.low_dim) pr.spec = low_dim_spectrum(pr.spec, c.geometry.d0);
    if (c.truth.kind == TruthConfig::Kind::gapped) {
      pr.truth = gapped_on_spectrum(c.truth.p, c.truth.q, c.truth.jmax, pr.spec);
    } else {
      const auto M = c.truth.max_axis_freq > 0 ? c.truth.max_axis_freq : c.geometry.max_freq;
      pr.truth = cosine_target_coeffs(pr.spec, M);
    }
  } catch (const std::domain_error& e) {
    throw ConfigError("kernel", e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("truth", e.what());
  }
  return pr;
}

inline std::uint64_t cell_seed(std::uint64_t seed, std::int64_t n, std::size_t rep) {
  return stream_key({seed, 0xCE11, static_cast<std::uint64_t>(n), rep});
}

inline TrainConfig train_config(const ExperimentConfig& c, const MethodConfig& m, std::int64_t n) {
  TrainConfig t;
  t.eta = c.eta;
  t.max_steps = c.stopping.max_steps;
  t.snapshot_every = c.output.snapshot_every;
  t.closed_form_fixed = c.closed_form_fixed;
  t.stopping.holdout = c.stopping.holdout;
  t.stopping.patience = c.stopping.patience;
  switch (stop_rule_of(c, m)) {
    case StopRule::theoretical: t.stopping.kind = StopKind::theoretical; break;
    case StopRule::oracle: t.stopping.kind = StopKind::oracle; break;
    case StopRule::fixed_steps: t.stopping.kind = StopKind::fixed_steps; break;
  }
  if (t.stopping.kind == StopKind::theoretical) t.stop_time = theoretical_time(c, m.method, double(n));
  if (m.method.kind == MethodKind::adaptive && m.method.D >= 1)
    t.b0 = *schedules(double(n), m.method.D, c.stopping.c_t, c.stopping.c_b).b0;
  return t;
}

// ---- learning sweeps ----

struct CellResult {
  std::string method;
  int D = 0;
  std::int64_t n = 0;
  std::size_t rep = 0;
  std::size_t J = 0;
  double gen_error = 0;
  double stop_time = 0;
  std::size_t stop_step = 0;
  double share_learned = 0;  // axis share of learned eigenvalues (lambda^{1/2} for the fixed kernel)
  double share_theta = 0;    // axis share of |theta|
  std::optional<EigAuditReport> eig;
  Trajectory trajectory;
};

struct RateRecord {
  std::string method;
  int D = 0;
  RateFit fit;
  std::optional<double> theoretical_slope;
};

struct LearningOutput {
  std::vector<CellResult> cells;  // ordered by (n, rep, method)
  std::vector<RateRecord> rates;
  std::vector<std::size_t> working_set;  // J per n
};

struct PlanCell {
  std::int64_t n;
  std::size_t rep;
};

inline std::vector<PlanCell> learning_plan(const ExperimentConfig& c) {
  std::vector<PlanCell> p;
  for (auto n : c.n_grid)
    for (std::size_t r = 0; r < c.replications; ++r) p.push_back({n, r});
  return p;
}

// Checked before any training so that an unstable step size is a config error.
inline void validate_learning(const ExperimentConfig& c, const std::vector<Problem>& problems) {
  for (const auto& pr : problems) {
    const VectorXd lam = Eigen::Map<const VectorXd>(pr.spec.eigenvalues.data(), Eigen::Index(pr.spec.size()));
    try {
      check_stability(c.eta, lam, pr.truth, c.sigma);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("eta", e.what());
    }
  }
  for (const auto& m : c.methods)
    if (stop_rule_of(c, m) == StopRule::theoretical) (void)theoretical_time(c, m.method, 1.0);
}

inline CellResult run_cell(const ExperimentConfig& c, const Problem& pr, const Sample& sample, const MethodConfig& m,
                           std::int64_t n, std::size_t rep) {
  CellResult r;
  r.method = m.method.name();
  r.D = m.method.D;
  r.n = n;
  r.rep = rep;
  r.J = pr.spec.size();
  const auto tc = train_config(c, m, n);
  TrainResult res;
  try {
    res = train(sample, pr.spec, pr.truth, m.method, tc);
  } catch (const DivergenceError& e) {
    throw CellDivergence(r.method, n, rep, e.what());
  }
  r.gen_error = res.gen_error;
  r.stop_time = res.stop_time;
  r.stop_step = res.stop_step;
  const VectorXd lam = Eigen::Map<const VectorXd>(pr.spec.eigenvalues.data(), Eigen::Index(pr.spec.size()));
  // the fixed kernel on the same scale as a_j b_j^D, which starts at lambda_j^{1/2}
  const VectorXd learned = res.state ? learned_eigs(*res.state) : VectorXd(lam.cwiseSqrt());
  r.share_learned = axis_share(learned, pr.spec, c.geometry.d0);
  r.share_theta = axis_share(res.theta.cwiseAbs(), pr.spec, c.geometry.d0);
  if (res.state) {
    std::vector<double> lv(pr.spec.eigenvalues);
    r.eig = eig_learning_audit(learned, res.learned0, pr.truth, lv, pr.spec.ranks, double(n), m.method.D, c.eig.s,
                               c.eig.C1);
  }
  if (c.output.trajectories) r.trajectory = std::move(res.trajectory);
  return r;
}

inline LearningOutput run_learning(const ExperimentConfig& c, std::size_t workers,
                                   const std::function<void(const std::string&)>& log = {}) {
  std::vector<Problem> problems;
  LearningOutput out;
  for (auto n : c.n_grid) {
    problems.push_back(build_problem(c, n));
    out.working_set.push_back(problems.back().spec.size());
  }
  validate_learning(c, problems);
  const auto plan = learning_plan(c);
  const std::size_t M = c.methods.size();
  out.cells.resize(plan.size() * M);
  std::mutex log_mu;
  parallel_for(plan.size(), workers, [&](std::size_t i) {
    const auto& pc = plan[i];
    const auto ni = static_cast<std::size_t>(std::find(c.n_grid.begin(), c.n_grid.end(), pc.n) - c.n_grid.begin());
    const auto& pr = problems[ni];
    const Sample sample = sample_with_design(pr.truth, pr.spec, std::size_t(pc.n), c.sigma, cell_seed(c.seed, pc.n, pc.rep));
    for (std::size_t k = 0; k < M; ++k) out.cells[i * M + k] = run_cell(c, pr, sample, c.methods[k], pc.n, pc.rep);
    if (log) {
      std::lock_guard<std::mutex> lk(log_mu);
      log("cell n=" + std::to_string(pc.n) + " rep=" + std::to_string(pc.rep) + " done");
    }
  });
  if (c.n_grid.size() >= 4) {
    for (const auto& m : c.methods) {
      ErrorCurve curve{m.method.name(), m.method.D, {}};
      for (auto n : c.n_grid) {
        CurvePoint p{double(n), {}};
        for (const auto& cell : out.cells)
          if (cell.n == n && cell.method == curve.method) p.errors.push_back(cell.gen_error);
        curve.points.push_back(std::move(p));
      }
      RateRecord rr{curve.method, curve.D, fit_rate(curve), std::nullopt};
      if (c.truth.kind == TruthConfig::Kind::gapped) {
        const auto pred = theoretical_rates(c.truth.p, c.truth.q);
        rr.theoretical_slope = -(m.method.kind == MethodKind::adaptive ? pred.adaptive_exponent : pred.fixed_exponent);
      }
      out.rates.push_back(std::move(rr));
    }
  }
  return out;
}

inline std::vector<double> errors_of(const LearningOutput& o, const std::string& method, std::int64_t n) {
  std::vector<double> e;
  for (const auto& c : o.cells)
    if (c.method == method && c.n == n) e.push_back(c.gen_error);
  return e;
}

// ---- concentration audit ----

struct ConcentrationOutput {
  std::vector<ConcentrationReport> reports;  // one per n
  double fitted_constant = 0;                // max over n of the normalized quantiles
  std::array<double, 4> raw_slopes{};        // log raw quantile vs log n
  std::vector<std::int64_t> S;
};

inline ConcentrationOutput run_concentration(const ExperimentConfig& c, std::size_t workers) {
  std::vector<std::int64_t> ranks;
  for (std::int64_t k = 1; k <= c.concentration.J; ++k) ranks.push_back(k);
  const auto spec = sobolev_spectrum_1d(ranks, c.kernel.r);
  CoefficientVector truth;
  if (c.truth.kind == TruthConfig::Kind::gapped) {
    const auto cnt = gapped_count_within(c.truth.q, c.concentration.J);
    if (cnt < 1) throw ConfigError("truth", "no gapped entry falls inside 1..J");
    truth = gapped_on_spectrum(c.truth.p, c.truth.q, std::min<std::int64_t>(cnt, c.truth.jmax), spec);
  } else {
    truth = cosine_target_coeffs(spec, c.truth.max_axis_freq);
  }
  ConcentrationOutput out;
  AuditSetup setup;
  setup.spec = &spec;
  setup.truth = &truth;
  setup.sigma = c.sigma;
  setup.probe_ranks = default_probe_ranks(c.concentration.J);
  if (c.concentration.S.empty()) {
    // signal partition {|theta*_j| >= sqrt(ln n / n)} u {lambda_j >= n^{-1/2}} at
    // the smallest n, held fixed so the raw maxima are comparable across n
    const double n0 = double(*std::min_element(c.n_grid.begin(), c.n_grid.end()));
    const double thr = std::sqrt(std::log(n0) / n0);
    for (std::size_t j = 0; j < spec.size(); ++j)
      if (std::abs(truth.theta[j]) >= thr || spec.eigenvalues[j] >= 1.0 / std::sqrt(n0)) setup.S.push_back(j);
  } else {
    for (auto s : c.concentration.S) setup.S.push_back(std::size_t(s - 1));
  }
  if (setup.S.empty()) throw ConfigError("concentration.S", "empty signal set");
  for (auto j : setup.S) out.S.push_back(spec.ranks[j]);
  out.reports.resize(c.n_grid.size());
  parallel_for(c.n_grid.size(), workers, [&](std::size_t i) {
    out.reports[i] = concentration_audit(setup, std::size_t(c.n_grid[i]), c.concentration.reps, c.seed);
  });
  for (const auto& r : out.reports) out.fitted_constant = std::max(out.fitted_constant, r.constant());
  if (c.n_grid.size() >= 2) {
    for (int q = 0; q < 4; ++q) {
      std::vector<double> x, y;
      for (const auto& r : out.reports) {
        if (!(r.raw[q] > 0)) continue;
        x.push_back(std::log(double(r.n)));
        y.push_back(std::log(r.raw[q]));
      }
      out.raw_slopes[q] = x.size() >= 2 ? ols(x, y).slope : std::nan("");
    }
  }
  return out;
}

// ---- one-dimensional verification ----

struct ConservationStudy {
  int D = 0;
  double dt = 0;
  double T = 0;
  double max_drift = 0;                 // at dt over [0, T]
  std::vector<double> refine_dt, refine_drift;
  double order = 0;                     // log-log slope of drift against dt
};

inline ScalarParams conservation_params(int D) {
  ScalarParams p;
  p.lambda = 0.3;
  p.b0 = 0.8;
  p.D = D;
  p.z = 1.0;
  p.h = Perturbation::alternating(0.2, 3.7);
  p.beta0 = beta_for_theta(-0.5, p.lambda, p.b0, D);
  return p;
}

inline double rk4_max_drift(const ScalarParams& p, double dt, double T) {
  ScalarIntegrator it(p, dt);
  double m = 0;
  while (it.time() < T * (1 - 1e-15)) {
    it.step(T);
    const auto& s = it.state();
    m = std::max(m, std::abs(s.a * s.a - s.beta * s.beta - p.lambda));
    if (p.D > 0) m = std::max(m, std::abs(s.b * s.b - p.D * s.beta * s.beta - p.b0 * p.b0));
  }
  return m;
}

inline ConservationStudy conservation_study(int D, double dt, double T) {
  ConservationStudy s;
  s.D = D;
  s.dt = dt;
  s.T = T;
  const auto p = conservation_params(D);
  s.max_drift = rk4_max_drift(p, dt, T);
  // coarse grids so the truncation error sits well above rounding
  std::vector<double> lx, ly;
  for (double h : {0.1, 0.05, 0.025}) {
    const double e = rk4_max_drift(p, h, 20.0);
    s.refine_dt.push_back(h);
    s.refine_drift.push_back(e);
    lx.push_back(std::log(h));
    ly.push_back(std::log(e));
  }
  s.order = ols(lx, ly).slope;
  return s;
}

struct EulerDriftStudy {
  int D = 0;
  std::vector<double> etas, drifts;
  double slope = 0;
};

// Adaptive Euler training to a fixed flow time at several step sizes; the
// conserved quantities drift by O(eta) over the run.
inline EulerDriftStudy euler_drift_study(int D, std::uint64_t seed, std::vector<double> etas = {0.04, 0.02, 0.01}) {
  std::vector<std::int64_t> ranks;
  for (std::int64_t k = 1; k <= 40; ++k) ranks.push_back(k);
  const auto spec = sobolev_spectrum_1d(ranks, 1.0);
  const auto truth = gapped_on_spectrum(1.0, 2.0, 6, spec);
  const auto sample = sample_with_design(truth, spec, 200, 0.5, stream_key({seed, 0xE0E0}));
  EulerDriftStudy s;
  s.D = D;
  std::vector<double> lx, ly;
  for (double eta : etas) {
    TrainConfig tc;
    tc.eta = eta;
    tc.stop_time = 20.0;
    tc.b0 = 0.7;
    tc.snapshot_every = 1000000;
    const auto res = train(sample, spec, truth, {MethodKind::adaptive, D}, tc);
    const double d = conservation_drift(*res.state);
    s.etas.push_back(eta);
    s.drifts.push_back(d);
    lx.push_back(std::log(eta));
    ly.push_back(std::log(d));
  }
  s.slope = ols(lx, ly).slope;
  return s;
}

struct OnedimOutput {
  std::vector<LemmaCertificate> certificates;  // power ODE last
  std::vector<ConservationStudy> conservation;
  std::vector<EulerDriftStudy> euler;
  double seconds = 0;
};

inline CertifyOptions certify_options(const ExperimentConfig& c) {
  CertifyOptions o;
  o.tuples = c.onedim.tuples;
  o.seed = c.seed;
  o.steps_per_bound = c.onedim.steps_per_bound;
  o.stiffness_cap = c.onedim.stiffness_cap;
  o.fit_horizon = c.onedim.fit_horizon;
  return o;
}

inline OnedimOutput run_onedim(const ExperimentConfig& c, std::size_t workers) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto o = certify_options(c);
  OnedimOutput out;
  const auto& Ds = c.onedim.depths;
  std::vector<std::vector<LemmaCertificate>> per(Ds.size() + 1);
  parallel_for(per.size(), workers, [&](std::size_t i) {
    if (i < Ds.size()) per[i] = certify_depth(Ds[i], o);
    else per[i] = {certify_power_ode(o)};
  });
  for (auto& v : per)
    for (auto& cert : v) out.certificates.push_back(std::move(cert));
  for (int D : Ds) {
    out.conservation.push_back(conservation_study(D, c.onedim.conservation_dt, c.onedim.conservation_T));
    out.euler.push_back(euler_drift_study(D, c.seed));
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---- output ----

struct RunMeta {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = DIAGKERNEL_VERSION;
  std::string experiment;
  std::string name;
};

inline RunMeta run_meta(const ExperimentConfig& c) {
  return {config_hash(c.source), c.seed, DIAGKERNEL_VERSION, to_string(c.kind), c.name};
}

inline json meta_json(const RunMeta& m) {
  return {{"config_hash", m.config_hash}, {"seed", m.seed}, {"version", m.version}, {"experiment", m.experiment},
          {"name", m.name}};
}

inline void write_csv_header(std::ostream& os, const RunMeta& m) {
  os << "# diagkernel " << m.version << "\n# config_hash=" << m.config_hash << "\n# seed=" << m.seed
     << "\n# experiment=" << m.experiment << "\n";
}

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Non-finite doubles become null so the JSON stays valid.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json certificate_json(const LemmaCertificate& c) {
  json worst = json::array();
  for (const auto& w : c.worst) {
    json o = json::object();
    for (const auto& [k, v] : w) o[k] = num(v);
    worst.push_back(o);
  }
  return {{"lemma", c.name},
          {"D", c.D},
          {"tuples", c.tuples},
          {"evaluations", c.evaluations},
          {"violations", c.violations},
          {"degenerate_skipped", c.degenerate_skipped},
          {"max_ratio", num(c.max_ratio)},
          {"min_margin", num(c.min_margin)},
          {"fitted_constant", c.fitted_constant ? num(*c.fitted_constant) : json(nullptr)},
          {"worst", worst}};
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << s;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void write_learning(const std::filesystem::path& dir, const ExperimentConfig& c, const LearningOutput& o) {
  const auto meta = run_meta(c);
  {
    std::ostringstream os;
    os.precision(17);
    write_csv_header(os, meta);
    os << "method,D,n,rep,gen_error_at_stop\n";
    for (const auto& cell : o.cells) os << cell.method << "," << cell.D << "," << cell.n << "," << cell.rep << "," << cell.gen_error << "\n";
    write_text(dir / "error_curve.csv", os.str());
  }
  if (c.output.trajectories) {
    for (const auto& cell : o.cells) {
      std::ostringstream os;
      write_csv_header(os, meta);
      write_trajectory_csv(os, cell.trajectory);
      write_text(dir / "trajectories" /
                     (cell.method + "_n" + std::to_string(cell.n) + "_rep" + std::to_string(cell.rep) + ".csv"),
                 os.str());
    }
  }
  if (!o.rates.empty()) {
    json rates = json::array();
    for (const auto& r : o.rates)
      rates.push_back({{"method", r.method},
                       {"D", r.D},
                       {"p", c.truth.p},
                       {"q", c.truth.q},
                       {"fitted_slope", r.fit.slope},
                       {"theoretical_slope", opt_json(r.theoretical_slope)},
                       {"r2", r.fit.r_squared},
                       {"intercept", r.fit.intercept},
                       {"n_grid", r.fit.n_used},
                       {"reps", c.replications},
                       {"warnings", r.fit.warnings}});
    write_text(dir / "rate_report.json", dump({{"meta", meta_json(meta)}, {"rates", rates}}));
  }
  json cells = json::array();
  for (const auto& cell : o.cells) {
    json e = {{"method", cell.method}, {"D", cell.D},           {"n", cell.n},
              {"rep", cell.rep},       {"J", cell.J},           {"gen_error", cell.gen_error},
              {"stop_time", cell.stop_time}, {"stop_step", cell.stop_step},
              {"axis_share_learned", cell.share_learned}, {"axis_share_theta", cell.share_theta}};
    if (cell.eig) {
      e["signal_count"] = cell.eig->signal_count;
      e["noise_count"] = cell.eig->noise_count;
      e["signal_min_ratio"] = opt_json(cell.eig->signal_min_ratio);
      e["noise_max_ratio"] = opt_json(cell.eig->noise_max_ratio);
    }
    cells.push_back(e);
  }
  write_text(dir / "eig_audit.json", dump({{"meta", meta_json(meta)}, {"cells", cells}}));
  json summary = {{"meta", meta_json(meta)}, {"working_set", o.working_set}};
  json med = json::array();
  for (const auto& m : c.methods)
    for (auto n : c.n_grid)
      med.push_back({{"method", m.method.name()}, {"n", n}, {"median_gen_error", median(errors_of(o, m.method.name(), n))}});
  summary["medians"] = med;
  write_text(dir / "summary.json", dump(summary));
}

inline void write_concentration(const std::filesystem::path& dir, const ExperimentConfig& c,
                                const ConcentrationOutput& o) {
  static const char* names[4] = {"r_k", "offdiag_R_theta", "offdiag_S", "offdiag_R_sqrt_lambda"};
  json reps = json::array();
  for (const auto& r : o.reports) {
    json norm = json::object(), raw = json::object();
    for (int q = 0; q < 4; ++q) {
      norm[names[q]] = r.normalized[q];
      raw[names[q]] = r.raw[q];
    }
    reps.push_back({{"n", r.n}, {"reps", r.reps}, {"level", r.level}, {"normalized_quantile", norm}, {"raw_quantile", raw}});
  }
  json slopes = json::object();
  for (int q = 0; q < 4; ++q) slopes[names[q]] = num(o.raw_slopes[q]);
  write_text(dir / "concentration.json", dump({{"meta", meta_json(run_meta(c))},
                                                {"S_ranks", o.S},
                                                {"per_n", reps},
                                                {"fitted_constant", o.fitted_constant},
                                                {"raw_slopes", slopes}}));
}

inline void write_onedim(const std::filesystem::path& dir, const ExperimentConfig& c, const OnedimOutput& o) {
  const auto meta = meta_json(run_meta(c));
  json all = json::array();
  for (const auto& cert : o.certificates) {
    auto j = certificate_json(cert);
    const std::string tag = cert.D >= 0 ? "D" + std::to_string(cert.D) + "_" : "";
    write_text(dir / "certification" / (tag + cert.name + ".json"), dump({{"meta", meta}, {"certificate", j}}));
    all.push_back(j);
  }
  json cons = json::array();
  for (const auto& s : o.conservation)
    cons.push_back({{"D", s.D}, {"dt", s.dt}, {"T", s.T}, {"max_drift", s.max_drift}, {"refine_dt", s.refine_dt},
                    {"refine_drift", s.refine_drift}, {"order", s.order}});
  json eul = json::array();
  for (const auto& s : o.euler) eul.push_back({{"D", s.D}, {"eta", s.etas}, {"drift", s.drifts}, {"slope", s.slope}});
  write_text(dir / "onedim_verify.json",
             dump({{"meta", meta}, {"certificates", all}, {"rk4_conservation", cons}, {"euler_drift", eul}}));
}

}  // namespace diagkernel
