// Command-line entry point: diagkernel run <config> [--dry-run] [--workers N]
// [--seed S] [--out DIR]
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "diagkernel/experiments.hpp"

namespace dk = diagkernel;
namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, failure = 1, config_error = 2, divergence = 3 };

int report(const fs::path& out, const dk::json& rec, int code) {
  std::cerr << rec.dump() << "\n";
  try {
    if (!out.empty()) dk::write_text(out / "error.json", dk::dump(rec));
  } catch (...) {
  }
  return code;
}

void print_plan(const dk::ExperimentConfig& c, const fs::path& out) {
  const auto meta = dk::run_meta(c);
  std::cout << "experiment   " << meta.experiment << " (" << c.name << ")\n"
            << "config_hash  " << meta.config_hash << "\nseed         " << c.seed << "\noutput       " << out.string()
            << "\n";
  switch (c.kind) {
    case dk::ExperimentKind::onedim_verify:
      std::cout << "tuples/lemma " << c.onedim.tuples << "\ndepths      ";
      for (int D : c.onedim.depths) std::cout << " " << D;
      std::cout << "\n";
      return;
    case dk::ExperimentKind::concentration_audit:
      std::cout << "J            " << c.concentration.J << "\nreps         " << c.concentration.reps << "\nn_grid      ";
      for (auto n : c.n_grid) std::cout << " " << n;
      std::cout << "\n";
      return;
    default: break;
  }
  std::cout << "replications " << c.replications << "\nsigma        " << c.sigma << "\neta          " << c.eta << "\n";
  for (auto n : c.n_grid) {
    const auto pr = dk::build_problem(c, n);
    std::cout << "n=" << n << " J=" << pr.spec.size() << " tail=" << pr.truth.tail_energy << "\n";
    for (const auto& m : c.methods) {
      const auto tc = dk::train_config(c, m, n);
      std::cout << "  " << m.method.name() << " stop=";
      switch (tc.stopping.kind) {
        case dk::StopKind::theoretical: std::cout << "theoretical t=" << tc.stop_time << " steps=" << dk::steps_for_time(tc.stop_time, tc.eta); break;
        case dk::StopKind::oracle: std::cout << "oracle holdout=" << tc.stopping.holdout << " max_steps=" << tc.max_steps; break;
        case dk::StopKind::fixed_steps: std::cout << "fixed_steps " << tc.max_steps; break;
      }
      if (m.method.kind == dk::MethodKind::adaptive && m.method.D >= 1) std::cout << " b0=" << tc.b0;
      std::cout << "\n";
    }
  }
}

int run(const std::string& path, bool dry, std::size_t workers, const std::optional<std::uint64_t>& seed,
        const std::optional<std::string>& out_opt) {
  dk::ExperimentConfig c;
  fs::path out = out_opt ? fs::path(*out_opt) : fs::path();
  try {
    c = dk::load_config(path);
    if (seed) {
      c.seed = *seed;
      c.source["seed"] = *seed;
    }
    if (!out_opt) out = c.output.dir;
    if (dry) {
      print_plan(c, out);
      return ok;
    }
  } catch (const dk::ConfigError& e) {
    return report(out, {{"error", "config"}, {"path", e.path}, {"message", e.what()}}, config_error);
  }
  try {
    switch (c.kind) {
      case dk::ExperimentKind::rate_sweep:
      case dk::ExperimentKind::single_run:
      case dk::ExperimentKind::eig_audit: {
        const auto o = dk::run_learning(c, workers, [](const std::string& s) { std::cerr << s << "\n"; });
        dk::write_learning(out, c, o);
        for (const auto& r : o.rates)
          std::cout << r.method << " slope " << r.fit.slope << " (r2 " << r.fit.r_squared << ")\n";
        break;
      }
      case dk::ExperimentKind::concentration_audit: {
        const auto o = dk::run_concentration(c, workers);
        dk::write_concentration(out, c, o);
        std::cout << "fitted constant " << o.fitted_constant << "\n";
        break;
      }
      case dk::ExperimentKind::onedim_verify: {
        const auto o = dk::run_onedim(c, workers);
        dk::write_onedim(out, c, o);
        for (const auto& cert : o.certificates)
          std::cout << "D=" << cert.D << " " << cert.name << " violations " << cert.violations << "/" << cert.evaluations
                    << "\n";
        break;
      }
    }
  } catch (const dk::ConfigError& e) {
    return report(out, {{"error", "config"}, {"path", e.path}, {"message", e.what()}}, config_error);
  } catch (const dk::CellDivergence& e) {
    return report(out,
                  {{"error", "divergence"},
                   {"cell", {{"method", e.method}, {"n", e.n}, {"rep", e.rep}}},
                   {"message", e.what()}},
                  divergence);
  } catch (const std::exception& e) {
    return report(out, {{"error", "runtime"}, {"message", e.what()}}, failure);
  }
  std::cout << "wrote " << out.string() << "\n";
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diagonal adaptive kernel experiments"};
  app.require_subcommand(1);
  auto* cmd = app.add_subcommand("run", "run an experiment config");
  std::string path;
  bool dry = false;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  cmd->add_option("config", path, "config file (JSON)")->required();
  cmd->add_flag("--dry-run", dry, "validate and print the resolved plan");
  cmd->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", seed, "override the config seed");
  cmd->add_option("--out", out, "output directory (overrides the config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : config_error;
  }
  return run(path, dry, workers, seed, out);
}
