#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pmoc/cli.hpp"
#include "pmoc/geomcheck.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kUsage = 64;

struct Flags {
  std::string config_file;
  std::string system, basis, guess;
  std::vector<std::string> schemes;
  int n = 0, seeds = 0, max_major = 0;
  double tf_min = 0, tf_max = 0, tf_guess = 0;
  double amplitude = 0, frequency = 0, phase = 0, torque = 0, kp = 0, kd = 0;
  double feas_tol = 0, opt_tol = 0;
  std::uint64_t seed = 0;
  bool optimize_lengths = false;
  std::string out;
};

std::string default_out() {
  if (const char* env = std::getenv("PMOC_OUTPUT_DIR"); env && *env) return env;
  return "pmoc-out";
}

void add_run_options(CLI::App* app, Flags& f, bool many_schemes) {
  app->add_option("--config", f.config_file, "JSON config file; flags override it")->check(CLI::ExistingFile);
  app->add_option("--system", f.system, "acrobot | 3crobot | pointmass | pendulum");
  if (many_schemes)
    app->add_option("--scheme", f.schemes, "pmoc | dae-el | ode-el (repeat)")->expected(1, 3);
  else
    app->add_option("--scheme", f.schemes, "pmoc | dae-el | ode-el")->expected(1);
  app->add_option("--basis", f.basis, "chebyshev | legendre");
  app->add_option("--n", f.n, "grid size");
  app->add_option("--tf-min", f.tf_min);
  app->add_option("--tf-max", f.tf_max);
  app->add_option("--tf-guess", f.tf_guess);
  app->add_flag("--optimize-lengths", f.optimize_lengths, "optimize l2, l3 with l2 + l3 = 1 (3crobot)");
  app->add_option("--seeds", f.seeds, "multistart count");
  app->add_option("--seed", f.seed, "multistart RNG seed");
  app->add_option("--guess", f.guess, "sinusoid | torque-pd");
  app->add_option("--amplitude", f.amplitude);
  app->add_option("--frequency", f.frequency);
  app->add_option("--phase", f.phase);
  app->add_option("--torque", f.torque);
  app->add_option("--kp", f.kp);
  app->add_option("--kd", f.kd);
  app->add_option("--feas-tol", f.feas_tol);
  app->add_option("--opt-tol", f.opt_tol);
  app->add_option("--max-major", f.max_major);
  app->add_option("--out", f.out, "output directory (default $PMOC_OUTPUT_DIR or ./pmoc-out)");
}

bool given(const CLI::App* app, const char* name) { return app->count(name) > 0; }

pmoc::RunConfig resolve(const CLI::App* app, const Flags& f) {
  pmoc::RunConfig c;
  c.out_dir = default_out();
  if (!f.config_file.empty()) c = pmoc::load_config(f.config_file, c);
  if (given(app, "--system")) c.system = pmoc::system_from_string(f.system);
  if (given(app, "--scheme")) {
    try {
      c.scheme = pmoc::scheme_from_string(f.schemes.front());
    } catch (const std::exception&) {
      throw pmoc::ConfigError("unknown scheme '" + f.schemes.front() + "'");
    }
  }
  if (given(app, "--basis")) {
    try {
      c.basis = pmoc::family_from_string(f.basis);
    } catch (const std::exception&) {
      throw pmoc::ConfigError("unknown basis '" + f.basis + "'");
    }
  }
  if (given(app, "--guess")) {
    try {
      c.guess.strategy = pmoc::guess_from_string(f.guess);
    } catch (const std::exception&) {
      throw pmoc::ConfigError("unknown guess strategy '" + f.guess + "'");
    }
  }
  if (given(app, "--n")) c.n = f.n;
  if (given(app, "--tf-min")) c.tf_min = f.tf_min;
  if (given(app, "--tf-max")) c.tf_max = f.tf_max;
  if (given(app, "--tf-guess")) c.tf_guess = f.tf_guess;
  if (given(app, "--optimize-lengths")) c.optimize_lengths = f.optimize_lengths;
  if (given(app, "--seeds")) c.seeds = f.seeds;
  if (given(app, "--seed")) c.seed = f.seed;
  if (given(app, "--amplitude")) c.guess.amplitude = f.amplitude;
  if (given(app, "--frequency")) c.guess.frequency = f.frequency;
  if (given(app, "--phase")) c.guess.phase = f.phase;
  if (given(app, "--torque")) c.guess.torque = f.torque;
  if (given(app, "--kp")) c.guess.kp = f.kp;
  if (given(app, "--kd")) c.guess.kd = f.kd;
  if (given(app, "--feas-tol")) c.feas_tol = f.feas_tol;
  if (given(app, "--opt-tol")) c.opt_tol = f.opt_tol;
  if (given(app, "--max-major")) c.max_major = f.max_major;
  if (given(app, "--out")) c.out_dir = f.out;
  pmoc::validate(c);
  return c;
}

void summarize(const pmoc::RunRecord& r, std::ostream& out) {
  out << to_string(r.config.system) << " " << to_string(r.config.scheme) << " N=" << r.config.n << ": "
      << to_string(r.status) << ", " << r.major_iterations << " major iterations, cost " << r.cost
      << ", feasibility " << r.feasibility << ", t_f " << r.tf;
  for (std::size_t i = 0; i < r.design.size(); ++i) out << ", " << r.design_names[i] << " " << r.design[i];
  out << " (" << r.wall_time << " s, digest " << r.digest << ")\n";
  if (r.error) out << "  " << r.error->kind << ": " << r.error->message << "\n";
  if (r.published)
    out << "  published: major iterations " << r.published->major_iterations << ", cost " << r.published->cost
        << (r.published->design.empty() ? "" : ", design " + r.published->design) << "\n";
}

int do_run(const CLI::App* app, const Flags& f) {
  const pmoc::RunConfig c = resolve(app, f);
  const pmoc::BenchmarkReport report = pmoc::run(c);
  const fs::path dir(c.out_dir);
  pmoc::save_report(report, dir / "report.json");
  const auto& r = report.runs.front();
  summarize(r, std::cout);
  if (r.feasible()) pmoc::export_trajectory(report, dir / "trajectory.csv");
  std::cout << "wrote " << (dir / "report.json").string() << "\n";
  return pmoc::exit_code(r);
}

int do_compare(const CLI::App* app, const Flags& f) {
  const pmoc::RunConfig base = resolve(app, f);
  std::vector<std::string> names = f.schemes;
  if (names.empty()) names = {"pmoc", "dae-el", "ode-el"};
  std::vector<pmoc::RunConfig> configs;
  for (const auto& name : names) {
    pmoc::RunConfig c = base;
    try {
      c.scheme = pmoc::scheme_from_string(name);
    } catch (const std::exception&) {
      throw pmoc::ConfigError("unknown scheme '" + name + "'");
    }
    configs.push_back(c);
  }
  const pmoc::BenchmarkReport report = pmoc::compare(configs);
  const fs::path dir(base.out_dir);
  pmoc::save_report(report, dir / "compare.json");
  std::ostringstream table;
  pmoc::write_table(report, table);
  std::ofstream(dir / "table.txt") << table.str();
  std::cout << table.str();
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const auto& r = report.runs[i];
    summarize(r, std::cout);
    if (r.feasible())
      pmoc::export_trajectory(report, dir / ("trajectory_" + to_string(r.config.scheme) + ".csv"),
                              static_cast<int>(i));
  }
  return 0;
}

int do_verify(const std::vector<int>& sizes, const std::string& out_dir) {
  const auto rows = pmoc::geometry_study(sizes);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  std::ofstream file(dir / "geomcheck.csv");
  pmoc::write_study_csv(rows, file);
  pmoc::write_study_csv(rows, std::cout);

  const auto probe = pmoc::symplectic_defect(pmoc::pendulum_probe(16));
  const auto broken = pmoc::symplectic_defect(pmoc::pendulum_probe(16, 3.0, true));
  std::cout << "pendulum flow map (N=16, t_f=3): defect " << probe.defect << ", broken pairing " << broken.defect
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-spectral trajectory optimization benchmarks"};
  app.require_subcommand(1);

  Flags run_flags, cmp_flags;
  auto* run = app.add_subcommand("run", "solve one configuration");
  add_run_options(run, run_flags, false);
  auto* cmp = app.add_subcommand("compare", "solve one configuration under several schemes");
  add_run_options(cmp, cmp_flags, true);

  auto* verify = app.add_subcommand("verify", "geometric checks: convergence, flow-map defect, momentum drift");
  std::vector<int> sizes{8, 12, 16, 20, 24};
  std::string verify_out = default_out();
  verify->add_option("--sizes", sizes, "grid sizes")->delimiter(',')->check(CLI::Range(3, 128));
  verify->add_option("--out", verify_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run) return do_run(run, run_flags);
    if (*cmp) return do_compare(cmp, cmp_flags);
    if (*verify) return do_verify(sizes, verify_out);
  } catch (const pmoc::ConfigError& e) {
    std::cerr << "pmoc: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "pmoc: " << e.what() << "\n";
    return 3;
  }
  return kUsage;
}
