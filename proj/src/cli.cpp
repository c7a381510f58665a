#include "pmoc/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "pmoc/geomcheck.hpp"

namespace pmoc {

using nlohmann::ordered_json;

std::string to_string(SystemKind system) {
  switch (system) {
    case SystemKind::Acrobot:
      return "acrobot";
    case SystemKind::Crobot3:
      return "3crobot";
    case SystemKind::PointMass:
      return "pointmass";
    case SystemKind::Pendulum:
      return "pendulum";
  }
  return "?";
}

SystemKind system_from_string(const std::string& name) {
  for (auto s : {SystemKind::Acrobot, SystemKind::Crobot3, SystemKind::PointMass, SystemKind::Pendulum})
    if (to_string(s) == name) return s;
  throw ConfigError("unknown system '" + name + "'");
}

namespace {

template <class F>
auto parse_enum(F&& f, const std::string& name, const char* what) {
  try {
    return f(name);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError(std::string("unknown ") + what + " '" + name + "'");
  }
}

// non-finite values travel as null
ordered_json number(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

double number(const ordered_json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

ordered_json guess_json(const InitialGuessSpec& g) {
  ordered_json j;
  j["strategy"] = to_string(g.strategy);
  j["amplitude"] = g.amplitude;
  j["frequency"] = g.frequency;
  j["phase"] = g.phase;
  j["torque"] = g.torque;
  j["kp"] = g.kp;
  j["kd"] = g.kd;
  return j;
}

ordered_json config_json(const RunConfig& c, bool include_output) {
  ordered_json j;
  j["system"] = to_string(c.system);
  j["scheme"] = to_string(c.scheme);
  j["basis"] = to_string(c.basis);
  j["n"] = c.n;
  j["tf_min"] = c.tf_min;
  j["tf_max"] = c.tf_max;
  j["tf_guess"] = c.tf_guess;
  j["optimize_lengths"] = c.optimize_lengths;
  j["guess"] = guess_json(c.guess);
  j["seeds"] = c.seeds;
  j["seed"] = c.seed;
  j["feas_tol"] = c.feas_tol;
  j["opt_tol"] = c.opt_tol;
  j["max_major"] = c.max_major;
  if (include_output) {
    j["out"] = c.out_dir;
    j["label"] = c.label;
  }
  return j;
}

template <class T>
T field(const ordered_json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

void overlay_guess(const ordered_json& j, InitialGuessSpec& g) {
  if (!j.is_object()) throw ConfigError("config key 'guess' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "strategy") {
      g.strategy = parse_enum(guess_from_string, field<std::string>(j, key), "guess strategy");
    } else if (key == "amplitude") {
      g.amplitude = field<double>(j, key);
    } else if (key == "frequency") {
      g.frequency = field<double>(j, key);
    } else if (key == "phase") {
      g.phase = field<double>(j, key);
    } else if (key == "torque") {
      g.torque = field<double>(j, key);
    } else if (key == "kp") {
      g.kp = field<double>(j, key);
    } else if (key == "kd") {
      g.kd = field<double>(j, key);
    } else {
      throw ConfigError("unknown config key 'guess." + key + "'");
    }
  }
}

RunConfig overlay(const ordered_json& j, RunConfig c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "system") {
      c.system = system_from_string(field<std::string>(j, key));
    } else if (key == "scheme") {
      c.scheme = parse_enum(scheme_from_string, field<std::string>(j, key), "scheme");
    } else if (key == "basis") {
      c.basis = parse_enum(family_from_string, field<std::string>(j, key), "basis");
    } else if (key == "n") {
      c.n = field<int>(j, key);
    } else if (key == "tf_min") {
      c.tf_min = field<double>(j, key);
    } else if (key == "tf_max") {
      c.tf_max = field<double>(j, key);
    } else if (key == "tf_guess") {
      c.tf_guess = field<double>(j, key);
    } else if (key == "optimize_lengths") {
      c.optimize_lengths = field<bool>(j, key);
    } else if (key == "guess") {
      overlay_guess(value, c.guess);
    } else if (key == "seeds") {
      c.seeds = field<int>(j, key);
    } else if (key == "seed") {
      c.seed = field<std::uint64_t>(j, key);
    } else if (key == "feas_tol") {
      c.feas_tol = field<double>(j, key);
    } else if (key == "opt_tol") {
      c.opt_tol = field<double>(j, key);
    } else if (key == "max_major") {
      c.max_major = field<int>(j, key);
    } else if (key == "out") {
      c.out_dir = field<std::string>(j, key);
    } else if (key == "label") {
      c.label = field<std::string>(j, key);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  return c;
}

}  // namespace

std::string config_to_json(const RunConfig& config, bool include_output) {
  return config_json(config, include_output).dump();
}

RunConfig config_from_json(const std::string& text, const RunConfig& base) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return overlay(j, base);
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str(), base);
}

void validate(const RunConfig& c) {
  if (c.n < 2 || c.n > 512) throw ConfigError("n must lie in [2, 512]");
  if (!(c.tf_min > 0.0) || !(c.tf_max >= c.tf_min) || !std::isfinite(c.tf_max))
    throw ConfigError("need 0 < tf_min <= tf_max");
  if (!std::isfinite(c.tf_guess)) throw ConfigError("tf_guess must be finite");
  if (c.seeds < 1) throw ConfigError("seeds must be at least 1");
  if (!(c.feas_tol > 0.0) || !(c.opt_tol > 0.0)) throw ConfigError("tolerances must be positive");
  if (c.max_major < 1) throw ConfigError("max_major must be at least 1");
  if (c.guess.strategy == GuessStrategy::Custom) throw ConfigError("guess strategy 'custom' needs a decision vector");
  if (c.optimize_lengths && c.system != SystemKind::Crobot3)
    throw ConfigError("optimize_lengths applies to the 3crobot only");
}

std::string config_digest(const RunConfig& config) {
  const std::string text = config_to_json(config, false);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::optional<PublishedResult> published_result(const RunConfig& c) {
  if (c.basis != FamilyKind::Chebyshev || c.n != 64) return std::nullopt;
  if (c.system == SystemKind::Acrobot) {
    switch (c.scheme) {
      case SchemeKind::Pmoc:
        return PublishedResult{"218", "0.63", ""};
      case SchemeKind::DaeEl:
        return PublishedResult{"No feasible solution found", "-", ""};
      case SchemeKind::OdeEl:
        return PublishedResult{"688", "0.80", ""};
    }
  }
  if (c.system == SystemKind::Crobot3) {
    const bool l = c.optimize_lengths;
    switch (c.scheme) {
      case SchemeKind::Pmoc:
        return l ? PublishedResult{"358", "0.31", "(0.3, 0.7)"} : PublishedResult{"498", "0.61", ""};
      case SchemeKind::DaeEl:
        return PublishedResult{"Singular basis", "-", ""};
      case SchemeKind::OdeEl:
        return PublishedResult{"> 1758", "-", ""};
    }
  }
  return std::nullopt;
}

std::shared_ptr<const DiscretizedProblem> build_problem(const RunConfig& c) {
  validate(c);
  ModelPtr model;
  Eigen::VectorXd target;
  bool angular = true;
  switch (c.system) {
    case SystemKind::Acrobot:
      model = make_acrobot();
      target = Eigen::Vector2d(std::numbers::pi, 0.0);
      break;
    case SystemKind::Crobot3:
      model = make_3crobot(0.5, 0.5);
      target = Eigen::Vector3d(std::numbers::pi, 0.0, 0.0);
      break;
    case SystemKind::Pendulum:
      model = make_pendulum();
      target = Eigen::VectorXd::Constant(1, std::numbers::pi);
      break;
    case SystemKind::PointMass:
      model = make_point_mass(1);
      target = Eigen::VectorXd::Ones(1);
      angular = false;
      break;
  }
  const int d = model->dim_q();
  const Eigen::VectorXd rest = Eigen::VectorXd::Zero(d);
  BoundaryConditions bc{EndCondition::state(rest, rest), EndCondition::state(target, rest)};
  if (angular) bc.final.wrap.assign(d, true);

  const TimeScaling scaling = c.fixed_tf() ? TimeScaling::fixed(c.tf_min)
                                           : TimeScaling::bounded(std::clamp(c.tf_guess, c.tf_min, c.tf_max),
                                                                  c.tf_min, c.tf_max);
  SchemeOptions options;
  if (c.optimize_lengths) {
    options.optimize_design = true;
    options.design_sum = 1.0;
  }
  return std::make_shared<const DiscretizedProblem>(c.scheme, model, SpectralBasis::make(c.basis, c.n), bc,
                                                    scaling, options);
}

namespace {

Eigen::MatrixXd resample(const DiscretizedProblem& p, const Eigen::VectorXd& x) {
  const double tf = p.final_time(x);
  const auto basis = p.basis_ptr();
  const GridFunction q{basis, p.q_grid(x)};
  const GridFunction v{basis, p.velocity_grid(x)};
  const GridFunction u{basis, p.u_grid(x)};
  const GridFunction mom = momentum_polynomial(p, x);
  const int d = q.channels(), m = u.channels();
  Eigen::MatrixXd out(kTrajectorySamples, 1 + 3 * d + m);
  for (int r = 0; r < kTrajectorySamples; ++r) {
    const double t = tf * r / (kTrajectorySamples - 1);
    const double s = std::clamp(2.0 * t / tf - 1.0, -1.0, 1.0);
    out(r, 0) = t;
    out.row(r).segment(1, d) = interpolate(q, s).transpose();
    out.row(r).segment(1 + d, d) = interpolate(v, s).transpose();
    out.row(r).segment(1 + 2 * d, m) = interpolate(u, s).transpose();
    out.row(r).segment(1 + 2 * d + m, d) = interpolate(mom, s).transpose();
  }
  return out;
}

template <class E>
RunError error_of(const char* kind, const E& e) {
  return RunError{kind, e.what()};
}

}  // namespace

RunRecord run_record(const RunConfig& config) {
  RunRecord rec;
  rec.config = config;
  rec.digest = config_digest(config);
  rec.published = published_result(config);
  const auto problem = build_problem(config);
  rec.dim_q = problem->model().dim_q();
  rec.dim_u = problem->layout().dim_u;
  for (const auto& dp : problem->model().design_params()) rec.design_names.push_back(dp.name);

  const auto start = std::chrono::steady_clock::now();
  try {
    SqpOptions opts;
    opts.feas_tol = config.feas_tol;
    opts.opt_tol = config.opt_tol;
    opts.max_major = config.max_major;
    const SolveReport r = multistart(
        [&](int k) { return assemble(problem, perturbed_guess(config.guess, k, config.seed)); }, config.seeds,
        opts);
    rec.status = r.status;
    rec.major_iterations = r.major_iterations;
    rec.cost = r.final_cost;
    rec.feasibility = r.feasibility;
    rec.optimality = r.optimality;
    rec.starts = r.starts;
    rec.best_start = r.best_start;
    rec.start_statuses = r.start_statuses;
    rec.message = r.message;
    if (r.x_star.size() == problem->variable_count()) {
      rec.tf = problem->final_time(r.x_star);
      const Eigen::VectorXd design = problem->design(r.x_star);
      rec.design.assign(design.data(), design.data() + design.size());
      if (rec.feasible()) rec.samples = resample(*problem, r.x_star);
    }
  } catch (const NlpError& e) {
    rec.error = error_of("NlpError", e);
  } catch (const DynamicsError& e) {
    rec.error = error_of("DynamicsError", e);
  } catch (const SingularBasisError& e) {
    rec.error = error_of("SingularBasisError", e);
  } catch (const GeomError& e) {
    rec.error = error_of("GeomError", e);
  } catch (const std::exception& e) {
    rec.error = error_of("exception", e);
  }
  if (rec.error) {
    rec.status = SolveStatus::NumericalFailure;
    rec.message = rec.error->message;
    rec.samples.resize(0, 0);
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

BenchmarkReport run(const RunConfig& config) { return BenchmarkReport{{run_record(config)}}; }

BenchmarkReport compare(const std::vector<RunConfig>& configs, bool parallel) {
  if (configs.size() < 2) throw ConfigError("compare needs at least two configurations");
  for (const auto& c : configs) {
    RunConfig a = c, b = configs.front();
    a.scheme = b.scheme;
    a.label = b.label;
    if (config_to_json(a, false) != config_to_json(b, false))
      throw ConfigError("compared configurations may differ only in the scheme");
    validate(c);
  }
  std::vector<RunConfig> ordered = configs;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const RunConfig& a, const RunConfig& b) { return a.scheme < b.scheme; });

  BenchmarkReport report;
  if (parallel) {
    std::vector<std::future<RunRecord>> jobs;
    for (const auto& c : ordered) jobs.push_back(std::async(std::launch::async, run_record, c));
    for (auto& j : jobs) report.runs.push_back(j.get());
  } else {
    for (const auto& c : ordered) report.runs.push_back(run_record(c));
  }
  return report;
}

void write_table(const BenchmarkReport& report, std::ostream& out) {
  out << std::left << std::setw(10) << "Scheme" << std::setw(28) << "Major iterations" << std::setw(12) << "Cost"
      << std::setw(14) << "Feasibility" << "Status\n";
  for (const auto& r : report.runs) {
    std::ostringstream it, cost, feas;
    if (r.feasible()) {
      it << r.major_iterations;
      cost << std::setprecision(4) << r.cost;
    } else {
      if (r.error)
        it << r.error->kind;
      else if (r.status == SolveStatus::IterLimit)
        it << "> " << r.major_iterations;
      else if (r.status == SolveStatus::Infeasible)
        it << "No feasible solution found";
      else
        it << "Numerical failure";
      cost << "-";
    }
    feas << std::scientific << std::setprecision(2) << r.feasibility;
    out << std::left << std::setw(10) << to_string(r.config.scheme) << std::setw(28) << it.str() << std::setw(12)
        << cost.str() << std::setw(14) << feas.str() << to_string(r.status) << "\n";
  }
}

namespace {

ordered_json record_json(const RunRecord& r, bool timing) {
  ordered_json j;
  j["digest"] = r.digest;
  j["config"] = config_json(r.config, true);
  j["status"] = to_string(r.status);
  j["major_iterations"] = r.major_iterations;
  j["cost"] = number(r.cost);
  j["feasibility"] = number(r.feasibility);
  j["optimality"] = number(r.optimality);
  j["tf"] = number(r.tf);
  j["design_names"] = r.design_names;
  j["design"] = ordered_json::array();
  for (double v : r.design) j["design"].push_back(number(v));
  j["starts"] = r.starts;
  j["best_start"] = r.best_start;
  j["start_statuses"] = ordered_json::array();
  for (auto s : r.start_statuses) j["start_statuses"].push_back(to_string(s));
  if (timing) j["wall_time"] = r.wall_time;
  j["message"] = r.message;
  j["error"] = r.error ? ordered_json{{"kind", r.error->kind}, {"message", r.error->message}} : ordered_json();
  j["published"] = r.published ? ordered_json{{"major_iterations", r.published->major_iterations},
                                              {"cost", r.published->cost},
                                              {"design", r.published->design}}
                               : ordered_json();
  j["dim_q"] = r.dim_q;
  j["dim_u"] = r.dim_u;
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < r.samples.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index k = 0; k < r.samples.cols(); ++k) row.push_back(number(r.samples(i, k)));
    rows.push_back(std::move(row));
  }
  j["samples"] = std::move(rows);
  return j;
}

RunRecord record_from(const ordered_json& j) {
  RunRecord r;
  r.digest = j.at("digest").get<std::string>();
  r.config = overlay(j.at("config"), RunConfig{});
  r.status = status_from_string(j.at("status").get<std::string>());
  r.major_iterations = j.at("major_iterations").get<int>();
  r.cost = number(j.at("cost"));
  r.feasibility = number(j.at("feasibility"));
  r.optimality = number(j.at("optimality"));
  r.tf = number(j.at("tf"));
  r.design_names = j.at("design_names").get<std::vector<std::string>>();
  for (const auto& v : j.at("design")) r.design.push_back(number(v));
  r.starts = j.at("starts").get<int>();
  r.best_start = j.at("best_start").get<int>();
  for (const auto& s : j.at("start_statuses")) r.start_statuses.push_back(status_from_string(s.get<std::string>()));
  if (j.contains("wall_time")) r.wall_time = j.at("wall_time").get<double>();
  r.message = j.at("message").get<std::string>();
  if (const auto& e = j.at("error"); !e.is_null())
    r.error = RunError{e.at("kind").get<std::string>(), e.at("message").get<std::string>()};
  if (const auto& p = j.at("published"); !p.is_null())
    r.published = PublishedResult{p.at("major_iterations").get<std::string>(), p.at("cost").get<std::string>(),
                                  p.at("design").get<std::string>()};
  r.dim_q = j.at("dim_q").get<int>();
  r.dim_u = j.at("dim_u").get<int>();
  const auto& rows = j.at("samples");
  if (!rows.empty()) {
    r.samples.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < rows[i].size(); ++k)
        r.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = number(rows[i][k]);
  }
  return r;
}

}  // namespace

std::string report_to_json(const BenchmarkReport& report, bool include_timing) {
  ordered_json j;
  j["format"] = "pmoc-report-1";
  j["runs"] = ordered_json::array();
  for (const auto& r : report.runs) j["runs"].push_back(record_json(r, include_timing));
  return j.dump(1) + "\n";
}

BenchmarkReport report_from_json(const std::string& text) {
  try {
    const ordered_json j = ordered_json::parse(text);
    if (j.at("format") != "pmoc-report-1") throw ConfigError("unsupported report format");
    BenchmarkReport report;
    for (const auto& r : j.at("runs")) report.runs.push_back(record_from(r));
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
}

void save_report(const BenchmarkReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << report_to_json(report);
}

BenchmarkReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return report_from_json(buf.str());
}

void export_trajectory(const RunRecord& r, std::ostream& out) {
  if (!r.feasible() || r.samples.rows() == 0)
    throw ConfigError("run " + r.digest + " has no feasible solution (status " + to_string(r.status) +
                      "); nothing to export");
  const int d = r.dim_q, m = r.dim_u;
  out << "t";
  for (const char* prefix : {"q", "v"})
    for (int i = 1; i <= d; ++i) out << "," << prefix << i;
  for (int i = 1; i <= m; ++i) out << ",u" << i;
  for (int i = 1; i <= d; ++i) out << ",p" << i;
  out << "\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < r.samples.rows(); ++i) {
    for (Eigen::Index k = 0; k < r.samples.cols(); ++k) out << (k ? "," : "") << r.samples(i, k);
    out << "\n";
  }
}

void export_trajectory(const BenchmarkReport& report, const std::filesystem::path& path, int run) {
  if (run < 0 || run >= static_cast<int>(report.runs.size())) throw ConfigError("no such run in the report");
  const RunRecord& r = report.runs[static_cast<std::size_t>(run)];
  std::ostringstream buf;
  export_trajectory(r, buf);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << buf.str();
}

int exit_code(const RunRecord& r) {
  if (r.feasible()) return 0;
  if (r.status == SolveStatus::IterLimit && r.feasibility <= r.config.feas_tol) return 0;
  if (r.status == SolveStatus::Infeasible || r.status == SolveStatus::IterLimit) return 2;
  return 3;
}

}  // namespace pmoc
