#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "pmoc/cli.hpp"

using namespace pmoc;
using doctest::Approx;

namespace {

RunConfig double_integrator(double opt_tol = 1e-5) {
  RunConfig c;
  c.system = SystemKind::PointMass;
  c.n = 8;
  c.tf_min = c.tf_max = 1.0;
  c.opt_tol = opt_tol;
  return c;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<double> split_row(const std::string& line) {
  std::vector<double> out;
  std::istringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');) out.push_back(std::stod(cell));
  return out;
}

}  // namespace

TEST_CASE("config defaults and names") {
  const RunConfig c;
  CHECK(c.system == SystemKind::Acrobot);
  CHECK(c.scheme == SchemeKind::Pmoc);
  CHECK(c.basis == FamilyKind::Chebyshev);
  CHECK(c.n == 64);
  CHECK(c.tf_min == 1.0);
  CHECK(c.tf_max == 10.0);
  CHECK(c.guess.amplitude == 1.0);
  CHECK(c.guess.frequency == 1.0);
  CHECK(c.guess.torque == 0.5);
  CHECK(c.guess.kp == 5.0);
  CHECK(c.seeds == 1);
  CHECK_NOTHROW(validate(c));
  for (auto s : {SystemKind::Acrobot, SystemKind::Crobot3, SystemKind::PointMass, SystemKind::Pendulum})
    CHECK(system_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(system_from_string("cartpole"), ConfigError);
}

TEST_CASE("config parsing") {
  SUBCASE("round trip") {
    RunConfig c;
    c.system = SystemKind::Crobot3;
    c.scheme = SchemeKind::OdeEl;
    c.basis = FamilyKind::Legendre;
    c.n = 33;
    c.tf_guess = 4.25;
    c.optimize_lengths = true;
    c.guess.strategy = GuessStrategy::ConstantTorquePlusPD;
    c.guess.amplitude = 0.1 + 0.2;
    c.seeds = 5;
    c.seed = 123456789012345ULL;
    c.out_dir = "/tmp/x";
    const RunConfig back = config_from_json(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(back.guess.amplitude == c.guess.amplitude);
    CHECK(back.seed == c.seed);
  }
  SUBCASE("file keys overlay the base and later overlays win") {
    RunConfig base;
    base.n = 16;
    const RunConfig file = config_from_json(R"({"system": "pendulum", "guess": {"kp": 2.5}})", base);
    CHECK(file.system == SystemKind::Pendulum);
    CHECK(file.n == 16);
    CHECK(file.guess.kp == 2.5);
    CHECK(file.guess.kd == 1.0);
    const RunConfig flags = config_from_json(R"({"n": 24})", file);
    CHECK(flags.n == 24);
    CHECK(flags.system == SystemKind::Pendulum);
  }
  SUBCASE("load from disk") {
    const auto path = std::filesystem::temp_directory_path() / "pmoc_test_config.json";
    std::ofstream(path) << R"({"scheme": "dae-el", "tf_max": 4})";
    const RunConfig c = load_config(path);
    CHECK(c.scheme == SchemeKind::DaeEl);
    CHECK(c.tf_max == 4.0);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_config(path), ConfigError);
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS(config_from_json("{"), ConfigError);
    CHECK_THROWS_AS(config_from_json("[]"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"nodes": 3})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"n": "many"})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"scheme": "rk4"})"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"guess": {"gain": 1}})"), ConfigError);
    RunConfig c;
    c.n = 1;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = RunConfig{};
    c.tf_min = 3.0;
    c.tf_max = 2.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = RunConfig{};
    c.optimize_lengths = true;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = RunConfig{};
    c.seeds = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
  }
}

TEST_CASE("config digest") {
  const RunConfig a;
  RunConfig b = a;
  CHECK(config_digest(a).size() == 16);
  CHECK(config_digest(a) == config_digest(b));
  b.out_dir = "elsewhere";
  b.label = "named";
  CHECK(config_digest(a) == config_digest(b));
  b.guess.frequency = 1.5;
  CHECK(config_digest(a) != config_digest(b));
  b = a;
  b.seed = 8;
  CHECK(config_digest(a) != config_digest(b));
}

TEST_CASE("published results") {
  RunConfig c;
  REQUIRE(published_result(c).has_value());
  CHECK(published_result(c)->cost == "0.63");
  CHECK(published_result(c)->major_iterations == "218");
  c.scheme = SchemeKind::DaeEl;
  CHECK(published_result(c)->major_iterations == "No feasible solution found");
  c.system = SystemKind::Crobot3;
  c.scheme = SchemeKind::Pmoc;
  c.optimize_lengths = true;
  CHECK(published_result(c)->design == "(0.3, 0.7)");
  c.n = 32;
  CHECK_FALSE(published_result(c).has_value());
  CHECK_FALSE(published_result(double_integrator()).has_value());
}

TEST_CASE("double integrator run") {
  const BenchmarkReport report = run(double_integrator());
  REQUIRE(report.runs.size() == 1);
  const RunRecord& r = report.runs.front();
  CHECK(r.status == SolveStatus::Optimal);
  CHECK(r.cost == Approx(12.0).epsilon(1e-6));
  CHECK(r.feasibility <= 1e-6);
  CHECK(r.tf == 1.0);
  CHECK(r.digest == config_digest(r.config));
  CHECK_FALSE(r.error.has_value());
  CHECK(r.samples.rows() == kTrajectorySamples);
  CHECK(r.samples.cols() == 5);
  CHECK(exit_code(r) == 0);
}

TEST_CASE("trajectory export") {
  const BenchmarkReport report = run(double_integrator(1e-8));
  std::ostringstream out;
  export_trajectory(report.runs.front(), out);
  const auto lines = lines_of(out.str());
  REQUIRE(lines.size() == 1 + kTrajectorySamples);
  CHECK(lines[0] == "t,q1,v1,u1,p1");

  const auto first = split_row(lines[1]);
  CHECK(first[0] == 0.0);
  CHECK(std::abs(first[1]) < 1e-12);
  CHECK(std::abs(first[2]) < 1e-12);
  const auto last = split_row(lines.back());
  CHECK(last[0] == 1.0);
  CHECK(last[1] == Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(last[2]) < 1e-12);

  double prev = -1.0, worst = 0.0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto row = split_row(lines[i]);
    REQUIRE(row.size() == 5);
    CHECK(row[0] > prev);
    prev = row[0];
    worst = std::max(worst, std::abs(row[3] - (6.0 - 12.0 * row[0])));
    // unit mass: momentum equals velocity
    CHECK(row[4] == Approx(row[2]).epsilon(1e-12));
  }
  CHECK(worst < 1e-5);

  RunRecord failed = report.runs.front();
  failed.status = SolveStatus::Infeasible;
  std::ostringstream sink;
  CHECK_THROWS_AS(export_trajectory(failed, sink), ConfigError);
  CHECK(sink.str().empty());
  CHECK_THROWS_AS(export_trajectory(report, std::filesystem::temp_directory_path() / "pmoc_x.csv", 3), ConfigError);

  const auto path = std::filesystem::temp_directory_path() / "pmoc_test_export" / "traj.csv";
  export_trajectory(report, path);
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  CHECK(buf.str() == out.str());
  std::filesystem::remove_all(path.parent_path());
}

TEST_CASE("report serialization") {
  BenchmarkReport report = run(double_integrator());
  RunRecord extra = report.runs.front();
  extra.status = SolveStatus::NumericalFailure;
  extra.error = RunError{"NlpError", "objective is not finite"};
  extra.cost = std::nan("");
  extra.samples.resize(0, 0);
  extra.published = PublishedResult{"> 1758", "-", ""};
  extra.design_names = {"l2", "l3"};
  extra.design = {0.1 + 0.2, 1.0 / 3.0};
  report.runs.push_back(extra);

  const std::string text = report_to_json(report);
  const BenchmarkReport back = report_from_json(text);
  CHECK(report_to_json(back) == text);
  REQUIRE(back.runs.size() == 2);
  const RunRecord& a = report.runs[0];
  const RunRecord& b = back.runs[0];
  CHECK(b.cost == a.cost);
  CHECK(b.feasibility == a.feasibility);
  CHECK(b.wall_time == a.wall_time);
  CHECK((b.samples - a.samples).cwiseAbs().maxCoeff() == 0.0);
  CHECK(std::isnan(back.runs[1].cost));
  REQUIRE(back.runs[1].error.has_value());
  CHECK(back.runs[1].error->kind == "NlpError");
  CHECK(back.runs[1].design[0] == 0.1 + 0.2);
  CHECK(back.runs[1].published->major_iterations == "> 1758");

  const auto path = std::filesystem::temp_directory_path() / "pmoc_test_report" / "report.json";
  save_report(report, path);
  CHECK(report_to_json(load_report(path)) == text);
  std::filesystem::remove_all(path.parent_path());

  CHECK_THROWS_AS(report_from_json("{}"), ConfigError);
  CHECK_THROWS_AS(report_from_json(R"({"format": "other", "runs": []})"), ConfigError);
}

TEST_CASE("identical configurations give identical reports") {
  RunConfig c;
  c.system = SystemKind::Pendulum;
  c.n = 16;
  c.tf_max = 6.0;
  c.seeds = 3;
  const std::string a = report_to_json(run(c), false);
  const std::string b = report_to_json(run(c), false);
  CHECK(a == b);
  CHECK(a.find("wall_time") == std::string::npos);
}

TEST_CASE("3crobot length optimization keeps the coupling") {
  RunConfig c;
  c.system = SystemKind::Crobot3;
  c.optimize_lengths = true;
  c.n = 16;
  c.guess.strategy = GuessStrategy::ConstantTorquePlusPD;
  c.guess.amplitude = 0.3;
  c.guess.frequency = 1.5;
  const RunRecord r = run_record(c);
  CHECK(r.feasible());
  REQUIRE(r.design.size() == 2);
  CHECK(r.design_names == std::vector<std::string>{"l2", "l3"});
  CHECK(std::abs(r.design[0] + r.design[1] - 1.0) < 1e-8);
  CHECK(r.samples.cols() == 1 + 3 * 3 + 1);
}

TEST_CASE("compare") {
  SUBCASE("ordering and table") {
    RunConfig base = double_integrator();
    std::vector<RunConfig> configs(3, base);
    configs[0].scheme = SchemeKind::OdeEl;
    configs[1].scheme = SchemeKind::Pmoc;
    configs[2].scheme = SchemeKind::DaeEl;
    const BenchmarkReport report = compare(configs);
    REQUIRE(report.runs.size() == 3);
    CHECK(report.runs[0].config.scheme == SchemeKind::Pmoc);
    CHECK(report.runs[1].config.scheme == SchemeKind::DaeEl);
    CHECK(report.runs[2].config.scheme == SchemeKind::OdeEl);
    for (const auto& r : report.runs) CHECK(r.cost == Approx(12.0).epsilon(1e-5));
    CHECK(report_to_json(report, false) == report_to_json(compare(configs, false), false));

    std::ostringstream table;
    write_table(report, table);
    const auto lines = lines_of(table.str());
    REQUIRE(lines.size() == 4);
    CHECK(lines[0].rfind("Scheme", 0) == 0);
    CHECK(lines[1].rfind("pmoc", 0) == 0);
    CHECK(lines[2].rfind("dae-el", 0) == 0);
    CHECK(lines[3].rfind("ode-el", 0) == 0);
  }
  SUBCASE("failures are rows, not exceptions") {
    RunConfig base;
    base.system = SystemKind::Pendulum;
    base.n = 16;
    base.max_major = 2;
    std::vector<RunConfig> configs(2, base);
    configs[1].scheme = SchemeKind::OdeEl;
    const BenchmarkReport report = compare(configs);
    REQUIRE(report.runs.size() == 2);
    std::ostringstream table;
    write_table(report, table);
    for (const auto& r : report.runs) {
      CHECK(r.status == SolveStatus::IterLimit);
      CHECK(exit_code(r) != 0);
      CHECK(r.samples.rows() == 0);
    }
    CHECK(table.str().find("> 2") != std::string::npos);
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(compare({RunConfig{}}), ConfigError);
    RunConfig a, b;
    b.scheme = SchemeKind::OdeEl;
    b.n = 32;
    CHECK_THROWS_AS(compare({a, b}), ConfigError);
  }
}

TEST_CASE("exit codes") {
  RunRecord r;
  r.config = RunConfig{};
  r.status = SolveStatus::Optimal;
  CHECK(exit_code(r) == 0);
  r.status = SolveStatus::Feasible;
  CHECK(exit_code(r) == 0);
  r.status = SolveStatus::Infeasible;
  CHECK(exit_code(r) == 2);
  r.status = SolveStatus::IterLimit;
  r.feasibility = 1e-3;
  CHECK(exit_code(r) == 2);
  r.feasibility = 1e-9;
  CHECK(exit_code(r) == 0);
  r.status = SolveStatus::NumericalFailure;
  CHECK(exit_code(r) == 3);
}
