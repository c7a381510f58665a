#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmoc/nlp.hpp"

namespace pmoc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SystemKind { Acrobot, Crobot3, PointMass, Pendulum };

std::string to_string(SystemKind system);
SystemKind system_from_string(const std::string& name);

struct RunConfig {
  SystemKind system = SystemKind::Acrobot;
  SchemeKind scheme = SchemeKind::Pmoc;
  FamilyKind basis = FamilyKind::Chebyshev;
  int n = 64;
  double tf_min = 1.0;
  double tf_max = 10.0;
  double tf_guess = 8.0;  // clamped into [tf_min, tf_max]
  bool optimize_lengths = false;
  InitialGuessSpec guess;
  int seeds = 1;
  std::uint64_t seed = 7;
  double feas_tol = 1e-6;
  double opt_tol = 1e-5;
  int max_major = 2000;
  std::string out_dir = ".";  // not part of the digest
  std::string label;

  bool fixed_tf() const { return tf_max <= tf_min; }
};

/// Serializes the configuration as a JSON object string.
std::string config_to_json(const RunConfig& config, bool include_output = true);
/// Overlays the keys present in `text` onto `base`. Unknown keys, wrong
/// types and out-of-range values raise ConfigError.
RunConfig config_from_json(const std::string& text, const RunConfig& base = {});
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = {});
/// Range and consistency checks; raises ConfigError.
void validate(const RunConfig& config);

/// FNV-1a 64 of the canonical configuration without output paths, as 16 hex digits.
std::string config_digest(const RunConfig& config);

struct RunError {
  std::string kind;  // exception class, e.g. "NlpError"
  std::string message;
};

/// Published figures for the same system and scheme, kept as text because
/// some entries are outcomes rather than numbers.
struct PublishedResult {
  std::string major_iterations;
  std::string cost;
  std::string design;
};

std::optional<PublishedResult> published_result(const RunConfig& config);

struct RunRecord {
  std::string digest;
  RunConfig config;
  SolveStatus status = SolveStatus::NumericalFailure;
  int major_iterations = 0;
  double cost = 0.0;
  double feasibility = 0.0;
  double optimality = 0.0;
  double tf = 0.0;
  std::vector<std::string> design_names;
  std::vector<double> design;
  int starts = 1;
  int best_start = 0;
  std::vector<SolveStatus> start_statuses;
  double wall_time = 0.0;
  std::string message;
  std::optional<RunError> error;
  std::optional<PublishedResult> published;
  /// 512 rows of t, q, v, u, p; empty when no solution exists.
  Eigen::MatrixXd samples;
  int dim_q = 0;
  int dim_u = 0;

  bool feasible() const { return status == SolveStatus::Optimal || status == SolveStatus::Feasible; }
};

struct BenchmarkReport {
  std::vector<RunRecord> runs;
};

inline constexpr int kTrajectorySamples = 512;

/// Builds the boundary-value problem for a configuration.
std::shared_ptr<const DiscretizedProblem> build_problem(const RunConfig& config);

/// Model, scheme and solver errors are caught and stored in the record.
/// ConfigError propagates.
RunRecord run_record(const RunConfig& config);
BenchmarkReport run(const RunConfig& config);

/// Configurations must differ only in the scheme. Runs execute concurrently
/// and are returned in pmoc, dae-el, ode-el order.
BenchmarkReport compare(const std::vector<RunConfig>& configs, bool parallel = true);

/// Scheme | Major iterations | Cost | Feasibility | Status rows.
void write_table(const BenchmarkReport& report, std::ostream& out);

std::string report_to_json(const BenchmarkReport& report, bool include_timing = true);
BenchmarkReport report_from_json(const std::string& text);
void save_report(const BenchmarkReport& report, const std::filesystem::path& path);
BenchmarkReport load_report(const std::filesystem::path& path);

/// CSV `t,q1..qd,v1..vd,u1..um,p1..pd` for one run. Throws ConfigError when
/// the run has no feasible solution.
void export_trajectory(const RunRecord& record, std::ostream& out);
void export_trajectory(const BenchmarkReport& report, const std::filesystem::path& path, int run = 0);

/// 0 for a feasible run (including an iteration limit reached at a feasible
/// point), 2 when no feasible point was found, 3 on numerical failure.
int exit_code(const RunRecord& record);

}  // namespace pmoc
