#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmoc/scheme.hpp"

namespace pmoc {

class NlpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// min f(x) s.t. c(x) = 0, lower <= x <= upper.
struct NlpInstance {
  int n = 0;
  int m = 0;
  std::function<double(const Eigen::VectorXd&)> objective;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;  // optional
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> constraints;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> constraint_jacobian;  // optional
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd x0;
  std::shared_ptr<const DiscretizedProblem> problem;  // set by assemble()
};

enum class SolveStatus { Optimal, Feasible, Infeasible, IterLimit, NumericalFailure };

std::string to_string(SolveStatus status);
SolveStatus status_from_string(const std::string& name);

struct SqpOptions {
  double feas_tol = 1e-6;
  double opt_tol = 1e-5;
  int max_major = 2000;
  bool finite_difference_jacobian = false;  // ignore constraint_jacobian
  int stall_window = 50;         // majors without feasibility progress before Infeasible
  double stall_decrease = 1e-8;  // relative decrease counted as progress
  bool verbose = false;
};

struct SolveReport {
  SolveStatus status = SolveStatus::NumericalFailure;
  int major_iterations = 0;
  double final_cost = 0.0;
  double feasibility = 0.0;
  double optimality = 0.0;
  Eigen::VectorXd x_star;
  Eigen::VectorXd multipliers;
  double wall_time = 0.0;
  std::string message;
  // per accepted step: l1 merit before and after, same penalty
  std::vector<std::pair<double, double>> merit_trace;
  int starts = 1;
  int best_start = 0;
  std::vector<std::string> start_summaries;
  std::vector<SolveStatus> start_statuses;
  std::vector<double> start_costs;

  bool feasible() const {
    return status == SolveStatus::Optimal || status == SolveStatus::Feasible;
  }
};

/// Forward differences, column j stepped by 1e-7 (1 + |x_j|).
Eigen::MatrixXd jacobian(const NlpInstance& instance, const Eigen::VectorXd& x);
/// The instance's own Jacobian when it has one, forward differences otherwise.
Eigen::MatrixXd constraint_jacobian(const NlpInstance& instance, const Eigen::VectorXd& x,
                                    bool finite_difference = false);
Eigen::VectorXd objective_gradient(const NlpInstance& instance, const Eigen::VectorXd& x);

struct KktCertificate {
  double feasibility = 0.0;  // max |c|
  double stationarity = 0.0;  // max |grad f + J^T lambda| over the free variables
  Eigen::VectorXd multipliers;
};

/// Least-squares multipliers and the resulting KKT residuals, recomputed from
/// scratch. Components at an active bound only count when the gradient points
/// into the feasible box.
KktCertificate verify_kkt(const NlpInstance& instance, const Eigen::VectorXd& x,
                          bool finite_difference = false);

SolveReport solve_sqp(const NlpInstance& instance, const SqpOptions& options = {});

enum class GuessStrategy { SinusoidalTorque, ConstantTorquePlusPD, Custom };

std::string to_string(GuessStrategy strategy);
GuessStrategy guess_from_string(const std::string& name);

struct InitialGuessSpec {
  GuessStrategy strategy = GuessStrategy::SinusoidalTorque;
  double amplitude = 1.0;
  double frequency = 1.0;
  double phase = 0.0;
  double torque = 0.5;
  double kp = 5.0;
  double kd = 1.0;
  Eigen::VectorXd custom;  // full decision vector for Custom
};

/// Flattens the problem into an NLP. The q and u grids of x0 come from
/// simulating the guess from the initial boundary state; t_f and the design
/// parameters start from the problem defaults, clamped into their bounds.
NlpInstance assemble(std::shared_ptr<const DiscretizedProblem> problem, const InitialGuessSpec& guess);

/// Start k of a multistart: k = 0 is the spec unchanged, later starts scale
/// the amplitude/torque by U(0.5, 1.5) and draw a uniform phase.
InitialGuessSpec perturbed_guess(const InitialGuessSpec& base, int k, std::uint64_t seed);

using InstanceGenerator = std::function<NlpInstance(int start)>;

/// Solves starts 0..K-1 and keeps the cheapest feasible report.
SolveReport multistart(const InstanceGenerator& generator, int starts, const SqpOptions& options = {});

/// Plain-text dump: sizes, bounds, x0 and a table of sampled (x, f, c) points.
void write_problem_dump(const NlpInstance& instance, std::ostream& out, int samples = 4,
                        std::uint64_t seed = 1);

}  // namespace pmoc
