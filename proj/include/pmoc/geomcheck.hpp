#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "pmoc/mechsys.hpp"
#include "pmoc/polybasis.hpp"
#include "pmoc/scheme.hpp"

namespace pmoc {

class GeomError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FlowOptions {
  double tolerance = 1e-10;  // max |row| of the square system
  int max_iterations = 60;
  std::optional<Eigen::MatrixXd> pairing;  // replaces D in the D^T G lv term
};

/// Endpoint of the discrete flow for one initial state.
struct FlowEndpoint {
  Eigen::VectorXd q_final;       // Lf q
  Eigen::VectorXd p_final;       // boundary momentum solved for at t_f
  Eigen::VectorXd p_polynomial;  // momentum polynomial evaluated at t_f
  Eigen::MatrixXd q_grid;
  double residual = 0.0;
  int iterations = 0;
};

/// Solves the square system
///   weak_form_rows(q, u, p0, p_f) = 0,   L0 q = q0
/// for the grid q and the final momentum p_f with u held fixed. Throws
/// GeomError when damped Newton does not reach the tolerance.
FlowEndpoint discrete_flow(const LagrangianModel& model, std::shared_ptr<const SpectralBasis> basis,
                           const Eigen::MatrixXd& u, const Eigen::VectorXd& q0, const Eigen::VectorXd& p0,
                           double tf, const FlowOptions& options = {});

struct FlowMapProbe {
  ModelPtr model;
  std::shared_ptr<const SpectralBasis> basis;
  Eigen::MatrixXd u;  // dim_u x N; empty means zero
  double tf = 1.0;
  Eigen::VectorXd q0;
  Eigen::VectorXd p0;
  double tolerance = 1e-10;
  double epsilon = 1e-5;
  std::optional<Eigen::MatrixXd> pairing;
};

struct SymplecticDefect {
  Eigen::MatrixXd jacobian;  // d(q_f, p_f) / d(q0, p0)
  double defect = 0.0;       // max |J^T Omega J - Omega|
  double epsilon = 0.0;
};

/// Omega = [[0, -I], [I, 0]] of size 2d.
Eigen::MatrixXd symplectic_form(int d);

/// Central differences of the flow map with steps epsilon (1 + |z_i|).
SymplecticDefect symplectic_defect(const FlowMapProbe& probe);

/// Probe at epsilon and epsilon / 2.
struct DefectScaling {
  SymplecticDefect coarse;
  SymplecticDefect fine;
  double ratio = 0.0;  // coarse / fine, near 4 when the probe error is O(eps^2)
};
DefectScaling defect_scaling(const FlowMapProbe& probe);

/// PMOC probe for the pendulum with u = 0; `broken` pairs with D^T instead of D.
FlowMapProbe pendulum_probe(int n, double tf = 3.0, bool broken = false);

/// max - min of momentum component `cyclic_index` of the momentum polynomial
/// over 4N uniform canonical times. The coordinate must be cyclic and receive
/// no generalized force from the solution's controls.
double momentum_drift(const DiscretizedProblem& problem, const Eigen::VectorXd& x, int cyclic_index);

struct SettleResult {
  Eigen::VectorXd x;
  double residual = 0.0;  // max |residual|
  int iterations = 0;
};

/// Gauss-Newton on the full residual over the q (and v) segments, with the
/// controls, t_f and design parameters held at their values in `guess`.
SettleResult settle(const DiscretizedProblem& problem, const Eigen::VectorXd& guess, double tolerance = 1e-12,
                    int max_iterations = 50);

struct DriftCase {
  double drift = 0.0;
  double residual = 0.0;            // max |dynamics residual| at the settled trajectory
  double momentum = 0.0;            // conserved value from the reference integrator
  double endpoint_error = 0.0;      // max |q - q_reference| over the nodes
};

/// Gravity-free acrobot, u = 0, initial state fixed and final state free.
/// The trajectory is settled under `kind` from a reference simulation.
DriftCase gravity_free_drift(SchemeKind kind, int n, double tf = 2.0);

/// Smooth trajectory driven by a known control, integrated to high accuracy
/// to serve as the oracle for residual convergence.
struct ConvergenceFixture {
  ModelPtr model;
  double tf = 1.0;
  Eigen::VectorXd q0;
  Eigen::VectorXd v0;
  ControlSignal control;
};

/// Pendulum under the torque that yields q = 0.6 sin(1.3 t) + 0.3 cos t on [0, 10].
ConvergenceFixture pendulum_fixture();
/// Point mass under a constant force: polynomial motion.
ConvergenceFixture point_mass_fixture();

struct ConvergenceRow {
  int n = 0;
  double residual = 0.0;  // max |dynamics residual| at the resampled oracle
};

std::vector<ConvergenceRow> convergence_study(const ConvergenceFixture& fixture, SchemeKind kind,
                                              const std::vector<int>& sizes,
                                              FamilyKind family = FamilyKind::Chebyshev);

struct StudyRow {
  int n = 0;
  double residual = 0.0;  // PMOC convergence residual on the pendulum fixture
  double defect = 0.0;    // pendulum flow-map defect, t_f = 3
  double drift = 0.0;     // gravity-free acrobot momentum drift
};

std::vector<StudyRow> geometry_study(const std::vector<int>& sizes);

/// Header `N,residual,defect,drift`, one row per entry.
void write_study_csv(const std::vector<StudyRow>& rows, std::ostream& out);

}  // namespace pmoc
