#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pmoc {

/// Lagrangian and its partials at one (q, v).
///   lq  = dL/dq,  lv = dL/dv (the momentum),
///   lvv = d2L/dv2 (mass matrix),
///   lqv(a, b) = d2L / dv_a dq_b, so that d/dt lv = lvv qdd + lqv qd.
struct LagrangianTerms {
  double value = 0.0;
  Eigen::VectorXd lq;
  Eigen::VectorXd lv;
  Eigen::MatrixXd lvv;
  Eigen::MatrixXd lqv;
};

struct DesignParameter {
  std::string name;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

class DynamicsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A mechanical system on a Euclidean chart. Implementations are immutable;
/// every evaluator is pure.
class LagrangianModel : public std::enable_shared_from_this<LagrangianModel> {
 public:
  virtual ~LagrangianModel() = default;

  virtual std::string name() const = 0;
  virtual int dim_q() const = 0;
  int dim_u() const { return static_cast<int>(actuation().cols()); }

  /// Constant map from controls to generalized forces, dim_q x dim_u.
  virtual const Eigen::MatrixXd& actuation() const = 0;

  virtual LagrangianTerms evaluate(const Eigen::VectorXd& q, const Eigen::VectorXd& v) const = 0;

  virtual std::vector<DesignParameter> design_params() const { return {}; }

  /// Same system with the design parameters replaced (in design_params() order).
  virtual std::shared_ptr<const LagrangianModel> with_design(std::span<const double> values) const;

  /// Coordinates absent from the Lagrangian.
  virtual std::vector<int> cyclic_coordinates() const { return {}; }

  double lagrangian(const Eigen::VectorXd& q, const Eigen::VectorXd& v) const {
    return evaluate(q, v).value;
  }
  Eigen::VectorXd momentum(const Eigen::VectorXd& q, const Eigen::VectorXd& v) const {
    return evaluate(q, v).lv;
  }
  double energy(const Eigen::VectorXd& q, const Eigen::VectorXd& v) const {
    const auto terms = evaluate(q, v);
    return terms.lv.dot(v) - terms.value;
  }
};

using ModelPtr = std::shared_ptr<const LagrangianModel>;

/// Planar chain of point masses hanging from a fixed pivot. Mass i sits at
/// the distal end of link i. theta_1 is measured from the downward vertical,
/// the remaining angles are relative joint angles.
class PendulumChain final : public LagrangianModel {
 public:
  struct Spec {
    std::string name;
    std::vector<double> lengths;
    std::vector<double> masses;
    double gravity = 1.0;
    Eigen::MatrixXd actuation;
    std::vector<int> design_links;  // links whose length is a design parameter
    double design_lower = 0.05;
    double design_upper = 0.95;
  };

  explicit PendulumChain(Spec spec);

  std::string name() const override { return spec_.name; }
  int dim_q() const override { return static_cast<int>(spec_.lengths.size()); }
  const Eigen::MatrixXd& actuation() const override { return spec_.actuation; }
  LagrangianTerms evaluate(const Eigen::VectorXd& q, const Eigen::VectorXd& v) const override;
  std::vector<DesignParameter> design_params() const override;
  std::shared_ptr<const LagrangianModel> with_design(std::span<const double> values) const override;
  std::vector<int> cyclic_coordinates() const override;

  const Spec& spec() const { return spec_; }

 private:
  Spec spec_;
  std::vector<double> tail_mass_;  // sum of masses from link j outward
};

/// L = |v|^2 / 2, fully actuated.
class PointMass final : public LagrangianModel {
 public:
  explicit PointMass(int dim = 1);

  std::string name() const override { return "pointmass"; }
  int dim_q() const override { return dim_; }
  const Eigen::MatrixXd& actuation() const override { return actuation_; }
  LagrangianTerms evaluate(const Eigen::VectorXd& q, const Eigen::VectorXd& v) const override;
  std::vector<int> cyclic_coordinates() const override;

 private:
  int dim_;
  Eigen::MatrixXd actuation_;
};

/// Two-link pendulum, unit masses and lengths, torque on the elbow only.
ModelPtr make_acrobot(double gravity = 1.0);
/// Three-link pendulum with links 1, l2, l3 and torque on the last joint.
/// l2 and l3 are exposed as design parameters.
ModelPtr make_3crobot(double l2 = 0.5, double l3 = 0.5);
/// Single unit pendulum with a torque at the pivot.
ModelPtr make_pendulum(double gravity = 1.0);
ModelPtr make_point_mass(int dim = 1);

/// Solves lvv a = lq + B u - lqv v.
Eigen::VectorXd forward_dynamics(const LagrangianModel& model, const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& v, const Eigen::VectorXd& u);

/// Same as forward_dynamics with an arbitrary generalized force.
Eigen::VectorXd forced_dynamics(const LagrangianModel& model, const Eigen::VectorXd& q,
                                const Eigen::VectorXd& v, const Eigen::VectorXd& force);

struct Trajectory {
  std::vector<double> t;
  Eigen::MatrixXd q;  // dim_q x samples
  Eigen::MatrixXd v;
};

using ForceLaw =
    std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& q, const Eigen::VectorXd& v)>;
using ControlSignal = std::function<Eigen::VectorXd(double t)>;

struct SimulationOptions {
  double tolerance = 1e-10;
  std::size_t max_steps = 200000;
};

/// Adaptive high-order integration of the forced Euler-Lagrange equations,
/// reporting the state at each of `times` (ascending, starting at or after 0).
/// Test oracle and initial-guess generator; never used inside the optimizer.
Trajectory reference_simulate(const LagrangianModel& model, const Eigen::VectorXd& q0,
                              const Eigen::VectorXd& v0, const ForceLaw& force,
                              std::span<const double> times, const SimulationOptions& opts = {});

Trajectory reference_simulate(const LagrangianModel& model, const Eigen::VectorXd& q0,
                              const Eigen::VectorXd& v0, const ControlSignal& control,
                              std::span<const double> times, const SimulationOptions& opts = {});

}  // namespace pmoc
