#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmoc/mechsys.hpp"
#include "pmoc/polybasis.hpp"

namespace pmoc {

enum class SchemeKind { Pmoc, DaeEl, OdeEl };

std::string to_string(SchemeKind kind);
SchemeKind scheme_from_string(const std::string& name);

/// Affine map s in [-1, 1] -> t = (tf / 2)(s + 1). tf is a decision variable
/// whenever tf_max > tf_min.
struct TimeScaling {
  double tf = 1.0;  // fixed value, or initial guess when free
  double tf_min = 1.0;
  double tf_max = 1.0;

  static TimeScaling fixed(double tf) { return {tf, tf, tf}; }
  static TimeScaling bounded(double guess, double lo, double hi) { return {guess, lo, hi}; }

  bool is_free() const { return tf_max > tf_min; }
};

/// Targets for one end of the trajectory. A missing value leaves that
/// component free. Wrapped components use sin((q - target) / 2), which
/// vanishes at every target + 2 pi k.
struct EndCondition {
  std::vector<std::optional<double>> q;
  std::vector<std::optional<double>> v;
  std::vector<bool> wrap;

  static EndCondition state(const Eigen::VectorXd& q, const Eigen::VectorXd& v);
  static EndCondition free(int dim);

  int fixed_count() const;
};

struct BoundaryConditions {
  EndCondition initial;
  EndCondition final;
};

/// Running cost l(q, v, u); empty means the effort cost |u|^2.
using RunningCost =
    std::function<double(const Eigen::VectorXd& q, const Eigen::VectorXd& v, const Eigen::VectorXd& u)>;

struct SchemeOptions {
  bool optimize_design = false;
  std::optional<double> design_sum;  // linear coupling sum(design) = value
  RunningCost running_cost;
};

/// Offsets of each segment of the flat decision vector. Grids are stored
/// channel-major: x[offset + i * N + k] is channel i at node k.
struct DecisionLayout {
  int nodes = 0;
  int dim_q = 0;
  int dim_u = 0;
  int q_offset = 0;
  int v_offset = -1;
  int u_offset = 0;
  int tf_offset = -1;
  int design_offset = -1;
  int design_count = 0;
  int size = 0;
};

class DiscretizedProblem {
 public:
  DiscretizedProblem(SchemeKind kind, ModelPtr model, std::shared_ptr<const SpectralBasis> basis,
                     BoundaryConditions bc, TimeScaling scaling, SchemeOptions options = {});

  SchemeKind kind() const { return kind_; }
  const LagrangianModel& model() const { return *model_; }
  ModelPtr model_ptr() const { return model_; }
  const SpectralBasis& basis() const { return *basis_; }
  std::shared_ptr<const SpectralBasis> basis_ptr() const { return basis_; }
  const BoundaryConditions& boundary() const { return bc_; }
  const TimeScaling& scaling() const { return scaling_; }
  const SchemeOptions& options() const { return options_; }
  const DecisionLayout& layout() const { return layout_; }

  int variable_count() const { return layout_.size; }
  int residual_count() const { return dynamics_count_ + boundary_count_ + coupling_count_; }
  int dynamics_count() const { return dynamics_count_; }
  int boundary_count() const { return boundary_count_; }

  /// Dynamics rows, then initial/final boundary rows, then the design coupling.
  Eigen::VectorXd residual(const Eigen::VectorXd& x) const;
  /// Only the discretized dynamics (and, for ODE-EL, kinematics) rows.
  Eigen::VectorXd dynamics_residual(const Eigen::VectorXd& x) const;

  /// d residual / dx by the chain rule through the node-wise partials.
  /// L_qq (and, for ODE-EL, the acceleration partials) come from node-local
  /// central differences; design-parameter columns from forward differences.
  Eigen::MatrixXd residual_jacobian(const Eigen::VectorXd& x) const;

  /// (tf / 2) 1^T G l with l[k] the running cost at node k.
  double objective(const Eigen::VectorXd& x) const;
  Eigen::VectorXd objective_gradient(const Eigen::VectorXd& x) const;

  Eigen::VectorXd lower_bounds() const;
  Eigen::VectorXd upper_bounds() const;

  double final_time(const Eigen::VectorXd& x) const;
  Eigen::VectorXd design(const Eigen::VectorXd& x) const;
  ModelPtr model_at(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd q_grid(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd u_grid(const Eigen::VectorXd& x) const;
  /// Physical-time velocities: the v segment for ODE-EL, (2/tf) D q otherwise.
  Eigen::MatrixXd velocity_grid(const Eigen::VectorXd& x) const;

  /// Assemble a decision vector. `v` is ignored unless the scheme carries a
  /// velocity grid; `design` defaults to the model's current values.
  Eigen::VectorXd pack(const Eigen::MatrixXd& q, const Eigen::MatrixXd& u, double tf,
                       const Eigen::MatrixXd& v = {}, const Eigen::VectorXd& design = {}) const;

  /// Physical times of the collocation nodes for a given tf.
  Eigen::VectorXd node_times(double tf) const;

 private:
  Eigen::VectorXd boundary_residual(const Eigen::MatrixXd& q, const Eigen::MatrixXd& v,
                                    double tf) const;

  SchemeKind kind_;
  ModelPtr model_;
  std::shared_ptr<const SpectralBasis> basis_;
  BoundaryConditions bc_;
  TimeScaling scaling_;
  SchemeOptions options_;
  DecisionLayout layout_;
  int dynamics_count_ = 0;
  int boundary_count_ = 0;
  int coupling_count_ = 0;
  Eigen::MatrixXd pmoc_operator_;  // D^T G - [Lf^T Lf - L0^T L0]
  Eigen::VectorXd integration_weights_;  // G 1
};

DiscretizedProblem build_pmoc(ModelPtr model, std::shared_ptr<const SpectralBasis> basis,
                              BoundaryConditions bc, TimeScaling scaling, SchemeOptions options = {});
DiscretizedProblem build_dae_el(ModelPtr model, std::shared_ptr<const SpectralBasis> basis,
                                BoundaryConditions bc, TimeScaling scaling,
                                SchemeOptions options = {});
DiscretizedProblem build_ode_el(ModelPtr model, std::shared_ptr<const SpectralBasis> basis,
                                BoundaryConditions bc, TimeScaling scaling,
                                SchemeOptions options = {});

/// Node-wise momentum lv(q(t_k), qdot(t_k)) as a grid function on the
/// problem's basis (canonical time).
GridFunction momentum_polynomial(const DiscretizedProblem& problem, const Eigen::VectorXd& x);

double objective_eval(const DiscretizedProblem& problem, const Eigen::VectorXd& x);

/// PMOC dynamics rows for given grids, with explicit boundary momenta:
///   (tf/2) G (lq + B u) + D^T G lv - Lf^T p_final + L0^T p_initial.
/// Passing the interpolated momenta (L0 lv, Lf lv) gives the PMOC residual.
/// `pairing` replaces D in the D^T G term; by default it is the basis D.
Eigen::MatrixXd weak_form_rows(const LagrangianModel& model, const SpectralBasis& basis,
                               const Eigen::MatrixXd& q, const Eigen::MatrixXd& u, double tf,
                               const Eigen::VectorXd& p_initial, const Eigen::VectorXd& p_final,
                               const Eigen::MatrixXd* pairing = nullptr);

}  // namespace pmoc
