#include "pmoc/geomcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>

namespace pmoc {

namespace {

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// v with lv(q0, v) = p0
Eigen::VectorXd velocity_from_momentum(const LagrangianModel& model, const Eigen::VectorXd& q0,
                                       const Eigen::VectorXd& p0) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(q0.size());
  for (int it = 0; it < 20; ++it) {
    const LagrangianTerms t = model.evaluate(q0, v);
    const Eigen::VectorXd step = t.lvv.partialPivLu().solve(p0 - t.lv);
    if (!step.allFinite()) break;
    v += step;
    if (max_abs(step) < 1e-14 * (1.0 + max_abs(v))) break;
  }
  return v;
}

struct FlowSystem {
  const LagrangianModel& model;
  const SpectralBasis& basis;
  const Eigen::MatrixXd& u;
  const Eigen::VectorXd& q0;
  const Eigen::VectorXd& p0;
  double tf;
  const Eigen::MatrixXd* pairing;
  int d;
  int n;

  Eigen::MatrixXd grid(const Eigen::VectorXd& z) const {
    Eigen::MatrixXd q(d, n);
    for (int i = 0; i < d; ++i) q.row(i) = z.segment(i * n, n).transpose();
    return q;
  }

  Eigen::VectorXd rows(const Eigen::VectorXd& z) const {
    const Eigen::MatrixXd q = grid(z);
    const Eigen::VectorXd pf = z.tail(d);
    const Eigen::MatrixXd w = weak_form_rows(model, basis, q, u, tf, p0, pf, pairing);
    Eigen::VectorXd r(d * n + d);
    for (int i = 0; i < d; ++i) r.segment(i * n, n) = w.row(i).transpose();
    r.tail(d) = q * basis.left_form().transpose() - q0;
    return r;
  }
};

}  // namespace

FlowEndpoint discrete_flow(const LagrangianModel& model, std::shared_ptr<const SpectralBasis> basis,
                           const Eigen::MatrixXd& u_in, const Eigen::VectorXd& q0, const Eigen::VectorXd& p0,
                           double tf, const FlowOptions& options) {
  if (!basis) throw std::invalid_argument("discrete_flow: null basis");
  const int d = model.dim_q();
  const int n = basis->size();
  if (q0.size() != d || p0.size() != d) throw std::invalid_argument("discrete_flow: state has the wrong size");
  if (!(tf > 0.0)) throw std::invalid_argument("discrete_flow: t_f must be positive");
  const Eigen::MatrixXd u = u_in.size() ? u_in : Eigen::MatrixXd::Zero(model.dim_u(), n);
  if (u.rows() != model.dim_u() || u.cols() != n)
    throw std::invalid_argument("discrete_flow: control grid has the wrong shape");
  if (options.pairing && (options.pairing->rows() != n || options.pairing->cols() != n))
    throw std::invalid_argument("discrete_flow: pairing matrix has the wrong shape");

  const FlowSystem sys{model, *basis, u, q0, p0, tf, options.pairing ? &*options.pairing : nullptr, d, n};

  // start from the integrated motion under the interpolated control
  Eigen::VectorXd z = Eigen::VectorXd::Zero(d * n + d);
  const Eigen::VectorXd s = basis->nodes();
  const Eigen::VectorXd times = 0.5 * tf * (s.array() + 1.0);
  try {
    const GridFunction ug{basis, u};
    const ControlSignal control = [&](double t) { return interpolate(ug, 2.0 * t / tf - 1.0); };
    const Trajectory traj =
        reference_simulate(model, q0, velocity_from_momentum(model, q0, p0), control, as_span(times));
    for (int i = 0; i < d; ++i) z.segment(i * n, n) = traj.q.row(i).transpose();
  } catch (const std::exception&) {
    for (int i = 0; i < d; ++i) z.segment(i * n, n).setConstant(q0(i));
  }
  z.tail(d) = p0;

  Eigen::VectorXd r = sys.rows(z);
  if (!r.allFinite()) throw GeomError("discrete_flow: non-finite residual at the initial guess");
  double norm = max_abs(r);
  int it = 0;
  int polish = 0;
  for (; it < options.max_iterations; ++it) {
    if (norm <= options.tolerance) {
      // a few extra steps push the solve to roundoff
      if (polish++ >= 2) break;
    }
    Eigen::MatrixXd jac(r.size(), z.size());
    Eigen::VectorXd zp = z;
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      const double h = 1e-7 * (1.0 + std::abs(z(j)));
      zp(j) = z(j) + h;
      jac.col(j) = (sys.rows(zp) - r) / h;
      zp(j) = z(j);
    }
    const Eigen::VectorXd step = jac.partialPivLu().solve(-r);
    if (!step.allFinite()) throw GeomError("discrete_flow: singular Newton system");
    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
      const Eigen::VectorXd zt = z + alpha * step;
      const Eigen::VectorXd rt = sys.rows(zt);
      if (rt.allFinite() && max_abs(rt) < norm) {
        z = zt;
        r = rt;
        norm = max_abs(rt);
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  if (!(norm <= options.tolerance)) {
    std::ostringstream msg;
    msg << "discrete_flow: Newton stopped at residual " << norm << " after " << it << " iterations";
    throw GeomError(msg.str());
  }

  FlowEndpoint out;
  out.q_grid = sys.grid(z);
  out.q_final = out.q_grid * basis->right_form().transpose();
  out.p_final = z.tail(d);
  const Eigen::MatrixXd v = (2.0 / tf) * out.q_grid * basis->diff().transpose();
  Eigen::MatrixXd lv(d, n);
  for (int k = 0; k < n; ++k) lv.col(k) = model.momentum(out.q_grid.col(k), v.col(k));
  out.p_polynomial = lv * basis->right_form().transpose();
  out.residual = norm;
  out.iterations = it;
  return out;
}

Eigen::MatrixXd symplectic_form(int d) {
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  omega.topRightCorner(d, d) = -Eigen::MatrixXd::Identity(d, d);
  omega.bottomLeftCorner(d, d) = Eigen::MatrixXd::Identity(d, d);
  return omega;
}

SymplecticDefect symplectic_defect(const FlowMapProbe& probe) {
  if (!probe.model || !probe.basis) throw std::invalid_argument("symplectic_defect: incomplete probe");
  if (!(probe.epsilon > 0.0)) throw std::invalid_argument("symplectic_defect: epsilon must be positive");
  const int d = probe.model->dim_q();
  FlowOptions opts;
  opts.tolerance = probe.tolerance;
  opts.pairing = probe.pairing;
  auto flow = [&](const Eigen::VectorXd& z) {
    const FlowEndpoint e = discrete_flow(*probe.model, probe.basis, probe.u, z.head(d), z.tail(d), probe.tf, opts);
    Eigen::VectorXd out(2 * d);
    out << e.q_final, e.p_final;
    return out;
  };

  Eigen::VectorXd z(2 * d);
  z << probe.q0, probe.p0;
  flow(z);  // the base point must converge too

  SymplecticDefect out;
  out.epsilon = probe.epsilon;
  out.jacobian.resize(2 * d, 2 * d);
  for (int i = 0; i < 2 * d; ++i) {
    const double h = probe.epsilon * (1.0 + std::abs(z(i)));
    Eigen::VectorXd zp = z, zm = z;
    zp(i) += h;
    zm(i) -= h;
    out.jacobian.col(i) = (flow(zp) - flow(zm)) / (2.0 * h);
  }
  const Eigen::MatrixXd omega = symplectic_form(d);
  out.defect = (out.jacobian.transpose() * omega * out.jacobian - omega).cwiseAbs().maxCoeff();
  return out;
}

DefectScaling defect_scaling(const FlowMapProbe& probe) {
  DefectScaling out;
  out.coarse = symplectic_defect(probe);
  FlowMapProbe half = probe;
  half.epsilon = 0.5 * probe.epsilon;
  out.fine = symplectic_defect(half);
  out.ratio = out.fine.defect > 0.0 ? out.coarse.defect / out.fine.defect
                                    : std::numeric_limits<double>::infinity();
  return out;
}

FlowMapProbe pendulum_probe(int n, double tf, bool broken) {
  FlowMapProbe probe;
  probe.model = make_pendulum();
  probe.basis = SpectralBasis::make(FamilyKind::Chebyshev, n);
  probe.u = Eigen::MatrixXd::Zero(1, n);
  probe.tf = tf;
  // large-amplitude libration
  probe.q0 = Eigen::VectorXd::Constant(1, 1.0);
  probe.p0 = Eigen::VectorXd::Constant(1, 1.6);
  if (broken) probe.pairing = Eigen::MatrixXd(probe.basis->diff().transpose());
  return probe;
}

double momentum_drift(const DiscretizedProblem& problem, const Eigen::VectorXd& x, int cyclic_index) {
  const ModelPtr model = problem.model_at(x);
  const auto cyclic = model->cyclic_coordinates();
  if (std::find(cyclic.begin(), cyclic.end(), cyclic_index) == cyclic.end())
    throw GeomError("momentum_drift: coordinate " + std::to_string(cyclic_index) + " of " + model->name() +
                    " is not cyclic");
  const Eigen::MatrixXd force = model->actuation() * problem.u_grid(x);
  if (force.row(cyclic_index).cwiseAbs().maxCoeff() != 0.0)
    throw GeomError("momentum_drift: coordinate " + std::to_string(cyclic_index) + " is actuated");

  const GridFunction p = momentum_polynomial(problem, x);
  const int samples = 4 * problem.basis().size();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int k = 0; k < samples; ++k) {
    const double t = -1.0 + 2.0 * k / (samples - 1);
    const double value = interpolate(p, t)(cyclic_index);
    lo = std::min(lo, value);
    hi = std::max(hi, value);
  }
  return hi - lo;
}

SettleResult settle(const DiscretizedProblem& problem, const Eigen::VectorXd& guess, double tolerance,
                    int max_iterations) {
  const DecisionLayout& lay = problem.layout();
  if (guess.size() != lay.size) throw std::invalid_argument("settle: guess has the wrong size");
  std::vector<int> cols;
  for (int k = 0; k < lay.dim_q * lay.nodes; ++k) cols.push_back(lay.q_offset + k);
  if (lay.v_offset >= 0)
    for (int k = 0; k < lay.dim_q * lay.nodes; ++k) cols.push_back(lay.v_offset + k);

  SettleResult out;
  out.x = guess;
  Eigen::VectorXd r = problem.residual(out.x);
  double norm = r.norm();
  int it = 0;
  for (; it < max_iterations && max_abs(r) > tolerance; ++it) {
    const Eigen::MatrixXd full = problem.residual_jacobian(out.x);
    Eigen::MatrixXd jac(full.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) jac.col(static_cast<Eigen::Index>(c)) = full.col(cols[c]);
    const Eigen::VectorXd step = jac.completeOrthogonalDecomposition().solve(-r);
    if (!step.allFinite()) break;
    bool moved = false;
    double alpha = 1.0;
    for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
      Eigen::VectorXd xt = out.x;
      for (std::size_t c = 0; c < cols.size(); ++c) xt(cols[c]) += alpha * step(static_cast<Eigen::Index>(c));
      const Eigen::VectorXd rt = problem.residual(xt);
      if (rt.allFinite() && rt.norm() < norm) {
        out.x = xt;
        r = rt;
        norm = rt.norm();
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  out.residual = max_abs(r);
  out.iterations = it;
  return out;
}

DriftCase gravity_free_drift(SchemeKind kind, int n, double tf) {
  const ModelPtr model = make_acrobot(0.0);
  Eigen::VectorXd q0(2), v0(2);
  q0 << 0.3, -0.4;
  v0 << 0.6, 0.8;
  BoundaryConditions bc{EndCondition::state(q0, v0), EndCondition::free(2)};
  const DiscretizedProblem problem(kind, model, SpectralBasis::make(FamilyKind::Chebyshev, n), bc,
                                   TimeScaling::fixed(tf));
  const Eigen::VectorXd times = problem.node_times(tf);
  SimulationOptions sim;
  sim.tolerance = 1e-13;
  const ControlSignal zero = [](double) { return Eigen::VectorXd::Zero(1); };
  const Trajectory traj = reference_simulate(*model, q0, v0, zero, as_span(times), sim);
  const Eigen::VectorXd guess = problem.pack(traj.q, Eigen::MatrixXd::Zero(1, n), tf, traj.v);

  const SettleResult settled = settle(problem, guess);
  DriftCase out;
  out.drift = momentum_drift(problem, settled.x, 0);
  out.residual = max_abs(problem.dynamics_residual(settled.x));
  out.momentum = model->momentum(q0, v0)(0);
  out.endpoint_error = (problem.q_grid(settled.x) - traj.q).cwiseAbs().maxCoeff();
  return out;
}

ConvergenceFixture pendulum_fixture() {
  ConvergenceFixture fx;
  fx.model = make_pendulum();
  fx.tf = 10.0;
  const auto q = [](double t) { return 0.6 * std::sin(1.3 * t) + 0.3 * std::cos(t); };
  fx.q0 = Eigen::VectorXd::Constant(1, q(0.0));
  fx.v0 = Eigen::VectorXd::Constant(1, 0.78);
  fx.control = [q](double t) {
    return Eigen::VectorXd::Constant(1, -1.014 * std::sin(1.3 * t) - 0.3 * std::cos(t) + std::sin(q(t)));
  };
  return fx;
}

ConvergenceFixture point_mass_fixture() {
  ConvergenceFixture fx;
  fx.model = make_point_mass(1);
  fx.tf = 2.0;
  fx.q0 = Eigen::VectorXd::Constant(1, 0.2);
  fx.v0 = Eigen::VectorXd::Constant(1, -0.1);
  fx.control = [](double) { return Eigen::VectorXd::Constant(1, 0.7); };
  return fx;
}

std::vector<ConvergenceRow> convergence_study(const ConvergenceFixture& fixture, SchemeKind kind,
                                              const std::vector<int>& sizes, FamilyKind family) {
  if (!fixture.model || !fixture.control) throw std::invalid_argument("convergence_study: incomplete fixture");
  const int d = fixture.model->dim_q();
  std::vector<ConvergenceRow> rows;
  for (int n : sizes) {
    const DiscretizedProblem problem(kind, fixture.model, SpectralBasis::make(family, n),
                                     {EndCondition::free(d), EndCondition::free(d)}, TimeScaling::fixed(fixture.tf));
    const Eigen::VectorXd times = problem.node_times(fixture.tf);
    SimulationOptions sim;
    sim.tolerance = 1e-13;
    const Trajectory traj =
        reference_simulate(*fixture.model, fixture.q0, fixture.v0, fixture.control, as_span(times), sim);
    Eigen::MatrixXd u(fixture.model->dim_u(), n);
    for (int k = 0; k < n; ++k) u.col(k) = fixture.control(times(k));
    const Eigen::VectorXd x = problem.pack(traj.q, u, fixture.tf, traj.v);
    rows.push_back({n, max_abs(problem.dynamics_residual(x))});
  }
  return rows;
}

std::vector<StudyRow> geometry_study(const std::vector<int>& sizes) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const ConvergenceFixture fx = pendulum_fixture();
  std::vector<StudyRow> rows;
  for (int n : sizes) {
    StudyRow row{n, nan, nan, nan};
    row.residual = convergence_study(fx, SchemeKind::Pmoc, {n}).front().residual;
    try {
      row.defect = symplectic_defect(pendulum_probe(n)).defect;
    } catch (const GeomError&) {
    }
    row.drift = gravity_free_drift(SchemeKind::Pmoc, n).drift;
    rows.push_back(row);
  }
  return rows;
}

void write_study_csv(const std::vector<StudyRow>& rows, std::ostream& out) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << "N,residual,defect,drift\n" << std::setprecision(17);
  for (const StudyRow& r : rows) out << r.n << ',' << r.residual << ',' << r.defect << ',' << r.drift << '\n';
  out.flags(flags);
  out.precision(prec);
}

}  // namespace pmoc
