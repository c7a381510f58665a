#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "pmoc/scheme.hpp"
#include "support/oracles.hpp"

using namespace pmoc;
using doctest::Approx;

namespace {

const SchemeKind kAllSchemes[] = {SchemeKind::Pmoc, SchemeKind::DaeEl, SchemeKind::OdeEl};

BoundaryConditions transfer_bc(double q0, double qf) {
  BoundaryConditions bc{EndCondition::free(1), EndCondition::free(1)};
  bc.initial.q[0] = q0;
  bc.final.q[0] = qf;
  return bc;
}

BoundaryConditions rest_to_rest(const Eigen::VectorXd& q0, const Eigen::VectorXd& qf) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(q0.size());
  return {EndCondition::state(q0, zero), EndCondition::state(qf, zero)};
}

double max_abs(const Eigen::VectorXd& r) { return r.size() ? r.cwiseAbs().maxCoeff() : 0.0; }

// Pendulum driven by the torque that produces q(t) = 0.6 sin(1.3 t) + 0.3 cos t,
// resampled from the reference integrator.
struct PendulumFixture {
  double tf = 10.0;

  static double q(double t) { return 0.6 * std::sin(1.3 * t) + 0.3 * std::cos(t); }
  static double v(double t) { return 0.78 * std::cos(1.3 * t) - 0.3 * std::sin(t); }
  static double control(double t) {
    return -1.014 * std::sin(1.3 * t) - 0.3 * std::cos(t) + std::sin(q(t));
  }

  Eigen::VectorXd grid_for(const DiscretizedProblem& problem) const {
    const Eigen::VectorXd times = problem.node_times(tf);
    const auto model = make_pendulum();
    SimulationOptions opts;
    opts.tolerance = 1e-13;
    const ControlSignal u = [](double t) { return Eigen::VectorXd::Constant(1, control(t)); };
    const auto traj = reference_simulate(*model, Eigen::VectorXd::Constant(1, q(0.0)),
                                         Eigen::VectorXd::Constant(1, v(0.0)), u,
                                         std::span<const double>(times.data(), times.size()), opts);
    Eigen::MatrixXd ugrid(1, times.size());
    for (Eigen::Index k = 0; k < times.size(); ++k) {
      ugrid(0, k) = control(times(k));
      REQUIRE(std::abs(traj.q(0, k) - q(times(k))) < 1e-9);
    }
    return problem.pack(traj.q, ugrid, tf, traj.v);
  }
};

}  // namespace

TEST_CASE("scheme names round-trip") {
  for (auto kind : kAllSchemes) CHECK(scheme_from_string(to_string(kind)) == kind);
  CHECK_THROWS_AS(scheme_from_string("rk4"), std::invalid_argument);
}

TEST_CASE("decision layout arithmetic") {
  const auto basis = SpectralBasis::make(FamilyKind::Chebyshev, 8);
  const auto pm = make_point_mass();
  const auto bc = rest_to_rest(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));

  const auto fixed = build_pmoc(pm, basis, bc, TimeScaling::fixed(1.0));
  CHECK(fixed.variable_count() == 16);
  CHECK(fixed.residual_count() == 12);
  CHECK(fixed.boundary_count() == 4);

  const auto free_tf = build_pmoc(pm, basis, bc, TimeScaling::bounded(2.0, 1.0, 10.0));
  CHECK(free_tf.variable_count() == 17);
  CHECK(free_tf.layout().tf_offset == 16);

  const auto ode = build_ode_el(pm, basis, bc, TimeScaling::fixed(1.0));
  CHECK(ode.variable_count() == 24);
  CHECK(ode.residual_count() == 20);

  SchemeOptions design;
  design.optimize_design = true;
  design.design_sum = 1.0;
  const auto crobot = make_3crobot();
  const Eigen::VectorXd zero3 = Eigen::VectorXd::Zero(3);
  const auto p3 = build_pmoc(crobot, basis, rest_to_rest(zero3, zero3), TimeScaling::fixed(1.0), design);
  CHECK(p3.variable_count() == 3 * 8 + 8 + 2);
  CHECK(p3.residual_count() == 3 * 8 + 12 + 1);
  CHECK(p3.lower_bounds()(p3.layout().design_offset) == Approx(0.05));

  SchemeOptions orphan;
  orphan.design_sum = 1.0;
  CHECK_THROWS_AS(build_pmoc(crobot, basis, rest_to_rest(zero3, zero3), TimeScaling::fixed(1.0), orphan),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_pmoc(pm, basis, rest_to_rest(zero3, zero3), TimeScaling::fixed(1.0)),
                  std::invalid_argument);
}

TEST_CASE("pack and unpack are inverse") {
  const auto basis = SpectralBasis::make(FamilyKind::Legendre, 6);
  const auto crobot = make_3crobot(0.3, 0.6);
  SchemeOptions opts;
  opts.optimize_design = true;
  const Eigen::VectorXd zero3 = Eigen::VectorXd::Zero(3);
  const auto problem = build_ode_el(crobot, basis, rest_to_rest(zero3, zero3),
                                    TimeScaling::bounded(3.0, 1.0, 10.0), opts);
  const Eigen::MatrixXd q = Eigen::MatrixXd::Random(3, 6);
  const Eigen::MatrixXd v = Eigen::MatrixXd::Random(3, 6);
  const Eigen::MatrixXd u = Eigen::MatrixXd::Random(1, 6);
  const Eigen::VectorXd x = problem.pack(q, u, 3.5, v);
  CHECK((problem.q_grid(x) - q).norm() == 0.0);
  CHECK((problem.u_grid(x) - u).norm() == 0.0);
  CHECK((problem.velocity_grid(x) - v).norm() == 0.0);
  CHECK(problem.final_time(x) == 3.5);
  CHECK(problem.design(x)(0) == 0.3);
  CHECK(problem.design(x)(1) == 0.6);
  CHECK(x(problem.layout().q_offset + 2 * 6 + 4) == q(2, 4));
}

TEST_CASE("free particle on a linear path satisfies every scheme") {
  const auto pm = make_point_mass();
  for (int n : {2, 5, 8}) {
    const auto basis = SpectralBasis::make(FamilyKind::Chebyshev, n);
    for (auto kind : kAllSchemes) {
      CAPTURE(n);
      CAPTURE(to_string(kind));
      DiscretizedProblem problem(kind, pm, basis, transfer_bc(0.0, 1.0), TimeScaling::fixed(2.0));
      const Eigen::MatrixXd q = ((basis->nodes().array() + 1.0) * 0.5).matrix().transpose();
      const Eigen::VectorXd x = problem.pack(q, Eigen::MatrixXd::Zero(1, n), 2.0,
                                             Eigen::MatrixXd::Constant(1, n, 0.5));
      CHECK(max_abs(problem.residual(x)) < 1e-12);
    }
  }
}

TEST_CASE("constant velocity point mass") {
  const auto pm = make_point_mass();
  const auto basis = SpectralBasis::make(FamilyKind::Legendre, 7);
  for (auto kind : kAllSchemes) {
    CAPTURE(to_string(kind));
    DiscretizedProblem problem(kind, pm, basis, {EndCondition::free(1), EndCondition::free(1)},
                               TimeScaling::fixed(3.0));
    const Eigen::VectorXd t = problem.node_times(3.0);
    const Eigen::MatrixXd q = (1.0 + 2.0 * t.array()).matrix().transpose();
    const Eigen::VectorXd x =
        problem.pack(q, Eigen::MatrixXd::Zero(1, 7), 3.0, Eigen::MatrixXd::Constant(1, 7, 2.0));
    CHECK(max_abs(problem.dynamics_residual(x)) < 1e-11);
    const auto p = momentum_polynomial(problem, x);
    CHECK((p.values.array() - 2.0).abs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("equilibrium hold") {
  const auto basis = SpectralBasis::make(FamilyKind::Chebyshev, 10);
  for (const auto& model : {make_acrobot(), make_3crobot(), make_pendulum()}) {
    const int d = model->dim_q();
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
    for (auto kind : kAllSchemes) {
      CAPTURE(model->name());
      CAPTURE(to_string(kind));
      DiscretizedProblem problem(kind, model, basis, rest_to_rest(zero, zero), TimeScaling::fixed(4.0));
      const Eigen::VectorXd x = problem.pack(Eigen::MatrixXd::Zero(d, 10),
                                             Eigen::MatrixXd::Zero(model->dim_u(), 10), 4.0);
      CHECK(max_abs(problem.residual(x)) == 0.0);
      CHECK(problem.objective(x) == 0.0);
      CHECK(momentum_polynomial(problem, x).values.norm() == 0.0);
    }
  }
}

TEST_CASE("upright equilibrium with wrapped target") {
  const auto basis = SpectralBasis::make(FamilyKind::Chebyshev, 6);
  const auto model = make_acrobot();
  Eigen::VectorXd up(2);
  up << std::numbers::pi, 0.0;
  auto bc = rest_to_rest(Eigen::VectorXd::Zero(2), up);
  bc.final.wrap = {true, false};
  const auto problem = build_pmoc(model, basis, bc, TimeScaling::fixed(1.0));
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(2, 6);
  q.row(0).setConstant(3.0 * std::numbers::pi);
  const Eigen::VectorXd x = problem.pack(q, Eigen::MatrixXd::Zero(1, 6), 1.0);
  const Eigen::VectorXd r = problem.residual(x);
  CHECK(max_abs(r.head(problem.dynamics_count())) < 1e-12);
  // initial position row sees 3 pi, the wrapped final row sees an equivalent angle
  CHECK(r(problem.dynamics_count()) == Approx(3.0 * std::numbers::pi));
  CHECK(std::abs(r(problem.dynamics_count() + 4)) < 1e-12);
}

TEST_CASE("objective quadrature") {
  const auto pm = make_point_mass();
  for (int n : {3, 6, 11}) {
    const auto basis = SpectralBasis::make(FamilyKind::Chebyshev, n);
    const auto problem = build_pmoc(pm, basis, transfer_bc(0, 1), TimeScaling::fixed(2.0));
    const Eigen::MatrixXd q = Eigen::MatrixXd::Zero(1, n);
    CHECK(problem.objective(problem.pack(q, Eigen::MatrixXd::Zero(1, n), 2.0)) == 0.0);
    CHECK(problem.objective(problem.pack(q, Eigen::MatrixXd::Ones(1, n), 2.0)) == Approx(2.0).epsilon(1e-13));
    const Eigen::MatrixXd u = basis->nodes().transpose();
    CHECK(problem.objective(problem.pack(q, u, 2.0)) == Approx(2.0 / 3.0).epsilon(1e-13));
  }
}

TEST_CASE("objective is exact for low-degree polynomial controls") {
  std::mt19937_64 rng(7);
  for (int n : {8, 12, 16}) {
    const auto basis = SpectralBasis::make(FamilyKind::Chebyshev, n);
    const auto problem = build_pmoc(make_point_mass(), basis, transfer_bc(0, 1), TimeScaling::fixed(3.0));
    for (int trial = 0; trial < 10; ++trial) {
      const auto series = oracle::random_series(n / 2, rng);
      const Eigen::MatrixXd u = series.sample(basis->nodes()).transpose();
      const double exact = 1.5 * oracle::integrate_product(series, series, 2 * n);
      const double value = problem.objective(problem.pack(Eigen::MatrixXd::Zero(1, n), u, 3.0));
      CHECK(std::abs(value - exact) < 1e-10);
    }
  }
}

TEST_CASE("analytic objective gradient matches differences") {
  const auto basis = SpectralBasis::make(FamilyKind::Chebyshev, 6);
  const auto problem = build_pmoc(make_acrobot(), basis,
                                  rest_to_rest(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)),
                                  TimeScaling::bounded(2.0, 1.0, 10.0));
  Eigen::VectorXd x = Eigen::VectorXd::Random(problem.variable_count());
  x(problem.layout().tf_offset) = 2.5;
  const Eigen::VectorXd g = problem.objective_gradient(x);
  for (int j = 0; j < x.size(); ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += 1e-6;
    xm(j) -= 1e-6;
    const double fd = (problem.objective(xp) - problem.objective(xm)) / 2e-6;
    CHECK(g(j) == Approx(fd).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("PMOC rows equal the weak form tested against each cardinal polynomial") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const double tf = 1.7;
  for (int n = 2; n <= 8; ++n) {
    for (auto family : {FamilyKind::Chebyshev, FamilyKind::Legendre}) {
      const auto basis = SpectralBasis::make(family, n);
      const auto model = make_acrobot();
      const auto problem = build_pmoc(model, basis, {EndCondition::free(2), EndCondition::free(2)},
                                      TimeScaling::fixed(tf));
      Eigen::MatrixXd q(2, n), u(1, n);
      for (int k = 0; k < n; ++k) {
        q(0, k) = dist(rng);
        q(1, k) = dist(rng);
        u(0, k) = dist(rng);
      }
      const Eigen::VectorXd x = problem.pack(q, u, tf);
      const Eigen::VectorXd r = problem.dynamics_residual(x);

      // independent evaluation: nodal partials from the model, everything else
      // from product-form cardinals and a Newton Gauss-Legendre rule
      const Eigen::VectorXd& t = basis->nodes();
      Eigen::MatrixXd qdot(2, n);
      for (int i = 0; i < 2; ++i)
        for (int k = 0; k < n; ++k) {
          double s = 0.0;
          for (int j = 0; j < n; ++j) s += q(i, j) * oracle::cardinal_derivative(t, j, t(k));
          qdot(i, k) = (2.0 / tf) * s;
        }
      Eigen::MatrixXd force(2, n), mom(2, n);
      for (int k = 0; k < n; ++k) {
        const auto terms = model->evaluate(q.col(k), qdot.col(k));
        force.col(k) = terms.lq + model->actuation() * u.col(k);
        mom.col(k) = terms.lv;
      }
      const auto [gx, gw] = oracle::gauss_legendre_newton(2 * n + 2);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < n; ++j) {
          double row = 0.0;
          for (Eigen::Index m = 0; m < gx.size(); ++m) {
            const double s = gx(m);
            row += gw(m) * (0.5 * tf * oracle::lagrange_eval(t, force.row(i).transpose(), s) *
                                oracle::cardinal(t, j, s) +
                            oracle::lagrange_eval(t, mom.row(i).transpose(), s) *
                                oracle::cardinal_derivative(t, j, s));
          }
          row -= oracle::lagrange_eval(t, mom.row(i).transpose(), 1.0) * oracle::cardinal(t, j, 1.0);
          row += oracle::lagrange_eval(t, mom.row(i).transpose(), -1.0) * oracle::cardinal(t, j, -1.0);
          CAPTURE(n);
          CHECK(r(i * n + j) == Approx(row).epsilon(1e-9).scale(1.0));
        }
    }
  }
}

TEST_CASE("weak_form_rows with interpolated momenta reproduce the PMOC residual") {
  const auto basis = SpectralBasis::make(FamilyKind::Chebyshev, 9);
  const auto model = make_3crobot();
  const auto problem = build_pmoc(model, basis, {EndCondition::free(3), EndCondition::free(3)},
                                  TimeScaling::fixed(2.2));
  const Eigen::MatrixXd q = 0.5 * Eigen::MatrixXd::Random(3, 9);
  const Eigen::MatrixXd u = Eigen::MatrixXd::Random(1, 9);
  const Eigen::VectorXd x = problem.pack(q, u, 2.2);
  const auto p = momentum_polynomial(problem, x);
  const Eigen::VectorXd p0 = p.values * basis->left_form().transpose();
  const Eigen::VectorXd pf = p.values * basis->right_form().transpose();
  const Eigen::MatrixXd rows = weak_form_rows(*model, *basis, q, u, 2.2, p0, pf);
  const Eigen::VectorXd r = problem.dynamics_residual(x);
  for (int i = 0; i < 3; ++i)
    CHECK((rows.row(i).transpose() - r.segment(i * 9, 9)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("boundary rows use the end forms") {
  const auto basis = SpectralBasis::make(FamilyKind::Chebyshev, 6);
  const auto pm = make_point_mass();
  const auto problem = build_dae_el(pm, basis, rest_to_rest(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)),
                                    TimeScaling::fixed(2.0));
  // q(t) = t^2 / 4 on [0, 2]: q(0)=0, v(0)=0, q(2)=1, v(2)=1
  const Eigen::VectorXd t = problem.node_times(2.0);
  const Eigen::MatrixXd q = (t.array().square() / 4.0).matrix().transpose();
  const Eigen::VectorXd x = problem.pack(q, Eigen::MatrixXd::Constant(1, 6, 0.5), 2.0);
  const Eigen::VectorXd r = problem.residual(x);
  CHECK(max_abs(r.head(6)) < 1e-12);
  CHECK(std::abs(r(6)) < 1e-12);
  CHECK(std::abs(r(7)) < 1e-12);
  CHECK(std::abs(r(8)) < 1e-12);
  CHECK(r(9) == Approx(1.0));
}

TEST_CASE("design coupling row") {
  const auto basis = SpectralBasis::make(FamilyKind::Chebyshev, 4);
  SchemeOptions opts;
  opts.optimize_design = true;
  opts.design_sum = 1.0;
  const Eigen::VectorXd zero3 = Eigen::VectorXd::Zero(3);
  const auto problem = build_pmoc(make_3crobot(), basis, rest_to_rest(zero3, zero3),
                                  TimeScaling::fixed(1.0), opts);
  Eigen::VectorXd design(2);
  design << 0.25, 0.5;
  const Eigen::VectorXd x =
      problem.pack(Eigen::MatrixXd::Zero(3, 4), Eigen::MatrixXd::Zero(1, 4), 1.0, {}, design);
  CHECK(problem.residual(x).tail(1)(0) == Approx(-0.25));
  const auto model = problem.model_at(x);
  CHECK(model->design_params()[0].value == 0.25);
  CHECK(model->design_params()[1].value == 0.5);
}

TEST_CASE("ODE-EL reports a singular mass matrix") {
  struct Degenerate final : LagrangianModel {
    Eigen::MatrixXd b = Eigen::MatrixXd::Ones(1, 1);
    std::string name() const override { return "degenerate"; }
    int dim_q() const override { return 1; }
    const Eigen::MatrixXd& actuation() const override { return b; }
    LagrangianTerms evaluate(const Eigen::VectorXd& q, const Eigen::VectorXd& v) const override {
      LagrangianTerms t;
      t.lq = -q;
      t.lv = Eigen::VectorXd::Zero(1);
      t.lvv = Eigen::MatrixXd::Zero(1, 1);
      t.lqv = Eigen::MatrixXd::Zero(1, 1);
      (void)v;
      return t;
    }
  };
  const auto problem = build_ode_el(std::make_shared<const Degenerate>(), SpectralBasis::make(FamilyKind::Chebyshev, 4),
                                    {EndCondition::free(1), EndCondition::free(1)}, TimeScaling::fixed(1.0));
  CHECK_THROWS_AS(problem.residual(Eigen::VectorXd::Zero(problem.variable_count())), DynamicsError);
}

TEST_CASE("residuals at the reference pendulum trajectory converge spectrally") {
  const PendulumFixture fx;
  const auto model = make_pendulum();
  for (auto kind : kAllSchemes) {
    CAPTURE(to_string(kind));
    std::vector<double> err;
    for (int n : {8, 12, 16, 20, 24}) {
      DiscretizedProblem problem(kind, model, SpectralBasis::make(FamilyKind::Chebyshev, n),
                                 {EndCondition::free(1), EndCondition::free(1)}, TimeScaling::fixed(fx.tf));
      err.push_back(max_abs(problem.dynamics_residual(fx.grid_for(problem))));
    }
    MESSAGE(to_string(kind) << " residuals: " << err[0] << " " << err[1] << " " << err[2] << " "
                            << err[3] << " " << err[4]);
    for (std::size_t i = 1; i < err.size(); ++i) CHECK(err[i] < err[i - 1]);
    // successive log-decrements grow past N = 12
    for (std::size_t i = 2; i + 1 < err.size(); ++i)
      CHECK(std::log(err[i + 1] / err[i]) < std::log(err[i] / err[i - 1]));
    CHECK(err.back() < 1e-8);
  }
}
