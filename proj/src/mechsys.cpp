#include "pmoc/mechsys.hpp"

#include <cmath>
#include <sstream>

#include <boost/numeric/odeint.hpp>

namespace pmoc {

std::shared_ptr<const LagrangianModel> LagrangianModel::with_design(
    std::span<const double> values) const {
  if (!values.empty())
    throw std::invalid_argument(name() + " has no design parameters");
  return shared_from_this();
}

PendulumChain::PendulumChain(Spec spec) : spec_(std::move(spec)) {
  const std::size_t n = spec_.lengths.size();
  if (n == 0) throw std::invalid_argument("PendulumChain: need at least one link");
  if (spec_.masses.empty()) spec_.masses.assign(n, 1.0);
  if (spec_.masses.size() != n)
    throw std::invalid_argument("PendulumChain: one mass per link required");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(spec_.lengths[i] > 0.0)) {
      std::ostringstream msg;
      msg << "PendulumChain: link " << i + 1 << " has non-positive length " << spec_.lengths[i];
      throw std::invalid_argument(msg.str());
    }
    if (!(spec_.masses[i] > 0.0))
      throw std::invalid_argument("PendulumChain: link masses must be positive");
  }
  if (spec_.actuation.rows() != static_cast<Eigen::Index>(n))
    throw std::invalid_argument("PendulumChain: actuation map must have one row per joint");
  tail_mass_.assign(n, 0.0);
  double acc = 0.0;
  for (std::size_t j = n; j-- > 0;) {
    acc += spec_.masses[j];
    tail_mass_[j] = acc;
  }
}

LagrangianTerms PendulumChain::evaluate(const Eigen::VectorXd& q, const Eigen::VectorXd& v) const {
  const int n = dim_q();
  const auto& l = spec_.lengths;
  const double g = spec_.gravity;

  // absolute link angles and rates: phi = S q with S lower-triangular ones
  Eigen::VectorXd phi(n), omega(n);
  double acc_q = 0.0, acc_v = 0.0;
  for (int j = 0; j < n; ++j) {
    acc_q += q(j);
    acc_v += v(j);
    phi(j) = acc_q;
    omega(j) = acc_v;
  }

  // M_abs(j,k) = C(j,k) cos(phi_j - phi_k), C(j,k) = mu_max(j,k) l_j l_k
  Eigen::MatrixXd m_abs(n, n), c_sin(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const double cjk = tail_mass_[std::max(j, k)] * l[j] * l[k];
      m_abs(j, k) = cjk * std::cos(phi(j) - phi(k));
      c_sin(j, k) = cjk * std::sin(phi(j) - phi(k));
    }

  const Eigen::VectorXd p_abs = m_abs * omega;
  double potential = 0.0;
  Eigen::VectorXd dl_dphi(n);
  for (int j = 0; j < n; ++j) {
    potential -= g * tail_mass_[j] * l[j] * std::cos(phi(j));
    double centripetal = 0.0;
    for (int k = 0; k < n; ++k) centripetal += c_sin(j, k) * omega(k);
    dl_dphi(j) = -omega(j) * centripetal - g * tail_mass_[j] * l[j] * std::sin(phi(j));
  }

  // d(M_abs omega)_j / d phi_m
  Eigen::MatrixXd k_abs(n, n);
  for (int j = 0; j < n; ++j) {
    double row = 0.0;
    for (int k = 0; k < n; ++k) row += c_sin(j, k) * omega(k);
    for (int m = 0; m < n; ++m) k_abs(j, m) = c_sin(j, m) * omega(m) - (j == m ? row : 0.0);
  }

  // S^T x is a suffix sum; S^T A S sums the lower-right blocks.
  auto suffix = [n](const Eigen::VectorXd& x) {
    Eigen::VectorXd y(n);
    double s = 0.0;
    for (int a = n; a-- > 0;) {
      s += x(a);
      y(a) = s;
    }
    return y;
  };
  auto congruence = [n](const Eigen::MatrixXd& a) {
    Eigen::MatrixXd r = a;
    for (int i = n - 1; i-- > 0;) r.row(i) += r.row(i + 1);
    for (int j = n - 1; j-- > 0;) r.col(j) += r.col(j + 1);
    return r;
  };

  LagrangianTerms t;
  t.value = 0.5 * omega.dot(p_abs) - potential;
  t.lv = suffix(p_abs);
  t.lq = suffix(dl_dphi);
  t.lvv = congruence(m_abs);
  t.lqv = congruence(k_abs);
  return t;
}

std::vector<DesignParameter> PendulumChain::design_params() const {
  std::vector<DesignParameter> out;
  for (int link : spec_.design_links)
    out.push_back({"l" + std::to_string(link + 1), spec_.lengths[link], spec_.design_lower,
                   spec_.design_upper});
  return out;
}

std::shared_ptr<const LagrangianModel> PendulumChain::with_design(
    std::span<const double> values) const {
  if (values.size() != spec_.design_links.size())
    throw std::invalid_argument(name() + ": wrong number of design parameter values");
  Spec s = spec_;
  for (std::size_t i = 0; i < values.size(); ++i) s.lengths[s.design_links[i]] = values[i];
  return std::make_shared<const PendulumChain>(std::move(s));
}

std::vector<int> PendulumChain::cyclic_coordinates() const {
  // Without gravity the Lagrangian depends only on the relative angles.
  if (spec_.gravity == 0.0) return {0};
  return {};
}

PointMass::PointMass(int dim) : dim_(dim), actuation_(Eigen::MatrixXd::Identity(dim, dim)) {
  if (dim < 1) throw std::invalid_argument("PointMass: dimension must be positive");
}

LagrangianTerms PointMass::evaluate(const Eigen::VectorXd&, const Eigen::VectorXd& v) const {
  LagrangianTerms t;
  t.value = 0.5 * v.squaredNorm();
  t.lq = Eigen::VectorXd::Zero(dim_);
  t.lv = v;
  t.lvv = Eigen::MatrixXd::Identity(dim_, dim_);
  t.lqv = Eigen::MatrixXd::Zero(dim_, dim_);
  return t;
}

std::vector<int> PointMass::cyclic_coordinates() const {
  std::vector<int> all(dim_);
  for (int i = 0; i < dim_; ++i) all[i] = i;
  return all;
}

ModelPtr make_acrobot(double gravity) {
  PendulumChain::Spec s;
  s.name = gravity == 0.0 ? "acrobot-nogravity" : "acrobot";
  s.lengths = {1.0, 1.0};
  s.gravity = gravity;
  s.actuation = Eigen::MatrixXd::Zero(2, 1);
  s.actuation(1, 0) = 1.0;
  return std::make_shared<const PendulumChain>(std::move(s));
}

ModelPtr make_3crobot(double l2, double l3) {
  if (!(l2 > 0.0) || !(l3 > 0.0))
    throw std::invalid_argument("make_3crobot: link lengths must be positive");
  PendulumChain::Spec s;
  s.name = "3crobot";
  s.lengths = {1.0, l2, l3};
  s.actuation = Eigen::MatrixXd::Zero(3, 1);
  s.actuation(2, 0) = 1.0;
  s.design_links = {1, 2};
  return std::make_shared<const PendulumChain>(std::move(s));
}

ModelPtr make_pendulum(double gravity) {
  PendulumChain::Spec s;
  s.name = "pendulum";
  s.lengths = {1.0};
  s.gravity = gravity;
  s.actuation = Eigen::MatrixXd::Ones(1, 1);
  return std::make_shared<const PendulumChain>(std::move(s));
}

ModelPtr make_point_mass(int dim) { return std::make_shared<const PointMass>(dim); }

Eigen::VectorXd forced_dynamics(const LagrangianModel& model, const Eigen::VectorXd& q,
                                const Eigen::VectorXd& v, const Eigen::VectorXd& force) {
  const auto t = model.evaluate(q, v);
  Eigen::LLT<Eigen::MatrixXd> llt(t.lvv);
  if (llt.info() != Eigen::Success)
    throw DynamicsError("forward_dynamics: mass matrix is not positive definite");
  return llt.solve(t.lq + force - t.lqv * v);
}

Eigen::VectorXd forward_dynamics(const LagrangianModel& model, const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& v, const Eigen::VectorXd& u) {
  return forced_dynamics(model, q, v, model.actuation() * u);
}

Trajectory reference_simulate(const LagrangianModel& model, const Eigen::VectorXd& q0,
                              const Eigen::VectorXd& v0, const ForceLaw& force,
                              std::span<const double> times, const SimulationOptions& opts) {
  namespace odeint = boost::numeric::odeint;
  using State = std::vector<double>;
  const int d = model.dim_q();
  if (q0.size() != d || v0.size() != d)
    throw std::invalid_argument("reference_simulate: initial state has the wrong dimension");

  Trajectory out;
  out.t.assign(times.begin(), times.end());
  out.q.resize(d, static_cast<Eigen::Index>(times.size()));
  out.v.resize(d, static_cast<Eigen::Index>(times.size()));
  if (times.empty()) return out;

  auto rhs = [&](const State& x, State& dxdt, double t) {
    const Eigen::Map<const Eigen::VectorXd> q(x.data(), d);
    const Eigen::Map<const Eigen::VectorXd> v(x.data() + d, d);
    const Eigen::VectorXd a = forced_dynamics(model, q, v, force(t, q, v));
    for (int i = 0; i < d; ++i) {
      dxdt[i] = x[d + i];
      dxdt[d + i] = a(i);
    }
  };

  State x(2 * d);
  for (int i = 0; i < d; ++i) {
    x[i] = q0(i);
    x[d + i] = v0(i);
  }

  // integrate_times needs the first time to be the initial time
  std::vector<double> grid;
  grid.reserve(times.size() + 1);
  const bool prepend = times.front() > 0.0;
  if (prepend) grid.push_back(0.0);
  grid.insert(grid.end(), times.begin(), times.end());

  Eigen::Index col = 0;
  bool skip_first = prepend;
  auto observer = [&](const State& s, double) {
    if (skip_first) {
      skip_first = false;
      return;
    }
    for (int i = 0; i < d; ++i) {
      out.q(i, col) = s[i];
      out.v(i, col) = s[d + i];
    }
    ++col;
  };

  auto stepper = odeint::make_controlled(opts.tolerance, opts.tolerance,
                                         odeint::runge_kutta_fehlberg78<State>());
  const double span = grid.back() - grid.front();
  const double dt0 = span > 0.0 ? 1e-3 * span : 1e-3;
  try {
    odeint::integrate_times(stepper, rhs, x, grid.begin(), grid.end(), dt0, observer,
                            odeint::max_step_checker(static_cast<int>(opts.max_steps)));
  } catch (const DynamicsError&) {
    throw;
  } catch (const std::exception& e) {
    throw DynamicsError(std::string("reference_simulate: integration failed: ") + e.what());
  }
  if (col != static_cast<Eigen::Index>(times.size()))
    throw DynamicsError("reference_simulate: integrator stopped early");
  return out;
}

Trajectory reference_simulate(const LagrangianModel& model, const Eigen::VectorXd& q0,
                              const Eigen::VectorXd& v0, const ControlSignal& control,
                              std::span<const double> times, const SimulationOptions& opts) {
  const Eigen::MatrixXd b = model.actuation();
  ForceLaw force = [&](double t, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::VectorXd(b * control(t));
  };
  return reference_simulate(model, q0, v0, force, times, opts);
}

}  // namespace pmoc
