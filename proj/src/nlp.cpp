#include "pmoc/nlp.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

namespace pmoc {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal:
      return "Optimal";
    case SolveStatus::Feasible:
      return "Feasible";
    case SolveStatus::Infeasible:
      return "Infeasible";
    case SolveStatus::IterLimit:
      return "IterLimit";
    case SolveStatus::NumericalFailure:
      return "NumericalFailure";
  }
  return "?";
}

SolveStatus status_from_string(const std::string& name) {
  for (auto s : {SolveStatus::Optimal, SolveStatus::Feasible, SolveStatus::Infeasible,
                 SolveStatus::IterLimit, SolveStatus::NumericalFailure})
    if (to_string(s) == name) return s;
  throw std::invalid_argument("unknown solve status '" + name + "'");
}

std::string to_string(GuessStrategy strategy) {
  switch (strategy) {
    case GuessStrategy::SinusoidalTorque:
      return "sinusoid";
    case GuessStrategy::ConstantTorquePlusPD:
      return "torque-pd";
    case GuessStrategy::Custom:
      return "custom";
  }
  return "?";
}

GuessStrategy guess_from_string(const std::string& name) {
  for (auto s : {GuessStrategy::SinusoidalTorque, GuessStrategy::ConstantTorquePlusPD, GuessStrategy::Custom})
    if (to_string(s) == name) return s;
  throw std::invalid_argument("unknown guess strategy '" + name + "'");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

Eigen::VectorXd clamp(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

// -1 at the lower bound, +1 at the upper bound, 0 otherwise
int bound_state(double x, double lo, double hi) {
  const double tol = 1e-12;
  if (std::isfinite(lo) && x <= lo + tol * (1.0 + std::abs(lo))) return -1;
  if (std::isfinite(hi) && x >= hi - tol * (1.0 + std::abs(hi))) return 1;
  return 0;
}

Eigen::VectorXd eval_constraints(const NlpInstance& nlp, const Eigen::VectorXd& x) {
  Eigen::VectorXd c = nlp.constraints(x);
  if (c.size() != nlp.m) throw NlpError("constraint function returned the wrong number of rows");
  if (!all_finite(c)) throw NlpError("constraint function returned a non-finite value");
  return c;
}

double eval_objective(const NlpInstance& nlp, const Eigen::VectorXd& x) {
  const double f = nlp.objective(x);
  if (!std::isfinite(f)) throw NlpError("objective returned a non-finite value");
  return f;
}

struct Multipliers {
  Eigen::VectorXd lambda;
  double stationarity = 0.0;
};

Multipliers least_squares_multipliers(const Eigen::VectorXd& g, const Eigen::MatrixXd& jac,
                                      const Eigen::VectorXd& x, const NlpInstance& nlp) {
  std::vector<int> free_idx;
  for (int i = 0; i < nlp.n; ++i)
    if (bound_state(x(i), nlp.lower(i), nlp.upper(i)) == 0) free_idx.push_back(i);
  Multipliers out;
  out.lambda = Eigen::VectorXd::Zero(nlp.m);
  if (nlp.m > 0 && !free_idx.empty()) {
    Eigen::MatrixXd jf(nlp.m, static_cast<Eigen::Index>(free_idx.size()));
    Eigen::VectorXd gf(static_cast<Eigen::Index>(free_idx.size()));
    for (std::size_t k = 0; k < free_idx.size(); ++k) {
      jf.col(static_cast<Eigen::Index>(k)) = jac.col(free_idx[k]);
      gf(static_cast<Eigen::Index>(k)) = g(free_idx[k]);
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jf.transpose());
    out.lambda = cod.solve(-gf);
  }
  const Eigen::VectorXd r = g + (nlp.m > 0 ? Eigen::VectorXd(jac.transpose() * out.lambda)
                                           : Eigen::VectorXd::Zero(nlp.n));
  double s = 0.0;
  for (int i = 0; i < nlp.n; ++i) {
    switch (bound_state(x(i), nlp.lower(i), nlp.upper(i))) {
      case 0:
        s = std::max(s, std::abs(r(i)));
        break;
      case -1:
        s = std::max(s, -r(i));
        break;
      default:
        s = std::max(s, r(i));
    }
  }
  out.stationarity = s;
  return out;
}

struct QpStep {
  Eigen::VectorXd d;
  Eigen::VectorXd lambda;
};

// min g^T d + d^T B d / 2  s.t.  c + J d = 0,  lo <= x + d <= hi.
// Bounds are handled by a small active-set loop and a final projection.
QpStep solve_qp(const Eigen::MatrixXd& B, const Eigen::VectorXd& g, const Eigen::MatrixXd& J,
                const Eigen::VectorXd& c, const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                const Eigen::VectorXd& hi) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(c.size());
  std::vector<int> state(n, 0);
  std::vector<bool> released(n, false);
  for (int i = 0; i < n; ++i) {
    // variables sitting on a bound start fixed there
    state[i] = bound_state(x(i), lo(i), hi(i));
  }

  QpStep step;
  for (int pass = 0; pass < 2 * n + 10; ++pass) {
    std::vector<int> free_idx;
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (state[i] == 0)
        free_idx.push_back(i);
      else
        d(i) = (state[i] < 0 ? lo(i) : hi(i)) - x(i);
    }
    const int nf = static_cast<int>(free_idx.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + m, nf + m);
    Eigen::VectorXd rhs(nf + m);
    const Eigen::VectorXd bd = B * d;
    const Eigen::VectorXd jd = m > 0 ? Eigen::VectorXd(J * d) : Eigen::VectorXd();
    for (int a = 0; a < nf; ++a) {
      for (int b = 0; b < nf; ++b) kkt(a, b) = B(free_idx[a], free_idx[b]);
      for (int r = 0; r < m; ++r) {
        kkt(a, nf + r) = J(r, free_idx[a]);
        kkt(nf + r, a) = J(r, free_idx[a]);
      }
      rhs(a) = -g(free_idx[a]) - bd(free_idx[a]);
    }
    if (m > 0) rhs.tail(m) = -c - jd;

    const Eigen::MatrixXd kkt_exact = kkt;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
    Eigen::VectorXd sol = lu.solve(rhs);
    const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
    if (!sol.allFinite() || (kkt * sol - rhs).cwiseAbs().maxCoeff() > 1e-8 * scale) {
      // rank-deficient constraints: regularize the multiplier block
      const double delta = 1e-10 * std::max(1.0, B.cwiseAbs().maxCoeff());
      for (int r = 0; r < m; ++r) kkt(nf + r, nf + r) = -delta;
      lu.compute(kkt);
      sol = lu.solve(rhs);
      if (!sol.allFinite()) throw NlpError("QP subproblem is singular");
    }
    for (int refine = 0; refine < 2; ++refine) {
      const Eigen::VectorXd res = rhs - kkt_exact * sol;
      const Eigen::VectorXd fix = lu.solve(res);
      if (!fix.allFinite()) break;
      sol += fix;
    }
    for (int a = 0; a < nf; ++a) d(free_idx[a]) = sol(a);
    step.d = d;
    step.lambda = sol.tail(m);

    bool changed = false;
    for (int i : free_idx) {
      const double target = x(i) + d(i);
      if (target < lo(i) - 1e-12 * (1.0 + std::abs(lo(i)))) {
        state[i] = -1;
        changed = true;
      } else if (target > hi(i) + 1e-12 * (1.0 + std::abs(hi(i)))) {
        state[i] = 1;
        changed = true;
      }
    }
    if (changed) continue;

    // release the bound with the most negative multiplier
    const Eigen::VectorXd r = B * d + g + (m > 0 ? Eigen::VectorXd(J.transpose() * step.lambda)
                                                 : Eigen::VectorXd::Zero(n));
    int worst = -1;
    double worst_value = -1e-10;
    for (int i = 0; i < n; ++i) {
      // a bound released once and hit again stays active
      if (state[i] == 0 || released[i]) continue;
      const double z = state[i] < 0 ? r(i) : -r(i);
      if (z < worst_value) {
        worst_value = z;
        worst = i;
      }
    }
    if (worst < 0) break;
    state[worst] = 0;
    released[worst] = true;
  }
  step.d = clamp(x + step.d, lo, hi) - x;
  return step;
}

struct Iterate {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd c;
  double feas = 0.0;
};

bool better(const Iterate& a, const Iterate& b, double feas_tol) {
  const bool fa = a.feas <= feas_tol, fb = b.feas <= feas_tol;
  if (fa != fb) return fa;
  if (fa) return a.f < b.f;
  return a.feas < b.feas;
}

}  // namespace

Eigen::MatrixXd jacobian(const NlpInstance& instance, const Eigen::VectorXd& x) {
  Eigen::MatrixXd jac(instance.m, instance.n);
  Eigen::VectorXd c0;
  try {
    c0 = eval_constraints(instance, x);
  } catch (const std::exception& e) {
    throw NlpError(std::string("jacobian: residual evaluation failed at the base point: ") + e.what());
  }
  Eigen::VectorXd xp = x;
  for (int j = 0; j < instance.n; ++j) {
    const double h = 1e-7 * (1.0 + std::abs(x(j)));
    xp(j) = x(j) + h;
    try {
      jac.col(j) = (eval_constraints(instance, xp) - c0) / h;
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "jacobian: residual evaluation failed when perturbing variable " << j << ": " << e.what();
      throw NlpError(msg.str());
    }
    xp(j) = x(j);
  }
  return jac;
}

Eigen::MatrixXd constraint_jacobian(const NlpInstance& instance, const Eigen::VectorXd& x,
                                    bool finite_difference) {
  if (finite_difference || !instance.constraint_jacobian) return jacobian(instance, x);
  Eigen::MatrixXd jac;
  try {
    jac = instance.constraint_jacobian(x);
  } catch (const std::exception& e) {
    throw NlpError(std::string("jacobian evaluation failed: ") + e.what());
  }
  if (jac.rows() != instance.m || jac.cols() != instance.n || !jac.allFinite())
    throw NlpError("jacobian callback returned a malformed matrix");
  return jac;
}

Eigen::VectorXd objective_gradient(const NlpInstance& instance, const Eigen::VectorXd& x) {
  if (instance.gradient) return instance.gradient(x);
  Eigen::VectorXd g(instance.n);
  const double f0 = eval_objective(instance, x);
  Eigen::VectorXd xp = x;
  for (int j = 0; j < instance.n; ++j) {
    const double h = 1e-7 * (1.0 + std::abs(x(j)));
    xp(j) = x(j) + h;
    g(j) = (eval_objective(instance, xp) - f0) / h;
    xp(j) = x(j);
  }
  return g;
}

KktCertificate verify_kkt(const NlpInstance& instance, const Eigen::VectorXd& x, bool finite_difference) {
  KktCertificate cert;
  const Eigen::VectorXd c = eval_constraints(instance, x);
  const Eigen::VectorXd g = objective_gradient(instance, x);
  const Eigen::MatrixXd jac = constraint_jacobian(instance, x, finite_difference);
  const Multipliers mult = least_squares_multipliers(g, jac, x, instance);
  cert.feasibility = inf_norm(c);
  cert.stationarity = mult.stationarity;
  cert.multipliers = mult.lambda;
  return cert;
}

SolveReport solve_sqp(const NlpInstance& nlp, const SqpOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  SolveReport report;
  auto finish = [&](SolveStatus status, const Iterate& it, std::string message) {
    report.status = status;
    report.x_star = it.x;
    report.final_cost = it.f;
    report.feasibility = it.feas;
    report.message = std::move(message);
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
  };

  if (nlp.x0.size() != nlp.n || nlp.lower.size() != nlp.n || nlp.upper.size() != nlp.n)
    throw std::invalid_argument("solve_sqp: instance vectors do not match n");
  if ((nlp.lower.array() > nlp.upper.array()).any())
    throw std::invalid_argument("solve_sqp: a lower bound exceeds its upper bound");

  Iterate cur;
  cur.x = clamp(nlp.x0, nlp.lower, nlp.upper);
  Eigen::VectorXd g;
  Eigen::MatrixXd jac;
  try {
    cur.f = eval_objective(nlp, cur.x);
    cur.c = eval_constraints(nlp, cur.x);
    g = objective_gradient(nlp, cur.x);
    jac = constraint_jacobian(nlp, cur.x, opt.finite_difference_jacobian);
  } catch (const std::exception& e) {
    cur.feas = kInf;
    return finish(SolveStatus::NumericalFailure, cur, std::string("evaluation failed at x0: ") + e.what());
  }
  cur.feas = inf_norm(cur.c);

  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(nlp.n, nlp.n);
  bool fresh_hessian = true;
  double mu = 1.0;
  Iterate best = cur;
  std::vector<double> best_feas_history{cur.feas};
  std::vector<double> cost_history{cur.f};

  for (int k = 0;; ++k) {
    const Multipliers mult = least_squares_multipliers(g, jac, cur.x, nlp);
    report.optimality = mult.stationarity;
    report.multipliers = mult.lambda;
    report.major_iterations = k;
    if (opt.verbose)
      std::cerr << "sqp " << std::setw(5) << k << "  f " << std::setprecision(10) << cur.f
                << "  feas " << std::setprecision(3) << cur.feas << "  opt " << mult.stationarity
                << "  mu " << mu << '\n';
    if (better(cur, best, opt.feas_tol)) best = cur;
    if (cur.feas <= opt.feas_tol && mult.stationarity <= opt.opt_tol)
      return finish(SolveStatus::Optimal, cur, "converged");
    if (k >= opt.max_major) {
      if (best.x != cur.x) {
        const Multipliers bm = least_squares_multipliers(objective_gradient(nlp, best.x),
                                                         constraint_jacobian(nlp, best.x, opt.finite_difference_jacobian), best.x, nlp);
        report.optimality = bm.stationarity;
        report.multipliers = bm.lambda;
      }
      return finish(SolveStatus::IterLimit, best, "major iteration limit reached");
    }

    // feasibility stall
    const int w = opt.stall_window;
    if (k >= w && cur.feas > opt.feas_tol) {
      const double then = best_feas_history[static_cast<std::size_t>(k - w)];
      const double now = best_feas_history.back();
      const double f_then = cost_history[static_cast<std::size_t>(k - w)];
      // a solver still moving along the constraints is not stalled
      const bool cost_moving = std::abs(cur.f - f_then) > 1e-6 * (1.0 + std::abs(cur.f));
      if (now >= (1.0 - opt.stall_decrease) * then && !cost_moving)
        return finish(SolveStatus::Infeasible, best,
                      "no feasible solution found: constraint violation stalled");
    }

    QpStep qp;
    try {
      qp = solve_qp(B, g, jac, cur.c, cur.x, nlp.lower, nlp.upper);
    } catch (const std::exception& e) {
      return finish(SolveStatus::NumericalFailure, cur, e.what());
    }
    const Eigen::VectorXd& d = qp.d;

    const double c1 = cur.c.lpNorm<1>();
    double mu_needed = inf_norm(qp.lambda);
    if (c1 > 0.0) mu_needed = std::max(mu_needed, (g.dot(d) + 0.5 * d.dot(B * d)) / (0.5 * c1));
    if (mu < 1.1 * mu_needed)
      mu = 1.5 * mu_needed;
    else if (mu > 10.0 * mu_needed)
      mu = std::max(0.5 * mu, 1.5 * mu_needed);

    const double phi0 = cur.f + mu * c1;
    // roundoff-level linearized residuals count as zero
    const double lin1 = (cur.c + jac * d).lpNorm<1>();
    const bool consistent = lin1 <= 1e-8 * (1.0 + c1);
    double slope = g.dot(d) + mu * ((consistent ? 0.0 : lin1) - c1);
    if (slope >= 0.0 && !consistent && lin1 < c1) {
      mu = std::max(mu, 10.0 * std::abs(g.dot(d)) / (c1 - lin1));
      slope = g.dot(d) + mu * (lin1 - c1);
    }

    auto trial = [&](const Eigen::VectorXd& xt, Iterate& out) {
      try {
        out.x = xt;
        out.f = eval_objective(nlp, xt);
        out.c = eval_constraints(nlp, xt);
        out.feas = inf_norm(out.c);
        return true;
      } catch (const std::exception&) {
        return false;
      }
    };

    Iterate next;
    bool accepted = false;
    double alpha = 1.0;
    if (slope < 0.0 && d.allFinite()) {
      std::optional<Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>> jac_cod;
      for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
        const Eigen::VectorXd xt = cur.x + alpha * d;
        const double target = phi0 + 1e-4 * alpha * slope;
        if (trial(xt, next) && next.f + mu * next.c.lpNorm<1>() <= target) {
          accepted = true;
          break;
        }
        if (nlp.m > 0 && next.c.size() == nlp.m && next.x.size() == nlp.n) {
          // second-order correction back towards the constraint manifold
          if (!jac_cod) jac_cod.emplace(jac);
          const Eigen::VectorXd corr = jac_cod->solve(-(next.c - (1.0 - alpha) * cur.c));
          Iterate soc;
          if (trial(clamp(xt + corr, nlp.lower, nlp.upper), soc) &&
              soc.f + mu * soc.c.lpNorm<1>() <= target) {
            next = std::move(soc);
            accepted = true;
            break;
          }
        }
      }
    }

    if (!accepted) {
      if (!fresh_hessian) {
        B.setIdentity();
        fresh_hessian = true;
        best_feas_history.push_back(std::min(best_feas_history.back(), cur.feas));
        cost_history.push_back(cur.f);
        continue;
      }
      if (cur.feas <= opt.feas_tol)
        return finish(SolveStatus::Feasible, cur, "line search failed at a feasible point");
      if (!consistent && lin1 >= (1.0 - 1e-6) * c1)
        return finish(SolveStatus::Infeasible, best,
                      "no feasible solution found: linearized constraints are inconsistent");
      return finish(SolveStatus::NumericalFailure, cur, "line search failed");
    }
    report.merit_trace.emplace_back(phi0, next.f + mu * next.c.lpNorm<1>());
    assert(report.merit_trace.back().second <= report.merit_trace.back().first);
    if (opt.verbose)
      std::cerr << "      step " << std::setprecision(3) << alpha << "  |d| " << inf_norm(d) << '\n';

    Eigen::VectorXd g_next;
    Eigen::MatrixXd jac_next;
    try {
      g_next = objective_gradient(nlp, next.x);
      jac_next = constraint_jacobian(nlp, next.x, opt.finite_difference_jacobian);
    } catch (const std::exception& e) {
      return finish(SolveStatus::NumericalFailure, next, e.what());
    }

    // damped BFGS on the Lagrangian
    const Eigen::VectorXd s = next.x - cur.x;
    Eigen::VectorXd y = (g_next - g) + (jac_next - jac).transpose() * qp.lambda;
    const double ss = s.squaredNorm();
    if (ss > 0.0) {
      if (fresh_hessian) {
        const double sy0 = s.dot(y);
        if (sy0 > 0.0) B *= std::clamp(y.squaredNorm() / sy0, 1e-6, 1e6);
        fresh_hessian = false;
      }
      const Eigen::VectorXd bs = B * s;
      const double sbs = s.dot(bs);
      double sy = s.dot(y);
      if (sy < 0.2 * sbs) {
        const double theta = 0.8 * sbs / (sbs - sy);
        y = theta * y + (1.0 - theta) * bs;
        sy = s.dot(y);
      }
      if (sbs > 0.0 && sy > 0.0) {
        B += y * y.transpose() / sy - bs * bs.transpose() / sbs;
        B = 0.5 * (B + B.transpose());
      }
      if (!B.allFinite()) {
        B.setIdentity();
        fresh_hessian = true;
      }
    }

    cur = std::move(next);
    g = std::move(g_next);
    jac = std::move(jac_next);
    best_feas_history.push_back(std::min(best_feas_history.back(), cur.feas));
    cost_history.push_back(cur.f);
  }
}

NlpInstance assemble(std::shared_ptr<const DiscretizedProblem> problem, const InitialGuessSpec& guess) {
  if (!problem) throw std::invalid_argument("assemble: null problem");
  const DiscretizedProblem& p = *problem;
  const DecisionLayout& lay = p.layout();

  NlpInstance nlp;
  nlp.n = p.variable_count();
  nlp.m = p.residual_count();
  nlp.lower = p.lower_bounds();
  nlp.upper = p.upper_bounds();
  nlp.problem = problem;
  nlp.objective = [problem](const Eigen::VectorXd& x) { return problem->objective(x); };
  nlp.gradient = [problem](const Eigen::VectorXd& x) { return problem->objective_gradient(x); };
  nlp.constraints = [problem](const Eigen::VectorXd& x) { return problem->residual(x); };
  nlp.constraint_jacobian = [problem](const Eigen::VectorXd& x) { return problem->residual_jacobian(x); };

  if (guess.strategy == GuessStrategy::Custom) {
    if (guess.custom.size() != nlp.n)
      throw std::invalid_argument("assemble: custom guess has the wrong size");
    nlp.x0 = clamp(guess.custom, nlp.lower, nlp.upper);
    return nlp;
  }

  const TimeScaling& sc = p.scaling();
  const double tf = std::clamp(sc.tf, sc.tf_min, sc.tf_max);
  const auto model = p.model_ptr();
  const int d = lay.dim_q;
  const auto& init = p.boundary().initial;
  Eigen::VectorXd q0 = Eigen::VectorXd::Zero(d), v0 = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < d; ++i) {
    if (init.q[i]) q0(i) = *init.q[i];
    if (init.v[i]) v0(i) = *init.v[i];
  }

  const Eigen::MatrixXd& b = model->actuation();
  ForceLaw force;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&)> control;
  if (guess.strategy == GuessStrategy::SinusoidalTorque) {
    control = [&](double t, const Eigen::VectorXd&, const Eigen::VectorXd&) {
      return Eigen::VectorXd(
          Eigen::VectorXd::Constant(lay.dim_u, guess.amplitude * std::sin(guess.frequency * t + guess.phase)));
    };
    force = [&](double t, const Eigen::VectorXd& q, const Eigen::VectorXd& v) {
      return Eigen::VectorXd(b * control(t, q, v));
    };
  } else {
    // constant torque on the first joint, PD regulation of the others
    force = [&](double, const Eigen::VectorXd& q, const Eigen::VectorXd& v) {
      Eigen::VectorXd f = -guess.kp * q - guess.kd * v;
      f(0) = guess.torque;
      return f;
    };
    const Eigen::MatrixXd b_pinv = b.completeOrthogonalDecomposition().pseudoInverse();
    control = [&, b_pinv](double t, const Eigen::VectorXd& q, const Eigen::VectorXd& v) {
      return Eigen::VectorXd(b_pinv * force(t, q, v));
    };
  }

  const Eigen::VectorXd times = p.node_times(tf);
  Trajectory traj;
  try {
    traj = reference_simulate(*model, q0, v0, force,
                              std::span<const double>(times.data(), static_cast<std::size_t>(times.size())));
  } catch (const std::exception& e) {
    throw NlpError(std::string("assemble: initial-guess simulation failed: ") + e.what());
  }

  Eigen::MatrixXd q = traj.q;
  Eigen::MatrixXd u(lay.dim_u, times.size());
  for (Eigen::Index k = 0; k < times.size(); ++k) u.col(k) = control(times(k), traj.q.col(k), traj.v.col(k));

  // make the interpolant meet the initial state exactly
  const SpectralBasis& basis = p.basis();
  const Eigen::RowVectorXd l0 = basis.left_form();
  const Eigen::MatrixXd dq = (2.0 / tf) * q * basis.diff().transpose();
  for (int i = 0; i < d; ++i) {
    if (init.v[i]) q.row(i) += (*init.v[i] - dq.row(i).dot(l0)) * times.transpose();
    if (init.q[i]) q.row(i).array() += *init.q[i] - q.row(i).dot(l0);
  }
  nlp.x0 = clamp(p.pack(q, u, tf), nlp.lower, nlp.upper);
  return nlp;
}

InitialGuessSpec perturbed_guess(const InitialGuessSpec& base, int k, std::uint64_t seed) {
  if (k == 0) return base;
  std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k));
  std::uniform_real_distribution<double> scale(0.5, 1.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  InitialGuessSpec g = base;
  g.amplitude *= scale(rng);
  g.torque *= scale(rng);
  g.phase = phase(rng);
  return g;
}

SolveReport multistart(const InstanceGenerator& generator, int starts, const SqpOptions& options) {
  if (starts < 1) throw std::invalid_argument("multistart: need at least one start");
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<SolveReport> reports;
  std::vector<std::string> summaries;
  int best = -1;
  for (int k = 0; k < starts; ++k) {
    SolveReport r;
    try {
      r = solve_sqp(generator(k), options);
    } catch (const std::exception& e) {
      r.status = SolveStatus::NumericalFailure;
      r.message = e.what();
    }
    std::ostringstream s;
    s << "start " << k << ": " << to_string(r.status) << " cost " << std::setprecision(10) << r.final_cost
      << " feas " << std::setprecision(3) << r.feasibility << " (" << r.message << ")";
    summaries.push_back(s.str());
    if (r.feasible() && (best < 0 || r.final_cost < reports[best].final_cost)) best = k;
    reports.push_back(std::move(r));
  }
  SolveReport out;
  if (best >= 0) {
    out = reports[best];
  } else {
    // report the least-infeasible start
    int least = 0;
    for (int k = 1; k < starts; ++k)
      if (reports[k].x_star.size() &&
          (reports[least].x_star.size() == 0 || reports[k].feasibility < reports[least].feasibility))
        least = k;
    out = reports[least];
    if (starts > 1) {
      out.status = SolveStatus::Infeasible;
      out.message = "no start produced a feasible solution";
    }
    best = least;
  }
  out.starts = starts;
  out.best_start = best;
  out.start_summaries = std::move(summaries);
  out.start_statuses.clear();
  out.start_costs.clear();
  for (const auto& r : reports) {
    out.start_statuses.push_back(r.status);
    out.start_costs.push_back(r.final_cost);
  }
  if (starts > 1) {
    out.major_iterations = reports[best].major_iterations;
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return out;
}

void write_problem_dump(const NlpInstance& instance, std::ostream& out, int samples, std::uint64_t seed) {
  auto vec = [&out](const char* name, const Eigen::VectorXd& v) {
    out << name << ' ' << v.size();
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << v(i);
    out << '\n';
  };
  const auto old_flags = out.flags();
  const auto old_prec = out.precision();
  out << std::setprecision(17);
  out << "# pmoc nonlinear program dump\n";
  out << "# minimize f(x) subject to c(x) = 0 and lower <= x <= upper\n";
  out << "format 1\n";
  if (instance.problem) {
    const auto& p = *instance.problem;
    out << "scheme " << to_string(p.kind()) << "\nmodel " << p.model().name() << "\nnodes " << p.basis().size()
        << "\nfamily " << to_string(p.basis().family().kind()) << '\n';
  }
  out << "n " << instance.n << "\nm " << instance.m << '\n';
  vec("lower", instance.lower);
  vec("upper", instance.upper);
  vec("x0", instance.x0);
  out << "samples " << samples + 1 << '\n';
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1e-3);
  for (int s = 0; s <= samples; ++s) {
    Eigen::VectorXd x = instance.x0;
    if (s > 0)
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += noise(rng) * (1.0 + std::abs(x(i)));
    x = clamp(x, instance.lower, instance.upper);
    out << "sample " << s << '\n';
    vec("x", x);
    out << "f " << instance.objective(x) << '\n';
    vec("c", instance.constraints(x));
  }
  out << "end\n";
  out.flags(old_flags);
  out.precision(old_prec);
}

}  // namespace pmoc
