#include "pmoc/scheme.hpp"

#include <cmath>
#include <sstream>

namespace pmoc {

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::Pmoc:
      return "pmoc";
    case SchemeKind::DaeEl:
      return "dae-el";
    case SchemeKind::OdeEl:
      return "ode-el";
  }
  return "?";
}

SchemeKind scheme_from_string(const std::string& name) {
  if (name == "pmoc") return SchemeKind::Pmoc;
  if (name == "dae-el") return SchemeKind::DaeEl;
  if (name == "ode-el") return SchemeKind::OdeEl;
  throw std::invalid_argument("unknown scheme '" + name + "'");
}

EndCondition EndCondition::state(const Eigen::VectorXd& q, const Eigen::VectorXd& v) {
  EndCondition e;
  for (Eigen::Index i = 0; i < q.size(); ++i) e.q.emplace_back(q(i));
  for (Eigen::Index i = 0; i < v.size(); ++i) e.v.emplace_back(v(i));
  e.wrap.assign(q.size(), false);
  return e;
}

EndCondition EndCondition::free(int dim) {
  EndCondition e;
  e.q.assign(dim, std::nullopt);
  e.v.assign(dim, std::nullopt);
  e.wrap.assign(dim, false);
  return e;
}

int EndCondition::fixed_count() const {
  int n = 0;
  for (const auto& c : q) n += c.has_value();
  for (const auto& c : v) n += c.has_value();
  return n;
}

namespace {

void check_end(const EndCondition& e, int dim, const char* which) {
  if (static_cast<int>(e.q.size()) != dim || static_cast<int>(e.v.size()) != dim) {
    std::ostringstream msg;
    msg << which << " boundary condition must have " << dim << " position and velocity entries";
    throw std::invalid_argument(msg.str());
  }
  if (!e.wrap.empty() && static_cast<int>(e.wrap.size()) != dim)
    throw std::invalid_argument(std::string(which) + " boundary wrap flags have the wrong size");
}

// Rows of the node-wise Lagrangian partials, channels as rows.
struct NodeTerms {
  Eigen::MatrixXd lq;
  Eigen::MatrixXd lv;
};

NodeTerms node_terms(const LagrangianModel& model, const Eigen::MatrixXd& q,
                     const Eigen::MatrixXd& v) {
  NodeTerms t{Eigen::MatrixXd(q.rows(), q.cols()), Eigen::MatrixXd(q.rows(), q.cols())};
  for (Eigen::Index k = 0; k < q.cols(); ++k) {
    const auto terms = model.evaluate(q.col(k), v.col(k));
    t.lq.col(k) = terms.lq;
    t.lv.col(k) = terms.lv;
  }
  return t;
}

}  // namespace

DiscretizedProblem::DiscretizedProblem(SchemeKind kind, ModelPtr model,
                                       std::shared_ptr<const SpectralBasis> basis,
                                       BoundaryConditions bc, TimeScaling scaling,
                                       SchemeOptions options)
    : kind_(kind),
      model_(std::move(model)),
      basis_(std::move(basis)),
      bc_(std::move(bc)),
      scaling_(scaling),
      options_(std::move(options)) {
  if (!model_ || !basis_) throw std::invalid_argument("DiscretizedProblem: null model or basis");
  if (!(scaling_.tf_min > 0.0) || scaling_.tf_max < scaling_.tf_min)
    throw std::invalid_argument("DiscretizedProblem: final-time bounds must satisfy 0 < min <= max");
  const int d = model_->dim_q();
  check_end(bc_.initial, d, "initial");
  check_end(bc_.final, d, "final");
  if (bc_.initial.wrap.empty()) bc_.initial.wrap.assign(d, false);
  if (bc_.final.wrap.empty()) bc_.final.wrap.assign(d, false);

  const int n = basis_->size();
  DecisionLayout& l = layout_;
  l.nodes = n;
  l.dim_q = d;
  l.dim_u = model_->dim_u();
  int cursor = 0;
  l.q_offset = cursor;
  cursor += d * n;
  if (kind_ == SchemeKind::OdeEl) {
    l.v_offset = cursor;
    cursor += d * n;
  }
  l.u_offset = cursor;
  cursor += l.dim_u * n;
  if (scaling_.is_free()) l.tf_offset = cursor++;
  if (options_.optimize_design) {
    l.design_count = static_cast<int>(model_->design_params().size());
    if (l.design_count == 0)
      throw std::invalid_argument(model_->name() + " has no design parameters to optimize");
    l.design_offset = cursor;
    cursor += l.design_count;
  } else if (options_.design_sum) {
    throw std::invalid_argument("design coupling requires design optimization");
  }
  l.size = cursor;

  dynamics_count_ = (kind_ == SchemeKind::OdeEl ? 2 : 1) * d * n;
  boundary_count_ = bc_.initial.fixed_count() + bc_.final.fixed_count();
  coupling_count_ = options_.design_sum ? 1 : 0;

  const Eigen::MatrixXd& D = basis_->diff();
  const Eigen::MatrixXd& G = basis_->metric();
  const Eigen::RowVectorXd& l0 = basis_->left_form();
  const Eigen::RowVectorXd& lf = basis_->right_form();
  pmoc_operator_ = D.transpose() * G - (lf.transpose() * lf - l0.transpose() * l0);
  integration_weights_ = G * Eigen::VectorXd::Ones(n);
}

double DiscretizedProblem::final_time(const Eigen::VectorXd& x) const {
  return layout_.tf_offset >= 0 ? x(layout_.tf_offset) : scaling_.tf;
}

Eigen::VectorXd DiscretizedProblem::design(const Eigen::VectorXd& x) const {
  if (layout_.design_offset >= 0) return x.segment(layout_.design_offset, layout_.design_count);
  const auto params = model_->design_params();
  Eigen::VectorXd out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) out(i) = params[i].value;
  return out;
}

ModelPtr DiscretizedProblem::model_at(const Eigen::VectorXd& x) const {
  if (layout_.design_offset < 0) return model_;
  const Eigen::VectorXd p = x.segment(layout_.design_offset, layout_.design_count);
  return model_->with_design(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
}

Eigen::MatrixXd DiscretizedProblem::q_grid(const Eigen::VectorXd& x) const {
  const int n = layout_.nodes;
  Eigen::MatrixXd q(layout_.dim_q, n);
  for (int i = 0; i < layout_.dim_q; ++i) q.row(i) = x.segment(layout_.q_offset + i * n, n).transpose();
  return q;
}

Eigen::MatrixXd DiscretizedProblem::u_grid(const Eigen::VectorXd& x) const {
  const int n = layout_.nodes;
  Eigen::MatrixXd u(layout_.dim_u, n);
  for (int i = 0; i < layout_.dim_u; ++i) u.row(i) = x.segment(layout_.u_offset + i * n, n).transpose();
  return u;
}

Eigen::MatrixXd DiscretizedProblem::velocity_grid(const Eigen::VectorXd& x) const {
  const int n = layout_.nodes;
  if (layout_.v_offset >= 0) {
    Eigen::MatrixXd v(layout_.dim_q, n);
    for (int i = 0; i < layout_.dim_q; ++i)
      v.row(i) = x.segment(layout_.v_offset + i * n, n).transpose();
    return v;
  }
  return (2.0 / final_time(x)) * q_grid(x) * basis_->diff().transpose();
}

Eigen::VectorXd DiscretizedProblem::pack(const Eigen::MatrixXd& q, const Eigen::MatrixXd& u,
                                         double tf, const Eigen::MatrixXd& v,
                                         const Eigen::VectorXd& design) const {
  const int n = layout_.nodes;
  if (q.rows() != layout_.dim_q || q.cols() != n || u.rows() != layout_.dim_u || u.cols() != n)
    throw std::invalid_argument("pack: grid shapes do not match the layout");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout_.size);
  for (int i = 0; i < layout_.dim_q; ++i) x.segment(layout_.q_offset + i * n, n) = q.row(i).transpose();
  for (int i = 0; i < layout_.dim_u; ++i) x.segment(layout_.u_offset + i * n, n) = u.row(i).transpose();
  if (layout_.v_offset >= 0) {
    const Eigen::MatrixXd vv =
        v.size() > 0 ? v : Eigen::MatrixXd((2.0 / tf) * q * basis_->diff().transpose());
    for (int i = 0; i < layout_.dim_q; ++i)
      x.segment(layout_.v_offset + i * n, n) = vv.row(i).transpose();
  }
  if (layout_.tf_offset >= 0) x(layout_.tf_offset) = tf;
  if (layout_.design_offset >= 0) {
    const auto params = model_->design_params();
    for (int i = 0; i < layout_.design_count; ++i)
      x(layout_.design_offset + i) = design.size() > 0 ? design(i) : params[i].value;
  }
  return x;
}

Eigen::VectorXd DiscretizedProblem::node_times(double tf) const {
  return (0.5 * tf) * (basis_->nodes().array() + 1.0).matrix();
}

Eigen::VectorXd DiscretizedProblem::dynamics_residual(const Eigen::VectorXd& x) const {
  if (x.size() != layout_.size) throw std::invalid_argument("residual: decision vector has the wrong size");
  const double tf = final_time(x);
  const ModelPtr model = model_at(x);
  const Eigen::MatrixXd q = q_grid(x);
  const Eigen::MatrixXd v = velocity_grid(x);
  const Eigen::MatrixXd force = model->actuation() * u_grid(x);
  const Eigen::MatrixXd& D = basis_->diff();
  const int d = layout_.dim_q;
  const int n = layout_.nodes;

  Eigen::MatrixXd rows;
  switch (kind_) {
    case SchemeKind::Pmoc: {
      const NodeTerms t = node_terms(*model, q, v);
      rows = (0.5 * tf) * (t.lq + force) * basis_->metric() + t.lv * pmoc_operator_.transpose();
      break;
    }
    case SchemeKind::DaeEl: {
      const NodeTerms t = node_terms(*model, q, v);
      rows = (2.0 / tf) * t.lv * D.transpose() - t.lq - force;
      break;
    }
    case SchemeKind::OdeEl: {
      Eigen::MatrixXd accel(d, n);
      for (int k = 0; k < n; ++k) accel.col(k) = forced_dynamics(*model, q.col(k), v.col(k), force.col(k));
      rows.resize(2 * d, n);
      rows.topRows(d) = (2.0 / tf) * q * D.transpose() - v;
      rows.bottomRows(d) = (2.0 / tf) * v * D.transpose() - accel;
      break;
    }
  }
  // channel-major flattening
  Eigen::VectorXd out(rows.size());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out.segment(i * n, n) = rows.row(i).transpose();
  return out;
}

Eigen::VectorXd DiscretizedProblem::boundary_residual(const Eigen::MatrixXd& q,
                                                      const Eigen::MatrixXd& v, double tf) const {
  Eigen::VectorXd out(boundary_count_);
  int row = 0;
  auto emit = [&](const EndCondition& end, const Eigen::RowVectorXd& form) {
    const Eigen::VectorXd q_end = q * form.transpose();
    const Eigen::VectorXd v_end = v * form.transpose();
    for (int i = 0; i < layout_.dim_q; ++i)
      if (end.q[i]) {
        const double gap = q_end(i) - *end.q[i];
        out(row++) = end.wrap[i] ? std::sin(0.5 * gap) : gap;
      }
    for (int i = 0; i < layout_.dim_q; ++i)
      if (end.v[i]) out(row++) = v_end(i) - *end.v[i];
  };
  (void)tf;
  emit(bc_.initial, basis_->left_form());
  emit(bc_.final, basis_->right_form());
  return out;
}

namespace {

// Node-wise second-order partials of the Lagrangian.
struct NodePartials {
  Eigen::MatrixXd lqq;  // d lq / dq
  Eigen::MatrixXd lqv;  // d lv / dq
  Eigen::MatrixXd lvv;  // d lv / dv
};

NodePartials node_partials(const LagrangianModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& v,
                           const LagrangianTerms& terms) {
  const Eigen::Index d = q.size();
  NodePartials p{Eigen::MatrixXd(d, d), terms.lqv, terms.lvv};
  Eigen::VectorXd qp = q, qm = q;
  for (Eigen::Index a = 0; a < d; ++a) {
    const double h = 1e-5 * (1.0 + std::abs(q(a)));
    qp(a) = q(a) + h;
    qm(a) = q(a) - h;
    p.lqq.col(a) = (model.evaluate(qp, v).lq - model.evaluate(qm, v).lq) / (2.0 * h);
    qp(a) = qm(a) = q(a);
  }
  return p;
}

Eigen::MatrixXd scale_cols(const Eigen::MatrixXd& m, const Eigen::VectorXd& w) {
  return m * w.asDiagonal();
}

}  // namespace

Eigen::MatrixXd DiscretizedProblem::residual_jacobian(const Eigen::VectorXd& x) const {
  if (x.size() != layout_.size) throw std::invalid_argument("jacobian: decision vector has the wrong size");
  const DecisionLayout& l = layout_;
  const int n = l.nodes;
  const int d = l.dim_q;
  const double tf = final_time(x);
  const ModelPtr model = model_at(x);
  const Eigen::MatrixXd q = q_grid(x);
  const Eigen::MatrixXd v = velocity_grid(x);
  const Eigen::MatrixXd u = u_grid(x);
  const Eigen::MatrixXd& b = model->actuation();
  const Eigen::MatrixXd force = b * u;
  const Eigen::MatrixXd& D = basis_->diff();
  const Eigen::MatrixXd& G = basis_->metric();
  const Eigen::MatrixXd& P = pmoc_operator_;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(residual_count(), l.size);
  auto qcol = [&](int a) { return l.q_offset + a * n; };
  auto vcol = [&](int a) { return l.v_offset + a * n; };
  auto ucol = [&](int r) { return l.u_offset + r * n; };
  auto flat = [n](const Eigen::MatrixXd& m) {
    Eigen::VectorXd out(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.segment(i * n, n) = m.row(i).transpose();
    return out;
  };

  if (kind_ == SchemeKind::OdeEl) {
    // kinematic rows (2/tf) q D^T - v
    for (int i = 0; i < d; ++i) {
      jac.block(i * n, qcol(i), n, n) = (2.0 / tf) * D;
      jac.block(i * n, vcol(i), n, n) = -I;
    }
    if (l.tf_offset >= 0) jac.block(0, l.tf_offset, d * n, 1) = flat(-(2.0 / (tf * tf)) * q * D.transpose());

    // dynamics rows (2/tf) v D^T - a(q, v, Bu)
    const int du = l.dim_u;
    for (int k = 0; k < n; ++k) {
      const Eigen::VectorXd qk = q.col(k), vk = v.col(k), fk = force.col(k);
      Eigen::MatrixXd aq(d, d), av(d, d), af(d, d);
      for (int a = 0; a < d; ++a) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
        const double hq = 1e-6 * (1.0 + std::abs(qk(a)));
        e(a) = hq;
        aq.col(a) = (forced_dynamics(*model, qk + e, vk, fk) - forced_dynamics(*model, qk - e, vk, fk)) / (2 * hq);
        const double hv = 1e-6 * (1.0 + std::abs(vk(a)));
        e(a) = hv;
        av.col(a) = (forced_dynamics(*model, qk, vk + e, fk) - forced_dynamics(*model, qk, vk - e, fk)) / (2 * hv);
      }
      // the acceleration is affine in the force: a = M^{-1} (... + f)
      af = model->evaluate(qk, vk).lvv.inverse();
      const Eigen::MatrixXd au = af * b;
      for (int i = 0; i < d; ++i) {
        const int row = (d + i) * n + k;
        for (int a = 0; a < d; ++a) {
          jac(row, qcol(a) + k) -= aq(i, a);
          jac(row, vcol(a) + k) -= av(i, a);
        }
        for (int r = 0; r < du; ++r) jac(row, ucol(r) + k) -= au(i, r);
      }
    }
    for (int i = 0; i < d; ++i) jac.block((d + i) * n, vcol(i), n, n) += (2.0 / tf) * D;
    if (l.tf_offset >= 0)
      jac.block(d * n, l.tf_offset, d * n, 1) = flat(-(2.0 / (tf * tf)) * v * D.transpose());
  } else {
    std::vector<NodePartials> parts;
    parts.reserve(n);
    Eigen::MatrixXd lq(d, n), lv(d, n);
    for (int k = 0; k < n; ++k) {
      const auto terms = model->evaluate(q.col(k), v.col(k));
      lq.col(k) = terms.lq;
      lv.col(k) = terms.lv;
      parts.push_back(node_partials(*model, q.col(k), v.col(k), terms));
    }
    // velocity-sensitivity of lq and lv along dv/dtf = -v / tf
    Eigen::MatrixXd dlq_dtf(d, n), dlv_dtf(d, n);
    for (int k = 0; k < n; ++k) {
      const Eigen::VectorXd dv = -v.col(k) / tf;
      dlq_dtf.col(k) = parts[k].lqv.transpose() * dv;
      dlv_dtf.col(k) = parts[k].lvv * dv;
    }
    Eigen::VectorXd wa(n), wb(n), wc(n), we(n);
    for (int i = 0; i < d; ++i)
      for (int a = 0; a < d; ++a) {
        for (int k = 0; k < n; ++k) {
          wa(k) = parts[k].lqq(i, a);
          wb(k) = parts[k].lqv(a, i);  // d lq_i / dv_a
          wc(k) = parts[k].lqv(i, a);
          we(k) = parts[k].lvv(i, a);
        }
        Eigen::MatrixXd block;
        if (kind_ == SchemeKind::Pmoc) {
          block = (0.5 * tf) * scale_cols(G, wa) + scale_cols(G, wb) * D + scale_cols(P, wc) +
                  (2.0 / tf) * scale_cols(P, we) * D;
        } else {
          block = (2.0 / tf) * (scale_cols(D, wc) + (2.0 / tf) * scale_cols(D, we) * D) -
                  Eigen::MatrixXd(wa.asDiagonal()) - (2.0 / tf) * Eigen::MatrixXd(wb.asDiagonal()) * D;
        }
        jac.block(i * n, qcol(a), n, n) = block;
      }
    for (int i = 0; i < d; ++i)
      for (int r = 0; r < l.dim_u; ++r) {
        if (b(i, r) == 0.0) continue;
        jac.block(i * n, ucol(r), n, n) = kind_ == SchemeKind::Pmoc ? Eigen::MatrixXd((0.5 * tf * b(i, r)) * G)
                                                                    : Eigen::MatrixXd(-b(i, r) * I);
      }
    if (l.tf_offset >= 0) {
      Eigen::MatrixXd dr;
      if (kind_ == SchemeKind::Pmoc)
        dr = 0.5 * (lq + force) * G + (0.5 * tf) * dlq_dtf * G + dlv_dtf * P.transpose();
      else
        dr = -(2.0 / (tf * tf)) * lv * D.transpose() + (2.0 / tf) * dlv_dtf * D.transpose() - dlq_dtf;
      jac.block(0, l.tf_offset, d * n, 1) = flat(dr);
    }
  }

  // boundary rows
  int row = dynamics_count_;
  auto emit = [&](const EndCondition& end, const Eigen::RowVectorXd& form) {
    const Eigen::VectorXd q_end = q * form.transpose();
    const Eigen::VectorXd v_end = v * form.transpose();
    const Eigen::RowVectorXd vel_form = (2.0 / tf) * form * D;
    for (int i = 0; i < d; ++i)
      if (end.q[i]) {
        const double slope = end.wrap[i] ? 0.5 * std::cos(0.5 * (q_end(i) - *end.q[i])) : 1.0;
        jac.block(row, qcol(i), 1, n) = slope * form;
        ++row;
      }
    for (int i = 0; i < d; ++i)
      if (end.v[i]) {
        if (l.v_offset >= 0) {
          jac.block(row, vcol(i), 1, n) = form;
        } else {
          jac.block(row, qcol(i), 1, n) = vel_form;
          if (l.tf_offset >= 0) jac(row, l.tf_offset) = -v_end(i) / tf;
        }
        ++row;
      }
  };
  emit(bc_.initial, basis_->left_form());
  emit(bc_.final, basis_->right_form());

  if (l.design_offset >= 0) {
    Eigen::VectorXd xp = x, xm = x;
    for (int j = 0; j < l.design_count; ++j) {
      const int c = l.design_offset + j;
      const double h = 1e-6 * (1.0 + std::abs(x(c)));
      xp(c) = x(c) + h;
      xm(c) = x(c) - h;
      jac.block(0, c, dynamics_count_, 1) = (dynamics_residual(xp) - dynamics_residual(xm)) / (2.0 * h);
      xp(c) = xm(c) = x(c);
      if (coupling_count_ > 0) jac(residual_count() - 1, c) = 1.0;
    }
  }
  return jac;
}

Eigen::VectorXd DiscretizedProblem::residual(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(residual_count());
  out.head(dynamics_count_) = dynamics_residual(x);
  out.segment(dynamics_count_, boundary_count_) =
      boundary_residual(q_grid(x), velocity_grid(x), final_time(x));
  if (coupling_count_ > 0) out(residual_count() - 1) = design(x).sum() - *options_.design_sum;
  return out;
}

double DiscretizedProblem::objective(const Eigen::VectorXd& x) const {
  const double tf = final_time(x);
  const Eigen::MatrixXd u = u_grid(x);
  Eigen::VectorXd cost(layout_.nodes);
  if (options_.running_cost) {
    const Eigen::MatrixXd q = q_grid(x);
    const Eigen::MatrixXd v = velocity_grid(x);
    for (int k = 0; k < layout_.nodes; ++k) cost(k) = options_.running_cost(q.col(k), v.col(k), u.col(k));
  } else {
    cost = u.colwise().squaredNorm().transpose();
  }
  return 0.5 * tf * integration_weights_.dot(cost);
}

Eigen::VectorXd DiscretizedProblem::objective_gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(layout_.size);
  if (options_.running_cost) {
    // generic cost: forward differences
    const double f0 = objective(x);
    Eigen::VectorXd xp = x;
    for (int j = 0; j < layout_.size; ++j) {
      const double h = 1e-7 * (1.0 + std::abs(x(j)));
      xp(j) = x(j) + h;
      g(j) = (objective(xp) - f0) / h;
      xp(j) = x(j);
    }
    return g;
  }
  const double tf = final_time(x);
  const int n = layout_.nodes;
  const Eigen::MatrixXd u = u_grid(x);
  for (int i = 0; i < layout_.dim_u; ++i)
    g.segment(layout_.u_offset + i * n, n) =
        tf * integration_weights_.cwiseProduct(u.row(i).transpose());
  if (layout_.tf_offset >= 0)
    g(layout_.tf_offset) = 0.5 * integration_weights_.dot(u.colwise().squaredNorm().transpose());
  return g;
}

Eigen::VectorXd DiscretizedProblem::lower_bounds() const {
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(layout_.size, -std::numeric_limits<double>::infinity());
  if (layout_.tf_offset >= 0) lo(layout_.tf_offset) = scaling_.tf_min;
  if (layout_.design_offset >= 0) {
    const auto params = model_->design_params();
    for (int i = 0; i < layout_.design_count; ++i) lo(layout_.design_offset + i) = params[i].lower;
  }
  return lo;
}

Eigen::VectorXd DiscretizedProblem::upper_bounds() const {
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(layout_.size, std::numeric_limits<double>::infinity());
  if (layout_.tf_offset >= 0) hi(layout_.tf_offset) = scaling_.tf_max;
  if (layout_.design_offset >= 0) {
    const auto params = model_->design_params();
    for (int i = 0; i < layout_.design_count; ++i) hi(layout_.design_offset + i) = params[i].upper;
  }
  return hi;
}

DiscretizedProblem build_pmoc(ModelPtr model, std::shared_ptr<const SpectralBasis> basis,
                              BoundaryConditions bc, TimeScaling scaling, SchemeOptions options) {
  return {SchemeKind::Pmoc, std::move(model), std::move(basis), std::move(bc), scaling,
          std::move(options)};
}

DiscretizedProblem build_dae_el(ModelPtr model, std::shared_ptr<const SpectralBasis> basis,
                                BoundaryConditions bc, TimeScaling scaling, SchemeOptions options) {
  return {SchemeKind::DaeEl, std::move(model), std::move(basis), std::move(bc), scaling,
          std::move(options)};
}

DiscretizedProblem build_ode_el(ModelPtr model, std::shared_ptr<const SpectralBasis> basis,
                                BoundaryConditions bc, TimeScaling scaling, SchemeOptions options) {
  return {SchemeKind::OdeEl, std::move(model), std::move(basis), std::move(bc), scaling,
          std::move(options)};
}

GridFunction momentum_polynomial(const DiscretizedProblem& problem, const Eigen::VectorXd& x) {
  const ModelPtr model = problem.model_at(x);
  const Eigen::MatrixXd q = problem.q_grid(x);
  const Eigen::MatrixXd v = problem.velocity_grid(x);
  GridFunction p{problem.basis_ptr(), Eigen::MatrixXd(q.rows(), q.cols())};
  for (Eigen::Index k = 0; k < q.cols(); ++k) p.values.col(k) = model->momentum(q.col(k), v.col(k));
  return p;
}

double objective_eval(const DiscretizedProblem& problem, const Eigen::VectorXd& x) {
  return problem.objective(x);
}

Eigen::MatrixXd weak_form_rows(const LagrangianModel& model, const SpectralBasis& basis,
                               const Eigen::MatrixXd& q, const Eigen::MatrixXd& u, double tf,
                               const Eigen::VectorXd& p_initial, const Eigen::VectorXd& p_final,
                               const Eigen::MatrixXd* pairing) {
  const Eigen::MatrixXd& D = basis.diff();
  const Eigen::MatrixXd& G = basis.metric();
  const Eigen::MatrixXd v = (2.0 / tf) * q * D.transpose();
  const NodeTerms t = node_terms(model, q, v);
  const Eigen::MatrixXd& P = pairing ? *pairing : D;
  // rows-as-channels: (D^T G lv_i)^T = lv_i^T G D
  return (0.5 * tf) * (t.lq + model.actuation() * u) * G + t.lv * G * P -
         p_final * basis.right_form() + p_initial * basis.left_form();
}

}  // namespace pmoc
