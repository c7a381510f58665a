#include "pmoc/polybasis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace pmoc {

std::string to_string(FamilyKind kind) {
  return kind == FamilyKind::Chebyshev ? "chebyshev" : "legendre";
}

FamilyKind family_from_string(const std::string& name) {
  if (name == "chebyshev") return FamilyKind::Chebyshev;
  if (name == "legendre") return FamilyKind::Legendre;
  throw std::invalid_argument("unknown polynomial family '" + name + "'");
}

double PolynomialFamily::a(int n) const {
  if (n <= 1) return 1.0;
  if (kind_ == FamilyKind::Chebyshev) return 2.0;
  return (2.0 * n - 1.0) / n;
}

double PolynomialFamily::b(int) const { return 0.0; }

double PolynomialFamily::c(int n) const {
  if (n <= 1) return 0.0;
  if (kind_ == FamilyKind::Chebyshev) return 1.0;
  return (n - 1.0) / n;
}

double PolynomialFamily::evaluate(int n, double t) const {
  if (n == 0) return a(0);
  double prev = a(0);
  double cur = a(1) * t;
  for (int k = 2; k <= n; ++k) {
    const double next = (a(k) * t + b(k)) * cur - c(k) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

Eigen::VectorXd PolynomialFamily::evaluate_all(int count, double t) const {
  Eigen::VectorXd p(count);
  if (count > 0) p(0) = a(0);
  if (count > 1) p(1) = a(1) * t;
  for (int k = 2; k < count; ++k) p(k) = (a(k) * t + b(k)) * p(k - 1) - c(k) * p(k - 2);
  return p;
}

double PolynomialFamily::norm_squared(int n) const {
  if (kind_ == FamilyKind::Chebyshev) return n == 0 ? std::numbers::pi : std::numbers::pi / 2.0;
  return 2.0 / (2.0 * n + 1.0);
}

double PolynomialFamily::weight(double t) const {
  if (kind_ == FamilyKind::Chebyshev) return 1.0 / std::sqrt(1.0 - t * t);
  return 1.0;
}

double PolynomialFamily::weight_integral() const {
  return kind_ == FamilyKind::Chebyshev ? std::numbers::pi : 2.0;
}

double PolynomialFamily::moment(int m) const {
  if (m < 0) throw std::invalid_argument("negative moment order");
  if (m % 2 == 1) return 0.0;
  if (kind_ == FamilyKind::Legendre) return 2.0 / (m + 1.0);
  // pi (m-1)!! / m!!
  double value = std::numbers::pi;
  for (int k = 2; k <= m; k += 2) value *= (k - 1.0) / k;
  return value;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> PolynomialFamily::jacobi_operator(int n) const {
  // t P_k = (1/a_{k+1}) P_{k+1} - (b_{k+1}/a_{k+1}) P_k + (c_{k+1}/a_{k+1}) P_{k-1}
  Eigen::VectorXd diag(n);
  Eigen::VectorXd sub(std::max(n - 1, 0));
  for (int k = 0; k < n; ++k) diag(k) = -b(k + 1) / a(k + 1);
  for (int k = 0; k + 1 < n; ++k) sub(k) = std::sqrt(c(k + 2) / (a(k + 1) * a(k + 2)));
  return {diag, sub};
}

QuadratureRule golub_welsch(const PolynomialFamily& family, int n) {
  if (n < 1) throw std::invalid_argument("golub_welsch: need at least one node");
  auto [diag, sub] = family.jacobi_operator(n);

  QuadratureRule rule;
  if (n == 1) {
    rule.nodes = Eigen::VectorXd::Constant(1, diag(0));
    rule.weights = Eigen::VectorXd::Constant(1, family.weight_integral());
    return rule;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "golub_welsch: eigen-decomposition of the " << n << "x" << n
        << " Jacobi operator failed for the " << to_string(family.kind()) << " family";
    throw std::runtime_error(msg.str());
  }

  // Eigenvalues come out ascending. The first eigenvector components give
  // w_k = mu_0 v_0k^2, but they lose relative accuracy for the small weights
  // near the ends; the Christoffel form 1 / sum_j P_j(t_k)^2 / gamma_j is
  // the same quantity evaluated stably.
  rule.nodes = solver.eigenvalues();
  rule.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd p = family.evaluate_all(n, rule.nodes(k));
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += p(j) * p(j) / family.norm_squared(j);
    rule.weights(k) = 1.0 / s;
  }

  // Both families are even: restore the exact +/- pairing.
  Eigen::VectorXd nodes = rule.nodes;
  Eigen::VectorXd weights = rule.weights;
  for (int k = 0; k < n; ++k) {
    rule.nodes(k) = 0.5 * (nodes(k) - nodes(n - 1 - k));
    rule.weights(k) = 0.5 * (weights(k) + weights(n - 1 - k));
  }
  return rule;
}

namespace {

void require_distinct(const Eigen::VectorXd& nodes, const char* who) {
  for (Eigen::Index i = 0; i < nodes.size(); ++i)
    for (Eigen::Index j = i + 1; j < nodes.size(); ++j)
      if (nodes(i) == nodes(j)) {
        std::ostringstream msg;
        msg << who << ": duplicate node " << nodes(i) << " at positions " << i << " and " << j;
        throw std::invalid_argument(msg.str());
      }
}

double condition_number(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  const double smin = s(s.size() - 1);
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

// The metric squares the basis-change condition, so only the basis change
// decides between usable and singular; either one can raise the warning.
void classify_condition(MetricTensor& metric, const char* who) {
  if (!std::isfinite(metric.basis_change_condition) ||
      metric.basis_change_condition > kConditionError) {
    std::ostringstream msg;
    msg << who << ": singular basis (condition of basis change " << metric.basis_change_condition
        << ", metric " << metric.metric_condition << ")";
    throw SingularBasisError(msg.str());
  }
  metric.ill_conditioned = std::max(metric.basis_change_condition, metric.metric_condition) >
                           kConditionWarning;
}

// Chebyshev Vandermonde V(i, j) = T_j(t_i).
Eigen::MatrixXd chebyshev_vandermonde(const Eigen::VectorXd& t, int cols) {
  const PolynomialFamily cheb(FamilyKind::Chebyshev);
  Eigen::MatrixXd v(t.size(), cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) v.row(i) = cheb.evaluate_all(cols, t(i)).transpose();
  return v;
}

}  // namespace

Eigen::VectorXd barycentric_weights(const Eigen::VectorXd& nodes) {
  require_distinct(nodes, "barycentric_weights");
  const Eigen::Index n = nodes.size();
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  // Scaling each factor by 2 keeps the products near unity on [-1, 1].
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != j) w(j) /= 2.0 * (nodes(j) - nodes(k));
  return w / w.cwiseAbs().maxCoeff();
}

Eigen::MatrixXd diff_matrix(const Eigen::VectorXd& nodes) {
  const Eigen::VectorXd w = barycentric_weights(nodes);
  const Eigen::Index n = nodes.size();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      d(i, j) = (w(j) / w(i)) / (nodes(i) - nodes(j));
      row_sum += d(i, j);
    }
    d(i, i) = -row_sum;
  }
  return d;
}

Eigen::RowVectorXd evaluation_form(const Eigen::VectorXd& nodes, const Eigen::VectorXd& bary,
                                   double t) {
  const Eigen::Index n = nodes.size();
  Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j)
    if (t == nodes(j)) {
      e(j) = 1.0;
      return e;
    }
  double denom = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    e(j) = bary(j) / (t - nodes(j));
    denom += e(j);
  }
  return e / denom;
}

BoundaryForms boundary_forms(const Eigen::VectorXd& nodes) {
  const Eigen::VectorXd w = barycentric_weights(nodes);
  return {evaluation_form(nodes, w, -1.0), evaluation_form(nodes, w, 1.0)};
}

MetricTensor legendre_metric(const Eigen::VectorXd& nodes) {
  require_distinct(nodes, "legendre_metric");
  if ((nodes.array().abs() > 1.0).any())
    throw std::invalid_argument("legendre_metric: nodes must lie in [-1, 1]");
  const int n = static_cast<int>(nodes.size());
  const QuadratureRule leg = golub_welsch(PolynomialFamily(FamilyKind::Legendre), n);

  const Eigen::MatrixXd host = chebyshev_vandermonde(nodes, n);
  const Eigen::MatrixXd target = chebyshev_vandermonde(leg.nodes, n);

  MetricTensor metric;
  metric.basis_change_condition = condition_number(host);
  if (!std::isfinite(metric.basis_change_condition) ||
      metric.basis_change_condition > kConditionError) {
    std::ostringstream msg;
    msg << "legendre_metric: singular basis (Vandermonde condition "
        << metric.basis_change_condition << ")";
    throw SingularBasisError(msg.str());
  }
  // A = target * host^{-1}
  metric.basis_change = host.transpose().partialPivLu().solve(target.transpose()).transpose();
  metric.G = metric.basis_change.transpose() * leg.weights.asDiagonal() * metric.basis_change;
  metric.G = 0.5 * (metric.G + metric.G.transpose()).eval();
  metric.metric_condition = condition_number(metric.G);
  classify_condition(metric, "legendre_metric");
  return metric;
}

MetricTensor legendre_metric(const PolynomialFamily& family, const QuadratureRule& rule) {
  const int n = static_cast<int>(rule.nodes.size());
  const QuadratureRule leg = golub_welsch(PolynomialFamily(FamilyKind::Legendre), n);

  Eigen::MatrixXd host(n, n);
  Eigen::MatrixXd target(n, n);
  Eigen::VectorXd inv_gamma(n);
  for (int i = 0; i < n; ++i) {
    host.row(i) = family.evaluate_all(n, rule.nodes(i)).transpose();
    target.row(i) = family.evaluate_all(n, leg.nodes(i)).transpose();
    inv_gamma(i) = 1.0 / family.norm_squared(i);
  }

  MetricTensor metric;
  metric.basis_change =
      target * inv_gamma.asDiagonal() * host.transpose() * rule.weights.asDiagonal();
  metric.G = metric.basis_change.transpose() * leg.weights.asDiagonal() * metric.basis_change;
  metric.G = 0.5 * (metric.G + metric.G.transpose()).eval();
  metric.basis_change_condition = condition_number(metric.basis_change);
  metric.metric_condition = condition_number(metric.G);
  classify_condition(metric, "legendre_metric");
  return metric;
}

Eigen::MatrixXd conjugate_diff(const Eigen::MatrixXd& D, const Eigen::MatrixXd& G) {
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success)
    throw SingularBasisError("conjugate_diff: metric is not positive definite");
  return llt.solve(D.transpose() * G);
}

SpectralBasis::SpectralBasis(FamilyKind kind, int n)
    : family_(kind), rule_(golub_welsch(family_, n)) {
  norms_.resize(n);
  for (int i = 0; i < n; ++i) norms_(i) = family_.norm_squared(i);
  bary_ = barycentric_weights(rule_.nodes);
  diff_ = diff_matrix(rule_.nodes);
  metric_ = legendre_metric(family_, rule_);
  forms_ = {pmoc::evaluation_form(rule_.nodes, bary_, -1.0),
            pmoc::evaluation_form(rule_.nodes, bary_, 1.0)};
}

Eigen::VectorXd interpolate(const GridFunction& gf, double t) {
  return gf.values * gf.basis->evaluation_form(t).transpose();
}

}  // namespace pmoc
