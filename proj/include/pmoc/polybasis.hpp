#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace pmoc {

/// Raised when a basis change or metric cannot be formed (singular or
/// conditioned beyond the error threshold).
class SingularBasisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FamilyKind { Chebyshev, Legendre };

std::string to_string(FamilyKind kind);
FamilyKind family_from_string(const std::string& name);

/// Classical orthogonal polynomial family on [-1, 1] generated by
///   P_0 = a_0,  P_1 = a_1 t,  P_n = (a_n t + b_n) P_{n-1} - c_n P_{n-2}.
/// Chebyshev uses weight 1/sqrt(1-t^2), Legendre uses weight 1, both with the
/// standard normalization P_n(1) = 1.
class PolynomialFamily {
 public:
  explicit PolynomialFamily(FamilyKind kind) : kind_(kind) {}

  FamilyKind kind() const { return kind_; }

  double a(int n) const;
  double b(int n) const;
  double c(int n) const;

  double evaluate(int n, double t) const;
  /// Values P_0(t) .. P_{count-1}(t).
  Eigen::VectorXd evaluate_all(int count, double t) const;

  /// gamma_n = <P_n, P_n>_w.
  double norm_squared(int n) const;
  double weight(double t) const;
  /// Integral of the weight over [-1, 1].
  double weight_integral() const;
  /// Closed-form moment  int_{-1}^{1} w(t) t^m dt.
  double moment(int m) const;

  /// Symmetric tridiagonal Jacobi operator of the orthonormalized family:
  /// diagonal and sub-diagonal of the n x n truncation.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> jacobi_operator(int n) const;

 private:
  FamilyKind kind_;
};

struct QuadratureRule {
  Eigen::VectorXd nodes;    // ascending
  Eigen::VectorXd weights;  // positive
};

/// Gauss rule for the family weight from the eigen-decomposition of the Jacobi
/// operator. Nodes are the roots of P_n; the rule is exact on R[t]_{2n}.
QuadratureRule golub_welsch(const PolynomialFamily& family, int n);

/// Barycentric weights 1 / prod_{k != j} (t_j - t_k), rescaled to max |w| = 1.
Eigen::VectorXd barycentric_weights(const Eigen::VectorXd& nodes);

/// D(i, j) = l_j'(t_i). Throws std::invalid_argument on duplicate nodes.
Eigen::MatrixXd diff_matrix(const Eigen::VectorXd& nodes);

/// Row vector e with e * x = p(t) for samples x of any p in R[t]_N.
Eigen::RowVectorXd evaluation_form(const Eigen::VectorXd& nodes,
                                   const Eigen::VectorXd& bary, double t);

struct BoundaryForms {
  Eigen::RowVectorXd left;   // evaluates at t = -1
  Eigen::RowVectorXd right;  // evaluates at t = +1
};

BoundaryForms boundary_forms(const Eigen::VectorXd& nodes);

/// Legendre (unit-weight L2) inner product on R[t]_N expressed on grid
/// samples, together with the conditioning of the basis change used to get it.
struct MetricTensor {
  Eigen::MatrixXd G;
  Eigen::MatrixXd basis_change;  // A: samples on the host grid -> Gauss-Legendre grid
  double basis_change_condition = 1.0;
  double metric_condition = 1.0;
  bool ill_conditioned = false;  // condition above the warning threshold
};

inline constexpr double kConditionWarning = 1e8;
inline constexpr double kConditionError = 1e12;

/// Pullback of the Legendre inner product onto arbitrary distinct nodes in
/// [-1, 1], built by interpolating through a Chebyshev Vandermonde matrix.
MetricTensor legendre_metric(const Eigen::VectorXd& nodes);

/// Pullback for a Gauss grid of `family` using discrete orthogonality:
///   A = B^l diag(1/gamma) B^T diag(w),   G = A^T diag(w^l) A.
MetricTensor legendre_metric(const PolynomialFamily& family, const QuadratureRule& rule);

/// G^{-1} D^T G, the adjoint of D under G.
Eigen::MatrixXd conjugate_diff(const Eigen::MatrixXd& D, const Eigen::MatrixXd& G);

/// Orthogonal-polynomial family plus everything derived from its Gauss grid.
/// Immutable after construction.
class SpectralBasis {
 public:
  SpectralBasis(FamilyKind kind, int n);

  static std::shared_ptr<const SpectralBasis> make(FamilyKind kind, int n) {
    return std::make_shared<const SpectralBasis>(kind, n);
  }

  const PolynomialFamily& family() const { return family_; }
  int size() const { return static_cast<int>(rule_.nodes.size()); }

  const Eigen::VectorXd& nodes() const { return rule_.nodes; }
  const Eigen::VectorXd& quad_weights() const { return rule_.weights; }
  const Eigen::VectorXd& norms() const { return norms_; }
  const Eigen::VectorXd& bary() const { return bary_; }
  const Eigen::MatrixXd& diff() const { return diff_; }
  const Eigen::MatrixXd& metric() const { return metric_.G; }
  const MetricTensor& metric_info() const { return metric_; }
  const Eigen::RowVectorXd& left_form() const { return forms_.left; }
  const Eigen::RowVectorXd& right_form() const { return forms_.right; }

  Eigen::RowVectorXd evaluation_form(double t) const {
    return pmoc::evaluation_form(rule_.nodes, bary_, t);
  }

 private:
  PolynomialFamily family_;
  QuadratureRule rule_;
  Eigen::VectorXd norms_;
  Eigen::VectorXd bary_;
  Eigen::MatrixXd diff_;
  MetricTensor metric_;
  BoundaryForms forms_;
};

/// d channels of a degree < N polynomial sampled on a basis grid.
struct GridFunction {
  std::shared_ptr<const SpectralBasis> basis;
  Eigen::MatrixXd values;  // d x N

  int channels() const { return static_cast<int>(values.rows()); }
};

/// Barycentric evaluation of the interpolant at canonical time t in [-1, 1].
Eigen::VectorXd interpolate(const GridFunction& gf, double t);

}  // namespace pmoc
