#ifndef NATLEARN_CALCULUS_HPP
#define NATLEARN_CALCULUS_HPP

#include "natlearn/types.hpp"

#include <cstdint>
#include <functional>

namespace natlearn {

/// Scalar function of the parameters with an analytic gradient.
struct ScalarField {
  std::function<double(const ParamVector&)> value;
  std::function<ParamVector(const ParamVector&)> gradient;
};

/// ScalarField view of theta -> f(x, theta) at a fixed input.
ScalarField at_input(const ParamFunction& f, const InputPoint& x);

/// j-order Taylor approximation (j in {0, 1, 2}) of a scalar field.
class TaylorApprox {
 public:
  TaylorApprox(int order, ParamVector center, double value, ParamVector gradient, Matrix hessian);

  int order() const { return order_; }
  const ParamVector& center() const { return center_; }
  double value_at_center() const { return value_; }
  const ParamVector& gradient() const { return gradient_; }
  const Matrix& hessian() const { return hessian_; }

  double evaluate(const ParamVector& y) const;

 private:
  int order_;
  ParamVector center_;
  double value_;
  ParamVector gradient_;
  Matrix hessian_;
};

/// Hessian is built from central differences of the analytic gradient.
TaylorApprox taylor(const ScalarField& h, int order, const ParamVector& center);

/// Central-difference Jacobian of the gradient, symmetrized.
Matrix fd_hessian(const std::function<ParamVector(const ParamVector&)>& gradient, const ParamVector& at);

/// Central-difference Jacobian of a vector map (rows: outputs).
Matrix fd_jacobian(const std::function<ParamVector(const ParamVector&)>& map, const ParamVector& at);

/// Symmetric (positive semidefinite up to noise) metric tensor.
struct MetricMatrix {
  Matrix entries;
  double pinv_tolerance = 1e-12;
};

struct PseudoInverse {
  Matrix inverse;
  int rank = 0;
  double condition = 1.0;  // over kept eigenvalues; +inf for rank 0
};

/// Moore-Penrose pseudoinverse of a symmetric matrix through its
/// eigendecomposition; eigenvalues with |lambda| <= tol * max|lambda| are
/// treated as zero.
PseudoInverse pseudo_inverse(const MetricMatrix& m);
Matrix pinv(const MetricMatrix& m);

/// Max relative error between the analytic gradient of f and central
/// differences with step 1e-6 * (1 + |theta_i|), over `trials` sampled points.
double fd_gradient_check(const ParamFunction& f, int trials, std::uint64_t rng_seed, const PointSampler& sampler);

/// Minimum-norm minimizer of |A w - b|^2.
ParamVector least_squares_min_norm(const Matrix& a, const ParamVector& b);

}  // namespace natlearn

#endif  // NATLEARN_CALCULUS_HPP
