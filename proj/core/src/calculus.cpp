#include "natlearn/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace natlearn {

namespace {

void require_finite_vector(const ParamVector& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v(i))) {
      std::ostringstream msg;
      msg << "non-finite " << what << " at coordinate " << i;
      throw Error(msg.str());
    }
  }
}

// Step used for the gradient-of-gradient Hessian; cube root of epsilon scale.
double hessian_step(double c) { return 1e-5 * (1.0 + std::abs(c)); }

}  // namespace

ScalarField at_input(const ParamFunction& f, const InputPoint& x) {
  return ScalarField{[&f, x](const ParamVector& t) { return f.eval(x, t); },
                     [&f, x](const ParamVector& t) { return f.grad(x, t); }};
}

TaylorApprox::TaylorApprox(int order, ParamVector center, double value, ParamVector gradient, Matrix hessian)
    : order_(order),
      center_(std::move(center)),
      value_(value),
      gradient_(std::move(gradient)),
      hessian_(std::move(hessian)) {}

double TaylorApprox::evaluate(const ParamVector& y) const {
  if (order_ == 0) return value_;
  const ParamVector d = y - center_;
  double out = value_ + gradient_.dot(d);
  if (order_ == 2) out += 0.5 * d.dot(hessian_ * d);
  return out;
}

TaylorApprox taylor(const ScalarField& h, int order, const ParamVector& center) {
  if (order < 0 || order > 2) throw Error("taylor: order must be 0, 1 or 2");
  const double value = h.value(center);
  if (!std::isfinite(value)) throw Error("taylor: non-finite value at center");
  const auto n = center.size();
  ParamVector gradient = ParamVector::Zero(n);
  Matrix hessian = Matrix::Zero(n, n);
  if (order >= 1) {
    gradient = h.gradient(center);
    require_finite_vector(gradient, "gradient");
  }
  if (order == 2) {
    hessian = fd_hessian(h.gradient, center);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!std::isfinite(hessian(i, j))) {
          std::ostringstream msg;
          msg << "taylor: non-finite Hessian entry at coordinate (" << i << ", " << j << ")";
          throw Error(msg.str());
        }
      }
    }
  }
  return TaylorApprox(order, center, value, std::move(gradient), std::move(hessian));
}

Matrix fd_hessian(const std::function<ParamVector(const ParamVector&)>& gradient, const ParamVector& at) {
  const auto n = at.size();
  Matrix h(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ParamVector up = at;
    ParamVector down = at;
    const double step = hessian_step(at(i));
    up(i) += step;
    down(i) -= step;
    const double width = up(i) - down(i);
    h.col(i) = (gradient(up) - gradient(down)) / width;
  }
  return 0.5 * (h + h.transpose());
}

Matrix fd_jacobian(const std::function<ParamVector(const ParamVector&)>& map, const ParamVector& at) {
  const ParamVector base = map(at);
  Matrix jac(base.size(), at.size());
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    ParamVector up = at;
    ParamVector down = at;
    const double step = 1e-6 * (1.0 + std::abs(at(i)));
    up(i) += step;
    down(i) -= step;
    jac.col(i) = (map(up) - map(down)) / (up(i) - down(i));
  }
  return jac;
}

PseudoInverse pseudo_inverse(const MetricMatrix& m) {
  const auto n = m.entries.rows();
  if (m.entries.cols() != n) throw Error("pinv: matrix must be square");
  PseudoInverse out;
  out.inverse = Matrix::Zero(n, n);
  if (n == 0) return out;

  const Matrix sym = 0.5 * (m.entries + m.entries.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const Matrix& vecs = eig.eigenvectors();
  const double largest = lambda.cwiseAbs().maxCoeff();
  if (!(largest > 0.0)) {
    out.condition = std::numeric_limits<double>::infinity();
    return out;
  }
  const double cutoff = m.pinv_tolerance * largest;
  double smallest_kept = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    if (std::abs(lambda(k)) <= cutoff) continue;
    out.inverse.noalias() += (1.0 / lambda(k)) * vecs.col(k) * vecs.col(k).transpose();
    smallest_kept = std::min(smallest_kept, std::abs(lambda(k)));
    ++out.rank;
  }
  out.condition = largest / smallest_kept;
  return out;
}

Matrix pinv(const MetricMatrix& m) { return pseudo_inverse(m).inverse; }

double fd_gradient_check(const ParamFunction& f, int trials, std::uint64_t rng_seed, const PointSampler& sampler) {
  if (trials < 1) throw Error("fd_gradient_check: trials must be >= 1");
  std::mt19937_64 rng(rng_seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto [x, theta] = sampler(rng);
    const ParamVector analytic = f.grad(x, theta);
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      ParamVector up = theta;
      ParamVector down = theta;
      const double step = 1e-6 * (1.0 + std::abs(theta(i)));
      up(i) += step;
      down(i) -= step;
      const double fd = (f.eval(x, up) - f.eval(x, down)) / (up(i) - down(i));
      const double denom = std::max(1.0, std::abs(analytic(i)));
      worst = std::max(worst, std::abs(fd - analytic(i)) / denom);
    }
  }
  return worst;
}

ParamVector least_squares_min_norm(const Matrix& a, const ParamVector& b) {
  if (a.rows() != b.size()) throw Error("least_squares_min_norm: row count does not match b");
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  cod.setThreshold(1e-12);
  return cod.solve(b);
}

}  // namespace natlearn
