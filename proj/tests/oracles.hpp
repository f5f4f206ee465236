#ifndef NATLEARN_TESTS_ORACLES_HPP
#define NATLEARN_TESTS_ORACLES_HPP

#include "natlearn/types.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace natlearn::oracle {

/// Pseudoinverse through the SVD, cutoff relative to the largest singular value.
inline Matrix svd_pinv(const Matrix& a, double rel_tol = 1e-12) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cut = s.size() ? rel_tol * s(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (int i = 0; i < s.size(); ++i) {
    if (s(i) > cut) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV().leftCols(s.size()) * inv.asDiagonal() * svd.matrixU().leftCols(s.size()).transpose();
}

/// Central-difference gradient of a scalar function of the parameters.
inline ParamVector central_gradient(const std::function<double(const ParamVector&)>& h, const ParamVector& at,
                                    double step = 1e-6) {
  ParamVector g(at.size());
  for (int i = 0; i < at.size(); ++i) {
    const double e = step * (1.0 + std::abs(at(i)));
    ParamVector hi = at, lo = at;
    hi(i) += e;
    lo(i) -= e;
    g(i) = (h(hi) - h(lo)) / (2.0 * e);
  }
  return g;
}

/// sum_j log N(x_j; mu, sigma_sq), written out term by term.
inline double gaussian_loglik_sum(std::span<const double> data, double mu, double sigma_sq) {
  double s = 0.0;
  for (double x : data) {
    s += -0.5 * std::log(2.0 * std::numbers::pi * sigma_sq) - (x - mu) * (x - mu) / (2.0 * sigma_sq);
  }
  return s;
}

inline Matrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, a.norm());
}

}  // namespace natlearn::oracle

#endif  // NATLEARN_TESTS_ORACLES_HPP
