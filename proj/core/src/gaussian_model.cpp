#include "natlearn/gaussian_model.hpp"

#include "natlearn/metric.hpp"
#include "natlearn/random.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace natlearn {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

}  // namespace

GaussianModel::GaussianModel(int k, GaussianMode mode) : k_(k), mode_(mode) {
  if (k_ < 1) throw Error("GaussianModel: k must be a positive integer");
}

std::string GaussianModel::label() const {
  std::ostringstream o;
  o << (mode_ == GaussianMode::LogDensity ? "gaussian-logpdf" : "gaussian-pdf") << "-k" << k_;
  return o.str();
}

bool GaussianModel::in_domain(const ParamVector& theta) const {
  return theta.size() == 2 && all_finite(theta) && theta(1) > 0.0;
}

double GaussianModel::eval(const InputPoint& x, const ParamVector& theta) const {
  const double s = theta(1);
  const double d = x(0) - theta(0);
  const double log_pdf = -kHalfLog2Pi - std::log(s) / k_ - 0.5 * d * d * std::pow(s, -2.0 / k_);
  return mode_ == GaussianMode::LogDensity ? log_pdf : std::exp(log_pdf);
}

ParamVector GaussianModel::grad(const InputPoint& x, const ParamVector& theta) const {
  const double s = theta(1);
  const double d = x(0) - theta(0);
  const double inv_var = std::pow(s, -2.0 / k_);
  const double ks = static_cast<double>(k_) * s;
  ParamVector g(2);
  g(0) = d * inv_var;
  g(1) = -1.0 / ks + d * d * inv_var / ks;
  if (mode_ == GaussianMode::Density) {
    const double pdf = std::exp(-kHalfLog2Pi - std::log(s) / k_ - 0.5 * d * d * inv_var);
    g *= pdf;
  }
  return g;
}

std::vector<double> GaussianModel::values(const SignedMeasure& mu, const ParamVector& theta) const {
  const double m = theta(0);
  const double inv_var = std::pow(theta(1), -2.0 / k_);
  const double log_norm = -kHalfLog2Pi - std::log(theta(1)) / k_;
  std::vector<double> out(mu.size());
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const double d = mu.point(j)(0) - m;
    const double log_pdf = log_norm - 0.5 * d * d * inv_var;
    out[j] = mode_ == GaussianMode::LogDensity ? log_pdf : std::exp(log_pdf);
  }
  return out;
}

ParamVector GaussianModel::weighted_grad_sum(const SignedMeasure& mu, const ParamVector& theta) const {
  const double s = theta(1);
  const double m = theta(0);
  const double inv_var = std::pow(s, -2.0 / k_);
  const double ks = static_cast<double>(k_) * s;
  ParamVector acc = ParamVector::Zero(2);
  if (mode_ == GaussianMode::LogDensity) {
    const auto mo = mu.scalar_moments();
    if (!mo) return acc;
    const auto c = mo->about(m);
    acc(0) = c[1] * inv_var;
    acc(1) = -c[0] / ks + c[2] * inv_var / ks;
    return acc;
  }
  const double log_norm = -kHalfLog2Pi - std::log(s) / k_;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const double w = mu.weight(j);
    const double d = mu.point(j)(0) - m;
    const double wp = w * std::exp(log_norm - 0.5 * d * d * inv_var);
    acc(0) += wp * d * inv_var;
    acc(1) += wp * (-1.0 / ks + d * d * inv_var / ks);
  }
  return acc;
}

Matrix GaussianModel::weighted_gram(const SignedMeasure& mu, const ParamVector& theta) const {
  const double s = theta(1);
  const double m = theta(0);
  const double inv_var = std::pow(s, -2.0 / k_);
  const double ks = static_cast<double>(k_) * s;
  Matrix out(2, 2);
  if (mode_ == GaussianMode::LogDensity) {
    const auto mo = mu.scalar_moments();
    if (!mo) return Matrix::Zero(2, 2);
    const auto c = mo->about(m);
    const double a01 = inv_var * (inv_var * c[3] - c[1]) / ks;
    out << inv_var * inv_var * c[2], a01, a01, (inv_var * inv_var * c[4] - 2.0 * inv_var * c[2] + c[0]) / (ks * ks);
    return out;
  }
  const double log_norm = -kHalfLog2Pi - std::log(s) / k_;
  double a00 = 0.0, a01 = 0.0, a11 = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const double w = mu.weight(j);
    const double d = mu.point(j)(0) - m;
    const double p = std::exp(log_norm - 0.5 * d * d * inv_var);
    const double g0 = p * d * inv_var;
    const double g1 = p * (-1.0 / ks + d * d * inv_var / ks);
    a00 += w * g0 * g0;
    a01 += w * g0 * g1;
    a11 += w * g1 * g1;
  }
  out << a00, a01, a01, a11;
  return out;
}

std::optional<Matrix> GaussianModel::closed_form_fisher(const ParamVector& theta) const {
  if (mode_ != GaussianMode::LogDensity) return std::nullopt;
  return fisher_gaussian_closed_form(theta(0), theta(1), k_).entries;
}

InputPoint GaussianModel::quantile(const ParamVector& theta, double u) const {
  const double sigma = std::pow(theta(1), 1.0 / k_);
  return scalar_input(theta(0) + sigma * standard_normal_quantile(u));
}

std::pair<double, double> GaussianModel::location_scale(const ParamVector& theta) const {
  return {theta(0), std::pow(theta(1), 1.0 / k_)};
}

ParamVector GaussianModel::from_moments(double mu, double sigma_sq) const {
  ParamVector t(2);
  t << mu, std::pow(sigma_sq, 0.5 * k_);
  return t;
}

double GaussianModel::variance(const ParamVector& theta) const { return std::pow(theta(1), 2.0 / k_); }

Submersion gaussian_power_submersion(int k_from, int k_to) {
  if (k_from < 1 || k_to < 1) throw Error("gaussian_power_submersion: k must be positive");
  const double p = static_cast<double>(k_to) / k_from;
  Submersion s;
  s.in_dim = 2;
  s.out_dim = 2;
  s.map = [p](const ParamVector& theta) {
    ParamVector out(2);
    out << theta(0), std::pow(theta(1), p);
    return out;
  };
  s.jacobian = [p](const ParamVector& theta) {
    Matrix j = Matrix::Zero(2, 2);
    j(0, 0) = 1.0;
    j(1, 1) = p * std::pow(theta(1), p - 1.0);
    return j;
  };
  return s;
}

DataSummary DataSummary::of(std::span<const double> data) {
  if (data.empty()) throw Error("DataSummary: empty data");
  DataSummary out;
  out.n = data.size();
  double sum = 0.0;
  for (double x : data) sum += x;
  out.mean = sum / static_cast<double>(out.n);
  double c = 0.0;
  for (double x : data) c += (x - out.mean) * (x - out.mean);
  out.centered_sumsq = c;
  return out;
}

double DataSummary::mean_loglik(double mu, double sigma_sq) const {
  const double dm = mean - mu;
  const double second_moment = centered_sumsq / static_cast<double>(n) + dm * dm;
  return -kHalfLog2Pi - 0.5 * std::log(sigma_sq) - second_moment / (2.0 * sigma_sq);
}

namespace {

GaussianStepResult apply_step(const GaussianParams& theta, double n, double sum_dev, double sum_sq_dev, double alpha,
                              int k) {
  GaussianStepResult out;
  const double s = theta.sigma_k;
  if (!(s > 0.0) || !std::isfinite(s) || !std::isfinite(theta.mu)) {
    out.theta = theta;
    out.diverged = true;
    return out;
  }
  const double kd = static_cast<double>(k);
  out.theta.mu = theta.mu + alpha * std::pow(s, -2.0 / kd) * sum_dev;
  out.theta.sigma_k = s - alpha * n / (kd * s) + (alpha / kd) * std::pow(s, -(kd + 2.0) / kd) * sum_sq_dev;
  out.diverged = !(out.theta.sigma_k > 0.0) || !std::isfinite(out.theta.sigma_k) || !std::isfinite(out.theta.mu);
  return out;
}

}  // namespace

GaussianStepResult gaussian_loglik_gd_step(const GaussianParams& theta, std::span<const double> data, double alpha,
                                           int k) {
  if (data.empty()) throw Error("gaussian_loglik_gd_step: empty data");
  if (k < 1) throw Error("gaussian_loglik_gd_step: k must be positive");
  double sum_dev = 0.0;
  double sum_sq_dev = 0.0;
  for (double x : data) {
    const double d = x - theta.mu;
    sum_dev += d;
    sum_sq_dev += d * d;
  }
  return apply_step(theta, static_cast<double>(data.size()), sum_dev, sum_sq_dev, alpha, k);
}

GaussianStepResult gaussian_loglik_gd_step(const GaussianParams& theta, const DataSummary& data, double alpha, int k) {
  if (data.n == 0) throw Error("gaussian_loglik_gd_step: empty data");
  if (k < 1) throw Error("gaussian_loglik_gd_step: k must be positive");
  const double n = static_cast<double>(data.n);
  const double dm = data.mean - theta.mu;
  return apply_step(theta, n, n * dm, data.centered_sumsq + n * dm * dm, alpha, k);
}

}  // namespace natlearn
