#ifndef NATLEARN_GAUSSIAN_MODEL_HPP
#define NATLEARN_GAUSSIAN_MODEL_HPP

#include "natlearn/types.hpp"

#include <span>

namespace natlearn {

enum class GaussianMode { LogDensity, Density };

/// Normal distribution over scalar x parameterized by theta = (mu, sigma^k).
/// Evaluates either log N(x; mu, sigma^2) or the density itself.
class GaussianModel final : public ParamFunction, public DensityModel {
 public:
  GaussianModel(int k, GaussianMode mode);

  int k() const { return k_; }
  GaussianMode mode() const { return mode_; }

  int param_dim() const override { return 2; }
  std::string label() const override;
  double eval(const InputPoint& x, const ParamVector& theta) const override;
  ParamVector grad(const InputPoint& x, const ParamVector& theta) const override;
  bool in_domain(const ParamVector& theta) const override;

  std::vector<double> values(const SignedMeasure& mu, const ParamVector& theta) const override;
  ParamVector weighted_grad_sum(const SignedMeasure& mu, const ParamVector& theta) const override;
  Matrix weighted_gram(const SignedMeasure& mu, const ParamVector& theta) const override;

  /// Log-density mode only.
  std::optional<Matrix> closed_form_fisher(const ParamVector& theta) const override;
  const DensityModel* density_model() const override { return this; }

  InputPoint quantile(const ParamVector& theta, double u) const override;
  std::pair<double, double> location_scale(const ParamVector& theta) const override;

  /// (mu, sigma^2) -> (mu, sigma^k)
  ParamVector from_moments(double mu, double sigma_sq) const;
  /// sigma^2 recovered as (sigma^k)^{2/k}
  double variance(const ParamVector& theta) const;

 private:
  int k_;
  GaussianMode mode_;
};

/// psi(mu, sigma^{k_from}) = (mu, sigma^{k_to}); a diffeomorphism on sigma > 0.
Submersion gaussian_power_submersion(int k_from, int k_to);

/// Sufficient statistics of a scalar data set.
struct DataSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double centered_sumsq = 0.0;  // sum_j (X_j - mean)^2

  static DataSummary of(std::span<const double> data);
  double mle_variance() const { return centered_sumsq / static_cast<double>(n); }
  /// Mean log-likelihood per sample of N(mu, sigma_sq) on the data.
  double mean_loglik(double mu, double sigma_sq) const;
};

struct GaussianParams {
  double mu = 0.0;
  double sigma_k = 1.0;
};

struct GaussianStepResult {
  GaussianParams theta;
  bool diverged = false;
};

/// One batch gradient-ascent step on sum_j log N(X_j; mu, sigma^2) in the
/// (mu, sigma^k) parameterization:
///   mu'  = mu + alpha (sigma^k)^{-2/k} sum (X_j - mu)
///   s'   = s - alpha n / (k s) + (alpha / k) s^{-(k+2)/k} sum (X_j - mu)^2
/// with s = sigma^k. Flags divergence when s' <= 0 or any value is non-finite.
GaussianStepResult gaussian_loglik_gd_step(const GaussianParams& theta, std::span<const double> data, double alpha,
                                           int k);

/// Same update evaluated from sufficient statistics, using
/// sum (X_j - mu) = n (mean - mu) and sum (X_j - mu)^2 = C + n (mean - mu)^2.
GaussianStepResult gaussian_loglik_gd_step(const GaussianParams& theta, const DataSummary& data, double alpha, int k);

}  // namespace natlearn

#endif  // NATLEARN_GAUSSIAN_MODEL_HPP
