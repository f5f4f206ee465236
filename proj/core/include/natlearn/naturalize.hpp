#ifndef NATLEARN_NATURALIZE_HPP
#define NATLEARN_NATURALIZE_HPP

#include "natlearn/learning_rule.hpp"
#include "natlearn/metric.hpp"
#include "natlearn/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

namespace natlearn {

/// How the naturalized direction sum_j w_j G^+ grad f(x_j, beta) is obtained.
struct EstimationMode {
  /// Eigendecomposition pseudoinverse of the metric.
  struct ExplicitPinv {};
  /// Compatible least-squares weights w*; requires MeasureGram.
  struct DirectWStar {};
  /// w* tracked by `inner_updates` stochastic-gradient updates per iteration,
  /// carried across iterations; requires MeasureGram.
  struct TwoTimescale {
    double secondary_alpha = 0.01;
    int inner_updates = 1;
  };

  using Kind = std::variant<ExplicitPinv, DirectWStar, TwoTimescale>;
  Kind kind = ExplicitPinv{};

  std::string describe() const;
};

/// l~_i = l'_i + sum over atoms (x, w) of w * G(x)^+ grad f(x, beta_i).
class NaturalizedRule final : public SteppingRule {
 public:
  NaturalizedRule(std::shared_ptr<const LearningRule> base, MetricSpec spec, EstimationMode mode = {});

  int iota() const override { return base_->iota(); }
  std::string name() const override;
  RuleStep step(int i, const ParamFunction& f, const History& history, RunContext& ctx) const override;

  const LearningRule& base() const { return *base_; }
  const MetricSpec& spec() const { return spec_; }
  const EstimationMode& mode() const { return mode_; }

 private:
  std::shared_ptr<const LearningRule> base_;
  MetricSpec spec_;
  EstimationMode mode_;
};

NaturalizedRule naturalize(std::shared_ptr<const LearningRule> rule, MetricSpec spec, EstimationMode mode = {});

/// Minimum-norm w* in argmin_w sum_j w_j (1 - w^T grad f(x_j, beta))^2.
/// Non-negative weights: least squares on sqrt(w_j)-scaled rows. Signed
/// weights or very large measures: min-norm solve of the normal equations
/// (sum w grad grad^T) w = sum w grad.
ParamVector direct_w_star(const ParamFunction& f, const ParamVector& beta, const SignedMeasure& mu);

/// Counts scalar multiply/add operations spent inside the w update.
struct OpCounter {
  std::uint64_t updates = 0;
  std::uint64_t flops = 0;
};

struct TwoTimescaleResult {
  std::vector<ParamVector> w;  // w[t] after outer iteration t (w[0] = initial)
  OpCounter ops;
  bool diverged = false;
};

/// One stochastic-gradient step per outer iteration t on
/// sum_j w_j (1 - w^T grad f(x_j, beta_t))^2, with an atom drawn in
/// proportion to |w_j| from the "compat" substream of t:
///   w <- w + alpha * sign(w_j) * (1 - w^T g) g,   g = grad f(x_j, beta_t).
TwoTimescaleResult two_timescale_w(const ParamFunction& f, const std::function<ParamVector(int)>& beta_stream,
                                   const std::function<SignedMeasure(int)>& mu_stream, double secondary_alpha,
                                   int iterations, std::uint64_t rng_seed, const ParamVector& w0);

/// In-place single update used by both two_timescale_w and the rule.
/// Returns false when the measure is zero (w unchanged).
bool compatible_sgd_update(const ParamFunction& f, const ParamVector& beta, const SignedMeasure& mu, double alpha,
                           std::mt19937_64& engine, ParamVector& w, OpCounter* ops = nullptr);

}  // namespace natlearn

#endif  // NATLEARN_NATURALIZE_HPP
