#ifndef NATLEARN_METRIC_HPP
#define NATLEARN_METRIC_HPP

#include "natlearn/calculus.hpp"
#include "natlearn/random.hpp"
#include "natlearn/types.hpp"

#include <functional>
#include <string>
#include <variant>

namespace natlearn {

enum class SampleSource { Model, Uniform };

/// How a naturalized rule obtains the metric tensor G at iteration i.
struct MetricSpec {
  /// G = I: naturalization leaves the rule unchanged.
  struct Identity {};
  /// Exact Fisher information supplied by the function
  /// (ParamFunction::closed_form_fisher).
  struct ClosedFormFisher {};
  /// G from a caller-supplied joint measure p_i(z, ., .). The provider sees only
  /// the iteration and the atom input, so it is covariant by construction.
  struct FromJointMeasure {
    std::function<JointMeasure(int iteration, const InputPoint& z)> provider;
    bool per_atom = false;
  };
  /// G from `samples` diagonal atoms drawn from the model f(., beta) by inverse
  /// CDF, or uniformly on [loc - w*scale, loc + w*scale] of the represented
  /// distribution. Draws come from the "metric" substream of iteration i.
  struct FisherSampled {
    int samples = 1000;
    SampleSource source = SampleSource::Model;
    double uniform_half_width = 5.0;
  };
  /// G(x) = grad f(x) grad f(x)^T, one metric per measure atom.
  struct OuterProductAtX {};
  /// G = (1/W) sum_j w_j grad f(x_j) grad f(x_j)^T over the update measure
  /// itself, W its total weight. This is the form under which the compatible
  /// least-squares weights give the naturalized step directly.
  struct MeasureGram {};

  using Kind = std::variant<Identity, ClosedFormFisher, FromJointMeasure, FisherSampled, OuterProductAtX, MeasureGram>;
  Kind kind = Identity{};

  bool per_atom() const;
  std::string describe() const;
};

/// G = sum over atoms ((x, y), p) of p * grad f(x, beta) grad f(y, beta)^T,
/// symmetrized.
MetricMatrix metric_from_joint(const ParamFunction& f, const ParamVector& beta, const JointMeasure& p);

/// Fisher information of N(mu, sigma^2) in the (mu, sigma^k) parameterization:
/// diag(1 / sigma^2, 2 / (k^2 sigma^{2k})).
MetricMatrix fisher_gaussian_closed_form(double mu, double sigma_k, int k);

/// G^+ grad f(x, beta): the steepest-ascent direction of f(x, .) at beta
/// under the squared norm D^T G D, up to a positive scalar.
ParamVector steepest_direction(const ParamFunction& f, const InputPoint& x, const ParamVector& beta,
                               const MetricMatrix& g);

/// Diagonal joint measure of `samples` points drawn for the sampled-Fisher
/// estimator. f must expose a DensityModel.
JointMeasure sample_joint_measure(const ParamFunction& f, const ParamVector& beta, int samples, SampleSource source,
                                  double uniform_half_width, std::mt19937_64& engine);

/// Metric tensor for iteration i at beta. `z` is the measure atom the metric
/// belongs to (ignored for shared metrics); `mu` is the update measure (used
/// by MeasureGram).
MetricMatrix estimate_metric(const MetricSpec& spec, const ParamFunction& f, const ParamVector& beta, int iteration,
                             const SignedMeasure& mu, const InputPoint* z, const RandomStreams& streams);

}  // namespace natlearn

#endif  // NATLEARN_METRIC_HPP
