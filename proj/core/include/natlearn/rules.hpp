#ifndef NATLEARN_RULES_HPP
#define NATLEARN_RULES_HPP

#include "natlearn/learning_rule.hpp"
#include "natlearn/types.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace natlearn {

/// Positive step sizes alpha_i, i >= 0.
struct StepSchedule {
  enum class Kind { Constant, InverseDecay };
  Kind kind = Kind::Constant;
  double alpha0 = 0.01;
  double horizon = 1.0;  // InverseDecay: alpha0 * horizon / (horizon + i)

  static StepSchedule constant(double alpha);
  static StepSchedule inverse_decay(double alpha0, double horizon);
  double at(int i) const;
};

// ---------------------------------------------------------------------------

/// Objective ascended by BatchGradientRule.
///   SumOfValues:    sum_j f(X_j, theta)      (log-likelihood when f is a log-density)
///   SumOfLogValues: sum_j log f(X_j, theta)  (log-likelihood when f is a density)
enum class BatchObjective { SumOfValues, SumOfLogValues };

/// theta_i = theta_{i-1} + alpha_i * sum_j grad f(X_j, theta_{i-1}) over a fixed
/// data set: batch gradient ascent on the log-likelihood when f is a
/// log-density. The update measure puts weight alpha_i on every data point
/// (alpha_i / f(X_j, beta_i) for SumOfLogValues).
class BatchGradientRule final : public LearningRule {
 public:
  BatchGradientRule(std::vector<double> data, StepSchedule schedule,
                    BatchObjective objective = BatchObjective::SumOfValues);

  int iota() const override { return 1; }
  std::string name() const override { return "batch-gradient"; }
  BaseStep base_step(int i, const History& history, const RunContext& ctx) const override;
  SignedMeasure measure(int i, const ParamFunction& f, const History& history, const ParamVector& beta,
                        const RunContext& ctx) const override;
  /// The closed-form Gaussian recursion, when f is a GaussianModel log-density.
  std::optional<ParamVector> direct_step(int i, const ParamFunction& f, const History& history,
                                         const RunContext& ctx) const override;

  const std::vector<double>& data() const { return data_; }
  BatchObjective objective() const { return objective_; }

 private:
  std::vector<double> data_;
  SignedMeasure unit_;
  StepSchedule schedule_;
  BatchObjective objective_;
};

// ---------------------------------------------------------------------------

using TargetFunction = std::function<double(const InputPoint&)>;

/// theta + alpha (f*(x) - f(x, theta)) grad f(x, theta).
ParamVector sgd_squared_error_step(const ParamFunction& f, const TargetFunction& f_star, const ParamVector& theta,
                                   const InputPoint& x, double alpha);

/// Stochastic gradient descent on squared error; x_i comes from the "rule"
/// substream of iteration i. Measure: one atom (x_i, alpha_i * delta_i).
class SquaredErrorSgdRule final : public LearningRule {
 public:
  using InputSampler = std::function<InputPoint(std::mt19937_64&)>;

  SquaredErrorSgdRule(TargetFunction f_star, InputSampler inputs, StepSchedule schedule);

  int iota() const override { return 1; }
  std::string name() const override { return "sgd-squared-error"; }
  BaseStep base_step(int i, const History& history, const RunContext& ctx) const override;
  SignedMeasure measure(int i, const ParamFunction& f, const History& history, const ParamVector& beta,
                        const RunContext& ctx) const override;
  std::optional<ParamVector> direct_step(int i, const ParamFunction& f, const History& history,
                                         const RunContext& ctx) const override;

 private:
  InputPoint input_at(int i, const RunContext& ctx) const;

  TargetFunction f_star_;
  InputSampler inputs_;
  StepSchedule schedule_;
};

// ---------------------------------------------------------------------------

/// Supplies a signed measure nu_i with grad L(beta) = sum w grad f(x, beta).
using GradientMeasureProvider =
    std::function<SignedMeasure(int i, const ParamFunction& f, const ParamVector& beta, const RunContext& ctx)>;

/// Accelerated gradient (iota = 2):
///   beta_i = l_{i-1} + (i-1)/(i+1) (l_{i-1} - l_{i-2})
///   l_i    = beta_i - alpha_{i-1} sum w grad f(x, beta_i)
class NesterovRule final : public LearningRule {
 public:
  NesterovRule(GradientMeasureProvider provider, StepSchedule schedule, bool momentum = true);

  int iota() const override { return 2; }
  std::string name() const override { return momentum_ ? "nesterov" : "nesterov-no-momentum"; }
  BaseStep base_step(int i, const History& history, const RunContext& ctx) const override;
  SignedMeasure measure(int i, const ParamFunction& f, const History& history, const ParamVector& beta,
                        const RunContext& ctx) const override;
  std::optional<ParamVector> direct_step(int i, const ParamFunction& f, const History& history,
                                         const RunContext& ctx) const override;

  double momentum_coefficient(int i) const;

 private:
  GradientMeasureProvider provider_;
  StepSchedule schedule_;
  bool momentum_;
};

/// Plain gradient descent on the same provider: l_i = l_{i-1} - alpha_{i-1} grad L.
class GradientDescentRule final : public LearningRule {
 public:
  GradientDescentRule(GradientMeasureProvider provider, StepSchedule schedule);

  int iota() const override { return 1; }
  std::string name() const override { return "gradient-descent"; }
  BaseStep base_step(int i, const History& history, const RunContext& ctx) const override;
  SignedMeasure measure(int i, const ParamFunction& f, const History& history, const ParamVector& beta,
                        const RunContext& ctx) const override;

 private:
  GradientMeasureProvider provider_;
  StepSchedule schedule_;
};

// ---------------------------------------------------------------------------

/// Finite Markov reward process: transition matrix P and per-transition
/// rewards R(s, s').
struct MarkovRewardProcess {
  Matrix transitions;
  Matrix rewards;

  /// 0 <-> 1 <-> 2 chain used by the TD(0) demonstration:
  ///   P = [[.5 .5 0], [.25 .5 .25], [0 .5 .5]]
  ///   R(s, s') = r(s') with r = (0, 0.5, 1)
  static MarkovRewardProcess three_state_chain();

  int states() const { return static_cast<int>(transitions.rows()); }
  Eigen::VectorXd stationary_distribution() const;
  Eigen::VectorXd expected_rewards() const;  // sum_s' P(s, s') R(s, s')
  /// v = (I - gamma P)^{-1} r_bar
  Eigen::VectorXd true_values(double gamma) const;
};

/// f(s, theta) = phi(s)^T theta; the input is the state index as a scalar.
class LinearFeatures final : public ParamFunction {
 public:
  LinearFeatures(Matrix features, std::string label = "linear-features");

  static LinearFeatures tabular(int states);

  int param_dim() const override { return static_cast<int>(features_.cols()); }
  std::string label() const override { return label_; }
  double eval(const InputPoint& x, const ParamVector& theta) const override;
  ParamVector grad(const InputPoint& x, const ParamVector& theta) const override;

  const Matrix& features() const { return features_; }

 private:
  int state_of(const InputPoint& x) const;

  Matrix features_;
  std::string label_;
};

/// Solution of Phi^T D (r_bar + gamma P Phi theta - Phi theta) = 0.
ParamVector td_fixed_point(const MarkovRewardProcess& mrp, const Matrix& features, double gamma);

/// TD(0) on transitions sampled i.i.d. from the stationary distribution
/// ("rule" substream of iteration i). delta = r + gamma f(s') - f(s);
/// measure: one atom (s, alpha_i * delta).
class Td0Rule final : public LearningRule {
 public:
  Td0Rule(MarkovRewardProcess mrp, double gamma, StepSchedule schedule);

  struct Transition {
    int state;
    int next_state;
    double reward;
  };

  int iota() const override { return 1; }
  std::string name() const override { return "td0"; }
  BaseStep base_step(int i, const History& history, const RunContext& ctx) const override;
  SignedMeasure measure(int i, const ParamFunction& f, const History& history, const ParamVector& beta,
                        const RunContext& ctx) const override;
  std::optional<ParamVector> direct_step(int i, const ParamFunction& f, const History& history,
                                         const RunContext& ctx) const override;

  Transition transition_at(int i, const RunContext& ctx) const;
  const MarkovRewardProcess& process() const { return mrp_; }

 private:
  MarkovRewardProcess mrp_;
  double gamma_;
  StepSchedule schedule_;
  Eigen::VectorXd stationary_;
};

// ---------------------------------------------------------------------------

/// l_i = beta_i = l_{i-1}: the zero measure.
class TrivialRule final : public LearningRule {
 public:
  int iota() const override { return 1; }
  std::string name() const override { return "trivial"; }
  BaseStep base_step(int i, const History& history, const RunContext& ctx) const override;
  SignedMeasure measure(int i, const ParamFunction& f, const History& history, const ParamVector& beta,
                        const RunContext& ctx) const override;
};

}  // namespace natlearn

#endif  // NATLEARN_RULES_HPP
