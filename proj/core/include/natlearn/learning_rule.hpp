#ifndef NATLEARN_LEARNING_RULE_HPP
#define NATLEARN_LEARNING_RULE_HPP

#include "natlearn/random.hpp"
#include "natlearn/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace natlearn {

/// Parameter vectors of one run. Iteration i >= 1 is a computed step;
/// i <= 0 resolves to the initial vector theta_0^{1-i}.
class History {
 public:
  explicit History(std::vector<ParamVector> initial);

  const ParamVector& at(int i) const;
  int iota() const { return static_cast<int>(initial_.size()); }
  /// Index of the most recent iteration (0 before any step).
  int latest() const { return static_cast<int>(steps_.size()); }

  void push(ParamVector theta) { steps_.push_back(std::move(theta)); }

  /// Every stored vector mapped through psi.
  History mapped(const Submersion& psi) const;

 private:
  std::vector<ParamVector> initial_;
  std::vector<ParamVector> steps_;
};

/// Per-run mutable context: the seed streams plus the compatible-weights
/// estimate carried across iterations by the two-timescale estimator.
struct RunContext {
  RandomStreams streams;
  std::optional<ParamVector> compatible_weights;

  explicit RunContext(std::uint64_t seed) : streams(seed) {}
};

struct StepDiagnostics {
  double metric_condition = 1.0;   // largest / smallest kept eigenvalue
  int metric_rank = -1;            // -1: no metric involved
  bool metric_full_rank = true;
  double measure_total_weight = 0.0;
  bool diverged = false;
};

struct RuleStep {
  ParamVector theta_next;
  ParamVector beta;
  ParamVector update_direction;  // theta_next = base + update_direction
  StepDiagnostics diagnostics;
};

/// Anything that can advance a run by one iteration.
class SteppingRule {
 public:
  virtual ~SteppingRule() = default;
  virtual int iota() const = 0;
  virtual std::string name() const = 0;
  virtual RuleStep step(int i, const ParamFunction& f, const History& history, RunContext& ctx) const = 0;
};

struct BaseStep {
  ParamVector beta;
  ParamVector base;  // l'_i, first-order covariant with respect to beta
};

/// A learning rule in the decomposed form
///   l_i = l'_i + sum over atoms (x, w) of w * grad f(x, beta_i).
class LearningRule : public SteppingRule {
 public:
  virtual BaseStep base_step(int i, const History& history, const RunContext& ctx) const = 0;
  virtual SignedMeasure measure(int i, const ParamFunction& f, const History& history, const ParamVector& beta,
                                const RunContext& ctx) const = 0;

  RuleStep step(int i, const ParamFunction& f, const History& history, RunContext& ctx) const override;

  /// The rule's update written the conventional way, when it has one; used to
  /// check that the decomposition reproduces it.
  virtual std::optional<ParamVector> direct_step(int /*i*/, const ParamFunction& /*f*/, const History& /*history*/,
                                                 const RunContext& /*ctx*/) const {
    return std::nullopt;
  }
};

struct Trajectory {
  std::vector<RuleStep> steps;
  bool diverged = false;
  int diverged_at = 0;  // iteration whose output left the domain
};

/// Runs `iterations` steps from theta0. A single initial vector is repeated
/// when the rule needs iota > 1. A step whose output is non-finite or outside
/// f's domain is kept, flagged, and ends the run.
Trajectory run_rule(const SteppingRule& rule, const ParamFunction& f, std::vector<ParamVector> theta0, int iterations,
                    std::uint64_t rng_seed);

}  // namespace natlearn

#endif  // NATLEARN_LEARNING_RULE_HPP
