#include "natlearn/learning_rule.hpp"

#include <limits>
#include <sstream>

namespace natlearn {

History::History(std::vector<ParamVector> initial) : initial_(std::move(initial)) {
  if (initial_.empty()) throw Error("history needs at least one initial parameter vector");
}

const ParamVector& History::at(int i) const {
  if (i <= 0) {
    const int idx = -i;  // theta_0^{1-i} with 1-based superscript
    if (idx >= iota()) {
      std::ostringstream msg;
      msg << "history lookup at iteration " << i << " needs theta_0^" << (1 - i) << " but iota = " << iota();
      throw Error(msg.str());
    }
    return initial_[static_cast<std::size_t>(idx)];
  }
  if (i > latest()) {
    std::ostringstream msg;
    msg << "history lookup at iteration " << i << " beyond latest " << latest();
    throw Error(msg.str());
  }
  return steps_[static_cast<std::size_t>(i - 1)];
}

History History::mapped(const Submersion& psi) const {
  std::vector<ParamVector> init;
  init.reserve(initial_.size());
  for (const auto& v : initial_) init.push_back(psi.map(v));
  History out(std::move(init));
  for (const auto& v : steps_) out.push(psi.map(v));
  return out;
}

RuleStep LearningRule::step(int i, const ParamFunction& f, const History& history, RunContext& ctx) const {
  BaseStep bs = base_step(i, history, ctx);
  const SignedMeasure mu = measure(i, f, history, bs.beta, ctx);

  RuleStep out;
  out.update_direction = f.weighted_grad_sum(mu, bs.beta);
  out.theta_next = bs.base + out.update_direction;
  out.beta = std::move(bs.beta);
  out.diagnostics.measure_total_weight = mu.total_weight();
  return out;
}

Trajectory run_rule(const SteppingRule& rule, const ParamFunction& f, std::vector<ParamVector> theta0, int iterations,
                    std::uint64_t rng_seed) {
  require_scalar_output(f);
  if (iterations < 1) throw Error("run_rule: iterations must be >= 1");
  if (theta0.size() == 1 && rule.iota() > 1) {
    theta0.resize(static_cast<std::size_t>(rule.iota()), theta0.front());
  }
  if (static_cast<int>(theta0.size()) != rule.iota()) {
    std::ostringstream msg;
    msg << "run_rule: rule " << rule.name() << " needs " << rule.iota() << " initial vectors, got " << theta0.size();
    throw Error(msg.str());
  }
  for (const auto& v : theta0) {
    if (v.size() != f.param_dim()) throw Error("run_rule: initial vector dimension does not match f");
    if (!f.in_domain(v)) throw Error("run_rule: initial vector outside the function's domain");
  }

  History history(std::move(theta0));
  RunContext ctx(rng_seed);
  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(iterations));
  for (int i = 1; i <= iterations; ++i) {
    RuleStep s;
    try {
      s = rule.step(i, f, history, ctx);
    } catch (const NumericalDivergence&) {
      s.theta_next = ParamVector::Constant(f.param_dim(), std::numeric_limits<double>::quiet_NaN());
      s.beta = history.at(i - 1);
      s.update_direction = s.theta_next;
    }
    const bool bad = !all_finite(s.theta_next) || !f.in_domain(s.theta_next);
    if (bad) {
      s.diagnostics.diverged = true;
      traj.steps.push_back(std::move(s));
      traj.diverged = true;
      traj.diverged_at = i;
      break;
    }
    history.push(s.theta_next);
    traj.steps.push_back(std::move(s));
  }
  return traj;
}

}  // namespace natlearn
