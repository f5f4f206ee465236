#include "natlearn/rules.hpp"

#include "natlearn/gaussian_model.hpp"
#include "natlearn/random.hpp"

#include <cmath>
#include <sstream>

namespace natlearn {

StepSchedule StepSchedule::constant(double alpha) {
  if (!(alpha > 0.0)) throw Error("step size must be positive");
  return StepSchedule{Kind::Constant, alpha, 1.0};
}

StepSchedule StepSchedule::inverse_decay(double alpha0, double horizon) {
  if (!(alpha0 > 0.0) || !(horizon > 0.0)) throw Error("inverse-decay schedule needs positive alpha0 and horizon");
  return StepSchedule{Kind::InverseDecay, alpha0, horizon};
}

double StepSchedule::at(int i) const {
  if (kind == Kind::Constant) return alpha0;
  return alpha0 * horizon / (horizon + static_cast<double>(std::max(i, 0)));
}

// ---------------------------------------------------------------------------

BatchGradientRule::BatchGradientRule(std::vector<double> data, StepSchedule schedule, BatchObjective objective)
    : data_(std::move(data)), schedule_(schedule), objective_(objective) {
  if (data_.empty()) throw Error("batch gradient rule: empty data");
  std::vector<Atom> atoms;
  atoms.reserve(data_.size());
  for (double x : data_) atoms.push_back(Atom{scalar_input(x), 1.0});
  unit_ = SignedMeasure(std::move(atoms));
}

BaseStep BatchGradientRule::base_step(int i, const History& history, const RunContext&) const {
  const ParamVector& prev = history.at(i - 1);
  return BaseStep{prev, prev};
}

SignedMeasure BatchGradientRule::measure(int i, const ParamFunction& f, const History&, const ParamVector& beta,
                                         const RunContext&) const {
  if (objective_ == BatchObjective::SumOfValues) return unit_.scaled(schedule_.at(i - 1));
  const std::vector<double> values = f.values(unit_, beta);
  std::vector<Atom> atoms;
  atoms.reserve(unit_.size());
  for (std::size_t j = 0; j < unit_.size(); ++j) atoms.push_back(Atom{unit_.point(j), 1.0 / values[j]});
  return SignedMeasure(std::move(atoms), schedule_.at(i - 1));
}

std::optional<ParamVector> BatchGradientRule::direct_step(int i, const ParamFunction& f, const History& history,
                                                          const RunContext&) const {
  const auto* gaussian = dynamic_cast<const GaussianModel*>(&f);
  if (objective_ != BatchObjective::SumOfValues || gaussian == nullptr || gaussian->mode() != GaussianMode::LogDensity)
    return std::nullopt;
  const ParamVector& prev = history.at(i - 1);
  const auto r = gaussian_loglik_gd_step(GaussianParams{prev(0), prev(1)}, data_, schedule_.at(i - 1), gaussian->k());
  ParamVector out(2);
  out << r.theta.mu, r.theta.sigma_k;
  return out;
}

// ---------------------------------------------------------------------------

ParamVector sgd_squared_error_step(const ParamFunction& f, const TargetFunction& f_star, const ParamVector& theta,
                                   const InputPoint& x, double alpha) {
  if (!(alpha > 0.0)) throw Error("sgd_squared_error_step: alpha must be positive");
  const double delta = f_star(x) - f.eval(x, theta);
  return theta + (alpha * delta) * f.grad(x, theta);
}

SquaredErrorSgdRule::SquaredErrorSgdRule(TargetFunction f_star, InputSampler inputs, StepSchedule schedule)
    : f_star_(std::move(f_star)), inputs_(std::move(inputs)), schedule_(schedule) {}

InputPoint SquaredErrorSgdRule::input_at(int i, const RunContext& ctx) const {
  auto engine = ctx.streams.engine("rule", static_cast<std::uint64_t>(i));
  return inputs_(engine);
}

BaseStep SquaredErrorSgdRule::base_step(int i, const History& history, const RunContext&) const {
  const ParamVector& prev = history.at(i - 1);
  return BaseStep{prev, prev};
}

SignedMeasure SquaredErrorSgdRule::measure(int i, const ParamFunction& f, const History&, const ParamVector& beta,
                                           const RunContext& ctx) const {
  InputPoint x = input_at(i, ctx);
  const double delta = f_star_(x) - f.eval(x, beta);
  return SignedMeasure::single(std::move(x), schedule_.at(i - 1) * delta);
}

std::optional<ParamVector> SquaredErrorSgdRule::direct_step(int i, const ParamFunction& f, const History& history,
                                                            const RunContext& ctx) const {
  return sgd_squared_error_step(f, f_star_, history.at(i - 1), input_at(i, ctx), schedule_.at(i - 1));
}

// ---------------------------------------------------------------------------

NesterovRule::NesterovRule(GradientMeasureProvider provider, StepSchedule schedule, bool momentum)
    : provider_(std::move(provider)), schedule_(schedule), momentum_(momentum) {}

double NesterovRule::momentum_coefficient(int i) const {
  if (!momentum_) return 0.0;
  return static_cast<double>(i - 1) / static_cast<double>(i + 1);
}

BaseStep NesterovRule::base_step(int i, const History& history, const RunContext&) const {
  const ParamVector& last = history.at(i - 1);
  const ParamVector& before = history.at(i - 2);
  ParamVector beta = last + momentum_coefficient(i) * (last - before);
  return BaseStep{beta, beta};
}

SignedMeasure NesterovRule::measure(int i, const ParamFunction& f, const History&, const ParamVector& beta,
                                    const RunContext& ctx) const {
  return provider_(i, f, beta, ctx).scaled(-schedule_.at(i - 1));
}

std::optional<ParamVector> NesterovRule::direct_step(int i, const ParamFunction& f, const History& history,
                                                     const RunContext& ctx) const {
  const ParamVector beta = base_step(i, history, ctx).beta;
  const SignedMeasure nu = provider_(i, f, beta, ctx);
  const double alpha = schedule_.at(i - 1);
  // beta - sum_j (alpha * nu_j) grad f(x_j, beta)
  ParamVector acc = ParamVector::Zero(f.param_dim());
  for (std::size_t j = 0; j < nu.size(); ++j) {
    const double w = alpha * nu.weight(j);
    if (w == 0.0) continue;
    acc += w * f.grad(nu.point(j), beta);
  }
  return ParamVector(beta - acc);
}

GradientDescentRule::GradientDescentRule(GradientMeasureProvider provider, StepSchedule schedule)
    : provider_(std::move(provider)), schedule_(schedule) {}

BaseStep GradientDescentRule::base_step(int i, const History& history, const RunContext&) const {
  const ParamVector& prev = history.at(i - 1);
  return BaseStep{prev, prev};
}

SignedMeasure GradientDescentRule::measure(int i, const ParamFunction& f, const History&, const ParamVector& beta,
                                           const RunContext& ctx) const {
  return provider_(i, f, beta, ctx).scaled(-schedule_.at(i - 1));
}

// ---------------------------------------------------------------------------

MarkovRewardProcess MarkovRewardProcess::three_state_chain() {
  MarkovRewardProcess mrp;
  mrp.transitions.resize(3, 3);
  mrp.transitions << 0.5, 0.5, 0.0,  //
      0.25, 0.5, 0.25,               //
      0.0, 0.5, 0.5;
  const Eigen::Vector3d r(0.0, 0.5, 1.0);
  mrp.rewards.resize(3, 3);
  for (int s = 0; s < 3; ++s) mrp.rewards.row(s) = r.transpose();
  return mrp;
}

Eigen::VectorXd MarkovRewardProcess::stationary_distribution() const {
  const int n = states();
  Matrix a = transitions.transpose() - Matrix::Identity(n, n);
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  return a.colPivHouseholderQr().solve(b);
}

Eigen::VectorXd MarkovRewardProcess::expected_rewards() const {
  return transitions.cwiseProduct(rewards).rowwise().sum();
}

Eigen::VectorXd MarkovRewardProcess::true_values(double gamma) const {
  const int n = states();
  return (Matrix::Identity(n, n) - gamma * transitions).colPivHouseholderQr().solve(expected_rewards());
}

LinearFeatures::LinearFeatures(Matrix features, std::string label)
    : features_(std::move(features)), label_(std::move(label)) {
  if (features_.rows() == 0 || features_.cols() == 0) throw Error("LinearFeatures: empty feature matrix");
}

LinearFeatures LinearFeatures::tabular(int states) {
  return LinearFeatures(Matrix::Identity(states, states), "tabular");
}

int LinearFeatures::state_of(const InputPoint& x) const {
  const long s = std::lround(x(0));
  if (s < 0 || s >= features_.rows()) throw Error("LinearFeatures: state index out of range");
  return static_cast<int>(s);
}

double LinearFeatures::eval(const InputPoint& x, const ParamVector& theta) const {
  return features_.row(state_of(x)).dot(theta);
}

ParamVector LinearFeatures::grad(const InputPoint& x, const ParamVector&) const {
  return features_.row(state_of(x)).transpose();
}

ParamVector td_fixed_point(const MarkovRewardProcess& mrp, const Matrix& features, double gamma) {
  const int n = mrp.states();
  const Matrix d = mrp.stationary_distribution().asDiagonal();
  const Matrix a = features.transpose() * d * (Matrix::Identity(n, n) - gamma * mrp.transitions) * features;
  const ParamVector b = features.transpose() * d * mrp.expected_rewards();
  return a.colPivHouseholderQr().solve(b);
}

Td0Rule::Td0Rule(MarkovRewardProcess mrp, double gamma, StepSchedule schedule)
    : mrp_(std::move(mrp)), gamma_(gamma), schedule_(schedule), stationary_(mrp_.stationary_distribution()) {
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw Error("td0: gamma must lie in [0, 1)");
}

namespace {

int sample_index(const Eigen::VectorXd& probabilities, double u) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < probabilities.size(); ++k) {
    acc += probabilities(k);
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probabilities.size() - 1);
}

}  // namespace

Td0Rule::Transition Td0Rule::transition_at(int i, const RunContext& ctx) const {
  auto engine = ctx.streams.engine("rule", static_cast<std::uint64_t>(i));
  const int s = sample_index(stationary_, unit_uniform(engine));
  const int next = sample_index(mrp_.transitions.row(s).transpose(), unit_uniform(engine));
  return Transition{s, next, mrp_.rewards(s, next)};
}

BaseStep Td0Rule::base_step(int i, const History& history, const RunContext&) const {
  const ParamVector& prev = history.at(i - 1);
  return BaseStep{prev, prev};
}

SignedMeasure Td0Rule::measure(int i, const ParamFunction& f, const History&, const ParamVector& beta,
                               const RunContext& ctx) const {
  const Transition t = transition_at(i, ctx);
  const InputPoint s = scalar_input(t.state);
  const double delta = t.reward + gamma_ * f.eval(scalar_input(t.next_state), beta) - f.eval(s, beta);
  return SignedMeasure::single(s, schedule_.at(i - 1) * delta);
}

std::optional<ParamVector> Td0Rule::direct_step(int i, const ParamFunction& f, const History& history,
                                                const RunContext& ctx) const {
  const ParamVector& theta = history.at(i - 1);
  const Transition t = transition_at(i, ctx);
  const InputPoint s = scalar_input(t.state);
  const double delta = t.reward + gamma_ * f.eval(scalar_input(t.next_state), theta) - f.eval(s, theta);
  return ParamVector(theta + (schedule_.at(i - 1) * delta) * f.grad(s, theta));
}

// ---------------------------------------------------------------------------

BaseStep TrivialRule::base_step(int i, const History& history, const RunContext&) const {
  const ParamVector& prev = history.at(i - 1);
  return BaseStep{prev, prev};
}

SignedMeasure TrivialRule::measure(int, const ParamFunction&, const History&, const ParamVector&,
                                   const RunContext&) const {
  return SignedMeasure();
}

}  // namespace natlearn
