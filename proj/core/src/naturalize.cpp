#include "natlearn/naturalize.hpp"

#include "natlearn/calculus.hpp"
#include "natlearn/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace natlearn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr std::size_t kMaxRowsForQr = 20000;

void record_metric(StepDiagnostics& d, const PseudoInverse& p, int n) {
  d.metric_rank = d.metric_rank < 0 ? p.rank : std::min(d.metric_rank, p.rank);
  d.metric_condition = std::max(d.metric_condition, p.condition);
  d.metric_full_rank = d.metric_full_rank && p.rank == n;
}

bool is_measure_gram(const MetricSpec& spec) { return std::holds_alternative<MetricSpec::MeasureGram>(spec.kind); }

}  // namespace

std::string EstimationMode::describe() const {
  return std::visit(overloaded{[](const ExplicitPinv&) { return std::string("pinv"); },
                               [](const DirectWStar&) { return std::string("wstar"); },
                               [](const TwoTimescale& t) {
                                 std::ostringstream o;
                                 o << "two-timescale(alpha=" << t.secondary_alpha << ",inner=" << t.inner_updates
                                   << ")";
                                 return o.str();
                               }},
                    kind);
}

NaturalizedRule::NaturalizedRule(std::shared_ptr<const LearningRule> base, MetricSpec spec, EstimationMode mode)
    : base_(std::move(base)), spec_(std::move(spec)), mode_(std::move(mode)) {
  if (!base_) throw Error("naturalize: null base rule");
  const bool needs_gram = !std::holds_alternative<EstimationMode::ExplicitPinv>(mode_.kind);
  if (needs_gram && !is_measure_gram(spec_)) {
    throw Error("naturalize: " + mode_.describe() + " estimation requires the measure-gram metric");
  }
  if (const auto* t = std::get_if<EstimationMode::TwoTimescale>(&mode_.kind)) {
    if (!(t->secondary_alpha > 0.0) || t->inner_updates < 1) {
      throw Error("naturalize: two-timescale needs a positive secondary step size and >= 1 inner update");
    }
  }
}

std::string NaturalizedRule::name() const {
  return "naturalized-" + base_->name() + "[" + spec_.describe() + "," + mode_.describe() + "]";
}

RuleStep NaturalizedRule::step(int i, const ParamFunction& f, const History& history, RunContext& ctx) const {
  BaseStep bs = base_->base_step(i, history, ctx);
  const SignedMeasure mu = base_->measure(i, f, history, bs.beta, ctx);
  const int n = f.param_dim();

  RuleStep out;
  out.diagnostics.measure_total_weight = mu.total_weight();
  ParamVector direction = ParamVector::Zero(n);

  if (!mu.is_zero()) {
    std::visit(
        overloaded{
            [&](const EstimationMode::ExplicitPinv&) {
              if (spec_.per_atom()) {
                for (std::size_t j = 0; j < mu.size(); ++j) {
                  const double w = mu.weight(j);
                  if (w == 0.0) continue;
                  const InputPoint& x = mu.point(j);
                  const PseudoInverse p =
                      pseudo_inverse(estimate_metric(spec_, f, bs.beta, i, mu, &x, ctx.streams));
                  record_metric(out.diagnostics, p, n);
                  direction.noalias() += w * (p.inverse * f.grad(x, bs.beta));
                }
              } else {
                const PseudoInverse p =
                    pseudo_inverse(estimate_metric(spec_, f, bs.beta, i, mu, nullptr, ctx.streams));
                record_metric(out.diagnostics, p, n);
                direction = p.inverse * f.weighted_grad_sum(mu, bs.beta);
              }
            },
            [&](const EstimationMode::DirectWStar&) {
              direction = mu.total_weight() * direct_w_star(f, bs.beta, mu);
              MetricMatrix g;
              g.entries = f.weighted_gram(mu, bs.beta);
              record_metric(out.diagnostics, pseudo_inverse(g), n);
            },
            [&](const EstimationMode::TwoTimescale& t) {
              if (!ctx.compatible_weights || ctx.compatible_weights->size() != n) {
                ctx.compatible_weights = ParamVector::Zero(n);
              }
              auto engine = ctx.streams.engine("compat", static_cast<std::uint64_t>(i));
              for (int u = 0; u < t.inner_updates; ++u) {
                compatible_sgd_update(f, bs.beta, mu, t.secondary_alpha, engine, *ctx.compatible_weights);
              }
              direction = mu.total_weight() * *ctx.compatible_weights;
            }},
        mode_.kind);
  }

  out.update_direction = std::move(direction);
  out.theta_next = bs.base + out.update_direction;
  out.beta = std::move(bs.beta);
  return out;
}

NaturalizedRule naturalize(std::shared_ptr<const LearningRule> rule, MetricSpec spec, EstimationMode mode) {
  return NaturalizedRule(std::move(rule), std::move(spec), std::move(mode));
}

ParamVector direct_w_star(const ParamFunction& f, const ParamVector& beta, const SignedMeasure& mu) {
  const int n = f.param_dim();
  if (mu.empty() || mu.total_abs_weight() == 0.0) throw Error("direct_w_star: measure has all-zero weights");

  bool non_negative = true;
  for (std::size_t j = 0; j < mu.size(); ++j) non_negative = non_negative && mu.weight(j) >= 0.0;

  if (non_negative && mu.size() <= kMaxRowsForQr) {
    Matrix a(static_cast<Eigen::Index>(mu.size()), n);
    ParamVector b(static_cast<Eigen::Index>(mu.size()));
    for (std::size_t j = 0; j < mu.size(); ++j) {
      const double r = std::sqrt(mu.weight(j));
      a.row(static_cast<Eigen::Index>(j)) = r * f.grad(mu.point(j), beta).transpose();
      b(static_cast<Eigen::Index>(j)) = r;
    }
    return least_squares_min_norm(a, b);
  }
  return least_squares_min_norm(f.weighted_gram(mu, beta), f.weighted_grad_sum(mu, beta));
}

bool compatible_sgd_update(const ParamFunction& f, const ParamVector& beta, const SignedMeasure& mu, double alpha,
                           std::mt19937_64& engine, ParamVector& w, OpCounter* ops) {
  const double total = mu.total_abs_weight();
  if (mu.empty() || total == 0.0) return false;
  const double target = unit_uniform(engine) * total;
  std::size_t pick = mu.size() - 1;
  double acc = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    acc += std::abs(mu.weight(j));
    if (target < acc) {
      pick = j;
      break;
    }
  }
  const double sign = mu.weight(pick) < 0.0 ? -1.0 : 1.0;
  const ParamVector g = f.grad(mu.point(pick), beta);
  const Eigen::Index n = w.size();
  double dot = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) dot += w(k) * g(k);
  const double c = alpha * sign * (1.0 - dot);
  for (Eigen::Index k = 0; k < n; ++k) w(k) += c * g(k);
  if (ops != nullptr) {
    ops->updates += 1;
    ops->flops += 4 * static_cast<std::uint64_t>(n);
  }
  return true;
}

TwoTimescaleResult two_timescale_w(const ParamFunction& f, const std::function<ParamVector(int)>& beta_stream,
                                   const std::function<SignedMeasure(int)>& mu_stream, double secondary_alpha,
                                   int iterations, std::uint64_t rng_seed, const ParamVector& w0) {
  if (!(secondary_alpha > 0.0)) throw Error("two_timescale_w: secondary step size must be positive");
  if (iterations < 0) throw Error("two_timescale_w: negative iteration count");
  if (w0.size() != f.param_dim()) throw Error("two_timescale_w: w0 dimension does not match f");

  const RandomStreams streams(rng_seed);
  TwoTimescaleResult out;
  out.w.reserve(static_cast<std::size_t>(iterations) + 1);
  out.w.push_back(w0);
  ParamVector w = w0;
  for (int t = 1; t <= iterations; ++t) {
    auto engine = streams.engine("compat", static_cast<std::uint64_t>(t));
    compatible_sgd_update(f, beta_stream(t), mu_stream(t), secondary_alpha, engine, w, &out.ops);
    out.w.push_back(w);
    if (!all_finite(w)) {
      out.diverged = true;
      break;
    }
  }
  return out;
}

}  // namespace natlearn
