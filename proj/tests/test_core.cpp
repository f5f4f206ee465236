#include "natlearn/experiments.hpp"
#include "natlearn/gaussian_model.hpp"
#include "natlearn/learning_rule.hpp"
#include "natlearn/properties.hpp"
#include "natlearn/random.hpp"
#include "natlearn/rules.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace natlearn {
namespace {

ParamVector vec(std::initializer_list<double> v) {
  ParamVector out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

std::shared_ptr<CallableFunction> exp_of_theta() {
  return std::make_shared<CallableFunction>(
      "exp-theta", 1, [](const InputPoint&, const ParamVector& t) { return std::exp(t(0)); },
      [](const InputPoint&, const ParamVector& t) { return vec({std::exp(t(0))}); });
}

std::shared_ptr<CallableFunction> theta_itself() {
  return std::make_shared<CallableFunction>(
      "theta", 1, [](const InputPoint&, const ParamVector& t) { return t(0); },
      [](const InputPoint&, const ParamVector&) { return vec({1.0}); });
}

PointSampler scalar_theta_sampler(double lo, double hi) {
  return [lo, hi](std::mt19937_64& e) {
    return std::make_pair(scalar_input(standard_normal(e)), vec({lo + (hi - lo) * unit_uniform(e)}));
  };
}

TEST(SignedMeasure, TotalsFollowScale) {
  const SignedMeasure mu({Atom{scalar_input(1.0), 2.0}, Atom{scalar_input(2.0), -0.5}}, 3.0);
  EXPECT_DOUBLE_EQ(mu.total_weight(), 4.5);
  EXPECT_DOUBLE_EQ(mu.total_abs_weight(), 7.5);
  EXPECT_TRUE(mu.has_negative_weight());
  const SignedMeasure flipped = mu.scaled(-1.0);
  EXPECT_DOUBLE_EQ(flipped.weight(0), -6.0);
  EXPECT_DOUBLE_EQ(flipped.total_weight(), -4.5);
  EXPECT_TRUE(flipped.has_negative_weight());
  EXPECT_FALSE(SignedMeasure({Atom{scalar_input(1.0), 1.0}}).has_negative_weight());
  EXPECT_TRUE(SignedMeasure({Atom{scalar_input(1.0), 1.0}}).scaled(-1.0).has_negative_weight());
  EXPECT_TRUE(SignedMeasure().is_zero());
  EXPECT_TRUE(mu.scaled(0.0).is_zero());
}

TEST(SignedMeasure, NonFiniteWeightIsDivergence) {
  EXPECT_THROW(SignedMeasure({Atom{scalar_input(1.0), std::nan("")}}), NumericalDivergence);
  EXPECT_THROW(SignedMeasure({Atom{scalar_input(INFINITY), 1.0}}), NumericalDivergence);
  EXPECT_THROW(SignedMeasure().scaled(INFINITY), NumericalDivergence);
}

TEST(SignedMeasure, MomentsMatchDirectSums) {
  std::mt19937_64 rng(3);
  std::vector<Atom> atoms;
  for (int j = 0; j < 500; ++j) atoms.push_back(Atom{scalar_input(3.0 + 3.0 * standard_normal(rng)), unit_uniform(rng) - 0.3});
  const SignedMeasure mu(atoms, 0.7);
  const auto mo = mu.scalar_moments();
  ASSERT_TRUE(mo.has_value());
  for (double at : {-2.0, 0.0, 3.0, 7.5}) {
    const auto got = mo->about(at);
    for (int p = 0; p <= 4; ++p) {
      double direct = 0.0, scale = 0.0;
      for (const auto& a : atoms) {
        direct += 0.7 * a.weight * std::pow(a.x(0) - at, p);
        scale += std::abs(0.7 * a.weight * std::pow(a.x(0) - at, p));
      }
      EXPECT_NEAR(got[p], direct, 1e-12 * scale) << "p=" << p << " at=" << at;
    }
  }
}

TEST(SignedMeasure, VectorAtomsHaveNoScalarMoments) {
  InputPoint x(2);
  x << 1.0, 2.0;
  EXPECT_FALSE(SignedMeasure({Atom{x, 1.0}}).scalar_moments().has_value());
}

TEST(JointMeasure, ProbabilitiesMustSumToOne) {
  EXPECT_THROW(JointMeasure({JointAtom{scalar_input(0.0), scalar_input(0.0), 0.5}}), Error);
  EXPECT_THROW(JointMeasure({}), Error);
  const std::vector<InputPoint> pts{scalar_input(1.0), scalar_input(2.0)};
  const JointMeasure d = JointMeasure::diagonal(pts);
  EXPECT_TRUE(d.is_diagonal());
  EXPECT_DOUBLE_EQ(d.atoms()[0].probability + d.atoms()[1].probability, 1.0);
}

TEST(History, NonPositiveIterationsReturnInitialVectors) {
  History h({vec({1.0}), vec({2.0})});
  EXPECT_EQ(h.at(0)(0), 1.0);
  EXPECT_EQ(h.at(-1)(0), 2.0);
  EXPECT_THROW(h.at(-2), Error);
  h.push(vec({5.0}));
  EXPECT_EQ(h.at(1)(0), 5.0);
  EXPECT_EQ(h.latest(), 1);
}

TEST(Congruence, ThetaIsCongruentToExpTheta) {
  CongruentPair p{exp_of_theta(), theta_itself(),
                  Submersion{1, 1, [](const ParamVector& t) { return vec({std::exp(t(0))}); },
                             [](const ParamVector& t) { return Matrix::Constant(1, 1, std::exp(t(0))); }},
                  "exp"};
  const CongruenceReport r = verify_congruence(p, 200, 1, scalar_theta_sampler(-2.0, 2.0));
  EXPECT_TRUE(r.pass) << r.message;
  EXPECT_LT(r.max_value_residual, 1e-10);
}

TEST(Congruence, IdentityHasZeroResidual) {
  const auto f = std::make_shared<GaussianModel>(2, GaussianMode::LogDensity);
  CongruentPair p{f, f, Submersion::identity(2), "id"};
  const CongruenceReport r = verify_congruence(p, 100, 2, shipped_pairs().front().sampler);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.max_value_residual, 0.0);
  EXPECT_EQ(r.max_jacobian_property_residual, 0.0);
}

TEST(Congruence, GaussianSigmaToSigmaFourthAgainstFiniteDifferences) {
  const CongruentPair p = gaussian_pair(1, 4, GaussianMode::LogDensity);
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const ParamVector theta = vec({4.0 * unit_uniform(rng) - 2.0, 0.5 + 1.5 * unit_uniform(rng)});
    const InputPoint x = scalar_input(3.0 * standard_normal(rng));
    const auto f_of = [&](const ParamVector& th) { return p.f->eval(x, th); };
    const ParamVector fd = oracle::central_gradient(f_of, theta);
    const ParamVector chain = p.psi.jacobian(theta).transpose() * p.g->grad(x, p.psi.map(theta));
    EXPECT_LT((fd - chain).norm() / std::max(1.0, fd.norm()), 1e-8);
    EXPECT_NEAR(p.f->eval(x, theta), p.g->eval(x, p.psi.map(theta)), 1e-10);
  }
  const CongruenceReport r =
      verify_congruence(p, 200, 5, [](std::mt19937_64& e) {
        return std::make_pair(scalar_input(3.0 * standard_normal(e)), vec({standard_normal(e), 0.5 + unit_uniform(e)}));
      });
  EXPECT_TRUE(r.pass) << r.message;
}

TEST(Congruence, DimensionMismatchIsRejected) {
  const auto f = std::make_shared<GaussianModel>(1, GaussianMode::LogDensity);
  CongruentPair p{theta_itself(), f, Submersion{1, 2, {}, {}}, "bad"};
  const CongruenceReport r = verify_congruence(p, 10, 1, scalar_theta_sampler(0.0, 1.0));
  EXPECT_FALSE(r.pass);
  EXPECT_NE(r.message.find("not congruent"), std::string::npos);
}

TEST(RunRule, ZeroMeasureKeepsParametersAtBase) {
  const GaussianModel f(2, GaussianMode::LogDensity);
  const Trajectory t = run_rule(TrivialRule{}, f, {vec({1.0, 2.0})}, 20, 1);
  ASSERT_EQ(t.steps.size(), 20u);
  for (const auto& s : t.steps) {
    EXPECT_EQ(s.theta_next, vec({1.0, 2.0}));
    EXPECT_EQ(s.theta_next, s.beta);
  }
}

TEST(RunRule, GaussianBatchMatchesClosedFormRecursion) {
  const std::vector<double> data = generate_dataset(5, 1000, 3.0, 9.0);
  const double alpha = 0.001 / data.size();
  for (int k = 1; k <= 4; ++k) {
    const GaussianModel f(k, GaussianMode::LogDensity);
    const BatchGradientRule rule(data, StepSchedule::constant(alpha));
    const ParamVector theta0 = f.from_moments(2.0, 4.0);
    const Trajectory t = run_rule(rule, f, {theta0}, 50, 1);
    GaussianParams th{theta0(0), theta0(1)};
    for (const auto& s : t.steps) {
      const double mu = th.mu, sk = th.sigma_k;
      const double var = std::pow(sk, 2.0 / k);
      double s1 = 0.0, s2 = 0.0;
      for (double x : data) {
        s1 += x - mu;
        s2 += (x - mu) * (x - mu);
      }
      th.mu = mu + alpha * s1 / var;
      th.sigma_k = sk - alpha * data.size() / (k * sk) + alpha / k * std::pow(sk, -(k + 2.0) / k) * s2;
      EXPECT_NEAR(s.theta_next(0), th.mu, 1e-12 * std::abs(th.mu));
      EXPECT_NEAR(s.theta_next(1), th.sigma_k, 1e-12 * std::abs(th.sigma_k));
    }
  }
}

TEST(RunRule, SameSeedIsBitwiseIdentical) {
  const LinearFeatures f = LinearFeatures::tabular(3);
  const Td0Rule rule(MarkovRewardProcess::three_state_chain(), 0.9, StepSchedule::constant(0.05));
  const Trajectory a = run_rule(rule, f, {ParamVector::Zero(3)}, 300, 42);
  const Trajectory b = run_rule(rule, f, {ParamVector::Zero(3)}, 300, 42);
  const Trajectory c = run_rule(rule, f, {ParamVector::Zero(3)}, 300, 43);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_EQ(a.steps[i].theta_next, b.steps[i].theta_next);
    differs = differs || a.steps[i].theta_next != c.steps[i].theta_next;
  }
  EXPECT_TRUE(differs);
}

TEST(RunRule, NonFiniteStepEndsRunWithFlag) {
  const std::vector<double> data = generate_dataset(5, 200, 3.0, 9.0);
  const GaussianModel f(1, GaussianMode::LogDensity);
  const BatchGradientRule rule(data, StepSchedule::constant(10.0));
  const Trajectory t = run_rule(rule, f, {f.from_moments(2.0, 100.0)}, 100, 1);
  EXPECT_TRUE(t.diverged);
  EXPECT_EQ(static_cast<int>(t.steps.size()), t.diverged_at);
  EXPECT_TRUE(t.steps.back().diagnostics.diverged);
}

TEST(RuleStep, ThetaNextIsBasePlusDirection) {
  const std::vector<double> data = generate_dataset(5, 200, 3.0, 9.0);
  const GaussianModel f(3, GaussianMode::LogDensity);
  const BatchGradientRule rule(data, StepSchedule::constant(1e-4));
  const Trajectory t = run_rule(rule, f, {f.from_moments(2.0, 4.0)}, 10, 1);
  for (const auto& s : t.steps) EXPECT_EQ(s.theta_next, s.beta + s.update_direction);
}

// ---------------------------------------------------------------------------
// Measure covariance: the measure for f at H equals the measure for g at psi(H).

void expect_same_measure(const SignedMeasure& a, const SignedMeasure& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t j = 0; j < a.size(); ++j) {
    EXPECT_EQ(a.point(j), b.point(j));
    EXPECT_NEAR(a.weight(j), b.weight(j), tol * std::max(1.0, std::abs(a.weight(j))));
  }
}

void check_measure_covariance(const LearningRule& rule, const CongruentPair& pair, const ParamVector& theta0,
                              int steps, double tol) {
  const Trajectory t = run_rule(rule, *pair.f, {theta0}, steps, 9);
  History hf(std::vector<ParamVector>(static_cast<std::size_t>(rule.iota()), theta0));
  for (int i = 1; i <= steps; ++i) {
    const RunContext cf(9), cg(9);
    const History hg = hf.mapped(pair.psi);
    const BaseStep bf = rule.base_step(i, hf, cf);
    const BaseStep bg = rule.base_step(i, hg, cg);
    const ParamVector mapped_beta = pair.psi.map(bf.beta);
    if (rule.iota() == 1) EXPECT_LT((mapped_beta - bg.beta).norm(), 1e-9 * std::max(1.0, bg.beta.norm()));
    expect_same_measure(rule.measure(i, *pair.f, hf, bf.beta, cf), rule.measure(i, *pair.g, hg, mapped_beta, cg),
                        tol);
    hf.push(t.steps[static_cast<std::size_t>(i - 1)].theta_next);
  }
}

GradientMeasureProvider squared_error_provider(std::vector<double> xs, std::function<double(double)> target) {
  return [xs = std::move(xs), target = std::move(target)](int, const ParamFunction& f, const ParamVector& beta,
                                                          const RunContext&) {
    std::vector<Atom> atoms;
    for (double x : xs) atoms.push_back(Atom{scalar_input(x), f.eval(scalar_input(x), beta) - target(x)});
    return SignedMeasure(std::move(atoms), 1.0 / xs.size());
  };
}

TEST(MeasureCovariance, EveryShippedRuleOnGaussianPairs) {
  const std::vector<double> data = generate_dataset(21, 300, 3.0, 9.0);
  const auto target = [](double x) { return -0.5 * (x - 3.0) * (x - 3.0) / 9.0; };
  const auto provider = squared_error_provider({0.0, 1.0, 2.5, 4.0, 6.0}, target);
  const std::vector<std::shared_ptr<LearningRule>> rules{
      std::make_shared<BatchGradientRule>(data, StepSchedule::constant(1e-5)),
      std::make_shared<SquaredErrorSgdRule>([&](const InputPoint& x) { return target(x(0)); },
                                            [](std::mt19937_64& e) { return scalar_input(3.0 + 3.0 * standard_normal(e)); },
                                            StepSchedule::constant(1e-3)),
      std::make_shared<NesterovRule>(provider, StepSchedule::constant(1e-2)),
      std::make_shared<GradientDescentRule>(provider, StepSchedule::constant(1e-2)),
      std::make_shared<TrivialRule>()};
  for (const auto& rule : rules) {
    for (auto [a, b] : {std::pair{1, 4}, std::pair{2, 1}, std::pair{3, 2}}) {
      SCOPED_TRACE(rule->name() + " k" + std::to_string(a) + "-k" + std::to_string(b));
      const CongruentPair pair = gaussian_pair(a, b, GaussianMode::LogDensity);
      check_measure_covariance(*rule, pair, GaussianModel(a, GaussianMode::LogDensity).from_moments(2.0, 4.0), 8,
                               1e-9);
    }
  }
  const BatchGradientRule density_rule(data, StepSchedule::constant(1e-5), BatchObjective::SumOfLogValues);
  const CongruentPair dpair = gaussian_pair(1, 3, GaussianMode::Density);
  check_measure_covariance(density_rule, dpair, GaussianModel(1, GaussianMode::Density).from_moments(2.0, 4.0), 5,
                           1e-9);
}

TEST(MeasureCovariance, Td0OnLinearReparameterization) {
  Matrix phi_g(3, 2);
  phi_g << 1.0, 0.0, 0.5, 0.5, 0.0, 1.0;
  Matrix a(2, 2);
  a << 2.0, 1.0, -1.0, 1.0;
  const auto g = std::make_shared<LinearFeatures>(phi_g, "g");
  const auto f = std::make_shared<LinearFeatures>(Matrix(phi_g * a), "f");
  CongruentPair pair{f, g, Submersion{2, 2, [a](const ParamVector& t) { return ParamVector(a * t); },
                                      [a](const ParamVector&) { return a; }},
                     "linear"};
  const Td0Rule rule(MarkovRewardProcess::three_state_chain(), 0.9, StepSchedule::constant(0.1));
  check_measure_covariance(rule, pair, vec({0.2, -0.1}), 30, 1e-9);
}

TEST(Random, SubstreamsAreIndependentOfConsumption) {
  const RandomStreams s(99);
  auto a = s.engine("rule", 4);
  auto b = s.engine("metric", 4);
  for (int i = 0; i < 1000; ++i) (void)b();
  auto a2 = s.engine("rule", 4);
  EXPECT_EQ(a(), a2());
  EXPECT_NE(s.engine("rule", 4)(), s.engine("rule", 5)());
  EXPECT_NE(s.engine("rule", 4)(), RandomStreams(100).engine("rule", 4)());
}

TEST(Random, NormalQuantileKnownValues) {
  EXPECT_NEAR(standard_normal_quantile(0.5), 0.0, 1e-15);
  EXPECT_NEAR(standard_normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(standard_normal_quantile(0.025), -1.959963984540054, 1e-12);
}

}  // namespace
}  // namespace natlearn
