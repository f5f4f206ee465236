#include "natlearn/gaussian_model.hpp"
#include "natlearn/metric.hpp"
#include "natlearn/properties.hpp"
#include "natlearn/random.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace natlearn {
namespace {

/// f(x, theta) = sum_i sin(x (i + 1)) theta_i: generic gradients in any dimension.
CallableFunction trig_features(int n) {
  return CallableFunction(
      "trig", n,
      [n](const InputPoint& x, const ParamVector& t) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += std::sin(x(0) * (i + 1)) * t(i);
        return s;
      },
      [n](const InputPoint& x, const ParamVector&) {
        ParamVector g(n);
        for (int i = 0; i < n; ++i) g(i) = std::sin(x(0) * (i + 1));
        return g;
      });
}

/// Fisher of N(mu, sigma^2) in (mu, sigma) is diag(1/sigma^2, 2/sigma^2); pulled
/// back through d(mu, sigma)/d(mu, sigma^k) = diag(1, sigma^{1-k} / k).
Matrix chain_rule_fisher(double sigma, int k) {
  Matrix j = Matrix::Zero(2, 2);
  j(0, 0) = 1.0;
  j(1, 1) = std::pow(sigma, 1.0 - k) / k;
  Matrix base = Matrix::Zero(2, 2);
  base(0, 0) = 1.0 / (sigma * sigma);
  base(1, 1) = 2.0 / (sigma * sigma);
  return j.transpose() * base * j;
}

TEST(MetricFromJoint, SingleAtomUnitGradient) {
  const CallableFunction f(
      "e1", 2, [](const InputPoint&, const ParamVector& t) { return t(0); },
      [](const InputPoint&, const ParamVector&) { return ParamVector::Unit(2, 0); });
  const JointMeasure p({JointAtom{scalar_input(0.0), scalar_input(0.0), 1.0}});
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = 1.0;
  EXPECT_EQ(metric_from_joint(f, ParamVector::Zero(2), p).entries, expect);
}

TEST(MetricFromJoint, MonteCarloFisherMatchesClosedForm) {
  for (auto [k, sigma] : {std::pair{1, 1.0}, std::pair{2, 2.0}, std::pair{4, 1.5}}) {
    const GaussianModel f(k, GaussianMode::LogDensity);
    const ParamVector beta = f.from_moments(0.7, sigma * sigma);
    std::mt19937_64 rng(100 + k);
    std::vector<InputPoint> pts;
    for (int s = 0; s < 1000000; ++s) pts.push_back(scalar_input(0.7 + sigma * standard_normal(rng)));
    const Matrix mc = metric_from_joint(f, beta, JointMeasure::diagonal(pts)).entries;
    const Matrix exact = chain_rule_fisher(sigma, k);
    EXPECT_NEAR(mc(0, 0), exact(0, 0), 0.02 * exact(0, 0)) << "k=" << k;
    EXPECT_NEAR(mc(1, 1), exact(1, 1), 0.02 * exact(1, 1)) << "k=" << k;
    EXPECT_NEAR(mc(0, 1), 0.0, 0.02 * std::sqrt(exact(0, 0) * exact(1, 1))) << "k=" << k;
  }
}

TEST(ClosedFormFisher, ChainRuleOracle) {
  EXPECT_TRUE(fisher_gaussian_closed_form(0.0, 1.0, 1).entries.isApprox(chain_rule_fisher(1.0, 1)));
  const Matrix k2 = fisher_gaussian_closed_form(0.0, 4.0, 2).entries;
  EXPECT_DOUBLE_EQ(k2(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(k2(1, 1), 0.03125);
  for (int k = 1; k <= 4; ++k) {
    for (double sigma : {0.3, 1.0, 2.5}) {
      const Matrix got = fisher_gaussian_closed_form(1.0, std::pow(sigma, k), k).entries;
      EXPECT_LT(oracle::rel_diff(chain_rule_fisher(sigma, k), got), 1e-12);
    }
  }
  EXPECT_THROW(fisher_gaussian_closed_form(0.0, 0.0, 1), Error);
}

TEST(MetricTransform, IdentitySubmersionIsExact) {
  const auto f = std::make_shared<GaussianModel>(3, GaussianMode::LogDensity);
  const CongruentPair pair{f, f, Submersion::identity(2), "id"};
  const SignedMeasure mu({Atom{scalar_input(1.0), 0.5}, Atom{scalar_input(2.0), 0.5}});
  ParamVector beta(2);
  beta << 0.2, 1.7;
  for (const MetricSpec& spec : {MetricSpec{MetricSpec::ClosedFormFisher{}}, MetricSpec{MetricSpec::FisherSampled{}},
                                 MetricSpec{MetricSpec::MeasureGram{}}}) {
    EXPECT_EQ(metric_transform_residual(spec, pair, beta, 3, mu, 8), 0.0) << spec.describe();
  }
}

TEST(MetricTransform, HoldsOnEveryShippedPair) {
  const SuiteReport r = congruence_suite(20, 31, 1e-8);
  for (const auto& l : r.lines) EXPECT_TRUE(l.pass) << l.name << " " << l.value;
}

TEST(SteepestDirection, EuclideanAndDiagonal) {
  const CallableFunction f(
      "ones", 2, [](const InputPoint&, const ParamVector& t) { return t.sum(); },
      [](const InputPoint&, const ParamVector&) { return ParamVector::Ones(2); });
  const ParamVector d0 = steepest_direction(f, scalar_input(0.0), ParamVector::Zero(2), MetricMatrix{Matrix::Identity(2, 2)});
  EXPECT_EQ(d0, ParamVector::Ones(2));
  Matrix g = Matrix::Zero(2, 2);
  g(0, 0) = 1.0;
  g(1, 1) = 4.0;
  const ParamVector d = steepest_direction(f, scalar_input(0.0), ParamVector::Zero(2), MetricMatrix{g});
  EXPECT_DOUBLE_EQ(d(0), 1.0);
  EXPECT_DOUBLE_EQ(d(1), 0.25);
}

TEST(SteepestDirection, LiesInRowSpaceOfRankDeficientMetric) {
  std::mt19937_64 rng(2);
  const CallableFunction f = trig_features(4);
  for (int t = 0; t < 50; ++t) {
    const int s = 1 + static_cast<int>(unit_uniform(rng) * 3);
    const Matrix b = oracle::random_matrix(4, s, rng);
    const MetricMatrix g{b * b.transpose()};
    const ParamVector d = steepest_direction(f, scalar_input(0.3 + unit_uniform(rng)), ParamVector::Zero(4), g);
    const Matrix proj = b * oracle::svd_pinv(b);
    EXPECT_LT((d - proj * d).norm(), 1e-8 * std::max(1.0, d.norm()));
  }
}

TEST(SampledFisher, RankEqualsSampleCountBelowDimension) {
  const CallableFunction f = trig_features(5);
  std::mt19937_64 rng(4);
  for (int s = 1; s < 5; ++s) {
    std::vector<InputPoint> pts;
    for (int j = 0; j < s; ++j) pts.push_back(scalar_input(0.2 + 2.5 * unit_uniform(rng)));
    const MetricMatrix g = metric_from_joint(f, ParamVector::Zero(5), JointMeasure::diagonal(pts));
    EXPECT_EQ(pseudo_inverse(g).rank, s);
  }
}

TEST(SampledFisher, ConvergesToClosedFormAsSamplesGrow) {
  const GaussianModel f(2, GaussianMode::LogDensity);
  const ParamVector beta = f.from_moments(3.0, 9.0);
  const Matrix exact = *f.closed_form_fisher(beta);
  double prev = INFINITY;
  for (int s : {100, 1000, 10000}) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const MetricMatrix g = estimate_metric(MetricSpec{MetricSpec::FisherSampled{s, SampleSource::Model, 5.0}}, f,
                                             beta, 1, SignedMeasure(), nullptr, RandomStreams(seed));
      total += (g.entries - exact).norm();
    }
    EXPECT_LT(total / 20.0, prev) << "s=" << s;
    prev = total / 20.0;
  }
}

TEST(SampledFisher, SameStreamsSameMetric) {
  const GaussianModel f(3, GaussianMode::Density);
  const ParamVector beta = f.from_moments(1.0, 2.0);
  const MetricSpec spec{MetricSpec::FisherSampled{50, SampleSource::Uniform, 5.0}};
  const Matrix a = estimate_metric(spec, f, beta, 4, SignedMeasure(), nullptr, RandomStreams(3)).entries;
  const Matrix b = estimate_metric(spec, f, beta, 4, SignedMeasure(), nullptr, RandomStreams(3)).entries;
  const Matrix c = estimate_metric(spec, f, beta, 5, SignedMeasure(), nullptr, RandomStreams(3)).entries;
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(SampledFisher, UniformSourceStaysInsideFiveSigma) {
  const GaussianModel f(1, GaussianMode::LogDensity);
  const ParamVector beta = f.from_moments(2.0, 4.0);
  std::mt19937_64 rng(1);
  const JointMeasure p = sample_joint_measure(f, beta, 2000, SampleSource::Uniform, 5.0, rng);
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& a : p.atoms()) {
    lo = std::min(lo, a.x(0));
    hi = std::max(hi, a.x(0));
  }
  EXPECT_GE(lo, 2.0 - 10.0);
  EXPECT_LE(hi, 2.0 + 10.0);
  EXPECT_LT(lo, -7.0);
  EXPECT_GT(hi, 11.0);
}

TEST(MetricMatrix, EstimatesArePositiveSemidefinite) {
  const GaussianModel f(2, GaussianMode::Density);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    const ParamVector beta = f.from_moments(standard_normal(rng), 0.5 + 3.0 * unit_uniform(rng));
    const Matrix g = estimate_metric(MetricSpec{MetricSpec::FisherSampled{7, SampleSource::Model, 5.0}}, f, beta, t,
                                     SignedMeasure(), nullptr, RandomStreams(t))
                         .entries;
    EXPECT_EQ(g, g.transpose());
    const Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * es.eigenvalues().maxCoeff());
  }
}

TEST(SteepestAscent, MatchesBruteForceOverUnitMetricSphere) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 20; ++t) {
    const int n = 2 + t % 2;
    const Matrix b = oracle::random_matrix(n, n, rng);
    const Matrix g = b * b.transpose() + 0.1 * Matrix::Identity(n, n);
    const ParamVector grad = oracle::random_matrix(n, 1, rng);
    // d = L^{-T} u with L L^T = G maps the unit sphere onto d^T G d = 1.
    const Eigen::LLT<Matrix> llt(g);
    const Matrix l_inv_t = llt.matrixL().transpose().solve(Matrix::Identity(n, n));
    ParamVector best;
    double best_val = -INFINITY;
    for (int s = 0; s < 200000; ++s) {
      ParamVector u = oracle::random_matrix(n, 1, rng);
      u.normalize();
      const ParamVector d = l_inv_t * u;
      const double v = grad.dot(d);
      if (v > best_val) {
        best_val = v;
        best = d;
      }
    }
    const ParamVector nat = pinv(MetricMatrix{g}) * grad;
    EXPECT_GT(nat.dot(best) / (nat.norm() * best.norm()), 0.999);
  }
}

}  // namespace
}  // namespace natlearn
