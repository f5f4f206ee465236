#include "natlearn/properties.hpp"

#include "natlearn/covariance.hpp"
#include "natlearn/gaussian_model.hpp"
#include "natlearn/random.hpp"
#include "natlearn/rules.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace natlearn {

namespace {

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double uniform(std::mt19937_64& e, double lo, double hi) { return lo + (hi - lo) * unit_uniform(e); }

PointSampler gaussian_sampler(int k) {
  return [k](std::mt19937_64& e) {
    const double x = 3.0 * standard_normal(e);
    ParamVector th(2);
    th << uniform(e, -2.0, 2.0), std::pow(uniform(e, 0.5, 2.0), k);
    return std::make_pair(scalar_input(x), th);
  };
}

PointSampler unit_gaussian_sampler(double lo, double hi) {
  return [lo, hi](std::mt19937_64& e) {
    ParamVector th(1);
    th << uniform(e, lo, hi);
    return std::make_pair(scalar_input(2.0 * standard_normal(e)), th);
  };
}

PointSampler state_sampler(int states, int dim) {
  return [states, dim](std::mt19937_64& e) {
    const int s = static_cast<int>(unit_uniform(e) * states);
    ParamVector th(dim);
    for (int j = 0; j < dim; ++j) th(j) = uniform(e, -2.0, 2.0);
    return std::make_pair(scalar_input(s), th);
  };
}

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(3) << std::scientific << v;
  return o.str();
}

}  // namespace

double penrose_residual(const Matrix& a, const Matrix& x) {
  const double sa = std::max(1.0, max_abs(a));
  const double sx = std::max(1.0, max_abs(x));
  const Matrix ax = a * x;
  const Matrix xa = x * a;
  double r = max_abs(ax * a - a) / sa;
  r = std::max(r, max_abs(xa * x - x) / sx);
  r = std::max(r, max_abs(ax.transpose() - ax) / std::max(1.0, max_abs(ax)));
  r = std::max(r, max_abs(xa.transpose() - xa) / std::max(1.0, max_abs(xa)));
  return r;
}

std::vector<ShippedFunction> shipped_functions() {
  std::vector<ShippedFunction> out;
  for (GaussianMode mode : {GaussianMode::LogDensity, GaussianMode::Density}) {
    for (int k = 1; k <= 4; ++k) out.push_back({std::make_shared<GaussianModel>(k, mode), gaussian_sampler(k)});
  }
  const CongruentPair exp_pair = unit_gaussian_log_pair(false);
  const CongruentPair exp2_pair = unit_gaussian_log_pair(true);
  out.push_back({exp_pair.f, unit_gaussian_sampler(-1.0, 1.0)});
  out.push_back({exp_pair.g, unit_gaussian_sampler(0.3, 3.0)});
  out.push_back({exp2_pair.g, unit_gaussian_sampler(0.3, 3.0)});
  out.push_back({std::make_shared<LinearFeatures>(LinearFeatures::tabular(3)), state_sampler(3, 3)});
  Matrix phi(3, 2);
  phi << 1.0, 0.0, 0.5, 0.5, 0.0, 1.0;
  out.push_back({std::make_shared<LinearFeatures>(phi, "linear-features-3x2"), state_sampler(3, 2)});
  return out;
}

std::vector<ShippedPair> shipped_pairs() {
  std::vector<ShippedPair> out;
  for (GaussianMode mode : {GaussianMode::LogDensity, GaussianMode::Density}) {
    for (int a = 1; a <= 4; ++a) {
      for (int b = 1; b <= 4; ++b) {
        CongruentPair p;
        p.f = std::make_shared<GaussianModel>(a, mode);
        p.g = std::make_shared<GaussianModel>(b, mode);
        p.psi = gaussian_power_submersion(a, b);
        p.label = std::string(mode == GaussianMode::LogDensity ? "gaussian-logpdf" : "gaussian-pdf") + "-k" +
                  std::to_string(a) + "-k" + std::to_string(b);
        out.push_back({std::move(p), gaussian_sampler(a)});
      }
    }
  }
  out.push_back({unit_gaussian_log_pair(false), unit_gaussian_sampler(-1.0, 1.0)});
  out.push_back({unit_gaussian_log_pair(true), unit_gaussian_sampler(-1.0, 1.0)});
  return out;
}

double metric_transform_residual(const MetricSpec& spec, const CongruentPair& pair, const ParamVector& beta,
                                 int iteration, const SignedMeasure& mu, std::uint64_t seed) {
  const RandomStreams streams(seed);
  const Matrix gf = estimate_metric(spec, *pair.f, beta, iteration, mu, nullptr, streams).entries;
  const Matrix gg = estimate_metric(spec, *pair.g, pair.psi.map(beta), iteration, mu, nullptr, streams).entries;
  const Matrix j = pair.psi.jacobian(beta);
  return max_abs(gf - j.transpose() * gg * j) / std::max(1.0, max_abs(gf));
}

bool SuiteReport::pass() const {
  for (const auto& l : lines) {
    if (!l.pass) return false;
  }
  return !lines.empty();
}

SuiteReport penrose_suite(int instances, std::uint64_t seed, double tolerance) {
  SuiteReport rep;
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  bool ranks_ok = true;
  for (int t = 0; t < instances; ++t) {
    const int n = 1 + static_cast<int>(unit_uniform(rng) * 6);
    const int r = 1 + static_cast<int>(unit_uniform(rng) * n);
    Matrix b(n, r);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < r; ++j) b(i, j) = standard_normal(rng);
    MetricMatrix m;
    m.entries = b * b.transpose();
    const PseudoInverse p = pseudo_inverse(m);
    worst = std::max(worst, penrose_residual(m.entries, p.inverse));
    ranks_ok = ranks_ok && p.rank == r;
  }
  rep.lines.push_back({"penrose conditions", worst < tolerance, worst, tolerance});
  rep.lines.push_back({"pinv rank detection", ranks_ok, ranks_ok ? 0.0 : 1.0, 0.5});
  return rep;
}

SuiteReport congruence_suite(int samples, std::uint64_t seed, double tolerance) {
  SuiteReport rep;
  for (const auto& sp : shipped_pairs()) {
    const CongruenceReport c = verify_congruence(sp.pair, samples, seed, sp.sampler, 1e-10, tolerance);
    rep.lines.push_back({"jacobian property " + sp.pair.label, c.pass, c.max_jacobian_property_residual, tolerance});

    std::vector<MetricSpec> specs;
    std::mt19937_64 probe(seed);
    if (sp.pair.f->closed_form_fisher(sp.sampler(probe).second)) {
      specs.push_back(MetricSpec{MetricSpec::ClosedFormFisher{}});
    }
    if (sp.pair.f->density_model() != nullptr && sp.pair.g->density_model() != nullptr) {
      specs.push_back(MetricSpec{MetricSpec::FisherSampled{200, SampleSource::Model, 5.0}});
      specs.push_back(MetricSpec{MetricSpec::FisherSampled{200, SampleSource::Uniform, 5.0}});
    }
    specs.push_back(MetricSpec{MetricSpec::MeasureGram{}});

    std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
    double worst = 0.0;
    for (int t = 0; t < samples; ++t) {
      const ParamVector beta = sp.sampler(rng).second;
      std::vector<Atom> atoms;
      for (int j = 0; j < 20; ++j) atoms.push_back(Atom{sp.sampler(rng).first, uniform(rng, 0.1, 1.0)});
      const SignedMeasure mu(std::move(atoms));
      for (const auto& spec : specs) {
        worst = std::max(worst, metric_transform_residual(spec, sp.pair, beta, t + 1, mu, seed + t));
      }
    }
    rep.lines.push_back({"metric transform " + sp.pair.label, worst < tolerance, worst, tolerance});
  }
  return rep;
}

SuiteReport gradient_suite(int trials, std::uint64_t seed, double tolerance) {
  SuiteReport rep;
  for (const auto& sf : shipped_functions()) {
    const double e = fd_gradient_check(*sf.f, trials, seed, sf.sampler);
    rep.lines.push_back({"fd gradient " + sf.f->label(), e < tolerance, e, tolerance});
  }
  return rep;
}

void print_suite(std::ostream& out, const SuiteReport& report) {
  for (const auto& l : report.lines) {
    out << (l.pass ? "ok   " : "FAIL ") << l.name << "  " << fmt(l.value) << " (< " << fmt(l.threshold) << ")\n";
  }
}

}  // namespace natlearn
