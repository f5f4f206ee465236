#include "natlearn/covariance.hpp"

#include "natlearn/calculus.hpp"
#include "natlearn/naturalize.hpp"
#include "natlearn/random.hpp"
#include "natlearn/rules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace natlearn {

namespace {

double taylor_value(const ParamFunction& f, const InputPoint& x, const ParamVector& center, const ParamVector& y,
                    int order) {
  if (order == 1) return f.eval(x, center) + f.grad(x, center).dot(y - center);
  return taylor(at_input(f, x), order, center).evaluate(y);
}

std::vector<ParamVector> initial_vectors(const SteppingRule& rule, const ParamVector& theta0) {
  return std::vector<ParamVector>(static_cast<std::size_t>(rule.iota()), theta0);
}

}  // namespace

CovarianceReport check_covariance(const SteppingRule& rule, const CongruentPair& pair, const ParamVector& theta0,
                                  const ProbeSampler& probes, const CovarianceOptions& options) {
  if (options.kind == CovarianceKind::Taylor && options.order != 1 && options.order != 2) {
    throw Error("check_covariance: order must be 1 or 2");
  }
  if (options.steps < 1 || options.probes < 1) throw Error("check_covariance: steps and probes must be >= 1");
  if (!pair.f || !pair.g) throw Error("check_covariance: incomplete congruent pair");
  const ParamFunction& f = *pair.f;
  const ParamFunction& g = *pair.g;
  if (!f.in_domain(theta0)) throw Error("check_covariance: theta0 outside the domain of f");

  CovarianceReport report;
  report.order = options.order;
  report.kind = options.kind;
  report.tolerance = options.tolerance;

  std::vector<ParamVector> init_f = initial_vectors(rule, theta0);
  std::vector<ParamVector> init_g;
  for (const auto& v : init_f) init_g.push_back(pair.psi.map(v));
  History hist_f(std::move(init_f));
  History hist_g(std::move(init_g));
  RunContext ctx_f(options.rng_seed);
  RunContext ctx_g(options.rng_seed);

  for (int i = 1; i <= options.steps; ++i) {
    RuleStep sf;
    try {
      sf = rule.step(i, f, hist_f, ctx_f);
    } catch (const NumericalDivergence&) {
      sf.theta_next = ParamVector::Constant(f.param_dim(), std::nan(""));
    }
    if (!all_finite(sf.theta_next) || !f.in_domain(sf.theta_next)) {
      report.f_diverged = true;
      std::ostringstream msg;
      msg << "f run left the domain at step " << i;
      report.message = msg.str();
      break;
    }
    const RuleStep sg = rule.step(i, g, hist_g, ctx_g);
    const bool excluded = !sf.diagnostics.metric_full_rank || !sg.diagnostics.metric_full_rank;
    const ParamVector beta_g = pair.psi.map(sf.beta);

    double worst = 0.0;
    auto engine = ctx_f.streams.engine("probe", static_cast<std::uint64_t>(i));
    for (int p = 0; p < options.probes; ++p) {
      const InputPoint x = probes(engine);
      double lhs = 0.0;
      double rhs = 0.0;
      if (options.kind == CovarianceKind::Exact) {
        lhs = f.eval(x, sf.theta_next);
        rhs = g.eval(x, sg.theta_next);
      } else {
        lhs = taylor_value(f, x, sf.beta, sf.theta_next, options.order);
        rhs = taylor_value(g, x, beta_g, sg.theta_next, options.order);
      }
      double r = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
      if (std::isnan(r)) r = std::numeric_limits<double>::infinity();
      worst = std::max(worst, r);
    }
    report.residuals.push_back(worst);
    report.excluded.push_back(excluded);
    if (excluded) {
      ++report.excluded_steps;
    } else {
      report.max_residual = std::max(report.max_residual, worst);
    }

    hist_f.push(sf.theta_next);
    hist_g.push(pair.psi.map(sf.theta_next));
  }

  const int counted = static_cast<int>(report.residuals.size()) - report.excluded_steps;
  report.pass = !report.f_diverged && counted > 0 && report.max_residual < options.tolerance;
  if (report.message.empty()) {
    std::ostringstream msg;
    msg << counted << " steps checked, " << report.excluded_steps << " excluded (rank-deficient metric), max residual "
        << report.max_residual;
    report.message = msg.str();
  }
  return report;
}

double first_order_identity_residual(const CongruentPair& pair, const InputPoint& x, const ParamVector& beta,
                                     const ParamVector& l_f, const ParamVector& l_g) {
  const ParamVector beta_g = pair.psi.map(beta);
  const ParamVector grad_g = pair.g->grad(x, beta_g);
  const double lhs = grad_g.dot(pair.psi.jacobian(beta) * (l_f - beta));
  const double rhs = grad_g.dot(l_g - beta_g);
  return std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
}

// ---------------------------------------------------------------------------

ReparameterizedFunction::ReparameterizedFunction(ParamFunctionPtr f, Submersion chi, std::string label,
                                                 std::function<bool(const ParamVector&)> domain)
    : f_(std::move(f)), chi_(std::move(chi)), label_(std::move(label)), domain_(std::move(domain)) {
  if (!f_) throw Error("ReparameterizedFunction: null function");
  if (chi_.out_dim != f_->param_dim()) throw Error("ReparameterizedFunction: map output does not match f");
}

double ReparameterizedFunction::eval(const InputPoint& x, const ParamVector& t) const {
  return f_->eval(x, chi_.map(t));
}

ParamVector ReparameterizedFunction::grad(const InputPoint& x, const ParamVector& t) const {
  return chi_.jacobian(t).transpose() * f_->grad(x, chi_.map(t));
}

bool ReparameterizedFunction::in_domain(const ParamVector& t) const {
  if (!all_finite(t)) return false;
  return domain_ ? domain_(t) : true;
}

CongruentPair unit_gaussian_log_pair(bool half_log) {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  auto f = std::make_shared<CallableFunction>(
      "unit-gaussian-logpdf", 1,
      [](const InputPoint& x, const ParamVector& th) {
        const double d = x(0) - th(0);
        return -kHalfLog2Pi - 0.5 * d * d;
      },
      [](const InputPoint& x, const ParamVector& th) {
        ParamVector g(1);
        g(0) = x(0) - th(0);
        return g;
      });
  const double scale = half_log ? 0.5 : 1.0;
  Submersion chi;
  chi.in_dim = 1;
  chi.out_dim = 1;
  chi.map = [scale](const ParamVector& t) {
    ParamVector o(1);
    o(0) = scale * std::log(t(0));
    return o;
  };
  chi.jacobian = [scale](const ParamVector& t) {
    Matrix j(1, 1);
    j(0, 0) = scale / t(0);
    return j;
  };
  const double power = half_log ? 2.0 : 1.0;
  Submersion psi;
  psi.in_dim = 1;
  psi.out_dim = 1;
  psi.map = [power](const ParamVector& th) {
    ParamVector o(1);
    o(0) = std::exp(power * th(0));
    return o;
  };
  psi.jacobian = [power](const ParamVector& th) {
    Matrix j(1, 1);
    j(0, 0) = power * std::exp(power * th(0));
    return j;
  };
  auto g = std::make_shared<ReparameterizedFunction>(f, chi, half_log ? "unit-gaussian-logpdf-halflog" : "unit-gaussian-logpdf-log",
                                                     [](const ParamVector& t) { return t(0) > 0.0; });
  return CongruentPair{f, g, psi, half_log ? "theta -> e^{2 theta}" : "theta -> e^theta"};
}

// ---------------------------------------------------------------------------

Theorem3Residuals theorem3_residuals(double beta, double a, double b, double c) {
  const double e1 = std::exp(beta);
  const double e2 = std::exp(2.0 * beta);
  const double e4 = std::exp(4.0 * beta);
  Theorem3Residuals r;
  r.r16 = (b - (a * e1 + 0.5 * a * a * e1)) / e1;
  r.r17 = (0.5 * b * b - 0.5 * a * a * e2) / e2;
  r.r18 = (c - (2.0 * a * e2 + 0.5 * a * a * 4.0 * e2)) / e2;
  r.r19 = (0.5 * c * c - a * a * 2.0 * e4) / e4;
  return r;
}

namespace {

// Real roots of p a^2 + q a + r = 0 (p may be zero), sorted, deduplicated.
std::vector<double> quadratic_roots(double p, double q, double r) {
  std::vector<double> out;
  if (p == 0.0) {
    if (q != 0.0) out.push_back(-r / q);
  } else {
    const double disc = q * q - 4.0 * p * r;
    if (disc >= 0.0) {
      const double s = std::sqrt(disc);
      out.push_back((-q - s) / (2.0 * p));
      out.push_back((-q + s) / (2.0 * p));
    }
  }
  for (double& v : out) v = v == 0.0 ? 0.0 : v;  // fold -0
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<double> merge_roots(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end(), [](double x, double y) { return std::abs(x - y) < 1e-12; }), a.end());
  return a;
}

bool same_roots(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (std::abs(a[k] - b[k]) > tol) return false;
  }
  return true;
}

struct ScanCluster {
  bool open = false;
  double best_a = 0.0;
  double best_r = 0.0;
};

void scan_point(ScanCluster& c, std::vector<double>& roots, double a, double r, double threshold) {
  if (r < threshold) {
    if (!c.open || r < c.best_r) {
      c.best_a = a;
      c.best_r = r;
    }
    c.open = true;
  } else if (c.open) {
    roots.push_back(c.best_a);
    c.open = false;
  }
}

}  // namespace

Theorem3Report theorem3_verify(double beta) {
  if (!std::isfinite(beta)) throw Error("theorem3_verify: beta must be finite");
  Theorem3Report rep;
  rep.beta = beta;

  // b = +-a e^beta against b = e^beta (a + a^2/2), in units of e^beta:
  //   +: a^2/2 = 0          -: a^2/2 + 2a = 0
  rep.b_branch_roots = merge_roots(quadratic_roots(0.5, 0.0, 0.0), quadratic_roots(0.5, 2.0, 0.0));
  // c = +-2a e^{2beta} against c = 2 e^{2beta} (a + a^2), in units of 2 e^{2beta}:
  //   +: a^2 = 0            -: a^2 + 2a = 0
  rep.c_branch_roots = merge_roots(quadratic_roots(1.0, 0.0, 0.0), quadratic_roots(1.0, 2.0, 0.0));
  for (double a : rep.b_branch_roots) {
    for (double a2 : rep.c_branch_roots) {
      if (std::abs(a - a2) < 1e-12) rep.intersection.push_back(a);
    }
  }

  const double e1 = std::exp(beta);
  const double e2 = std::exp(2.0 * beta);
  auto b_of = [&](double a) { return e1 * (a + 0.5 * a * a); };
  auto c_of = [&](double a) { return e2 * (2.0 * a + 2.0 * a * a); };

  double branch_check = 0.0;
  for (double a : rep.b_branch_roots) {
    const auto r = theorem3_residuals(beta, a, b_of(a), 0.0);
    branch_check = std::max({branch_check, std::abs(r.r16), std::abs(r.r17)});
  }
  for (double a : rep.c_branch_roots) {
    const auto r = theorem3_residuals(beta, a, 0.0, c_of(a));
    branch_check = std::max({branch_check, std::abs(r.r18), std::abs(r.r19)});
  }
  for (double a : rep.intersection) {
    const auto r = theorem3_residuals(beta, a, b_of(a), c_of(a));
    rep.max_root_residual =
        std::max({rep.max_root_residual, std::abs(r.r16), std::abs(r.r17), std::abs(r.r18), std::abs(r.r19)});
  }
  rep.max_root_residual = std::max(rep.max_root_residual, branch_check);

  constexpr double kThreshold = 1e-8;
  constexpr int kGrid = 160000;
  ScanCluster cb, cc, cj;
  for (int j = 0; j <= kGrid; ++j) {
    const double a = -8.0 + j * 1e-4;
    const auto r = theorem3_residuals(beta, a, b_of(a), c_of(a));
    const double rb = std::max(std::abs(r.r16), std::abs(r.r17));
    const double rc = std::max(std::abs(r.r18), std::abs(r.r19));
    scan_point(cb, rep.scan_b_roots, a, rb, kThreshold);
    scan_point(cc, rep.scan_c_roots, a, rc, kThreshold);
    scan_point(cj, rep.scan_joint_roots, a, std::max(rb, rc), kThreshold);
  }
  scan_point(cb, rep.scan_b_roots, 0.0, 1.0, kThreshold);
  scan_point(cc, rep.scan_c_roots, 0.0, 1.0, kThreshold);
  scan_point(cj, rep.scan_joint_roots, 0.0, 1.0, kThreshold);

  rep.scan_agrees = same_roots(rep.scan_b_roots, rep.b_branch_roots, 1e-4) &&
                    same_roots(rep.scan_c_roots, rep.c_branch_roots, 1e-4) &&
                    same_roots(rep.scan_joint_roots, rep.intersection, 1e-4);
  rep.pass = rep.scan_agrees && rep.max_root_residual <= 1e-10 && rep.intersection.size() == 1 &&
             rep.intersection.front() == 0.0;
  return rep;
}

// ---------------------------------------------------------------------------

SecondOrderDemoReport second_order_demo(const std::vector<double>& step_sizes, std::uint64_t seed, double beta0,
                                        int probes) {
  SecondOrderDemoReport rep;
  const CongruentPair pg = unit_gaussian_log_pair(false);
  const CongruentPair ph = unit_gaussian_log_pair(true);
  const RandomStreams streams(seed);

  ParamVector theta0(1);
  theta0 << beta0;
  ProbeSampler probe = [beta0](std::mt19937_64& e) { return scalar_input(beta0 + 2.0 * standard_normal(e)); };

  // Collinearity of grad and Hessian of g (and h) at the mapped base point.
  auto cosine = [&](const CongruentPair& pair) {
    const ParamVector t = pair.psi.map(theta0);
    auto engine = streams.engine("probe", 0);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (int p = 0; p < probes; ++p) {
      const InputPoint x = probe(engine);
      const double a = pair.g->grad(x, t)(0);
      const double b = fd_hessian([&](const ParamVector& v) { return pair.g->grad(x, v); }, t)(0, 0);
      sab += a * b;
      saa += a * a;
      sbb += b * b;
    }
    return std::abs(sab) / std::sqrt(saa * sbb);
  };
  rep.collinearity_g = cosine(pg);
  rep.collinearity_h = cosine(ph);
  if (!(rep.collinearity_g < 0.999) || !(rep.collinearity_h < 0.999)) {
    rep.skipped = true;
    rep.message = "grad and Hessian of g or h are collinear over the probes; demonstration skipped";
    return rep;
  }

  // Tightly clustered sample just above beta0, so each step is a sizable
  // multiple of the learning rate.
  std::vector<double> data(200);
  {
    auto engine = streams.engine("data", 0);
    for (double& x : data) x = beta0 + 0.05 + 0.05 * standard_normal(engine);
  }

  CovarianceOptions opt;
  opt.steps = 1;
  opt.probes = probes;
  opt.rng_seed = seed;
  opt.tolerance = 1e-3;

  {
    const TrivialRule trivial;
    opt.order = 2;
    rep.trivial_rule_residual = std::max(check_covariance(trivial, pg, theta0, probe, opt).max_residual,
                                         check_covariance(trivial, ph, theta0, probe, opt).max_residual);
  }

  for (double alpha : step_sizes) {
    auto base = std::make_shared<BatchGradientRule>(data, StepSchedule::constant(alpha / data.size()));
    const NaturalizedRule rule = naturalize(base, MetricSpec{MetricSpec::MeasureGram{}});
    opt.order = 2;
    const double r2 = std::max(check_covariance(rule, pg, theta0, probe, opt).max_residual,
                               check_covariance(rule, ph, theta0, probe, opt).max_residual);
    opt.order = 1;
    const double r1 = std::max(check_covariance(rule, pg, theta0, probe, opt).max_residual,
                               check_covariance(rule, ph, theta0, probe, opt).max_residual);
    rep.step_sizes.push_back(alpha);
    rep.second_order_residuals.push_back(r2);
    rep.first_order_residuals.push_back(r1);
  }

  bool ok = rep.trivial_rule_residual <= 1e-12;
  for (std::size_t k = 0; k < rep.step_sizes.size(); ++k) {
    if (rep.step_sizes[k] >= 1e-2) ok = ok && rep.second_order_residuals[k] > 1e-3;
    ok = ok && rep.first_order_residuals[k] < 1e-7;
  }
  rep.pass = ok;
  std::ostringstream msg;
  msg << "collinearity |cos| g=" << rep.collinearity_g << " h=" << rep.collinearity_h;
  rep.message = msg.str();
  return rep;
}

}  // namespace natlearn
