#ifndef NATLEARN_COVARIANCE_HPP
#define NATLEARN_COVARIANCE_HPP

#include "natlearn/learning_rule.hpp"
#include "natlearn/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace natlearn {

using ProbeSampler = std::function<InputPoint(std::mt19937_64&)>;

enum class CovarianceKind {
  Taylor,  // j-order: tau_j(f(x,.), beta_i, l_i(f)) vs tau_j(g(x,.), psi(beta_i), l_i(g))
  Exact,   // f(x, l_i(f)) vs g(x, l_i(g))
};

struct CovarianceOptions {
  int order = 1;  // j in {1, 2}; ignored for Exact
  CovarianceKind kind = CovarianceKind::Taylor;
  int steps = 100;
  int probes = 32;
  std::uint64_t rng_seed = 1;
  double tolerance = 1e-7;
};

struct CovarianceReport {
  int order = 1;
  CovarianceKind kind = CovarianceKind::Taylor;
  double tolerance = 0.0;
  std::vector<double> residuals;  // per step, max over probes, scale-normalized
  std::vector<bool> excluded;     // g (or f) left the full-rank set at that step
  double max_residual = 0.0;      // over non-excluded steps
  int excluded_steps = 0;
  bool f_diverged = false;
  bool pass = false;
  std::string message;
};

/// Runs `rule` on pair.f from theta0 with seed omega. At each step i the same
/// rule is applied to pair.g from the mapped history psi(theta_0..theta_{i-1})
/// with the same omega, and at `probes` inputs (the "probe" substream of i)
/// the two Taylor values are compared:
///   |tau_j(f(x,.), beta_i, l_i(f)) - tau_j(g(x,.), psi(beta_i), l_i(g))| / max(1, |tau_j(f)|)
/// Steps where either metric is rank-deficient are marked excluded.
CovarianceReport check_covariance(const SteppingRule& rule, const CongruentPair& pair, const ParamVector& theta0,
                                  const ProbeSampler& probes, const CovarianceOptions& options);

/// Residual of the identity grad g(x)^T J_psi (l(f) - beta) = grad g(x)^T (l(g) - psi(beta)),
/// evaluated with the gradient of g at psi(beta), normalized by max(1, |lhs|).
double first_order_identity_residual(const CongruentPair& pair, const InputPoint& x, const ParamVector& beta,
                                     const ParamVector& l_f, const ParamVector& l_g);

// ---------------------------------------------------------------------------

/// g(x, t) = f(x, chi(t)), grad g = J_chi(t)^T grad f(x, chi(t)).
class ReparameterizedFunction final : public ParamFunction {
 public:
  ReparameterizedFunction(ParamFunctionPtr f, Submersion chi, std::string label,
                          std::function<bool(const ParamVector&)> domain);

  int param_dim() const override { return chi_.in_dim; }
  std::string label() const override { return label_; }
  double eval(const InputPoint& x, const ParamVector& t) const override;
  ParamVector grad(const InputPoint& x, const ParamVector& t) const override;
  bool in_domain(const ParamVector& t) const override;

 private:
  ParamFunctionPtr f_;
  Submersion chi_;
  std::string label_;
  std::function<bool(const ParamVector&)> domain_;
};

// ---------------------------------------------------------------------------

/// Solutions of the four scalar equations
///   b = a e^beta + (a^2/2) e^beta,          b^2/2 = (a^2/2) e^{2 beta}
///   c = 2a e^{2beta} + (a^2/2) 4 e^{2beta}, c^2/2 = 2 a^2 e^{4 beta}
/// obtained by the branch algebra and by a dense scan.
struct Theorem3Report {
  double beta = 0.0;
  std::vector<double> b_branch_roots;  // a solving the first pair
  std::vector<double> c_branch_roots;  // a solving the second pair
  std::vector<double> intersection;    // a solving all four
  std::vector<double> scan_b_roots;
  std::vector<double> scan_c_roots;
  std::vector<double> scan_joint_roots;
  double max_root_residual = 0.0;  // all four equations at the intersection roots
  bool scan_agrees = false;
  bool pass = false;
};

struct Theorem3Residuals {
  double r16, r17, r18, r19;
};

/// Residuals of the four equations at (a, b, c), each divided by the power of
/// e^beta that appears in it.
Theorem3Residuals theorem3_residuals(double beta, double a, double b, double c);

/// Scan of a in [-8, 8] at step 1e-4; sub-1e-8 points within a run of
/// consecutive grid points count as one root (the best point of the run).
Theorem3Report theorem3_verify(double beta);

// ---------------------------------------------------------------------------

struct SecondOrderDemoReport {
  bool skipped = false;
  std::string message;
  double collinearity_g = 0.0;  // |cosine| between grad g and grad^2 g over probes
  double collinearity_h = 0.0;
  std::vector<double> step_sizes;
  std::vector<double> second_order_residuals;  // per step size, max over (g, h) and probes
  std::vector<double> first_order_residuals;
  double trivial_rule_residual = 0.0;
  bool pass = false;
};

/// f(x, theta) = log N(x; theta, 1), g(x, t) = f(x, ln t), h(x, t) = f(x, ln(t) / 2)
/// with psi(theta) = e^theta and phi(theta) = e^{2 theta}. Runs naturalized
/// gradient ascent on a fixed sample for each step size and records the
/// second-order covariance residual of the first step.
SecondOrderDemoReport second_order_demo(const std::vector<double>& step_sizes, std::uint64_t seed, double beta0 = 0.3,
                                        int probes = 256);

CongruentPair unit_gaussian_log_pair(bool half_log);

}  // namespace natlearn

#endif  // NATLEARN_COVARIANCE_HPP
