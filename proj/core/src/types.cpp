#include "natlearn/types.hpp"

#include "natlearn/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace natlearn {

InputPoint scalar_input(double value) {
  InputPoint x(1);
  x(0) = value;
  return x;
}

bool all_finite(const ParamVector& v) { return v.allFinite(); }
bool all_finite(const InputPoint& x) { return x.allFinite(); }

// ---------------------------------------------------------------------------

std::array<double, 5> ScalarMoments::about(double at) const {
  const double d = center - at;  // x - at = (x - center) + d
  const double d2 = d * d;
  std::array<double, 5> out{};
  out[0] = m[0];
  out[1] = m[1] + d * m[0];
  out[2] = m[2] + 2.0 * d * m[1] + d2 * m[0];
  out[3] = m[3] + 3.0 * d * m[2] + 3.0 * d2 * m[1] + d2 * d * m[0];
  out[4] = m[4] + 4.0 * d * m[3] + 6.0 * d2 * m[2] + 4.0 * d2 * d * m[1] + d2 * d2 * m[0];
  return out;
}

SignedMeasure::SignedMeasure(std::vector<Atom> atoms, double scale) : scale_(scale) {
  if (!std::isfinite(scale_)) throw NumericalDivergence("signed measure: non-finite scale");
  auto block = std::make_shared<Block>();
  block->atoms = std::move(atoms);
  for (const auto& a : block->atoms) {
    if (!std::isfinite(a.weight) || !all_finite(a.x)) throw NumericalDivergence("signed measure: non-finite atom");
    block->sum += a.weight;
    block->abs_sum += std::abs(a.weight);
    block->any_negative = block->any_negative || a.weight < 0.0;
    block->any_positive = block->any_positive || a.weight > 0.0;
    block->scalar = block->scalar && a.x.size() == 1;
  }
  block_ = std::move(block);
}

SignedMeasure SignedMeasure::single(InputPoint x, double weight) {
  return SignedMeasure(std::vector<Atom>{Atom{std::move(x), weight}});
}

double SignedMeasure::total_weight() const { return block_ ? scale_ * block_->sum : 0.0; }

double SignedMeasure::total_abs_weight() const { return block_ ? std::abs(scale_) * block_->abs_sum : 0.0; }

bool SignedMeasure::is_zero() const { return !block_ || scale_ == 0.0 || block_->abs_sum == 0.0; }

bool SignedMeasure::has_negative_weight() const {
  if (!block_ || scale_ == 0.0) return false;
  return scale_ > 0.0 ? block_->any_negative : block_->any_positive;
}

std::optional<ScalarMoments> SignedMeasure::scalar_moments() const {
  if (!block_ || !block_->scalar || block_->atoms.empty()) return std::nullopt;
  const Block& blk = *block_;
  std::call_once(blk.moments_once, [&blk] {
    ScalarMoments mo;
    double abs_x = 0.0;
    for (const auto& a : blk.atoms) abs_x += std::abs(a.weight) * a.x(0);
    mo.center = blk.abs_sum > 0.0 ? abs_x / blk.abs_sum : 0.0;
    for (const auto& a : blk.atoms) {
      const double e = a.x(0) - mo.center;
      const double e2 = e * e;
      mo.m[0] += a.weight;
      mo.m[1] += a.weight * e;
      mo.m[2] += a.weight * e2;
      mo.m[3] += a.weight * e2 * e;
      mo.m[4] += a.weight * e2 * e2;
    }
    blk.moments = mo;
  });
  ScalarMoments out = *blk.moments;
  for (double& v : out.m) v *= scale_;
  return out;
}

SignedMeasure SignedMeasure::scaled(double factor) const {
  if (!std::isfinite(factor)) throw NumericalDivergence("signed measure: non-finite scale");
  SignedMeasure out;
  out.block_ = block_;
  out.scale_ = scale_ * factor;
  return out;
}

bool SignedMeasure::operator==(const SignedMeasure& other) const {
  if (size() != other.size()) return false;
  for (std::size_t j = 0; j < size(); ++j) {
    if (weight(j) != other.weight(j)) return false;
    if (point(j).size() != other.point(j).size() || point(j) != other.point(j)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

JointMeasure::JointMeasure(std::vector<JointAtom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw Error("joint measure: empty atom list");
  double total = 0.0;
  for (const auto& a : atoms_) {
    if (!(a.probability >= 0.0) || !std::isfinite(a.probability)) throw Error("joint measure: invalid probability");
    total += a.probability;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << "joint measure: probabilities sum to " << total << ", expected 1";
    throw Error(msg.str());
  }
}

JointMeasure JointMeasure::diagonal(std::span<const InputPoint> points) {
  if (points.empty()) throw Error("joint measure: empty atom list");
  std::vector<JointAtom> atoms;
  atoms.reserve(points.size());
  const double p = 1.0 / static_cast<double>(points.size());
  for (const auto& x : points) atoms.push_back({x, x, p});
  // 1/s summed s times can miss 1 by a few ulps; renormalize the last atom.
  double head = 0.0;
  for (std::size_t j = 0; j + 1 < atoms.size(); ++j) head += atoms[j].probability;
  atoms.back().probability = 1.0 - head;
  return JointMeasure(std::move(atoms));
}

JointMeasure JointMeasure::diagonal(std::span<const InputPoint> points, std::span<const double> probabilities) {
  if (points.size() != probabilities.size()) throw Error("joint measure: points/probabilities size mismatch");
  std::vector<JointAtom> atoms;
  atoms.reserve(points.size());
  for (std::size_t j = 0; j < points.size(); ++j) atoms.push_back({points[j], points[j], probabilities[j]});
  return JointMeasure(std::move(atoms));
}

bool JointMeasure::is_diagonal() const {
  return std::all_of(atoms_.begin(), atoms_.end(),
                     [](const JointAtom& a) { return a.x.size() == a.y.size() && a.x == a.y; });
}

// ---------------------------------------------------------------------------

std::vector<double> ParamFunction::values(const SignedMeasure& mu, const ParamVector& theta) const {
  std::vector<double> out(mu.size());
  for (std::size_t j = 0; j < mu.size(); ++j) out[j] = eval(mu.point(j), theta);
  return out;
}

ParamVector ParamFunction::weighted_grad_sum(const SignedMeasure& mu, const ParamVector& theta) const {
  ParamVector acc = ParamVector::Zero(param_dim());
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const double w = mu.weight(j);
    if (w == 0.0) continue;
    acc += w * grad(mu.point(j), theta);
  }
  return acc;
}

Matrix ParamFunction::weighted_gram(const SignedMeasure& mu, const ParamVector& theta) const {
  Matrix acc = Matrix::Zero(param_dim(), param_dim());
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const double w = mu.weight(j);
    if (w == 0.0) continue;
    const ParamVector g = grad(mu.point(j), theta);
    acc.noalias() += w * g * g.transpose();
  }
  return acc;
}

void require_scalar_output(const ParamFunction& f) {
  if (f.output_dim() != 1) throw Error("only scalar-output parameterized functions are supported (k = 1)");
}

CallableFunction::CallableFunction(std::string label, int param_dim, EvalFn eval, GradFn grad, DomainFn domain)
    : label_(std::move(label)),
      param_dim_(param_dim),
      eval_(std::move(eval)),
      grad_(std::move(grad)),
      domain_(std::move(domain)) {
  if (param_dim_ <= 0) throw Error("parameter dimension must be positive");
}

bool CallableFunction::in_domain(const ParamVector& theta) const {
  if (!all_finite(theta)) return false;
  return domain_ ? domain_(theta) : true;
}

Submersion Submersion::identity(int n) {
  Submersion s;
  s.in_dim = n;
  s.out_dim = n;
  s.map = [](const ParamVector& theta) { return theta; };
  s.jacobian = [n](const ParamVector&) { return Matrix::Identity(n, n); };
  return s;
}

// ---------------------------------------------------------------------------

CongruenceReport verify_congruence(const CongruentPair& pair, int n_samples, std::uint64_t rng_seed,
                                   const PointSampler& sampler, double value_tolerance,
                                   double jacobian_tolerance) {
  CongruenceReport report;
  const int n = pair.f->param_dim();
  const int m = pair.g->param_dim();
  if (n < m) {
    std::ostringstream msg;
    msg << "not congruent: g has " << m << " parameters but f only " << n << " (a submersion needs m <= n)";
    report.message = msg.str();
    return report;
  }
  if (pair.psi.in_dim != n || pair.psi.out_dim != m) {
    report.message = "not congruent: submersion dimensions do not match the function pair";
    return report;
  }
  require_scalar_output(*pair.f);
  require_scalar_output(*pair.g);

  std::mt19937_64 rng(rng_seed);
  report.min_singular_value = std::numeric_limits<double>::infinity();
  for (int t = 0; t < n_samples; ++t) {
    const auto [x, theta] = sampler(rng);
    const ParamVector mapped = pair.psi.map(theta);
    const Matrix jac = pair.psi.jacobian(theta);

    const double fv = pair.f->eval(x, theta);
    const double gv = pair.g->eval(x, mapped);
    report.max_value_residual = std::max(report.max_value_residual, std::abs(fv - gv));

    const ParamVector lhs = pair.f->grad(x, theta);
    const ParamVector rhs = jac.transpose() * pair.g->grad(x, mapped);
    const double scale = std::max(1.0, lhs.norm());
    report.max_jacobian_property_residual = std::max(report.max_jacobian_property_residual, (lhs - rhs).norm() / scale);

    const Matrix fd = fd_jacobian(pair.psi.map, theta);
    report.max_submersion_fd_error =
        std::max(report.max_submersion_fd_error, (fd - jac).norm() / std::max(1.0, jac.norm()));

    Eigen::JacobiSVD<Matrix> svd(jac);
    report.min_singular_value = std::min(report.min_singular_value, svd.singularValues().minCoeff());
  }

  const double rank_floor = 1e-10;
  report.pass = report.max_value_residual <= value_tolerance &&
                report.max_jacobian_property_residual <= jacobian_tolerance &&
                report.max_submersion_fd_error <= 1e-4 && report.min_singular_value > rank_floor;
  if (!report.pass) {
    std::ostringstream msg;
    msg << "congruence check failed: value residual " << report.max_value_residual << ", Jacobian property residual "
        << report.max_jacobian_property_residual << ", submersion FD error " << report.max_submersion_fd_error
        << ", min singular value " << report.min_singular_value;
    report.message = msg.str();
  } else {
    report.message = "congruent";
  }
  return report;
}

}  // namespace natlearn
