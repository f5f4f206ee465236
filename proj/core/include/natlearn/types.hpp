#ifndef NATLEARN_TYPES_HPP
#define NATLEARN_TYPES_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace natlearn {

using ParamVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr int kMaxInputDim = 4;

/// Element of the input space: a real scalar or a short real vector.
/// Stored inline (no heap) so that large atom lists stay cheap.
using InputPoint = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxInputDim, 1>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a computation produces non-finite values mid-run; run drivers
/// record it as divergence.
class NumericalDivergence : public Error {
 public:
  using Error::Error;
};

InputPoint scalar_input(double value);

bool all_finite(const ParamVector& v);
bool all_finite(const InputPoint& x);

// ---------------------------------------------------------------------------
// Measures

struct Atom {
  InputPoint x;
  double weight = 0.0;
};

/// Weighted central moments of scalar atoms about `center`:
/// m[p] = sum_j w_j (x_j - center)^p, p = 0..4.
struct ScalarMoments {
  double center = 0.0;
  double m[5] = {0.0, 0.0, 0.0, 0.0, 0.0};

  /// sum_j w_j (x_j - at)^p for p = 0..4, by binomial shift.
  std::array<double, 5> about(double at) const;
};

/// Discrete signed measure over inputs. The atom list is shared and immutable;
/// an overall scale multiplies every stored weight, so re-weighting a large
/// data measure per iteration does not copy the atoms. Weight totals and, for
/// scalar inputs, weighted moments are computed once per atom list.
///
/// Rules build these from input points and function values only. That keeps
/// the measure identical for two congruent parameterizations at mapped
/// parameters.
class SignedMeasure {
 public:
  SignedMeasure() = default;
  explicit SignedMeasure(std::vector<Atom> atoms, double scale = 1.0);

  static SignedMeasure single(InputPoint x, double weight);

  std::size_t size() const { return block_ ? block_->atoms.size() : 0; }
  bool empty() const { return size() == 0; }
  const InputPoint& point(std::size_t j) const { return block_->atoms[j].x; }
  double weight(std::size_t j) const { return scale_ * block_->atoms[j].weight; }
  double scale() const { return scale_; }

  double total_weight() const;
  double total_abs_weight() const;
  bool is_zero() const;
  bool has_negative_weight() const;

  /// Moments with the scale applied; empty unless every atom is scalar.
  std::optional<ScalarMoments> scalar_moments() const;

  SignedMeasure scaled(double factor) const;

  /// Atom-for-atom equality of points and effective weights.
  bool operator==(const SignedMeasure& other) const;

 private:
  struct Block {
    std::vector<Atom> atoms;
    double sum = 0.0;
    double abs_sum = 0.0;
    bool any_negative = false;
    bool any_positive = false;
    bool scalar = true;
    mutable std::once_flag moments_once;
    mutable std::optional<ScalarMoments> moments;
  };

  std::shared_ptr<const Block> block_;
  double scale_ = 1.0;
};

struct JointAtom {
  InputPoint x;
  InputPoint y;
  double probability = 0.0;
};

/// Discrete probability measure over input pairs. Probabilities are
/// non-negative and sum to one within 1e-12.
class JointMeasure {
 public:
  explicit JointMeasure(std::vector<JointAtom> atoms);

  /// Uniform diagonal measure: one (x, x) atom per point.
  static JointMeasure diagonal(std::span<const InputPoint> points);
  static JointMeasure diagonal(std::span<const InputPoint> points, std::span<const double> probabilities);

  const std::vector<JointAtom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool is_diagonal() const;

 private:
  std::vector<JointAtom> atoms_;
};

// ---------------------------------------------------------------------------
// Parameterized functions

/// Implemented by parameterized functions that describe a probability
/// distribution over scalar inputs, so metric estimators can sample from it.
class DensityModel {
 public:
  virtual ~DensityModel() = default;
  /// Inverse CDF of the represented distribution at u in (0, 1).
  virtual InputPoint quantile(const ParamVector& theta, double u) const = 0;
  /// Location and scale of the represented distribution (function-space
  /// quantities, independent of the parameterization).
  virtual std::pair<double, double> location_scale(const ParamVector& theta) const = 0;
};

/// f(x, theta) with an analytic gradient in theta. Scalar output only.
class ParamFunction {
 public:
  virtual ~ParamFunction() = default;

  virtual int param_dim() const = 0;
  virtual int output_dim() const { return 1; }
  virtual std::string label() const = 0;

  virtual double eval(const InputPoint& x, const ParamVector& theta) const = 0;
  virtual ParamVector grad(const InputPoint& x, const ParamVector& theta) const = 0;

  /// Parameters the function is defined at. Defaults to "all finite".
  virtual bool in_domain(const ParamVector& theta) const { return all_finite(theta); }

  /// f(x_j, theta) for every atom of mu, in atom order.
  virtual std::vector<double> values(const SignedMeasure& mu, const ParamVector& theta) const;
  /// sum_j w_j * grad(x_j, theta), accumulated in atom order.
  virtual ParamVector weighted_grad_sum(const SignedMeasure& mu, const ParamVector& theta) const;
  /// sum_j w_j * grad(x_j, theta) grad(x_j, theta)^T, accumulated in atom order.
  virtual Matrix weighted_gram(const SignedMeasure& mu, const ParamVector& theta) const;

  /// Exact Fisher information when the function is a log-density with a
  /// known closed form.
  virtual std::optional<Matrix> closed_form_fisher(const ParamVector& /*theta*/) const { return std::nullopt; }
  virtual const DensityModel* density_model() const { return nullptr; }
};

using ParamFunctionPtr = std::shared_ptr<const ParamFunction>;

/// Throws unless f has scalar output.
void require_scalar_output(const ParamFunction& f);

/// ParamFunction assembled from callables; used for small analytic examples.
class CallableFunction final : public ParamFunction {
 public:
  using EvalFn = std::function<double(const InputPoint&, const ParamVector&)>;
  using GradFn = std::function<ParamVector(const InputPoint&, const ParamVector&)>;
  using DomainFn = std::function<bool(const ParamVector&)>;

  CallableFunction(std::string label, int param_dim, EvalFn eval, GradFn grad, DomainFn domain = {});

  int param_dim() const override { return param_dim_; }
  std::string label() const override { return label_; }
  double eval(const InputPoint& x, const ParamVector& theta) const override { return eval_(x, theta); }
  ParamVector grad(const InputPoint& x, const ParamVector& theta) const override { return grad_(x, theta); }
  bool in_domain(const ParamVector& theta) const override;

 private:
  std::string label_;
  int param_dim_;
  EvalFn eval_;
  GradFn grad_;
  DomainFn domain_;
};

// ---------------------------------------------------------------------------
// Congruence

/// Smooth map psi: Theta (dim n) -> Psi (dim m), m <= n, full-rank Jacobian.
struct Submersion {
  int in_dim = 0;
  int out_dim = 0;
  std::function<ParamVector(const ParamVector&)> map;
  std::function<Matrix(const ParamVector&)> jacobian;  // out_dim x in_dim

  static Submersion identity(int n);
};

/// g is congruent to f with witness psi: f(x, theta) = g(x, psi(theta)).
struct CongruentPair {
  ParamFunctionPtr f;
  ParamFunctionPtr g;
  Submersion psi;
  std::string label;
};

/// Draws a random (x, theta) in the domain of a function.
using PointSampler = std::function<std::pair<InputPoint, ParamVector>(std::mt19937_64&)>;

struct CongruenceReport {
  bool pass = false;
  double max_value_residual = 0.0;
  double max_jacobian_property_residual = 0.0;  // relative
  double max_submersion_fd_error = 0.0;         // relative
  double min_singular_value = 0.0;
  std::string message;
};

CongruenceReport verify_congruence(const CongruentPair& pair, int n_samples, std::uint64_t rng_seed,
                                   const PointSampler& sampler, double value_tolerance = 1e-10,
                                   double jacobian_tolerance = 1e-8);

}  // namespace natlearn

#endif  // NATLEARN_TYPES_HPP
