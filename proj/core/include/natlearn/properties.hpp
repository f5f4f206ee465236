#ifndef NATLEARN_PROPERTIES_HPP
#define NATLEARN_PROPERTIES_HPP

#include "natlearn/calculus.hpp"
#include "natlearn/metric.hpp"
#include "natlearn/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace natlearn {

/// Largest of the four Moore-Penrose residuals
///   |A X A - A|, |X A X - X|, |(A X)^T - A X|, |(X A)^T - X A|
/// (max-abs entries), each relative to max(1, max-abs of A or X).
double penrose_residual(const Matrix& a, const Matrix& x);

struct ShippedFunction {
  ParamFunctionPtr f;
  PointSampler sampler;
};

struct ShippedPair {
  CongruentPair pair;
  PointSampler sampler;  // theta in the domain of pair.f
};

/// Every ParamFunction the library ships, with a sampler of valid points.
std::vector<ShippedFunction> shipped_functions();

/// Every congruent pair the library ships: Gaussian (mu, sigma^a) ->
/// (mu, sigma^b) for a, b in 1..4 in both modes, and the exp / exp(2.) pairs
/// of the unit-variance Gaussian.
std::vector<ShippedPair> shipped_pairs();

/// |G(f, beta) - J^T G(g, psi(beta)) J| / max(1, |G(f, beta)|) for one metric
/// spec, iteration and seed; mu is the update measure (MeasureGram).
double metric_transform_residual(const MetricSpec& spec, const CongruentPair& pair, const ParamVector& beta,
                                 int iteration, const SignedMeasure& mu, std::uint64_t seed);

struct SuiteLine {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct SuiteReport {
  std::vector<SuiteLine> lines;
  bool pass() const;
};

/// Penrose conditions on random symmetric PSD matrices of rank 1..n (n <= 6).
SuiteReport penrose_suite(int instances, std::uint64_t seed, double tolerance = 1e-8);

/// Jacobian property and metric transformation on every shipped pair.
SuiteReport congruence_suite(int samples, std::uint64_t seed, double tolerance = 1e-8);

/// Finite-difference gradient check on every shipped function.
SuiteReport gradient_suite(int trials, std::uint64_t seed, double tolerance = 1e-4);

void print_suite(std::ostream& out, const SuiteReport& report);

}  // namespace natlearn

#endif  // NATLEARN_PROPERTIES_HPP
