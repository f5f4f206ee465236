#ifndef NATLEARN_RANDOM_HPP
#define NATLEARN_RANDOM_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace natlearn {

/// Deterministic expansion of a 64-bit seed (the outcome omega) into labeled
/// per-iteration substreams.
///
/// engine(label, index) seeds a std::mt19937_64 with
///   splitmix64(seed ^ splitmix64(fnv1a64(label) + index)).
/// Each (label, index) pair is independent of how many numbers any other
/// substream consumed. Two runs on congruent functions that share a seed
/// therefore draw identical numbers at every iteration, for the rule ("rule")
/// and the metric estimator ("metric") alike.
class RandomStreams {
 public:
  explicit RandomStreams(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::mt19937_64 engine(std::string_view label, std::uint64_t index) const;

 private:
  std::uint64_t seed_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

/// Uniform on the open interval (0, 1) from the top 53 bits of one draw.
double unit_uniform(std::mt19937_64& engine);

/// Inverse CDF of the standard normal at u in (0, 1).
double standard_normal_quantile(double u);

/// Standard normal draw by inverse-CDF of unit_uniform.
double standard_normal(std::mt19937_64& engine);

}  // namespace natlearn

#endif  // NATLEARN_RANDOM_HPP
