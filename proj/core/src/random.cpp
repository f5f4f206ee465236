#include "natlearn/random.hpp"

#include <boost/math/distributions/normal.hpp>

namespace natlearn {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::mt19937_64 RandomStreams::engine(std::string_view label, std::uint64_t index) const {
  return std::mt19937_64(splitmix64(seed_ ^ splitmix64(fnv1a64(label) + index)));
}

double unit_uniform(std::mt19937_64& engine) {
  // (k + 0.5) / 2^53 never hits 0 or 1.
  const std::uint64_t k = engine() >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

double standard_normal_quantile(double u) {
  static const boost::math::normal_distribution<double> unit;
  return boost::math::quantile(unit, u);
}

double standard_normal(std::mt19937_64& engine) { return standard_normal_quantile(unit_uniform(engine)); }

}  // namespace natlearn
