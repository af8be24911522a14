#pragma once

// Binomial summaries used by reports and statistical checks.

#include <cmath>
#include <cstddef>

namespace cqpv::stats {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Wilson score interval for k successes in n trials at z standard
/// deviations. n = 0 gives the whole unit interval.
inline Interval wilson(std::size_t k, std::size_t n, double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n), p = static_cast<double>(k) / nn, z2 = z * z;
  const double centre = (p + z2 / (2 * nn)) / (1 + z2 / nn);
  const double half = z / (1 + z2 / nn) * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn));
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

inline double binomial_se(double p, double n) { return n > 0 ? std::sqrt(p * (1 - p) / n) : 0.0; }

inline double rate(std::size_t k, std::size_t n) { return n ? static_cast<double>(k) / static_cast<double>(n) : 0.0; }

}  // namespace cqpv::stats
