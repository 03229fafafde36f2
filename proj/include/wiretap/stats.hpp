#pragma once

#include <cstdint>
#include <span>

namespace wiretap {

inline constexpr double kZ95 = 1.959963984540054;

// Error-rate estimate with a 95% Wilson score interval.
struct Proportion {
  std::uint64_t errors = 0;
  std::uint64_t trials = 0;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 1.0;

  double half_width() const noexcept { return 0.5 * (upper - lower); }
};

Proportion wilson(std::uint64_t errors, std::uint64_t trials, double z = kZ95);

// Intervals overlap or a lies below b: a <= b within the combined uncertainty.
inline bool leq_within_ci(const Proportion& a, const Proportion& b) noexcept {
  return a.lower <= b.upper;
}

double mean(std::span<const double> xs);
// Sample standard deviation (n - 1 denominator).
double stddev(std::span<const double> xs);
// Pairwise summation; the result depends only on the input order.
double pairwise_sum(std::span<const double> xs);

}  // namespace wiretap
