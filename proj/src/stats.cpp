#include "wiretap/stats.hpp"

#include <algorithm>
#include <cmath>

#include "wiretap/error.hpp"

namespace wiretap {

Proportion wilson(std::uint64_t errors, std::uint64_t trials, double z) {
  if (trials == 0) throw Error(ErrorKind::out_of_range, "at least one trial is required");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(errors) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double radius = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  Proportion out;
  out.errors = errors;
  out.trials = trials;
  out.estimate = p;
  // The interval ends exactly at 0 (or 1) when no trial failed (or all did).
  out.lower = errors == 0 ? 0.0 : std::max(0.0, center - radius);
  out.upper = errors == trials ? 1.0 : std::min(1.0, center + radius);
  return out;
}

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const auto half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return pairwise_sum(xs) / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace wiretap
