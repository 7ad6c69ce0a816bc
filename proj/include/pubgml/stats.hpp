#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "error.hpp"

// Small descriptive-statistics helpers shared by the learners.
namespace pubgml::stats {

inline double mean(std::span<const double> v) {
  if (v.empty()) throw EmptyInputError("mean of empty sequence");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Population standard deviation (divides by n).
inline double population_sd(std::span<const double> v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

/// Population sd from running sums; clamps the tiny negatives cancellation produces.
inline double sd_from_sums(double sum, double sum_sq, double n) {
  if (n <= 0.0) return 0.0;
  const double m = sum / n;
  return std::sqrt(std::max(0.0, sum_sq / n - m * m));
}

/// Median; even-length input averages the two middle values. Reorders `v`.
inline double median_inplace(std::vector<double>& v) {
  if (v.empty()) throw EmptyInputError("median of empty sequence");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return lower + (upper - lower) / 2.0;
}

/// Threshold strictly separating lo < hi under the rule "x <= t goes left":
/// the midpoint, or lo itself when rounding pushes the midpoint onto hi.
inline double split_point(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid < hi ? mid : lo;
}

inline double median(std::span<const double> v) {
  std::vector<double> copy(v.begin(), v.end());
  return median_inplace(copy);
}

}  // namespace pubgml::stats
