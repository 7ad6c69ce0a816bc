#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace pubgml {

/// Paired predicted/actual sequences.
struct Predictions {
  std::span<const double> predicted;
  std::span<const double> actual;

  Predictions(std::span<const double> p, std::span<const double> a) : predicted(p), actual(a) {
    if (p.size() != a.size()) throw DomainError("predicted and actual lengths differ");
    if (p.empty()) throw DomainError("at least one prediction is required");
  }
  std::size_t size() const { return predicted.size(); }
};

/// Mean absolute error.
inline double mae(const Predictions& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p.actual[i] - p.predicted[i]);
  return s / static_cast<double>(p.size());
}

/// Root mean squared error.
inline double rmse(const Predictions& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p.actual[i] - p.predicted[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(p.size()));
}

inline double mae(std::span<const double> predicted, std::span<const double> actual) {
  return mae(Predictions(predicted, actual));
}
inline double rmse(std::span<const double> predicted, std::span<const double> actual) {
  return rmse(Predictions(predicted, actual));
}

/// Assignment of n rows to k disjoint folds whose sizes differ by at most one.
struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::uint32_t> assignment;
  std::uint64_t seed = 0;

  std::size_t size() const { return assignment.size(); }

  std::vector<std::size_t> test_rows(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < assignment.size(); ++r)
      if (assignment[r] == fold) out.push_back(r);
    return out;
  }
  std::vector<std::size_t> train_rows(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < assignment.size(); ++r)
      if (assignment[r] != fold) out.push_back(r);
    return out;
  }

  nlohmann::json to_json() const { return {{"k", k}, {"seed", seed}, {"assignment", assignment}}; }
};

/// Seeded shuffle, then contiguous slicing into k folds (the first n % k
/// folds get one extra row).
inline FoldPlan kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw DomainError("k-fold needs k >= 2");
  if (k > n) throw DomainError("k-fold needs k <= n");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  FoldPlan plan{k, std::vector<std::uint32_t>(n), seed};
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) plan.assignment[order[pos++]] = static_cast<std::uint32_t>(f);
  }
  return plan;
}

}  // namespace pubgml
