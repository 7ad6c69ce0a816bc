#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "design.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "stats.hpp"

namespace pubgml {

struct ForestParams {
  std::size_t n_trees = 100;
  double bag_fraction = 1.0;
  bool bootstrap = true;                   // false: draw the bag without replacement
  std::optional<std::size_t> k_features;  // nullopt: floor(log2(m)) + 1
  std::size_t max_depth = 0;               // 0: unlimited
  std::size_t min_leaf = 1;
  std::uint64_t seed = 1;

  std::size_t resolved_k(std::size_t m) const {
    if (k_features) return *k_features;
    return static_cast<std::size_t>(std::floor(std::log2(static_cast<double>(m)))) + 1;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"n_trees", n_trees},     {"bag_fraction", bag_fraction},
                        {"bootstrap", bootstrap}, {"max_depth", max_depth},
                        {"min_leaf", min_leaf},   {"seed", seed}};
    j["k_features"] = k_features ? nlohmann::json(*k_features) : nlohmann::json("auto");
    return j;
  }
  static ForestParams from_json(const nlohmann::json& j) {
    ForestParams p;
    p.n_trees = j.value("n_trees", p.n_trees);
    p.bag_fraction = j.value("bag_fraction", p.bag_fraction);
    p.bootstrap = j.value("bootstrap", p.bootstrap);
    p.max_depth = j.value("max_depth", p.max_depth);
    p.min_leaf = j.value("min_leaf", p.min_leaf);
    p.seed = j.value("seed", p.seed);
    if (j.contains("k_features") && !j.at("k_features").is_string())
      p.k_features = j.at("k_features").get<std::size_t>();
    return p;
  }
};

/// Regression tree with constant leaves stored as flat arrays.
struct RegressionTree {
  std::vector<int> feature;  // -1 marks a leaf
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;

  std::size_t size() const { return feature.size(); }
  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count(feature.begin(), feature.end(), -1));
  }

  double predict(std::span<const double> row) const {
    std::size_t i = 0;
    while (feature[i] >= 0)
      i = static_cast<std::size_t>(row[static_cast<std::size_t>(feature[i])] <= threshold[i] ? left[i] : right[i]);
    return value[i];
  }

  std::size_t push_leaf(double v) {
    feature.push_back(-1);
    threshold.push_back(0.0);
    left.push_back(-1);
    right.push_back(-1);
    value.push_back(v);
    return feature.size() - 1;
  }
};

struct Forest {
  std::vector<std::string> features;
  std::vector<RegressionTree> trees;
  std::vector<std::uint64_t> tree_seeds;
  ForestParams params;

  double predict(std::span<const double> row) const {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(row);
    return s / static_cast<double>(trees.size());
  }

  std::vector<double> predict(const DesignMatrix& X) const {
    auto idx = X.bind(features);
    std::vector<double> out(X.rows);
    parallel_for(X.rows, [&](std::size_t r) {
      std::vector<double> row(idx.size());
      for (std::size_t j = 0; j < idx.size(); ++j) row[j] = X.columns[idx[j]][r];
      out[r] = predict(row);
    });
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json ts = nlohmann::json::array();
    for (const auto& t : trees)
      ts.push_back({{"feature", t.feature},
                    {"threshold", t.threshold},
                    {"left", t.left},
                    {"right", t.right},
                    {"value", t.value}});
    return {{"format", "pubgml.forest"}, {"version", 1}, {"features", features},
            {"params", params.to_json()}, {"tree_seeds", tree_seeds}, {"trees", ts}};
  }

  static Forest from_json(const nlohmann::json& j) {
    if (j.at("format") != "pubgml.forest" || j.at("version") != 1)
      throw ParseError("not a version-1 forest document");
    Forest f;
    f.features = j.at("features").get<std::vector<std::string>>();
    f.params = ForestParams::from_json(j.at("params"));
    f.tree_seeds = j.at("tree_seeds").get<std::vector<std::uint64_t>>();
    for (const auto& jt : j.at("trees")) {
      RegressionTree t;
      t.feature = jt.at("feature").get<std::vector<int>>();
      t.threshold = jt.at("threshold").get<std::vector<double>>();
      t.left = jt.at("left").get<std::vector<int>>();
      t.right = jt.at("right").get<std::vector<int>>();
      t.value = jt.at("value").get<std::vector<double>>();
      f.trees.push_back(std::move(t));
    }
    return f;
  }
};

/// Best variance-reduction split found on one feature.
struct VarianceSplit {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double reduction = 0.0;  // var(T) - sum(|Ti|/|T| var(Ti)), population variances
};

namespace detail {

inline VarianceSplit best_variance_split_on(const DesignMatrix& X, std::span<const double> y,
                                            std::span<const std::size_t> rows, std::size_t feature,
                                            std::size_t min_leaf, double mean,
                                            std::vector<std::pair<double, double>>& scratch) {
  const std::size_t n = rows.size();
  const auto& col = X.columns[feature];
  scratch.clear();
  for (auto r : rows) scratch.emplace_back(col[r], y[r] - mean);
  std::sort(scratch.begin(), scratch.end());
  double total = 0.0, total_sq = 0.0;
  for (const auto& p : scratch) {
    total += p.second;
    total_sq += p.second * p.second;
  }
  const double nd = static_cast<double>(n);
  const double parent_sse = total_sq - total * total / nd;
  VarianceSplit best;
  double left = 0.0, left_sq = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    left += scratch[i - 1].second;
    left_sq += scratch[i - 1].second * scratch[i - 1].second;
    if (i < min_leaf || n - i < min_leaf) continue;
    const double lo = scratch[i - 1].first, hi = scratch[i].first;
    if (!(lo < hi)) continue;
    const double li = static_cast<double>(i), ri = nd - li;
    const double right = total - left, right_sq = total_sq - left_sq;
    const double child_sse = std::max(0.0, left_sq - left * left / li) + std::max(0.0, right_sq - right * right / ri);
    const double reduction = (parent_sse - child_sse) / nd;
    if (!best.found || reduction > best.reduction) best = {true, feature, stats::split_point(lo, hi), reduction};
  }
  return best;
}

class ForestTreeBuilder {
 public:
  ForestTreeBuilder(const DesignMatrix& X, std::span<const double> y, const ForestParams& p, std::size_t k,
                    std::uint64_t seed)
      : X_(X), y_(y), params_(p), k_(k), rng_(seed) {}

  RegressionTree build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> rows, std::size_t depth) {
    const std::size_t n = rows.size();
    double mean = 0.0;
    for (auto r : rows) mean += y_[r];
    mean /= static_cast<double>(n);
    const int id = static_cast<int>(tree_.push_leaf(mean));

    bool pure = true;
    for (auto r : rows)
      if (y_[r] != y_[rows.front()]) {
        pure = false;
        break;
      }
    if (pure || n < 2 * params_.min_leaf || (params_.max_depth > 0 && depth >= params_.max_depth)) return id;

    // Random feature order; the first k are always tried, later ones only
    // until some feature yields a positive reduction.
    std::vector<std::size_t> order(X_.cols());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng_)]);
    }
    VarianceSplit best;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i >= k_ && best.found && best.reduction > 0.0) break;
      auto s = best_variance_split_on(X_, y_, rows, order[i], params_.min_leaf, mean, scratch_);
      if (!s.found) continue;
      if (!best.found || s.reduction > best.reduction ||
          (s.reduction == best.reduction && s.feature < best.feature))
        best = s;
    }
    if (!best.found || !(best.reduction > 0.0)) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) (X_.columns[best.feature][r] <= best.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    const auto u = static_cast<std::size_t>(id);
    tree_.feature[u] = static_cast<int>(best.feature);
    tree_.threshold[u] = best.threshold;
    tree_.left[u] = l;
    tree_.right[u] = r;
    return id;
  }

  const DesignMatrix& X_;
  std::span<const double> y_;
  const ForestParams& params_;
  std::size_t k_;
  std::mt19937_64 rng_;
  RegressionTree tree_;
  std::vector<std::pair<double, double>> scratch_;
};

}  // namespace detail

/// Exhaustive best variance-reduction split over every feature of X on the
/// given rows (ties: earliest feature, then smallest threshold).
inline VarianceSplit best_variance_split(const DesignMatrix& X, std::span<const double> y,
                                         std::span<const std::size_t> rows, std::size_t min_leaf = 1) {
  double mean = 0.0;
  for (auto r : rows) mean += y[r];
  mean /= static_cast<double>(rows.size());
  std::vector<std::pair<double, double>> scratch;
  VarianceSplit best;
  for (std::size_t f = 0; f < X.cols(); ++f) {
    auto s = detail::best_variance_split_on(X, y, rows, f, min_leaf, mean, scratch);
    if (s.found && (!best.found || s.reduction > best.reduction)) best = s;
  }
  return best;
}

/// The bag drawn for one tree; regenerated from the tree seed for out-of-bag use.
inline std::vector<std::size_t> forest_bag(std::size_t n, const ForestParams& p, std::uint64_t tree_seed) {
  const auto size = static_cast<std::size_t>(std::ceil(p.bag_fraction * static_cast<double>(n)));
  std::mt19937_64 rng(tree_seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> bag;
  bag.reserve(size);
  if (p.bootstrap) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < size; ++i) bag.push_back(pick(rng));
    std::sort(bag.begin(), bag.end());
  } else if (size >= n) {
    bag.resize(n);
    std::iota(bag.begin(), bag.end(), std::size_t{0});
  } else {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t i = 0; i < size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    bag.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(size));
    std::sort(bag.begin(), bag.end());
  }
  return bag;
}

/// Bagged variance-reduction trees. Tree i is seeded with seed ^ i before
/// any parallel dispatch, so results do not depend on the thread count.
inline Forest fit_forest(const DesignMatrix& X, std::span<const double> y, const ForestParams& params = {}) {
  if (y.size() != X.rows) throw DomainError("X and y row counts differ");
  if (X.rows < 2) throw DomainError("a forest needs at least two rows");
  if (X.cols() == 0) throw DomainError("a forest needs at least one feature");
  if (params.n_trees < 1) throw DomainError("n_trees must be at least 1");
  if (!(params.bag_fraction > 0.0 && params.bag_fraction <= 1.0)) throw DomainError("bag_fraction must be in (0, 1]");
  if (params.min_leaf < 1) throw DomainError("min_leaf must be at least 1");
  const std::size_t k = params.resolved_k(X.cols());
  if (k < 1 || k > X.cols()) throw DomainError("k_features exceeds the feature count");
  X.require_finite();

  Forest forest;
  forest.features = X.names;
  forest.params = params;
  forest.tree_seeds.resize(params.n_trees);
  for (std::size_t t = 0; t < params.n_trees; ++t) forest.tree_seeds[t] = params.seed ^ static_cast<std::uint64_t>(t);
  forest.trees.resize(params.n_trees);
  parallel_for(params.n_trees, [&](std::size_t t) {
    auto bag = forest_bag(X.rows, params, forest.tree_seeds[t]);
    forest.trees[t] = detail::ForestTreeBuilder(X, y, params, k, forest.tree_seeds[t]).build(std::move(bag));
  });
  return forest;
}

/// Out-of-bag prediction per training row (nullopt when every tree saw the row).
inline std::vector<std::optional<double>> out_of_bag_predictions(const Forest& forest, const DesignMatrix& X) {
  auto idx = X.bind(forest.features);
  std::vector<double> sum(X.rows, 0.0);
  std::vector<std::size_t> count(X.rows, 0);
  std::vector<double> row(idx.size());
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    auto bag = forest_bag(X.rows, forest.params, forest.tree_seeds[t]);
    std::vector<bool> in_bag(X.rows, false);
    for (auto r : bag) in_bag[r] = true;
    for (std::size_t r = 0; r < X.rows; ++r) {
      if (in_bag[r]) continue;
      for (std::size_t j = 0; j < idx.size(); ++j) row[j] = X.columns[idx[j]][r];
      sum[r] += forest.trees[t].predict(row);
      ++count[r];
    }
  }
  std::vector<std::optional<double>> out(X.rows);
  for (std::size_t r = 0; r < X.rows; ++r)
    if (count[r] > 0) out[r] = sum[r] / static_cast<double>(count[r]);
  return out;
}

}  // namespace pubgml
