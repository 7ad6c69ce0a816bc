#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "design.hpp"
#include "error.hpp"
#include "log.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "stats.hpp"

namespace pubgml {

// ---------------------------------------------------------------------------
// Histogram binning

/// Features discretized into at most max_bins bins each. A value x falls in
/// bin = number of edges strictly below x, so bin <= b exactly when
/// x <= edges[b]; trees split on bins and route raw values by the same edge.
struct BinnedMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> edges;
  std::vector<std::vector<std::uint16_t>> bins;  // column-major
  std::size_t rows = 0;

  std::size_t cols() const { return bins.size(); }
  std::size_t bin_count(std::size_t f) const { return edges[f].size() + 1; }

  static std::uint16_t bin_of(std::span<const double> edges, double x) {
    return static_cast<std::uint16_t>(std::lower_bound(edges.begin(), edges.end(), x) - edges.begin());
  }
};

/// Equal-frequency edges over the distinct values of `values`; when there
/// are no more distinct values than bins every gap between neighbours gets
/// an edge at its midpoint.
inline std::vector<double> compute_bin_edges(std::span<const double> values, std::size_t max_bins) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct;
  std::vector<std::size_t> counts;
  for (double v : sorted) {
    if (distinct.empty() || distinct.back() != v) {
      distinct.push_back(v);
      counts.push_back(0);
    }
    ++counts.back();
  }
  std::vector<double> edges;
  if (distinct.size() <= max_bins) {
    for (std::size_t i = 1; i < distinct.size(); ++i) edges.push_back(stats::split_point(distinct[i - 1], distinct[i]));
    return edges;
  }
  const double n = static_cast<double>(sorted.size());
  std::size_t cumulative = 0;
  for (std::size_t i = 0; i + 1 < distinct.size() && edges.size() + 1 < max_bins; ++i) {
    cumulative += counts[i];
    const double target = n * static_cast<double>(edges.size() + 1) / static_cast<double>(max_bins);
    if (static_cast<double>(cumulative) >= target) edges.push_back(stats::split_point(distinct[i], distinct[i + 1]));
  }
  return edges;
}

inline BinnedMatrix bin_features(const DesignMatrix& X, std::size_t max_bins) {
  if (max_bins < 2) throw DomainError("max_bins must be at least 2");
  if (max_bins > 65536) throw DomainError("max_bins must not exceed 65536");
  X.require_finite();
  BinnedMatrix B;
  B.names = X.names;
  B.rows = X.rows;
  B.edges.resize(X.cols());
  B.bins.resize(X.cols());
  parallel_for(X.cols(), [&](std::size_t f) {
    B.edges[f] = compute_bin_edges(X.columns[f], max_bins);
    auto& b = B.bins[f];
    b.resize(X.rows);
    for (std::size_t r = 0; r < X.rows; ++r) b[r] = BinnedMatrix::bin_of(B.edges[f], X.columns[f][r]);
  });
  return B;
}

// ---------------------------------------------------------------------------
// Model

enum class GbmObjective { mae, mse };

struct GbmParams {
  GbmObjective objective = GbmObjective::mae;
  std::size_t num_leaves = 31;
  double learning_rate = 0.1;
  double bagging_fraction = 0.7;
  double feature_fraction = 0.7;
  std::optional<std::size_t> n_iterations;  // must be set explicitly
  std::size_t max_bins = 255;
  std::size_t min_leaf = 20;
  double lambda = 1e-3;
  std::uint64_t seed = 42;
  std::string metric = "mae";  // "mae" or "rmse"

  nlohmann::json to_json() const {
    return {{"objective", objective == GbmObjective::mae ? "mae" : "mse"},
            {"num_leaves", num_leaves},
            {"learning_rate", learning_rate},
            {"bagging_fraction", bagging_fraction},
            {"feature_fraction", feature_fraction},
            {"n_iterations", n_iterations ? nlohmann::json(*n_iterations) : nlohmann::json(nullptr)},
            {"max_bins", max_bins},
            {"min_leaf", min_leaf},
            {"lambda", lambda},
            {"seed", seed},
            {"metric", metric}};
  }

  static GbmParams from_json(const nlohmann::json& j) {
    GbmParams p;
    const auto obj = j.value("objective", std::string("mae"));
    if (obj == "mae") p.objective = GbmObjective::mae;
    else if (obj == "mse") p.objective = GbmObjective::mse;
    else throw ConfigError("gbm.objective must be 'mae' or 'mse'");
    p.num_leaves = j.value("num_leaves", p.num_leaves);
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.bagging_fraction = j.value("bagging_fraction", p.bagging_fraction);
    p.feature_fraction = j.value("feature_fraction", p.feature_fraction);
    if (j.contains("n_iterations") && !j.at("n_iterations").is_null())
      p.n_iterations = j.at("n_iterations").get<std::size_t>();
    p.max_bins = j.value("max_bins", p.max_bins);
    p.min_leaf = j.value("min_leaf", p.min_leaf);
    p.lambda = j.value("lambda", p.lambda);
    p.seed = j.value("seed", j.value("random_state", p.seed));
    p.metric = j.value("metric", p.metric);
    return p;
  }
};

/// One boosted tree over bin indices; leaf values already include the
/// learning rate.
struct GbmTree {
  std::vector<int> feature;  // -1 marks a leaf
  std::vector<std::uint16_t> bin;
  std::vector<double> threshold;  // raw-value equivalent of bin
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count(feature.begin(), feature.end(), -1));
  }

  double predict(std::span<const double> row) const {
    std::size_t i = 0;
    while (feature[i] >= 0)
      i = static_cast<std::size_t>(row[static_cast<std::size_t>(feature[i])] <= threshold[i] ? left[i] : right[i]);
    return value[i];
  }

  double predict_binned(const BinnedMatrix& B, std::size_t r) const {
    std::size_t i = 0;
    while (feature[i] >= 0)
      i = static_cast<std::size_t>(B.bins[static_cast<std::size_t>(feature[i])][r] <= bin[i] ? left[i] : right[i]);
    return value[i];
  }
};

struct GbmModel {
  std::vector<std::string> features;
  std::vector<std::vector<double>> bin_edges;
  double init_score = 0.0;
  std::vector<GbmTree> trees;
  GbmParams params;
  std::vector<double> trace;  // training metric after each iteration

  double predict(std::span<const double> row) const {
    double s = init_score;
    for (const auto& t : trees) s += t.predict(row);
    return s;
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
                    {"bin", t.bin},
                    {"threshold", t.threshold},
                    {"left", t.left},
                    {"right", t.right},
                    {"value", t.value}});
    return {{"format", "pubgml.gbm"}, {"version", 1},         {"features", features},
            {"bin_edges", bin_edges}, {"init_score", init_score}, {"params", params.to_json()},
            {"trace", trace},         {"trees", ts}};
  }

  static GbmModel from_json(const nlohmann::json& j) {
    if (j.at("format") != "pubgml.gbm" || j.at("version") != 1)
      throw ParseError("not a version-1 gbm document");
    GbmModel m;
    m.features = j.at("features").get<std::vector<std::string>>();
    m.bin_edges = j.at("bin_edges").get<std::vector<std::vector<double>>>();
    m.init_score = j.at("init_score").get<double>();
    m.params = GbmParams::from_json(j.at("params"));
    m.trace = j.at("trace").get<std::vector<double>>();
    for (const auto& jt : j.at("trees")) {
      GbmTree t;
      t.feature = jt.at("feature").get<std::vector<int>>();
      t.bin = jt.at("bin").get<std::vector<std::uint16_t>>();
      t.threshold = jt.at("threshold").get<std::vector<double>>();
      t.left = jt.at("left").get<std::vector<int>>();
      t.right = jt.at("right").get<std::vector<int>>();
      t.value = jt.at("value").get<std::vector<double>>();
      m.trees.push_back(std::move(t));
    }
    return m;
  }
};

/// Reported after each leaf split during growth, for instrumentation.
struct GbmSplitEvent {
  std::size_t iteration = 0;
  std::size_t leaves_before = 0;
  double executed_gain = 0.0;
  double best_other_gain = 0.0;  // best gain at any other current leaf (-inf if none)
  std::size_t leaf_rows_left = 0;
  std::size_t leaf_rows_right = 0;
};

struct GbmHooks {
  std::function<void(const GbmSplitEvent&)> on_split;
};

/// Best histogram split of one leaf.
struct GbmSplit {
  bool found = false;
  std::size_t feature = 0;
  std::uint16_t bin = 0;
  double gain = 0.0;
};

/// Second-order split gain G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l).
inline double gbm_split_gain(double gl, double hl, double gr, double hr, double lambda) {
  const double g = gl + gr, h = hl + hr;
  return gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda);
}

namespace detail {

struct HistBin {
  double g = 0.0;
  double h = 0.0;
  std::size_t count = 0;
};

class GbmTrainer {
 public:
  GbmTrainer(const BinnedMatrix& B, std::span<const double> y, const GbmParams& p, const GbmHooks& hooks)
      : B_(B), y_(y), p_(p), hooks_(hooks), rng_(p.seed) {
    offsets_.resize(B.cols() + 1, 0);
    for (std::size_t f = 0; f < B.cols(); ++f) offsets_[f + 1] = offsets_[f] + B.bin_count(f);
  }

  GbmModel train() {
    const std::size_t n = B_.rows;
    GbmModel model;
    model.features = B_.names;
    model.bin_edges = B_.edges;
    model.params = p_;
    if (p_.objective == GbmObjective::mae) {
      model.init_score = stats::median(y_);
    } else {
      model.init_score = stats::mean(y_);
    }
    pred_.assign(n, model.init_score);
    grad_.assign(n, 0.0);
    hess_.assign(n, 1.0);

    for (std::size_t it = 0; it < *p_.n_iterations; ++it) {
      iteration_ = it;
      auto bag = draw_bag();
      if (bag.empty()) throw DomainError("bagging produced an empty sample");
      draw_features();
      for (auto r : bag) {
        const double d = pred_[r] - y_[r];
        grad_[r] = p_.objective == GbmObjective::mae ? static_cast<double>((d > 0.0) - (d < 0.0)) : d;
      }
      GbmTree tree = grow(std::move(bag));
      for (std::size_t r = 0; r < n; ++r) pred_[r] += tree.predict_binned(B_, r);
      model.trees.push_back(std::move(tree));
      const double metric = p_.metric == "rmse" ? rmse(pred_, y_) : mae(pred_, y_);
      model.trace.push_back(metric);
      log::info("iter " + std::to_string(it + 1) + ": " + p_.metric + "=" + Table::format_real(metric));
    }
    return model;
  }

 private:
  struct Leaf {
    std::size_t begin = 0, end = 0;  // range in rows_
    int node = 0;
    std::vector<HistBin> hist;
    GbmSplit best;
  };

  std::vector<std::size_t> draw_bag() {
    const std::size_t n = B_.rows;
    const auto size = static_cast<std::size_t>(std::ceil(p_.bagging_fraction * static_cast<double>(n)));
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (size >= n) return all;
    for (std::size_t i = 0; i < size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(all[i], all[pick(rng_)]);
    }
    all.resize(size);
    std::sort(all.begin(), all.end());
    return all;
  }

  void draw_features() {
    const std::size_t m = B_.cols();
    const auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(p_.feature_fraction * static_cast<double>(m))));
    std::vector<std::size_t> all(m);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (k < m) {
      for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, m - 1);
        std::swap(all[i], all[pick(rng_)]);
      }
      all.resize(k);
      std::sort(all.begin(), all.end());
    }
    active_ = std::move(all);
  }

  std::vector<HistBin> build_hist(std::size_t begin, std::size_t end) const {
    std::vector<HistBin> hist(offsets_.back());
    parallel_for(active_.size(), [&](std::size_t a) {
      const std::size_t f = active_[a];
      const auto& col = B_.bins[f];
      HistBin* h = hist.data() + offsets_[f];
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t r = rows_[i];
        auto& b = h[col[r]];
        b.g += grad_[r];
        b.h += hess_[r];
        ++b.count;
      }
    });
    return hist;
  }

  GbmSplit find_split(const std::vector<HistBin>& hist) const {
    std::vector<GbmSplit> per_feature(active_.size());
    parallel_for(active_.size(), [&](std::size_t a) {
      const std::size_t f = active_[a];
      const HistBin* h = hist.data() + offsets_[f];
      const std::size_t nb = B_.bin_count(f);
      double G = 0.0, H = 0.0;
      std::size_t N = 0;
      for (std::size_t b = 0; b < nb; ++b) {
        G += h[b].g;
        H += h[b].h;
        N += h[b].count;
      }
      double gl = 0.0, hl = 0.0;
      std::size_t nl = 0;
      GbmSplit best;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        gl += h[b].g;
        hl += h[b].h;
        nl += h[b].count;
        if (h[b].count == 0) continue;  // same partition as an earlier bin
        if (nl < p_.min_leaf || N - nl < p_.min_leaf) continue;
        const double gain = gbm_split_gain(gl, hl, G - gl, H - hl, p_.lambda);
        if (!best.found || gain > best.gain) best = {true, f, static_cast<std::uint16_t>(b), gain};
      }
      per_feature[a] = best;
    });
    GbmSplit best;
    for (const auto& s : per_feature)
      if (s.found && (!best.found || s.gain > best.gain)) best = s;
    return best;
  }

  GbmTree grow(std::vector<std::size_t> bag) {
    rows_ = std::move(bag);
    GbmTree tree;
    auto add_node = [&tree] {
      tree.feature.push_back(-1);
      tree.bin.push_back(0);
      tree.threshold.push_back(0.0);
      tree.left.push_back(-1);
      tree.right.push_back(-1);
      tree.value.push_back(0.0);
      return static_cast<int>(tree.feature.size() - 1);
    };
    std::vector<Leaf> leaves;
    {
      Leaf root{0, rows_.size(), add_node(), build_hist(0, rows_.size()), {}};
      root.best = find_split(root.hist);
      leaves.push_back(std::move(root));
    }
    while (leaves.size() < p_.num_leaves) {
      std::size_t pick = leaves.size();
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        if (!leaves[i].best.found || !(leaves[i].best.gain > 0.0)) continue;
        if (pick == leaves.size() || leaves[i].best.gain > leaves[pick].best.gain) pick = i;
      }
      if (pick == leaves.size()) break;

      Leaf parent = std::move(leaves[pick]);
      leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(pick));
      const auto& s = parent.best;
      const auto& col = B_.bins[s.feature];
      auto mid_it = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(parent.begin),
                                          rows_.begin() + static_cast<std::ptrdiff_t>(parent.end),
                                          [&](std::size_t r) { return col[r] <= s.bin; });
      const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());

      if (hooks_.on_split) {
        GbmSplitEvent ev{iteration_, leaves.size() + 1, s.gain, -std::numeric_limits<double>::infinity(),
                         mid - parent.begin, parent.end - mid};
        for (const auto& l : leaves)
          if (l.best.found) ev.best_other_gain = std::max(ev.best_other_gain, l.best.gain);
        hooks_.on_split(ev);
      }

      const auto u = static_cast<std::size_t>(parent.node);
      tree.feature[u] = static_cast<int>(s.feature);
      tree.bin[u] = s.bin;
      tree.threshold[u] = B_.edges[s.feature][s.bin];
      const int ln = add_node();
      const int rn = add_node();
      tree.left[u] = ln;
      tree.right[u] = rn;

      Leaf left{parent.begin, mid, ln, {}, {}};
      Leaf right{mid, parent.end, rn, {}, {}};
      // Histogram the smaller child, derive the larger one by subtraction.
      Leaf& small = (mid - parent.begin) <= (parent.end - mid) ? left : right;
      Leaf& large = (&small == &left) ? right : left;
      small.hist = build_hist(small.begin, small.end);
      large.hist = std::move(parent.hist);
      for (std::size_t i = 0; i < large.hist.size(); ++i) {
        large.hist[i].g -= small.hist[i].g;
        large.hist[i].h -= small.hist[i].h;
        large.hist[i].count -= small.hist[i].count;
      }
      left.best = find_split(left.hist);
      right.best = find_split(right.hist);
      leaves.push_back(std::move(left));
      leaves.push_back(std::move(right));
    }

    std::vector<double> residuals;
    for (const auto& leaf : leaves) {
      double out = 0.0;
      if (p_.objective == GbmObjective::mae) {
        residuals.clear();
        for (std::size_t i = leaf.begin; i < leaf.end; ++i) residuals.push_back(y_[rows_[i]] - pred_[rows_[i]]);
        out = stats::median_inplace(residuals);
      } else {
        double g = 0.0, h = 0.0;
        for (std::size_t i = leaf.begin; i < leaf.end; ++i) {
          g += grad_[rows_[i]];
          h += hess_[rows_[i]];
        }
        out = -g / (h + p_.lambda);
      }
      tree.value[static_cast<std::size_t>(leaf.node)] = p_.learning_rate * out;
    }
    return tree;
  }

  const BinnedMatrix& B_;
  std::span<const double> y_;
  const GbmParams& p_;
  const GbmHooks& hooks_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> active_;
  std::vector<std::size_t> rows_;
  std::vector<double> pred_, grad_, hess_;
  std::size_t iteration_ = 0;
};

}  // namespace detail

/// Exhaustive best root split for the gradient-boosting gain over raw
/// values (midpoints between consecutive distinct values). Used as an
/// oracle for the histogram search.
inline GbmSplit exhaustive_gbm_root_split(const DesignMatrix& X, std::span<const double> grad,
                                          std::span<const double> hess, std::size_t min_leaf, double lambda,
                                          double* threshold_out = nullptr) {
  GbmSplit best;
  double best_threshold = 0.0;
  for (std::size_t f = 0; f < X.cols(); ++f) {
    std::vector<double> values(X.columns[f]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      const double t = stats::split_point(values[i], values[i + 1]);
      double gl = 0, hl = 0, gr = 0, hr = 0;
      std::size_t nl = 0, nr = 0;
      for (std::size_t r = 0; r < X.rows; ++r) {
        if (X.columns[f][r] <= t) {
          gl += grad[r];
          hl += hess[r];
          ++nl;
        } else {
          gr += grad[r];
          hr += hess[r];
          ++nr;
        }
      }
      if (nl < min_leaf || nr < min_leaf) continue;
      const double gain = gbm_split_gain(gl, hl, gr, hr, lambda);
      if (!best.found || gain > best.gain) {
        best = {true, f, static_cast<std::uint16_t>(i), gain};
        best_threshold = t;
      }
    }
  }
  if (threshold_out) *threshold_out = best_threshold;
  return best;
}

/// Leaf-wise gradient boosting over histogram-binned features.
inline GbmModel fit_gbm(const DesignMatrix& X, std::span<const double> y, const GbmParams& params,
                        const GbmHooks& hooks = {}) {
  if (!params.n_iterations) throw DomainError("gbm n_iterations must be set");
  if (params.num_leaves < 2) throw DomainError("num_leaves must be at least 2");
  if (!(params.learning_rate > 0.0)) throw DomainError("learning_rate must be positive");
  if (!(params.bagging_fraction > 0.0 && params.bagging_fraction <= 1.0))
    throw DomainError("bagging_fraction must be in (0, 1]");
  if (!(params.feature_fraction > 0.0 && params.feature_fraction <= 1.0))
    throw DomainError("feature_fraction must be in (0, 1]");
  if (params.min_leaf < 1) throw DomainError("min_leaf must be at least 1");
  if (params.metric != "mae" && params.metric != "rmse") throw DomainError("metric must be 'mae' or 'rmse'");
  if (y.size() != X.rows) throw DomainError("X and y row counts differ");
  if (X.rows < 2 * params.min_leaf) throw DomainError("gbm needs at least 2 * min_leaf rows");
  if (X.cols() == 0) throw DomainError("gbm needs at least one feature");
  for (double v : y)
    if (!std::isfinite(v)) throw DomainError("non-finite target value");
  const auto B = bin_features(X, params.max_bins);
  return detail::GbmTrainer(B, y, params, hooks).train();
}

}  // namespace pubgml
