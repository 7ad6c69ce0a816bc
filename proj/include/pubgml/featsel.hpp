#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "design.hpp"
#include "error.hpp"
#include "log.hpp"
#include "m5p.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "table.hpp"

namespace pubgml {

struct AttributeScore {
  std::string name;
  double score = 0.0;
  std::size_t rank = 0;  // 1 = best
};

struct SelectionResult {
  std::string method;
  double threshold = 0.0;
  std::vector<AttributeScore> scores;  // ordered by rank
  std::vector<std::string> kept;

  nlohmann::json to_json() const {
    nlohmann::json s = nlohmann::json::array();
    for (const auto& a : scores) s.push_back({{"name", a.name}, {"score", a.score}, {"rank", a.rank}});
    return {{"method", method}, {"threshold", threshold}, {"scores", s}, {"kept", kept}};
  }

  static SelectionResult from_json(const nlohmann::json& j) {
    SelectionResult r;
    r.method = j.at("method").get<std::string>();
    r.threshold = j.at("threshold").get<double>();
    for (const auto& a : j.at("scores"))
      r.scores.push_back({a.at("name").get<std::string>(), a.at("score").get<double>(), a.at("rank").get<std::size_t>()});
    r.kept = j.at("kept").get<std::vector<std::string>>();
    return r;
  }

  /// Ranked listing: score, rank, attribute name.
  std::string to_text() const {
    std::ostringstream os;
    os << "Ranked attributes (" << method << "):\n";
    for (const auto& a : scores) {
      const bool keep = std::find(kept.begin(), kept.end(), a.name) != kept.end();
      os << std::setw(10) << std::fixed << std::setprecision(5) << a.score << std::setw(5) << a.rank << "  "
         << a.name << (keep ? "" : "  (dropped)") << '\n';
    }
    os << "Selected " << kept.size() << " of " << scores.size() << " attributes\n";
    return os.str();
  }
};

/// Sample Pearson correlation; 0 when either input has zero variance.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("pearson: length mismatch");
  if (x.size() < 2) throw DomainError("pearson: need at least two values");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace detail {

/// Sorts (name, score) descending; equal scores keep input (schema) order.
inline SelectionResult ranked(std::string method, double threshold,
                              std::vector<std::pair<std::string, double>> scored) {
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  SelectionResult out{std::move(method), threshold, {}, {}};
  for (std::size_t i = 0; i < scored.size(); ++i) {
    out.scores.push_back({scored[i].first, scored[i].second, i + 1});
    if (scored[i].second >= threshold) out.kept.push_back(scored[i].first);
  }
  return out;
}

inline DesignMatrix candidate_matrix(const Table& table, const std::string& target) {
  if (!table.has(target))
    throw SchemaError("missing column '" + target + "'");
  std::vector<std::string> names;
  for (const auto& c : table.schema().columns())
    if (c.name != target && c.name != table.schema().target() && c.kind != ColumnKind::identifier)
      names.push_back(c.name);
  return FeatureEncoder::fit(table, names).encode(table);
}

inline double entropy_bits(std::span<const std::size_t> counts, std::size_t total) {
  if (total == 0) return 0.0;
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

}  // namespace detail

/// |pearson(attribute, target)| for every non-target, non-identifier column.
inline SelectionResult rank_by_correlation(const Table& table, const std::string& target, double threshold = 0.0) {
  const auto X = detail::candidate_matrix(table, target);
  const auto y = table.numeric(target);
  std::vector<std::pair<std::string, double>> scored(X.cols());
  parallel_for(X.cols(), [&](std::size_t j) { scored[j] = {X.names[j], std::abs(pearson(X.columns[j], y))}; });
  return detail::ranked("correlation", threshold, std::move(scored));
}

/// Equal-frequency discretization of y into `bins` classes. Boundaries sit at
/// sorted positions floor(b*n/bins); tied values always share a class.
inline std::vector<std::uint32_t> equal_frequency_classes(std::span<const double> y, std::size_t bins) {
  if (bins < 2) throw DomainError("target_bins must be at least 2");
  std::vector<double> sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end());
  const auto distinct = static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
  if (distinct < bins) throw DomainError("fewer distinct target values than target_bins");
  sorted.assign(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> bounds;
  for (std::size_t b = 1; b < bins; ++b) bounds.push_back(sorted[b * sorted.size() / bins]);
  std::vector<std::uint32_t> cls(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    cls[i] = static_cast<std::uint32_t>(std::upper_bound(bounds.begin(), bounds.end(), y[i]) - bounds.begin());
  return cls;
}

/// Best binary-cut information gain (bits) of `attr` for class labels.
/// Only boundary points are considered: cuts between adjacent attribute
/// values unless both neighbouring value groups are pure in the same class.
inline double information_gain(std::span<const double> attr, std::span<const std::uint32_t> cls) {
  if (attr.size() != cls.size()) throw DomainError("information_gain: length mismatch");
  const std::size_t n = attr.size();
  if (n == 0) return 0.0;
  const std::size_t k = *std::max_element(cls.begin(), cls.end()) + 1;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return attr[a] < attr[b]; });

  std::vector<std::size_t> total(k, 0), left(k, 0);
  for (auto c : cls) ++total[c];
  const double h_all = detail::entropy_bits(total, n);

  // Group rows by equal attribute value; remember each group's class if pure.
  constexpr std::uint32_t kMixed = 0xFFFFFFFFu;
  double best = 0.0;
  std::size_t i = 0;
  std::uint32_t prev_pure = kMixed;
  std::vector<std::size_t> right(k);
  while (i < n) {
    std::size_t j = i;
    std::uint32_t pure = cls[order[i]];
    while (j < n && attr[order[j]] == attr[order[i]]) {
      if (cls[order[j]] != pure) pure = kMixed;
      ++left[cls[order[j]]];
      ++j;
    }
    if (j < n) {
      // Look ahead to the next group's purity to apply the boundary rule.
      std::size_t t = j;
      std::uint32_t next_pure = cls[order[j]];
      while (t < n && attr[order[t]] == attr[order[j]]) {
        if (cls[order[t]] != next_pure) next_pure = kMixed;
        ++t;
      }
      const bool boundary = !(pure != kMixed && pure == next_pure);
      if (boundary) {
        for (std::size_t c = 0; c < k; ++c) right[c] = total[c] - left[c];
        const double nl = static_cast<double>(j), nr = static_cast<double>(n - j);
        const double cond = (nl * detail::entropy_bits(left, j) + nr * detail::entropy_bits(right, n - j)) /
                            static_cast<double>(n);
        best = std::max(best, h_all - cond);
      }
    }
    prev_pure = pure;
    i = j;
  }
  (void)prev_pure;
  return best;
}

inline SelectionResult info_gain_rank(const Table& table, const std::string& target, std::size_t target_bins = 10,
                                      double threshold = 0.0) {
  const auto X = detail::candidate_matrix(table, target);
  const auto cls = equal_frequency_classes(table.numeric(target), target_bins);
  std::vector<std::pair<std::string, double>> scored(X.cols());
  parallel_for(X.cols(), [&](std::size_t j) { scored[j] = {X.names[j], information_gain(X.columns[j], cls)}; });
  return detail::ranked("info_gain", threshold, std::move(scored));
}

/// k * mean(r_cf) / sqrt(k + k(k-1) * mean(r_ff)) for the subset `subset`
/// given |feature-target| correlations and the |feature-feature| matrix.
inline double cfs_merit(std::span<const std::size_t> subset, std::span<const double> r_cf,
                        const std::vector<std::vector<double>>& r_ff) {
  const std::size_t k = subset.size();
  if (k == 0) return 0.0;
  double cf = 0.0;
  for (auto i : subset) cf += r_cf[i];
  cf /= static_cast<double>(k);
  double ff = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      ff += r_ff[subset[a]][subset[b]];
      ++pairs;
    }
  if (pairs > 0) ff /= static_cast<double>(pairs);
  const double kd = static_cast<double>(k);
  return kd * cf / std::sqrt(kd + kd * (kd - 1.0) * ff);
}

/// Greedy forward correlation-based subset selection on Pearson
/// correlations. Selected attributes are scored with the subset merit
/// reached when each was added; the rest with their single-attribute merit
/// |r|, which never exceeds a selected attribute's score.
inline SelectionResult cfs_select(const Table& table, const std::string& target) {
  const auto X = detail::candidate_matrix(table, target);
  if (X.cols() == 0) throw DomainError("cfs_select needs at least one candidate attribute");
  const auto y = table.numeric(target);
  const std::size_t m = X.cols();
  std::vector<double> r_cf(m);
  std::vector<std::vector<double>> r_ff(m, std::vector<double>(m, 1.0));
  parallel_for(m, [&](std::size_t i) {
    r_cf[i] = std::abs(pearson(X.columns[i], y));
    for (std::size_t j = i + 1; j < m; ++j) r_ff[i][j] = std::abs(pearson(X.columns[i], X.columns[j]));
  });
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < i; ++j) r_ff[i][j] = r_ff[j][i];

  std::vector<std::size_t> chosen;
  std::vector<bool> used(m, false);
  std::vector<double> step_merit(m, 0.0);
  double current = 0.0;
  constexpr double kMinImprovement = 1e-12;
  while (chosen.size() < m) {
    std::size_t best = m;
    double best_merit = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (used[i]) continue;
      chosen.push_back(i);
      const double merit = cfs_merit(chosen, r_cf, r_ff);
      chosen.pop_back();
      if (best == m || merit > best_merit) {
        best = i;
        best_merit = merit;
      }
    }
    if (!(best_merit > current + kMinImprovement)) break;
    chosen.push_back(best);
    used[best] = true;
    step_merit[best] = best_merit;
    current = best_merit;
  }

  std::vector<std::pair<std::string, double>> scored;
  for (auto i : chosen) scored.emplace_back(X.names[i], step_merit[i]);
  std::vector<std::pair<std::string, double>> rest;
  for (std::size_t i = 0; i < m; ++i)
    if (!used[i]) rest.emplace_back(X.names[i], r_cf[i]);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::stable_sort(rest.begin(), rest.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  SelectionResult out{"cfs", 0.0, {}, {}};
  for (const auto& [name, s] : scored) {
    out.scores.push_back({name, s, out.scores.size() + 1});
    out.kept.push_back(name);
  }
  for (const auto& [name, s] : rest) out.scores.push_back({name, s, out.scores.size() + 1});
  return out;
}

/// Wrapper evaluation: for each attribute, the mean over `folds` held-out
/// folds of (MAE of predicting the training mean) - (MAE of an M5P tree fit
/// on that attribute alone). Attributes scoring >= threshold are kept.
inline SelectionResult classifier_attribute_eval(const Table& table, const std::string& target,
                                                 std::size_t folds = 5, double threshold = 0.01,
                                                 std::uint64_t seed = 1, const M5pParams& m5p = {}) {
  if (folds < 2) throw DomainError("folds must be at least 2");
  if (table.rows() < folds) throw DomainError("fewer rows than folds");
  const auto X = detail::candidate_matrix(table, target);
  const auto y_span = table.numeric(target);
  const std::vector<double> y(y_span.begin(), y_span.end());
  const auto plan = kfold(table.rows(), folds, seed);
  std::vector<std::vector<std::size_t>> train(folds), test(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    train[f] = plan.train_rows(f);
    test[f] = plan.test_rows(f);
  }

  std::vector<std::pair<std::string, double>> scored(X.cols());
  std::vector<std::string> failures(X.cols());
  parallel_for(X.cols(), [&](std::size_t j) {
    const DesignMatrix single({X.names[j]}, {X.columns[j]});
    double total = 0.0;
    std::size_t ok = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      try {
        const auto Xtr = single.select_rows(train[f]);
        const auto Xte = single.select_rows(test[f]);
        std::vector<double> ytr, yte;
        for (auto r : train[f]) ytr.push_back(y[r]);
        for (auto r : test[f]) yte.push_back(y[r]);
        const double base = stats::mean(ytr);
        const auto tree = fit_m5p(Xtr, ytr, m5p);
        const auto pred = tree.predict(Xte);
        const std::vector<double> base_pred(yte.size(), base);
        total += mae(base_pred, yte) - mae(pred, yte);
        ++ok;
      } catch (const Error& e) {
        log::warn("attribute '" + X.names[j] + "' fold " + std::to_string(f) + " skipped: " + e.what());
      }
    }
    if (ok == 0) failures[j] = X.names[j];
    scored[j] = {X.names[j], ok ? total / static_cast<double>(ok) : 0.0};
  });
  for (const auto& f : failures)
    if (!f.empty()) throw EvaluationError("every fold failed for attribute '" + f + "'");
  return detail::ranked("classifier", threshold, std::move(scored));
}

/// Keeps the selected attributes plus the target, in table order.
inline Table apply_selection(const Table& table, const SelectionResult& result) {
  for (const auto& k : result.kept)
    if (!table.has(k)) throw SchemaError("selected attribute '" + k + "' is not in the table");
  const auto& target = table.schema().target();
  return table.select_columns([&](const ColumnSpec& c) {
    return c.name == target || std::find(result.kept.begin(), result.kept.end(), c.name) != result.kept.end();
  });
}

}  // namespace pubgml
