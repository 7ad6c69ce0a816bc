#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "design.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "stats.hpp"

namespace pubgml {

/// Least-squares model over a subset of the features of some design matrix.
/// `columns` index the owning matrix (or model feature list); `attributes`
/// carries the matching names.
struct LinearModel {
  std::vector<std::string> attributes;
  std::vector<std::size_t> columns;
  std::vector<double> coefficients;
  double intercept = 0.0;

  /// `row` is indexed like the matrix the model was fitted on.
  double predict(std::span<const double> row) const {
    double s = intercept;
    for (std::size_t i = 0; i < columns.size(); ++i) s += coefficients[i] * row[columns[i]];
    return s;
  }

  /// Number of fitted parameters, counting the intercept.
  std::size_t terms() const { return coefficients.size() + 1; }

  nlohmann::json to_json() const {
    return {{"attributes", attributes}, {"coefficients", coefficients}, {"intercept", intercept}};
  }
};

namespace detail {

// Centered normal equations; ridge fallback lambda = 1e-8 * trace / k when
// the system is singular.
inline LinearModel fit_linear_rows(const DesignMatrix& X, std::span<const double> y,
                                   std::span<const std::size_t> rows,
                                   std::span<const std::size_t> attrs) {
  if (rows.empty()) throw DomainError("cannot fit a linear model to zero rows");
  const std::size_t k = attrs.size();
  const double n = static_cast<double>(rows.size());
  LinearModel m;
  m.columns.assign(attrs.begin(), attrs.end());
  for (auto a : attrs) m.attributes.push_back(X.names[a]);

  double y_mean = 0.0;
  for (auto r : rows) y_mean += y[r];
  y_mean /= n;
  if (k == 0) {
    m.intercept = y_mean;
    return m;
  }
  std::vector<double> x_mean(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    const auto& col = X.columns[attrs[a]];
    for (auto r : rows) x_mean[a] += col[r];
    x_mean[a] /= n;
  }
  linalg::SymMatrix xtx(k);
  std::vector<double> xty(k, 0.0);
  std::vector<double> centered(k);
  for (auto r : rows) {
    for (std::size_t a = 0; a < k; ++a) centered[a] = X.columns[attrs[a]][r] - x_mean[a];
    const double yc = y[r] - y_mean;
    for (std::size_t a = 0; a < k; ++a) {
      xty[a] += centered[a] * yc;
      for (std::size_t b = 0; b <= a; ++b) xtx(a, b) += centered[a] * centered[b];
    }
  }
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < a; ++b) xtx(b, a) = xtx(a, b);

  std::vector<double> beta(k, 0.0);
  if (auto sol = linalg::cholesky_solve(xtx, xty)) {
    beta = std::move(*sol);
  } else if (const double tr = xtx.trace(); tr > 0.0) {
    auto damped = xtx;
    const double lambda = 1e-8 * tr / static_cast<double>(k);
    for (std::size_t a = 0; a < k; ++a) damped(a, a) += lambda;
    if (auto ridge = linalg::cholesky_solve(damped, xty, 0.0)) beta = std::move(*ridge);
  }
  for (double b : beta)
    if (!std::isfinite(b)) throw TrainingError("linear model coefficients are not finite");
  m.coefficients = std::move(beta);
  m.intercept = y_mean;
  for (std::size_t a = 0; a < k; ++a) m.intercept -= m.coefficients[a] * x_mean[a];
  return m;
}

}  // namespace detail

/// Ordinary least squares of y on the named columns of X plus an intercept.
/// With no attributes the model is the mean of y.
inline LinearModel fit_linear(const DesignMatrix& X, std::span<const double> y,
                              const std::vector<std::string>& attrs) {
  if (y.size() != X.rows) throw DomainError("X and y row counts differ");
  std::vector<std::size_t> rows(X.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  auto idx = X.bind(attrs);
  return detail::fit_linear_rows(X, y, rows, idx);
}

struct M5pParams {
  std::size_t min_leaf = 4;
  double sd_fraction_stop = 0.05;
  bool pruning = true;
  bool smoothing = true;
  double smoothing_constant = 15.0;

  nlohmann::json to_json() const {
    return {{"min_leaf", min_leaf},
            {"sd_fraction_stop", sd_fraction_stop},
            {"pruning", pruning},
            {"smoothing", smoothing},
            {"smoothing_constant", smoothing_constant}};
  }
  static M5pParams from_json(const nlohmann::json& j) {
    M5pParams p;
    p.min_leaf = j.value("min_leaf", p.min_leaf);
    p.sd_fraction_stop = j.value("sd_fraction_stop", p.sd_fraction_stop);
    p.pruning = j.value("pruning", p.pruning);
    p.smoothing = j.value("smoothing", p.smoothing);
    p.smoothing_constant = j.value("smoothing_constant", p.smoothing_constant);
    if (p.min_leaf < 1) throw ConfigError("m5p.min_leaf must be at least 1");
    return p;
  }
};

struct ModelTreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int parent = -1;
  std::size_t count = 0;
  LinearModel model;

  bool is_leaf() const { return feature < 0; }
};

/// Binary model tree: interior nodes split on `x[feature] <= threshold`
/// (left) and every node carries a linear model. Node 0 is the root.
struct ModelTree {
  std::vector<std::string> features;
  std::vector<ModelTreeNode> nodes;
  M5pParams params;

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(),
                                                  [](const ModelTreeNode& n) { return n.is_leaf(); }));
  }

  /// Leaf reached by a row indexed like `features`.
  std::size_t route(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf())
      i = static_cast<std::size_t>(row[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold
                                        ? nodes[i].left
                                        : nodes[i].right);
    return i;
  }

  /// `row` is indexed like `features`.
  double predict(std::span<const double> row) const {
    std::size_t i = route(row);
    double p = nodes[i].model.predict(row);
    if (!params.smoothing) return p;
    const double k = params.smoothing_constant;
    while (nodes[i].parent >= 0) {
      const double n = static_cast<double>(nodes[i].count);
      i = static_cast<std::size_t>(nodes[i].parent);
      p = (n * p + k * nodes[i].model.predict(row)) / (n + k);
    }
    return p;
  }

  /// Binds features by name; a missing feature is a SchemaError.
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
    nlohmann::json ns = nlohmann::json::array();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      nlohmann::json j = {{"id", i}, {"parent", n.parent}, {"count", n.count}, {"model", n.model.to_json()}};
      if (!n.is_leaf()) {
        j["feature"] = features[static_cast<std::size_t>(n.feature)];
        j["threshold"] = n.threshold;
        j["left"] = n.left;
        j["right"] = n.right;
      }
      ns.push_back(std::move(j));
    }
    return {{"format", "pubgml.m5p"}, {"version", 1}, {"features", features},
            {"params", params.to_json()}, {"nodes", ns}};
  }

  static ModelTree from_json(const nlohmann::json& j) {
    if (j.at("format") != "pubgml.m5p" || j.at("version") != 1)
      throw ParseError("not a version-1 M5P model document");
    ModelTree t;
    t.features = j.at("features").get<std::vector<std::string>>();
    t.params = M5pParams::from_json(j.at("params"));
    auto index_of = [&](const std::string& name) {
      auto it = std::find(t.features.begin(), t.features.end(), name);
      if (it == t.features.end()) throw ParseError("model references unknown feature '" + name + "'");
      return static_cast<std::size_t>(it - t.features.begin());
    };
    for (const auto& jn : j.at("nodes")) {
      ModelTreeNode n;
      n.parent = jn.at("parent").get<int>();
      n.count = jn.at("count").get<std::size_t>();
      const auto& jm = jn.at("model");
      n.model.attributes = jm.at("attributes").get<std::vector<std::string>>();
      n.model.coefficients = jm.at("coefficients").get<std::vector<double>>();
      n.model.intercept = jm.at("intercept").get<double>();
      for (const auto& a : n.model.attributes) n.model.columns.push_back(index_of(a));
      if (jn.contains("feature")) {
        n.feature = static_cast<int>(index_of(jn.at("feature").get<std::string>()));
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
      }
      t.nodes.push_back(std::move(n));
    }
    return t;
  }

  /// Indented if/else rendering with the linear model at each leaf.
  std::string dump() const {
    std::ostringstream os;
    dump_node(os, 0, 0);
    return os.str();
  }

 private:
  static std::string format_model(const LinearModel& m) {
    std::ostringstream os;
    os.precision(6);
    os << m.intercept;
    for (std::size_t i = 0; i < m.coefficients.size(); ++i)
      os << (m.coefficients[i] < 0 ? " - " : " + ") << std::abs(m.coefficients[i]) << "*" << m.attributes[i];
    return os.str();
  }

  void dump_node(std::ostream& os, std::size_t i, int depth) const {
    const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
    const auto& n = nodes[i];
    if (n.is_leaf()) {
      os << pad << "y = " << format_model(n.model) << "  [n=" << n.count << "]\n";
      return;
    }
    const auto& name = features[static_cast<std::size_t>(n.feature)];
    os << pad << "if " << name << " <= " << n.threshold << ":\n";
    dump_node(os, static_cast<std::size_t>(n.left), depth + 1);
    os << pad << "else:  # " << name << " > " << n.threshold << "\n";
    dump_node(os, static_cast<std::size_t>(n.right), depth + 1);
  }
};

/// Best standard-deviation-reduction split of `rows`.
struct SdrSplit {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double sdr = 0.0;
};

namespace detail {

/// Scans every feature; candidates are midpoints between consecutive
/// distinct sorted values with at least `min_leaf` rows on each side.
/// Ties keep the earliest feature, then the smallest threshold.
inline SdrSplit best_sdr_split(const DesignMatrix& X, std::span<const double> y,
                               std::span<const std::size_t> rows, std::size_t min_leaf) {
  const std::size_t n = rows.size();
  SdrSplit best;
  if (n < 2) return best;
  double mean = 0.0;
  for (auto r : rows) mean += y[r];
  mean /= static_cast<double>(n);
  double total = 0.0, total_sq = 0.0;
  for (auto r : rows) {
    const double d = y[r] - mean;
    total += d;
    total_sq += d * d;
  }
  const double nd = static_cast<double>(n);
  const double sd = stats::sd_from_sums(total, total_sq, nd);

  std::vector<std::size_t> order(rows.begin(), rows.end());
  for (std::size_t f = 0; f < X.cols(); ++f) {
    const auto& col = X.columns[f];
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return col[a] < col[b] || (col[a] == col[b] && a < b);
    });
    double left = 0.0, left_sq = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      const double d = y[order[i - 1]] - mean;
      left += d;
      left_sq += d * d;
      if (i < min_leaf || n - i < min_leaf) continue;
      const double lo = col[order[i - 1]], hi = col[order[i]];
      if (!(lo < hi)) continue;
      const double li = static_cast<double>(i);
      const double sdr = sd - (li / nd) * stats::sd_from_sums(left, left_sq, li) -
                         ((nd - li) / nd) * stats::sd_from_sums(total - left, total_sq - left_sq, nd - li);
      if (!best.found || sdr > best.sdr) {
        best = {true, f, stats::split_point(lo, hi), sdr};
      }
    }
  }
  return best;
}

class M5pBuilder {
 public:
  M5pBuilder(const DesignMatrix& X, std::span<const double> y, const M5pParams& params)
      : X_(X), y_(y), params_(params) {}

  ModelTree build() {
    std::vector<std::size_t> rows(X_.rows);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    root_sd_ = sd_of(rows);

    grow(std::move(rows), -1);
    fit_models(0);
    if (params_.pruning) prune(0);

    ModelTree tree;
    tree.features = X_.names;
    tree.params = params_;
    compact(0, -1, tree.nodes);
    return tree;
  }

 private:
  struct Work {
    ModelTreeNode node;
    std::vector<std::size_t> rows;
    std::vector<std::size_t> subtree_attrs;
    double error = 0.0;  // complexity-adjusted error of the subtree as pruned
  };

  double sd_of(std::span<const std::size_t> rows) const {
    std::vector<double> v;
    v.reserve(rows.size());
    for (auto r : rows) v.push_back(y_[r]);
    return v.empty() ? 0.0 : stats::population_sd(v);
  }

  int grow(std::vector<std::size_t> rows, int parent) {
    const int id = static_cast<int>(work_.size());
    work_.push_back({});
    work_[static_cast<std::size_t>(id)].node.parent = parent;
    work_[static_cast<std::size_t>(id)].node.count = rows.size();

    const double sd = sd_of(rows);
    const bool stop = rows.size() < 2 * params_.min_leaf || sd <= 0.0 ||
                      sd < params_.sd_fraction_stop * root_sd_;
    SdrSplit split;
    if (!stop) split = best_sdr_split(X_, y_, rows, params_.min_leaf);
    if (!split.found || !(split.sdr > 0.0)) {
      work_[static_cast<std::size_t>(id)].rows = std::move(rows);
      return id;
    }
    std::vector<std::size_t> left, right;
    for (auto r : rows) (X_.columns[split.feature][r] <= split.threshold ? left : right).push_back(r);
    work_[static_cast<std::size_t>(id)].rows = std::move(rows);
    work_[static_cast<std::size_t>(id)].node.feature = static_cast<int>(split.feature);
    work_[static_cast<std::size_t>(id)].node.threshold = split.threshold;
    const int l = grow(std::move(left), id);
    const int r = grow(std::move(right), id);
    work_[static_cast<std::size_t>(id)].node.left = l;
    work_[static_cast<std::size_t>(id)].node.right = r;
    return id;
  }

  // Each node's model uses the attributes tested anywhere in its subtree.
  void fit_models(int id) {
    auto& w = work_[static_cast<std::size_t>(id)];
    if (!w.node.is_leaf()) {
      fit_models(w.node.left);
      fit_models(w.node.right);
      auto& ww = work_[static_cast<std::size_t>(id)];
      std::vector<std::size_t> attrs = work_[static_cast<std::size_t>(ww.node.left)].subtree_attrs;
      const auto& ra = work_[static_cast<std::size_t>(ww.node.right)].subtree_attrs;
      attrs.insert(attrs.end(), ra.begin(), ra.end());
      attrs.push_back(static_cast<std::size_t>(ww.node.feature));
      std::sort(attrs.begin(), attrs.end());
      attrs.erase(std::unique(attrs.begin(), attrs.end()), attrs.end());
      ww.subtree_attrs = std::move(attrs);
    }
    auto& ww = work_[static_cast<std::size_t>(id)];
    ww.node.model = fit_linear_rows(X_, y_, ww.rows, ww.subtree_attrs);
    ww.error = adjusted_error(ww);
  }

  double adjusted_error(const Work& w) const {
    const double n = static_cast<double>(w.rows.size());
    const double v = static_cast<double>(w.node.model.terms());
    double abs_err = 0.0;
    std::vector<double> row(X_.cols());
    for (auto r : w.rows) {
      for (std::size_t c = 0; c < X_.cols(); ++c) row[c] = X_.columns[c][r];
      abs_err += std::abs(y_[r] - w.node.model.predict(row));
    }
    abs_err /= n;
    if (n <= v) return abs_err == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return abs_err * (n + v) / (n - v);
  }

  // Bottom-up: a subtree collapses to its node model when the node's
  // adjusted error does not exceed the count-weighted error of its children.
  double prune(int id) {
    auto& w = work_[static_cast<std::size_t>(id)];
    if (w.node.is_leaf()) return w.error;
    const int l = w.node.left, r = w.node.right;
    const double el = prune(l), er = prune(r);
    auto& ww = work_[static_cast<std::size_t>(id)];
    const double nl = static_cast<double>(work_[static_cast<std::size_t>(l)].rows.size());
    const double nr = static_cast<double>(work_[static_cast<std::size_t>(r)].rows.size());
    const double subtree = (nl * el + nr * er) / (nl + nr);
    // Differences at rounding-noise level count as ties.
    if (ww.error <= subtree + 1e-9 * root_sd_) {
      ww.node.feature = -1;
      ww.node.left = ww.node.right = -1;
      return ww.error;
    }
    ww.error = subtree;
    return subtree;
  }

  int compact(int id, int parent, std::vector<ModelTreeNode>& out) {
    const int nid = static_cast<int>(out.size());
    out.push_back(work_[static_cast<std::size_t>(id)].node);
    out.back().parent = parent;
    if (!out.back().is_leaf()) {
      const int l = compact(work_[static_cast<std::size_t>(id)].node.left, nid, out);
      const int r = compact(work_[static_cast<std::size_t>(id)].node.right, nid, out);
      out[static_cast<std::size_t>(nid)].left = l;
      out[static_cast<std::size_t>(nid)].right = r;
    }
    return nid;
  }

  const DesignMatrix& X_;
  std::span<const double> y_;
  M5pParams params_;
  double root_sd_ = 0.0;
  std::vector<Work> work_;
};

}  // namespace detail

/// Grows an M5 model tree: SDR splits, linear models at every node over the
/// attributes tested in the node's subtree, optional pessimistic pruning.
/// Fewer than 2*min_leaf rows yields a single-leaf tree.
inline ModelTree fit_m5p(const DesignMatrix& X, std::span<const double> y, const M5pParams& params = {}) {
  if (y.size() != X.rows) throw DomainError("X and y row counts differ");
  if (X.rows == 0) throw DomainError("cannot fit a model tree to zero rows");
  if (params.min_leaf < 1) throw DomainError("min_leaf must be at least 1");
  X.require_finite();
  for (double v : y)
    if (!std::isfinite(v)) throw DomainError("non-finite target value");
  return detail::M5pBuilder(X, y, params).build();
}

}  // namespace pubgml
