#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include <pubgml/eval.hpp>
#include <pubgml/m5p.hpp>
#include <pubgml/stats.hpp>

#include "test_util.hpp"

using namespace pubgml;
using testutil::matrix;
using testutil::one_column;

namespace {

/// Direct SDR of splitting `rows` of feature f at threshold t.
double direct_sdr(const DesignMatrix& X, const std::vector<double>& y, std::size_t f, double t) {
  std::vector<double> l, r;
  for (std::size_t i = 0; i < X.rows; ++i) (X.columns[f][i] <= t ? l : r).push_back(y[i]);
  const double n = static_cast<double>(y.size());
  return stats::population_sd(y) - l.size() / n * stats::population_sd(l) - r.size() / n * stats::population_sd(r);
}

struct Piecewise {
  DesignMatrix X;
  std::vector<double> y;
};

Piecewise piecewise() {
  std::vector<double> x, y;
  for (int i = 0; i < 200; ++i) {
    x.push_back(-3.0 * (i + 0.5) / 200.0);
    y.push_back(x.back());
  }
  for (int i = 0; i < 200; ++i) {
    x.push_back((i + 0.5) / 200.0);
    y.push_back(3.0 * x.back());
  }
  return {one_column(x), y};
}

}  // namespace

TEST(FitLinear, ExactLine) {
  std::vector<double> x, y;
  for (int i = 0; i < 20; ++i) {
    x.push_back(i * 0.3 - 2.0);
    y.push_back(2.0 * x.back() + 1.0);
  }
  const auto m = fit_linear(one_column(x), y, {"x0"});
  ASSERT_EQ(m.coefficients.size(), 1u);
  EXPECT_NEAR(m.coefficients[0], 2.0, 1e-9);
  EXPECT_NEAR(m.intercept, 1.0, 1e-9);
}

TEST(FitLinear, NoAttributesIsMean) {
  const auto m = fit_linear(one_column({5, 6, 7}), std::vector<double>{1, 2, 3}, {});
  EXPECT_TRUE(m.coefficients.empty());
  EXPECT_DOUBLE_EQ(m.intercept, 2.0);
}

TEST(FitLinear, DuplicatedColumnFallsBackToRidge) {
  std::vector<double> x;
  for (int i = 0; i < 30; ++i) x.push_back(i * 0.1);
  const auto X = DesignMatrix({"a", "b"}, {x, x});
  const auto m = fit_linear(X, x, {"a", "b"});
  for (double c : m.coefficients) EXPECT_TRUE(std::isfinite(c));
  for (std::size_t r = 0; r < x.size(); ++r) EXPECT_NEAR(m.predict(X.row(r)), x[r], 1e-6);
}

TEST(FitLinear, EmptyInputIsDomainError) {
  EXPECT_THROW(fit_linear(one_column({}), std::vector<double>{}, {}), DomainError);
}

TEST(SdrSplit, StepFunctionExample) {
  const auto X = one_column({1, 2, 3, 4, 5, 6});
  const std::vector<double> y{0, 0, 0, 10, 10, 10};
  std::vector<std::size_t> rows(6);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto s = detail::best_sdr_split(X, y, rows, 3);
  ASSERT_TRUE(s.found);
  EXPECT_GT(s.threshold, 3.0);
  EXPECT_LT(s.threshold, 4.0);
  EXPECT_DOUBLE_EQ(s.sdr, 5.0);
}

TEST(SdrSplit, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 2 + rng() % 199, cols = 1 + rng() % 5;
    auto d = testutil::random_data(rng, rows, cols, 2 + static_cast<int>(rng() % 30));
    std::vector<std::size_t> idx(rows);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto s = detail::best_sdr_split(d.X, d.y, idx, 1);
    double best = -1.0;
    bool any = false;
    for (std::size_t f = 0; f < cols; ++f) {
      std::vector<double> v = d.X.columns[f];
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        best = std::max(best, direct_sdr(d.X, d.y, f, (v[i] + v[i + 1]) / 2));
        any = true;
      }
    }
    ASSERT_EQ(s.found, any);
    if (!any) continue;
    EXPECT_NEAR(s.sdr, best, 1e-9);
    EXPECT_NEAR(direct_sdr(d.X, d.y, s.feature, s.threshold), best, 1e-9);
  }
}

TEST(FitM5p, ConstantTargetIsSingleLeaf) {
  const auto t = fit_m5p(one_column({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), std::vector<double>(10, 0.7));
  EXPECT_EQ(t.leaf_count(), 1u);
  for (double x : {-100.0, 3.0, 1e6}) EXPECT_DOUBLE_EQ(t.predict(std::vector<double>{x}), 0.7);
}

TEST(FitM5p, TooFewRowsIsSingleLeaf) {
  const auto t = fit_m5p(one_column({1, 2, 3, 4, 5, 6, 7}), std::vector<double>{0, 0, 0, 9, 9, 9, 9});
  EXPECT_EQ(t.leaf_count(), 1u);
}

TEST(FitM5p, NonFiniteFeatureIsDomainError) {
  EXPECT_THROW(fit_m5p(one_column({1, NAN, 3, 4, 5, 6, 7, 8}), std::vector<double>(8, 1.0)), DomainError);
}

TEST(FitM5p, RecoversPiecewiseLinearFunction) {
  const auto d = piecewise();
  M5pParams p;
  p.smoothing = false;
  const auto t = fit_m5p(d.X, d.y, p);
  EXPECT_EQ(t.leaf_count(), 2u);
  EXPECT_LT(mae(t.predict(d.X), d.y), 1e-6);
  EXPECT_NEAR(t.predict(std::vector<double>{-1.0}), -1.0, 1e-6);
}

TEST(FitM5p, LeavesHoldAtLeastMinLeafRows) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    auto d = testutil::random_data(rng, 300, 3, 20);
    M5pParams p;
    p.min_leaf = 6;
    p.pruning = trial % 2 == 0;
    const auto t = fit_m5p(d.X, d.y, p);
    std::vector<std::size_t> reach(t.nodes.size(), 0);
    for (std::size_t r = 0; r < d.X.rows; ++r) ++reach[t.route(d.X.row(r))];
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      if (!t.nodes[i].is_leaf()) {
        EXPECT_TRUE(std::isfinite(t.nodes[i].threshold));
        continue;
      }
      EXPECT_GE(t.nodes[i].count, p.min_leaf);
      EXPECT_EQ(reach[i], t.nodes[i].count);
    }
  }
}

TEST(PredictM5p, ConstantTree) {
  ModelTree t;
  t.features = {"x"};
  t.nodes.resize(1);
  t.nodes[0].model.intercept = 0.5;
  t.nodes[0].count = 10;
  for (double x : {-1.0, 0.0, 42.0}) EXPECT_EQ(t.predict(std::vector<double>{x}), 0.5);
}

TEST(PredictM5p, SmoothingIsIdentityWhenModelsAgree) {
  ModelTree t;
  t.features = {"x"};
  t.nodes.resize(3);
  t.nodes[0] = {0, 0.0, 1, 2, -1, 20, {}};
  t.nodes[1].parent = t.nodes[2].parent = 0;
  t.nodes[1].count = t.nodes[2].count = 10;
  for (auto& n : t.nodes) n.model = LinearModel{{"x"}, {0}, {2.0}, 1.0};
  t.params.smoothing = true;
  const double on = t.predict(std::vector<double>{0.37});
  t.params.smoothing = false;
  EXPECT_DOUBLE_EQ(on, t.predict(std::vector<double>{0.37}));
  // Disagreeing ancestor: smoothing now changes the answer.
  t.nodes[0].model.intercept = 5.0;
  const double off = t.predict(std::vector<double>{0.37});
  t.params.smoothing = true;
  EXPECT_NE(off, t.predict(std::vector<double>{0.37}));
  EXPECT_DOUBLE_EQ(t.predict(std::vector<double>{0.37}), (10 * off + 15 * (off + 4.0)) / 25);
}

TEST(PredictM5p, SmoothedPredictionIsConvexCombinationOfPathModels) {
  std::mt19937_64 rng(4);
  auto d = testutil::random_data(rng, 400, 3, 25);
  M5pParams p;
  p.pruning = false;
  const auto t = fit_m5p(d.X, d.y, p);
  for (std::size_t r = 0; r < d.X.rows; ++r) {
    const auto row = d.X.row(r);
    double lo = INFINITY, hi = -INFINITY;
    for (int i = static_cast<int>(t.route(row)); i >= 0; i = t.nodes[static_cast<std::size_t>(i)].parent) {
      const double v = t.nodes[static_cast<std::size_t>(i)].model.predict(row);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double pr = t.predict(row);
    EXPECT_GE(pr, lo - 1e-9);
    EXPECT_LE(pr, hi + 1e-9);
    EXPECT_EQ(pr, t.predict(row));
  }
}

TEST(PredictM5p, MissingFeatureIsSchemaError) {
  const auto d = piecewise();
  const auto t = fit_m5p(d.X, d.y);
  EXPECT_THROW(t.predict(DesignMatrix({"other"}, {{1.0}})), SchemaError);
}

TEST(FitM5p, JsonRoundTripPreservesPredictions) {
  std::mt19937_64 rng(5);
  auto d = testutil::random_data(rng, 300, 4, 15);
  const auto t = fit_m5p(d.X, d.y);
  const auto back = ModelTree::from_json(t.to_json());
  EXPECT_EQ(back.to_json(), t.to_json());
  EXPECT_EQ(back.predict(d.X), t.predict(d.X));
  EXPECT_FALSE(t.dump().empty());
}

TEST(FitM5p, PruningHelpsOnNoisyData) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x1, x2, y;
    for (int i = 0; i < 300; ++i) {
      x1.push_back(u(rng));
      x2.push_back(u(rng));
      y.push_back(2.0 * x1.back() + (x2.back() > 0.5 ? 1.0 : 0.0) + noise(rng));
    }
    const auto X = matrix({x1, x2});
    const auto plan = kfold(300, 10, seed);
    M5pParams pruned, unpruned;
    unpruned.pruning = false;
    const double a = cross_validate(ModelSpec::m5p(pruned), X, y, plan).mean_mae;
    const double b = cross_validate(ModelSpec::m5p(unpruned), X, y, plan).mean_mae;
    wins += a <= b;
  }
  EXPECT_GE(wins, 6);
}
