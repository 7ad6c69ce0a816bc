#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "design.hpp"
#include "error.hpp"
#include "log.hpp"
#include "metrics.hpp"
#include "models.hpp"
#include "parallel.hpp"
#include "table.hpp"

namespace pubgml {

struct FoldResult {
  std::size_t fold = 0;
  bool failed = false;
  std::string error;
  double mae = 0.0;
  double rmse = 0.0;
  double seconds = 0.0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
};

struct EvalReport {
  std::string model;
  std::string feature_set = "all";
  std::vector<FoldResult> folds;
  double mean_mae = 0.0;
  double sd_mae = 0.0;
  double mean_rmse = 0.0;
  double sd_rmse = 0.0;
  std::vector<std::string> notes;

  std::size_t failed_folds() const {
    std::size_t n = 0;
    for (const auto& f : folds) n += f.failed ? 1 : 0;
    return n;
  }

  /// Wall times are written only when `timing` is set so that reports from
  /// identical runs compare byte-for-byte.
  nlohmann::json to_json(bool timing = true) const {
    nlohmann::json fj = nlohmann::json::array();
    for (const auto& f : folds) {
      nlohmann::json e = {{"fold", f.fold}, {"failed", f.failed}, {"train_rows", f.train_rows},
                          {"test_rows", f.test_rows}};
      if (f.failed) {
        e["error"] = f.error;
      } else {
        e["mae"] = f.mae;
        e["rmse"] = f.rmse;
      }
      if (timing) e["seconds"] = f.seconds;
      fj.push_back(e);
    }
    return {{"model", model},         {"feature_set", feature_set}, {"k", folds.size()},
            {"folds", fj},            {"mean_mae", mean_mae},       {"sd_mae", sd_mae},
            {"mean_rmse", mean_rmse}, {"sd_rmse", sd_rmse},         {"notes", notes}};
  }

  static void write_csv_header(std::ostream& out) { out << "model,feature_set,fold,mae,rmse\n"; }

  void write_csv_rows(std::ostream& out) const {
    for (const auto& f : folds) {
      out << model << ',' << feature_set << ',' << f.fold << ',';
      if (!f.failed) out << Table::format_real(f.mae) << ',' << Table::format_real(f.rmse);
      else out << ',';
      out << '\n';
    }
  }
};

namespace detail {

inline void mean_and_sd(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace detail

/// k-fold cross-validation on an already cleaned/engineered/selected design
/// matrix. Folds train in parallel and are reported in fold order.
inline EvalReport cross_validate(const ModelSpec& spec, const DesignMatrix& X, std::span<const double> y,
                                 const FoldPlan& plan, std::string feature_set = "all") {
  if (X.rows != y.size() || plan.size() != y.size())
    throw DomainError("cross_validate: table has " + std::to_string(y.size()) + " rows but the fold plan has " +
                      std::to_string(plan.size()));
  EvalReport report;
  report.model = spec.tag();
  report.feature_set = std::move(feature_set);
  report.folds.resize(plan.k);
  parallel_for(plan.k, [&](std::size_t f) {
    auto& out = report.folds[f];
    out.fold = f;
    const auto train = plan.train_rows(f);
    const auto test = plan.test_rows(f);
    out.train_rows = train.size();
    out.test_rows = test.size();
    const auto start = std::chrono::steady_clock::now();
    try {
      std::vector<double> ytr, yte;
      ytr.reserve(train.size());
      yte.reserve(test.size());
      for (auto r : train) ytr.push_back(y[r]);
      for (auto r : test) yte.push_back(y[r]);
      const auto model = fit_model(spec, X.select_rows(train), ytr);
      const auto pred = predict_model(model, X.select_rows(test));
      out.mae = mae(pred, yte);
      out.rmse = rmse(pred, yte);
    } catch (const Error& e) {
      out.failed = true;
      out.error = e.what();
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });

  std::vector<double> maes, rmses;
  for (const auto& f : report.folds) {
    if (f.failed) {
      log::warn("fold " + std::to_string(f.fold) + " failed: " + f.error);
      continue;
    }
    maes.push_back(f.mae);
    rmses.push_back(f.rmse);
  }
  if (report.failed_folds() * 2 > plan.k)
    throw EvaluationError(std::to_string(report.failed_folds()) + " of " + std::to_string(plan.k) +
                          " folds failed for model " + report.model);
  detail::mean_and_sd(maes, report.mean_mae, report.sd_mae);
  detail::mean_and_sd(rmses, report.mean_rmse, report.sd_rmse);
  report.notes.push_back("mean_mae and mean_rmse are means over the non-failed cross-validation folds");
  if (report.feature_set != "all")
    report.notes.push_back(
        "feature selection was fit once on the full table before cross-validation, so held-out folds "
        "influenced which attributes were kept");
  return report;
}

inline EvalReport cross_validate(const ModelSpec& spec, const Table& table, const FoldPlan& plan,
                                 std::string feature_set = "all") {
  if (table.rows() != plan.size())
    throw DomainError("cross_validate: table has " + std::to_string(table.rows()) + " rows but the fold plan has " +
                      std::to_string(plan.size()));
  const auto X = FeatureEncoder::fit(table).encode(table);
  return cross_validate(spec, X, table.target(), plan, std::move(feature_set));
}

}  // namespace pubgml
