#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "design.hpp"
#include "error.hpp"
#include "forest.hpp"
#include "gbm.hpp"
#include "m5p.hpp"
#include "mlp.hpp"
#include "stats.hpp"

namespace pubgml {

enum class ModelFamily { baseline, m5p, forest, gbm, mlp };

inline std::string to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::baseline: return "baseline";
    case ModelFamily::m5p: return "m5p";
    case ModelFamily::forest: return "forest";
    case ModelFamily::gbm: return "gbm";
    case ModelFamily::mlp: return "mlp";
  }
  return "baseline";
}

inline ModelFamily parse_model_family(const std::string& s) {
  if (s == "baseline") return ModelFamily::baseline;
  if (s == "m5p") return ModelFamily::m5p;
  if (s == "forest") return ModelFamily::forest;
  if (s == "gbm") return ModelFamily::gbm;
  if (s == "mlp") return ModelFamily::mlp;
  throw ConfigError("unknown model family '" + s + "'");
}

struct BaselineParams {};

/// Predicts the training-target mean for every row.
struct BaselineModel {
  double mean = 0.0;

  std::vector<double> predict(const DesignMatrix& X) const { return std::vector<double>(X.rows, mean); }
  nlohmann::json to_json() const { return {{"format", "pubgml.baseline"}, {"version", 1}, {"mean", mean}}; }
  static BaselineModel from_json(const nlohmann::json& j) { return {j.at("mean").get<double>()}; }
};

using ModelParams = std::variant<BaselineParams, M5pParams, ForestParams, GbmParams, MlpParams>;
using FittedModel = std::variant<BaselineModel, ModelTree, Forest, GbmModel, MlpModel>;

struct ModelSpec {
  ModelFamily family = ModelFamily::baseline;
  ModelParams params = BaselineParams{};

  static ModelSpec baseline() { return {ModelFamily::baseline, BaselineParams{}}; }
  static ModelSpec m5p(M5pParams p = {}) { return {ModelFamily::m5p, p}; }
  static ModelSpec forest(ForestParams p = {}) { return {ModelFamily::forest, p}; }
  static ModelSpec gbm(GbmParams p) { return {ModelFamily::gbm, p}; }
  static ModelSpec mlp(MlpParams p) { return {ModelFamily::mlp, p}; }

  std::string tag() const { return to_string(family); }
};

inline FittedModel fit_model(const ModelSpec& spec, const DesignMatrix& X, std::span<const double> y) {
  switch (spec.family) {
    case ModelFamily::baseline:
      return BaselineModel{stats::mean(y)};
    case ModelFamily::m5p:
      return fit_m5p(X, y, std::get<M5pParams>(spec.params));
    case ModelFamily::forest:
      return fit_forest(X, y, std::get<ForestParams>(spec.params));
    case ModelFamily::gbm:
      return fit_gbm(X, y, std::get<GbmParams>(spec.params));
    case ModelFamily::mlp:
      return fit_mlp(X, y, std::get<MlpParams>(spec.params));
  }
  throw ConfigError("unknown model family");
}

inline std::vector<double> predict_model(const FittedModel& model, const DesignMatrix& X) {
  return std::visit([&](const auto& m) { return m.predict(X); }, model);
}

inline nlohmann::json model_to_json(const FittedModel& model) {
  return std::visit([](const auto& m) { return m.to_json(); }, model);
}

inline FittedModel model_from_json(const nlohmann::json& j) {
  const auto format = j.at("format").get<std::string>();
  if (format == "pubgml.baseline") return BaselineModel::from_json(j);
  if (format == "pubgml.m5p") return ModelTree::from_json(j);
  if (format == "pubgml.forest") return Forest::from_json(j);
  if (format == "pubgml.gbm") return GbmModel::from_json(j);
  if (format == "pubgml.mlp") return MlpModel::from_json(j);
  throw ParseError("unknown model format '" + format + "'");
}

}  // namespace pubgml
