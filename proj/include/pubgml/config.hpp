#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "error.hpp"
#include "featsel.hpp"
#include "features.hpp"
#include "models.hpp"
#include "table.hpp"

namespace pubgml {

struct SelectionConfig {
  std::string method = "classifier";  // classifier | correlation | info_gain | cfs
  double threshold = 0.01;
  std::size_t folds = 5;
  std::size_t target_bins = 10;
  std::uint64_t seed = 1;
};

struct EvalConfig {
  std::size_t folds = 10;
  std::uint64_t seed = 1;
};

/// One JSON document with sections schema, clean, features, selection,
/// model.<family> and eval. Every section and key is optional except the
/// iteration counts of gbm and mlp, which are demanded when those families
/// are used.
struct PipelineConfig {
  Schema schema = default_pubg_schema();
  CleanRules clean;
  FeatureRecipe features;
  bool engineer = true;
  SelectionConfig selection;
  nlohmann::json models = nlohmann::json::object();
  EvalConfig eval;

  static PipelineConfig from_json(const nlohmann::json& j) {
    PipelineConfig c;
    try {
      if (j.contains("schema")) c.schema = Schema::from_json(j.at("schema"));
      if (j.contains("clean")) {
        const auto& s = j.at("clean");
        c.clean.drop_afk = s.value("drop_afk", c.clean.drop_afk);
        c.clean.drop_identifiers = s.value("drop_identifiers", c.clean.drop_identifiers);
      }
      if (j.contains("features")) {
        const auto& s = j.at("features");
        c.engineer = s.value("engineer", c.engineer);
        c.features.one_hot_match_type = s.value("one_hot_match_type", false);
        const auto policy = s.value("zero_division", std::string("emit_zero"));
        if (policy == "emit_zero") c.features.zero_division = EmitZero{};
        else if (policy == "cap_at") c.features.zero_division = CapAt{s.value("cap_value", 1e6)};
        else throw ConfigError("features.zero_division must be 'emit_zero' or 'cap_at'");
        c.features.validate();
      }
      if (j.contains("selection")) {
        const auto& s = j.at("selection");
        c.selection.method = s.value("method", c.selection.method);
        c.selection.threshold = s.value("threshold", c.selection.threshold);
        c.selection.folds = s.value("folds", c.selection.folds);
        c.selection.target_bins = s.value("target_bins", c.selection.target_bins);
        c.selection.seed = s.value("seed", c.selection.seed);
        if (c.selection.method != "classifier" && c.selection.method != "correlation" &&
            c.selection.method != "info_gain" && c.selection.method != "cfs")
          throw ConfigError("unknown selection.method '" + c.selection.method + "'");
      }
      if (j.contains("model")) c.models = j.at("model");
      if (j.contains("eval")) {
        const auto& s = j.at("eval");
        c.eval.folds = s.value("folds", c.eval.folds);
        c.eval.seed = s.value("seed", c.eval.seed);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid config: ") + e.what());
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    } catch (const SchemaError& e) {
      throw ConfigError(e.what());
    }
    return c;
  }

  static PipelineConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(j);
  }

  nlohmann::json model_section(ModelFamily f) const {
    const auto key = to_string(f);
    return models.contains(key) ? models.at(key) : nlohmann::json::object();
  }

  /// Parameters for one family; `seed`, when given, replaces the family seed.
  ModelSpec model_spec(ModelFamily f, std::optional<std::uint64_t> seed = std::nullopt) const {
    const auto s = model_section(f);
    try {
      switch (f) {
        case ModelFamily::baseline:
          return ModelSpec::baseline();
        case ModelFamily::m5p:
          return ModelSpec::m5p(M5pParams::from_json(s));
        case ModelFamily::forest: {
          auto p = ForestParams::from_json(s);
          if (seed) p.seed = *seed;
          return ModelSpec::forest(p);
        }
        case ModelFamily::gbm: {
          auto p = GbmParams::from_json(s);
          if (!p.n_iterations) throw ConfigError("model.gbm.n_iterations is required");
          if (seed) p.seed = *seed;
          return ModelSpec::gbm(p);
        }
        case ModelFamily::mlp: {
          if (!s.contains("epochs")) throw ConfigError("model.mlp.epochs is required");
          auto p = MlpParams::from_json(s);
          if (seed) p.seed = *seed;
          return ModelSpec::mlp(p);
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("invalid model." + to_string(f) + " section: " + e.what());
    }
    throw ConfigError("unknown model family");
  }
};

/// clean -> engineer -> drop identifiers -> optional one-hot of matchType.
/// Identifiers survive cleaning until engineering has used them.
inline Table prepare_table(const Table& raw, const PipelineConfig& cfg) {
  CleanRules first = cfg.clean;
  first.drop_identifiers = false;
  Table t = clean(raw, first);
  if (cfg.engineer) t = engineer(t, cfg.features);
  if (cfg.clean.drop_identifiers)
    t = t.select_columns([](const ColumnSpec& c) { return c.kind != ColumnKind::identifier; });
  if (cfg.features.one_hot_match_type && t.has("matchType")) t = one_hot(t, "matchType");
  return t;
}

inline SelectionResult run_selection(const Table& table, const SelectionConfig& s) {
  const auto& target = table.schema().target();
  if (s.method == "correlation") return rank_by_correlation(table, target, s.threshold);
  if (s.method == "info_gain") return info_gain_rank(table, target, s.target_bins, s.threshold);
  if (s.method == "cfs") return cfs_select(table, target);
  return classifier_attribute_eval(table, target, s.folds, s.threshold, s.seed);
}

}  // namespace pubgml
