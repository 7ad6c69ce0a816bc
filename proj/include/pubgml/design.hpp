#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "table.hpp"

namespace pubgml {

/// Column-major numeric feature matrix consumed by every learner.
struct DesignMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  std::size_t rows = 0;

  DesignMatrix() = default;
  DesignMatrix(std::vector<std::string> n, std::vector<std::vector<double>> c)
      : names(std::move(n)), columns(std::move(c)) {
    if (names.size() != columns.size()) throw SchemaError("design matrix names/columns mismatch");
    rows = columns.empty() ? 0 : columns.front().size();
    for (std::size_t j = 0; j < columns.size(); ++j)
      if (columns[j].size() != rows) throw SchemaError("design matrix column '" + names[j] + "' has wrong length");
  }

  std::size_t cols() const { return columns.size(); }
  double at(std::size_t r, std::size_t c) const { return columns[c][r]; }

  std::vector<double> row(std::size_t r) const {
    std::vector<double> out(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) out[c] = columns[c][r];
    return out;
  }

  DesignMatrix select_rows(std::span<const std::size_t> idx) const {
    std::vector<std::vector<double>> cols(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
      cols[c].reserve(idx.size());
      for (auto r : idx) cols[c].push_back(columns[c][r]);
    }
    DesignMatrix out(names, std::move(cols));
    out.rows = idx.size();
    return out;
  }

  /// Index of every name in `wanted`; a missing name is a SchemaError.
  std::vector<std::size_t> bind(const std::vector<std::string>& wanted) const {
    std::vector<std::size_t> out;
    out.reserve(wanted.size());
    for (const auto& w : wanted) {
      std::size_t j = 0;
      while (j < names.size() && names[j] != w) ++j;
      if (j == names.size()) throw SchemaError("missing feature '" + w + "'");
      out.push_back(j);
    }
    return out;
  }

  /// Copy of the matrix restricted and reordered to `wanted`.
  DesignMatrix project(const std::vector<std::string>& wanted) const {
    auto idx = bind(wanted);
    std::vector<std::vector<double>> cols;
    for (auto j : idx) cols.push_back(columns[j]);
    DesignMatrix out(wanted, std::move(cols));
    out.rows = rows;
    return out;
  }

  void require_finite() const {
    for (std::size_t c = 0; c < columns.size(); ++c)
      for (double v : columns[c])
        if (!std::isfinite(v)) throw DomainError("non-finite value in feature '" + names[c] + "'");
  }
};

/// Remembers which table columns feed a model and how categorical values
/// were coded at training time, so that prediction-time tables (whose
/// dictionaries follow their own first-occurrence order) code identically.
/// Unseen categories map to the next unused code.
struct FeatureEncoder {
  std::vector<std::string> features;
  std::map<std::string, std::vector<std::string>> dictionaries;

  static FeatureEncoder fit(const Table& table, std::vector<std::string> names) {
    FeatureEncoder enc;
    for (const auto& n : names) {
      const auto& spec = table.schema().columns()[table.schema().index_of(n)];
      if (spec.kind == ColumnKind::identifier) throw SchemaError("identifier column '" + n + "' cannot be a feature");
      if (spec.kind == ColumnKind::categorical) enc.dictionaries[n] = table.column(n).dictionary;
    }
    enc.features = std::move(names);
    return enc;
  }

  static FeatureEncoder fit(const Table& table) { return fit(table, table.feature_names()); }

  DesignMatrix encode(const Table& table) const {
    std::vector<std::vector<double>> cols;
    cols.reserve(features.size());
    for (const auto& name : features) {
      if (!table.has(name)) throw SchemaError("missing feature '" + name + "'");
      const auto& col = table.column(name);
      auto dict = dictionaries.find(name);
      if (dict == dictionaries.end()) {
        if (col.kind != ColumnKind::numeric) throw SchemaError("feature '" + name + "' was numeric at training time");
        cols.push_back(col.values);
        continue;
      }
      if (col.kind == ColumnKind::numeric) throw SchemaError("feature '" + name + "' was categorical at training time");
      std::vector<double> remap(col.dictionary.size());
      for (std::size_t i = 0; i < col.dictionary.size(); ++i) {
        std::size_t k = 0;
        while (k < dict->second.size() && dict->second[k] != col.dictionary[i]) ++k;
        remap[i] = static_cast<double>(k);
      }
      std::vector<double> v(col.codes.size());
      for (std::size_t r = 0; r < v.size(); ++r) v[r] = remap[col.codes[r]];
      cols.push_back(std::move(v));
    }
    DesignMatrix out(features, std::move(cols));
    out.rows = table.rows();
    return out;
  }

  nlohmann::json to_json() const { return {{"features", features}, {"dictionaries", dictionaries}}; }

  static FeatureEncoder from_json(const nlohmann::json& j) {
    FeatureEncoder enc;
    enc.features = j.at("features").get<std::vector<std::string>>();
    enc.dictionaries = j.at("dictionaries").get<std::map<std::string, std::vector<std::string>>>();
    return enc;
  }
};

}  // namespace pubgml
