#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "table.hpp"

namespace pubgml {

/// Scales a per-match count so that sparser matches weigh more:
/// value * ((100 - players_joined) / 100 + 1). A kill among 90 players
/// scores 1.1, among 100 players exactly 1.
inline double norm_by_players(double value, double players_joined) {
  if (!(players_joined >= 1.0)) throw DomainError("players_joined must be at least 1");
  return value * ((100.0 - players_joined) / 100.0 + 1.0);
}

struct EmitZero {};
struct CapAt {
  double value = 0.0;
};

/// What a per-walk-distance ratio becomes when walkDistance is zero.
/// EmitZero yields 0. CapAt yields the cap (0 when the numerator is 0) and
/// also caps every finite ratio at that value.
using ZeroDivisionPolicy = std::variant<EmitZero, CapAt>;

struct FeatureRecipe {
  ZeroDivisionPolicy zero_division = EmitZero{};
  bool one_hot_match_type = false;

  void validate() const {
    if (auto* cap = std::get_if<CapAt>(&zero_division))
      if (!std::isfinite(cap->value) || cap->value <= 0.0)
        throw DomainError("cap_at value must be finite and positive");
  }
};

/// Names of the appended columns, in the order engineer() adds them.
inline const std::vector<std::string>& engineered_feature_names() {
  static const std::vector<std::string> names = {
      "playersJoined",          "killsNorm",           "damageDealtNorm",
      "healsAndBoosts",         "totalDistance",       "boostsPerWalkDistance",
      "healsPerWalkDistance",   "killsPerWalkDistance", "healsAndBoostsPerWalkDistance",
      "team"};
  return names;
}

namespace detail {

inline std::vector<double> group_sizes(const Column& ids) {
  std::vector<std::size_t> counts(ids.dictionary.size(), 0);
  for (auto c : ids.codes) ++counts[c];
  std::vector<double> out(ids.codes.size());
  for (std::size_t r = 0; r < ids.codes.size(); ++r) out[r] = static_cast<double>(counts[ids.codes[r]]);
  return out;
}

inline double ratio(double numerator, double walk, const ZeroDivisionPolicy& policy) {
  if (const auto* cap = std::get_if<CapAt>(&policy)) {
    if (walk == 0.0) return numerator == 0.0 ? 0.0 : cap->value;
    const double q = numerator / walk;
    return std::isfinite(q) ? std::min(q, cap->value) : cap->value;
  }
  if (walk == 0.0) return 0.0;
  const double q = numerator / walk;
  return std::isfinite(q) ? q : 0.0;
}

}  // namespace detail

/// Appends the ten engineered columns. Must run before identifiers are
/// dropped, since match and group sizes come from matchId and groupId.
inline Table engineer(const Table& table, const FeatureRecipe& recipe) {
  recipe.validate();
  for (const char* id : {"matchId", "groupId"})
    if (!table.has(id))
      throw OrderingError(std::string("column '") + id +
                          "' is missing; run feature engineering before dropping identifier columns");
  for (const auto& name : engineered_feature_names())
    if (table.has(name))
      throw SchemaError("column '" + name + "' already exists; table appears to be engineered already");
  for (const char* src : {"kills", "damageDealt", "heals", "boosts", "walkDistance", "rideDistance",
                          "swimDistance"})
    table.numeric(src);  // throws SchemaError when absent

  const auto& match = table.column("matchId");
  const auto& group = table.column("groupId");
  if (match.kind == ColumnKind::numeric || group.kind == ColumnKind::numeric)
    throw SchemaError("matchId and groupId must be identifier or categorical columns");

  const std::size_t n = table.rows();
  auto kills = table.numeric("kills");
  auto damage = table.numeric("damageDealt");
  auto heals = table.numeric("heals");
  auto boosts = table.numeric("boosts");
  auto walk = table.numeric("walkDistance");
  auto ride = table.numeric("rideDistance");
  auto swim = table.numeric("swimDistance");

  std::vector<double> players = detail::group_sizes(match);
  std::vector<double> team = detail::group_sizes(group);
  std::vector<double> kills_norm(n), damage_norm(n), heals_boosts(n), total(n), boosts_pw(n),
      heals_pw(n), kills_pw(n), hb_pw(n);
  const auto& policy = recipe.zero_division;
  parallel_for(n, [&](std::size_t r) {
    kills_norm[r] = norm_by_players(kills[r], players[r]);
    damage_norm[r] = norm_by_players(damage[r], players[r]);
    heals_boosts[r] = heals[r] + boosts[r];
    total[r] = walk[r] + ride[r] + swim[r];
    boosts_pw[r] = detail::ratio(boosts[r], walk[r], policy);
    heals_pw[r] = detail::ratio(heals[r], walk[r], policy);
    kills_pw[r] = detail::ratio(kills[r], walk[r], policy);
    hb_pw[r] = detail::ratio(heals_boosts[r], walk[r], policy);
  });

  std::vector<std::vector<double>> values = {std::move(players), std::move(kills_norm),
                                             std::move(damage_norm), std::move(heals_boosts),
                                             std::move(total), std::move(boosts_pw),
                                             std::move(heals_pw), std::move(kills_pw),
                                             std::move(hb_pw), std::move(team)};
  auto specs = table.schema().columns();
  auto cols = table.columns();
  const auto& names = engineered_feature_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    specs.push_back({names[i], ColumnKind::numeric});
    cols.push_back(Column::numeric(std::move(values[i])));
  }
  return Table(Schema(std::move(specs), table.schema().target()), std::move(cols));
}

/// Replaces a categorical column by one 0/1 numeric column per dictionary
/// value, named "<column>=<value>".
inline Table one_hot(const Table& table, const std::string& column) {
  const auto idx = table.schema().index_of(column);
  const auto& col = table.column(idx);
  if (col.kind != ColumnKind::categorical)
    throw SchemaError("column '" + column + "' is not categorical");
  std::vector<ColumnSpec> specs;
  std::vector<Column> cols;
  for (std::size_t c = 0; c < table.cols(); ++c) {
    if (c != idx) {
      specs.push_back(table.schema().columns()[c]);
      cols.push_back(table.column(c));
      continue;
    }
    for (std::uint32_t v = 0; v < col.dictionary.size(); ++v) {
      std::vector<double> ind(table.rows());
      for (std::size_t r = 0; r < table.rows(); ++r) ind[r] = col.codes[r] == v ? 1.0 : 0.0;
      specs.push_back({column + "=" + col.dictionary[v], ColumnKind::numeric});
      cols.push_back(Column::numeric(std::move(ind)));
    }
  }
  return Table(Schema(std::move(specs), table.schema().target()), std::move(cols));
}

}  // namespace pubgml
