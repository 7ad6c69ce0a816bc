#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "table.hpp"

namespace pubgml {

struct SynthConfig {
  std::size_t n_matches = 500;
  std::size_t min_players = 20;
  std::size_t max_players = 60;
  double noise_sd = 0.1;
  std::uint64_t seed = 42;
  double afk_fraction = 0.02;

  void validate() const {
    if (n_matches == 0) throw ConfigError("n_matches must be positive");
    if (min_players < 2 || max_players > 100 || min_players > max_players)
      throw ConfigError("players per match must satisfy 2 <= min <= max <= 100");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw ConfigError("noise_sd must be >= 0");
    if (!(afk_fraction >= 0.0 && afk_fraction < 1.0)) throw ConfigError("afk_fraction must be in [0, 1)");
  }

  nlohmann::json to_json() const {
    return {{"n_matches", n_matches}, {"min_players", min_players}, {"max_players", max_players},
            {"noise_sd", noise_sd},   {"seed", seed},               {"afk_fraction", afk_fraction}};
  }
};

struct SynthData {
  Table table;
  nlohmann::json ground_truth;
};

namespace detail {

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline std::string synth_id(char prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%08zx", prefix, n);
  return buf;
}

}  // namespace detail

/// Generates matches of players with a latent skill. Skill-driven columns are
/// monotone transforms of Phi(skill + noise); winPlacePerc is the player's
/// skill percentile rank inside the match. AFK players get the lowest skill
/// and zero movement, kills and damage.
inline SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  const Schema schema = default_pubg_schema();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> n_players(cfg.min_players, cfg.max_players);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution afk_draw(cfg.afk_fraction);
  std::discrete_distribution<int> mode_draw({16.0, 74.0, 10.0});
  static const char* const kModes[] = {"solo", "duo", "squad"};
  static const std::size_t kGroupSize[] = {1, 2, 4};

  std::vector<std::vector<double>> num(schema.size());
  std::vector<DictionaryBuilder> dict(schema.size());
  std::vector<std::vector<std::uint32_t>> codes(schema.size());
  auto idx = [&](const char* name) { return schema.index_of(name); };
  const std::size_t c_id = idx("Id"), c_group = idx("groupId"), c_match = idx("matchId"), c_type = idx("matchType");

  std::size_t player_counter = 0, group_counter = 0;
  for (std::size_t m = 0; m < cfg.n_matches; ++m) {
    const std::size_t p = n_players(rng);
    const int mode = mode_draw(rng);
    const std::size_t gsize = kGroupSize[mode];
    const std::size_t groups = (p + gsize - 1) / gsize;
    const double duration = std::floor(1300.0 + 900.0 * unit(rng));
    const std::string match_id = detail::synth_id('m', m);

    std::vector<double> skill(p);
    std::vector<bool> afk(p);
    for (std::size_t i = 0; i < p; ++i) {
      skill[i] = gauss(rng);
      afk[i] = afk_draw(rng);
    }
    // Effective skill places AFK players below everyone else.
    std::vector<double> eff(p);
    for (std::size_t i = 0; i < p; ++i) eff[i] = afk[i] ? skill[i] - 1000.0 : skill[i];
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return eff[a] < eff[b] || (eff[a] == eff[b] && a < b);
    });
    std::vector<double> label(p);
    for (std::size_t r = 0; r < p; ++r) label[order[r]] = static_cast<double>(r) / static_cast<double>(p - 1);

    auto noisy = [&](double s) { return detail::std_normal_cdf(s + cfg.noise_sd * gauss(rng)); };
    std::vector<double> kills(p), damage(p);
    std::vector<std::vector<double>> row(p, std::vector<double>(schema.size(), 0.0));
    for (std::size_t i = 0; i < p; ++i) {
      auto& v = row[i];
      const double s = skill[i];
      const double u_walk = noisy(s), u_kill = noisy(s), u_dmg = noisy(s), u_heal = noisy(s);
      const double u_boost = noisy(s), u_ride = noisy(s), u_swim = noisy(s), u_weap = noisy(s);
      const double k = afk[i] ? 0.0 : std::floor(7.0 * std::pow(u_kill, 2.5));
      kills[i] = k;
      damage[i] = afk[i] ? 0.0 : 100.0 * k + 150.0 * u_dmg;
      v[idx("kills")] = k;
      v[idx("damageDealt")] = damage[i];
      v[idx("walkDistance")] = afk[i] ? 0.0 : 50.0 + 4500.0 * u_walk;
      v[idx("rideDistance")] = afk[i] || u_ride < 0.5 ? 0.0 : 6000.0 * (u_ride - 0.5);
      v[idx("swimDistance")] = afk[i] || u_swim < 0.85 ? 0.0 : 400.0 * (u_swim - 0.85);
      v[idx("heals")] = std::floor(8.0 * u_heal * u_heal);
      v[idx("boosts")] = std::floor(6.0 * std::pow(u_boost, 1.5));
      v[idx("weaponsAcquired")] = afk[i] ? 0.0 : 1.0 + std::floor(7.0 * u_weap);
      // Columns below carry no skill signal beyond what kills already explains.
      v[idx("headshotKills")] = std::floor(k * unit(rng) * 0.6);
      v[idx("killStreaks")] = std::min(k, std::floor(3.0 * unit(rng)));
      v[idx("longestKill")] = k > 0.0 ? 300.0 * unit(rng) : 0.0;
      v[idx("DBNOs")] = mode == 0 ? 0.0 : std::floor(3.0 * unit(rng) * unit(rng));
      v[idx("assists")] = std::floor(2.5 * unit(rng) * unit(rng));
      v[idx("revives")] = mode == 0 ? 0.0 : std::floor(2.0 * unit(rng) * unit(rng));
      v[idx("roadKills")] = unit(rng) < 0.01 ? 1.0 : 0.0;
      v[idx("teamKills")] = unit(rng) < 0.02 ? 1.0 : 0.0;
      v[idx("vehicleDestroys")] = unit(rng) < 0.01 ? 1.0 : 0.0;
      v[idx("killPoints")] = std::floor(1500.0 * unit(rng));
      v[idx("winPoints")] = std::floor(1500.0 * unit(rng));
      v[idx("rankPoints")] = std::floor(2000.0 * unit(rng));
      v[idx("matchDuration")] = duration;
      v[idx("maxPlace")] = static_cast<double>(groups);
      v[idx("numGroups")] = static_cast<double>(groups);
      v[idx("winPlacePerc")] = label[i];
    }
    // killPlace: 1 for the most kills, ties broken by damage then index.
    std::vector<std::size_t> by_kills(p);
    std::iota(by_kills.begin(), by_kills.end(), std::size_t{0});
    std::sort(by_kills.begin(), by_kills.end(), [&](std::size_t a, std::size_t b) {
      if (kills[a] != kills[b]) return kills[a] > kills[b];
      if (damage[a] != damage[b]) return damage[a] > damage[b];
      return a < b;
    });
    for (std::size_t r = 0; r < p; ++r) row[by_kills[r]][idx("killPlace")] = static_cast<double>(r + 1);

    const std::size_t group_base = group_counter;
    group_counter += groups;
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t c = 0; c < schema.size(); ++c) {
        if (c == c_id) codes[c].push_back(dict[c].code(detail::synth_id('p', player_counter)));
        else if (c == c_group) codes[c].push_back(dict[c].code(detail::synth_id('g', group_base + i / gsize)));
        else if (c == c_match) codes[c].push_back(dict[c].code(match_id));
        else if (c == c_type) codes[c].push_back(dict[c].code(kModes[mode]));
        else num[c].push_back(row[i][c]);
      }
      ++player_counter;
    }
  }

  std::vector<Column> cols(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    cols[c].kind = schema.columns()[c].kind;
    if (cols[c].kind == ColumnKind::numeric) {
      cols[c].values = std::move(num[c]);
    } else {
      cols[c].codes = std::move(codes[c]);
      cols[c].dictionary = dict[c].take();
    }
  }

  nlohmann::json truth = {
      {"config", cfg.to_json()},
      {"latent", "skill ~ N(0,1) per player; u = Phi(skill + noise_sd * N(0,1)), drawn independently per column"},
      {"label", "winPlacePerc = rank of skill within the match / (players - 1); AFK players rank lowest"},
      {"afk", "rows with probability afk_fraction: walk, ride, swim, kills, damage and weapons are 0"},
      {"skill_columns",
       {{"walkDistance", "50 + 4500 * u"},
        {"kills", "floor(7 * u^2.5)"},
        {"damageDealt", "100 * kills + 150 * u"},
        {"heals", "floor(8 * u^2)"},
        {"boosts", "floor(6 * u^1.5)"},
        {"rideDistance", "6000 * max(0, u - 0.5)"},
        {"swimDistance", "400 * max(0, u - 0.85)"},
        {"weaponsAcquired", "1 + floor(7 * u)"}}},
      {"derived_columns", {"killPlace", "headshotKills", "killStreaks", "longestKill"}},
      {"noise_columns",
       {"assists", "DBNOs", "revives", "roadKills", "teamKills", "vehicleDestroys", "killPoints", "winPoints",
        "rankPoints", "matchDuration"}},
      {"match_types", {{"solo", 0.16}, {"duo", 0.74}, {"squad", 0.10}}}};
  return {Table(schema, std::move(cols)), truth};
}

}  // namespace pubgml
