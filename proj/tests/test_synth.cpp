#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include <pubgml/config.hpp>
#include <pubgml/featsel.hpp>
#include <pubgml/synth.hpp>

using namespace pubgml;

TEST(Synth, NoiselessSkillColumnDominatesCorrelationRanking) {
  SynthConfig cfg;
  cfg.n_matches = 60;
  cfg.noise_sd = 0.0;
  cfg.afk_fraction = 0.0;
  const auto table = prepare_table(generate(cfg).table, PipelineConfig{});
  const auto r = rank_by_correlation(table, "winPlacePerc");
  EXPECT_GE(r.scores[0].score, 0.95) << r.scores[0].name;
}

TEST(Synth, AfkFractionControlsCleanedRows) {
  SynthConfig cfg;
  cfg.n_matches = 25;
  cfg.afk_fraction = 0.1;
  const auto raw = generate(cfg).table;
  const auto cleaned = clean(raw, CleanRules{});
  const double removed = static_cast<double>(raw.rows() - cleaned.rows());
  const double expected = 0.1 * static_cast<double>(raw.rows());
  EXPECT_NEAR(removed, expected, 4.0 * std::sqrt(expected));
}

TEST(Synth, LabelsArePermutationOfRanksPerMatch) {
  SynthConfig cfg;
  cfg.n_matches = 40;
  const auto t = generate(cfg).table;
  const auto& match = t.column("matchId");
  const auto y = t.target();
  std::map<std::uint32_t, std::vector<double>> by_match;
  for (std::size_t r = 0; r < t.rows(); ++r) by_match[match.codes[r]].push_back(y[r]);
  ASSERT_EQ(by_match.size(), cfg.n_matches);
  for (auto& [m, labels] : by_match) {
    std::sort(labels.begin(), labels.end());
    const std::size_t p = labels.size();
    ASSERT_GE(p, cfg.min_players);
    ASSERT_LE(p, cfg.max_players);
    for (std::size_t i = 0; i < p; ++i) EXPECT_DOUBLE_EQ(labels[i], static_cast<double>(i) / (p - 1));
    EXPECT_EQ(std::count(labels.begin(), labels.end(), 1.0), 1);
  }
}

TEST(Synth, GroupsMatchMatchType) {
  SynthConfig cfg;
  cfg.n_matches = 30;
  const auto t = generate(cfg).table;
  const auto& type = t.column("matchType");
  const auto& group = t.column("groupId");
  std::map<std::uint32_t, std::size_t> sizes;
  std::map<std::uint32_t, std::string> kind;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    ++sizes[group.codes[r]];
    kind[group.codes[r]] = type.dictionary[type.codes[r]];
  }
  for (const auto& [g, n] : sizes) {
    const auto& k = kind[g];
    const std::size_t cap = k == "solo" ? 1 : k == "duo" ? 2 : 4;
    EXPECT_LE(n, cap);
  }
}

TEST(Synth, DeterministicForSeed) {
  SynthConfig cfg;
  cfg.n_matches = 10;
  const auto a = generate(cfg), b = generate(cfg);
  EXPECT_EQ(a.table, b.table);
  EXPECT_EQ(a.ground_truth, b.ground_truth);
  cfg.seed = 43;
  EXPECT_FALSE(generate(cfg).table == a.table);
}

TEST(Synth, InvalidConfigIsConfigError) {
  SynthConfig cfg;
  cfg.n_matches = 0;
  EXPECT_THROW(generate(cfg), ConfigError);
  cfg = {};
  cfg.min_players = 1;
  EXPECT_THROW(generate(cfg), ConfigError);
  cfg = {};
  cfg.min_players = 70;
  cfg.max_players = 60;
  EXPECT_THROW(generate(cfg), ConfigError);
  cfg = {};
  cfg.noise_sd = -1.0;
  EXPECT_THROW(generate(cfg), ConfigError);
  cfg = {};
  cfg.afk_fraction = 1.0;
  EXPECT_THROW(generate(cfg), ConfigError);
}

TEST(Synth, GroundTruthRecordsConfig) {
  SynthConfig cfg;
  cfg.n_matches = 3;
  cfg.seed = 7;
  const auto d = generate(cfg);
  EXPECT_EQ(d.ground_truth["config"]["seed"], 7);
  EXPECT_TRUE(d.ground_truth.contains("skill_columns"));
}
