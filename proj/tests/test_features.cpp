#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include <pubgml/features.hpp>
#include <pubgml/synth.hpp>

#include "test_util.hpp"

using namespace pubgml;

namespace {

Schema engineer_schema() {
  return Schema({{"Id", ColumnKind::identifier},
                 {"groupId", ColumnKind::identifier},
                 {"matchId", ColumnKind::identifier},
                 {"kills", ColumnKind::numeric},
                 {"damageDealt", ColumnKind::numeric},
                 {"heals", ColumnKind::numeric},
                 {"boosts", ColumnKind::numeric},
                 {"walkDistance", ColumnKind::numeric},
                 {"rideDistance", ColumnKind::numeric},
                 {"swimDistance", ColumnKind::numeric},
                 {"winPlacePerc", ColumnKind::numeric}},
                "winPlacePerc");
}

const char* kHeader = "Id,groupId,matchId,kills,damageDealt,heals,boosts,walkDistance,rideDistance,swimDistance,winPlacePerc\n";

Table three_player_match() {
  return testutil::read_table(std::string(kHeader) +
                                  "a,g1,m1,1,100,2,3,100,50,0,1\n"
                                  "b,g1,m1,0,0,0,4,0,0,0,0\n"
                                  "c,g2,m1,2,50,1,0,10,0,5,0.5\n",
                              engineer_schema());
}

}  // namespace

TEST(NormByPlayers, PaperValues) {
  EXPECT_EQ(norm_by_players(1.0, 90.0), 1.1);
  EXPECT_EQ(norm_by_players(1.0, 100.0), 1.0);
  EXPECT_EQ(norm_by_players(0.0, 37.0), 0.0);
}

TEST(NormByPlayers, ZeroPlayersIsDomainError) { EXPECT_THROW(norm_by_players(1.0, 0.0), DomainError); }

TEST(NormByPlayers, AboveHundredIsNotClamped) { EXPECT_DOUBLE_EQ(norm_by_players(1.0, 120.0), 0.8); }

TEST(Engineer, AppendsTenNamedColumns) {
  const auto t = three_player_match();
  const auto e = engineer(t, {});
  EXPECT_EQ(e.cols(), t.cols() + 10);
  EXPECT_EQ(e.rows(), t.rows());
  for (const auto& n : engineered_feature_names()) EXPECT_TRUE(e.has(n)) << n;
  for (std::size_t c = 0; c < t.cols(); ++c) EXPECT_EQ(e.column(c), t.column(c));
}

TEST(Engineer, SumsAndCounts) {
  const auto e = engineer(three_player_match(), {});
  EXPECT_DOUBLE_EQ(e.numeric("healsAndBoosts")[0], 5.0);
  EXPECT_DOUBLE_EQ(e.numeric("totalDistance")[0], 150.0);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_DOUBLE_EQ(e.numeric("playersJoined")[r], 3.0);
  EXPECT_DOUBLE_EQ(e.numeric("team")[0], 2.0);
  EXPECT_DOUBLE_EQ(e.numeric("team")[2], 1.0);
}

TEST(Engineer, KillsNormForThreePlayers) {
  const auto e = engineer(three_player_match(), {});
  const auto kn = e.numeric("killsNorm");
  EXPECT_DOUBLE_EQ(kn[0], 1.97);
  EXPECT_DOUBLE_EQ(kn[1], 0.0);
  EXPECT_DOUBLE_EQ(kn[2], 2.0 * 1.97);
}

TEST(Engineer, ZeroWalkEmitsZero) {
  const auto e = engineer(three_player_match(), {});
  EXPECT_EQ(e.numeric("boostsPerWalkDistance")[1], 0.0);
  EXPECT_DOUBLE_EQ(e.numeric("boostsPerWalkDistance")[0], 0.03);
}

TEST(Engineer, CapAtPolicy) {
  FeatureRecipe r;
  r.zero_division = CapAt{50.0};
  const auto e = engineer(three_player_match(), r);
  EXPECT_EQ(e.numeric("boostsPerWalkDistance")[1], 50.0);  // 4 / 0
  EXPECT_EQ(e.numeric("killsPerWalkDistance")[1], 0.0);    // 0 / 0
  r.zero_division = CapAt{0.0};
  EXPECT_THROW(engineer(three_player_match(), r), DomainError);
  r.zero_division = CapAt{std::numeric_limits<double>::infinity()};
  EXPECT_THROW(engineer(three_player_match(), r), DomainError);
}

TEST(Engineer, RejectsDoubleEngineering) {
  const auto e = engineer(three_player_match(), {});
  EXPECT_THROW(engineer(e, {}), SchemaError);
}

TEST(Engineer, NeedsIdentifiers) {
  const auto cleaned = clean(three_player_match(), {true, false});
  EXPECT_THROW(engineer(cleaned, {}), OrderingError);
}

TEST(Engineer, MissingSourceIsSchemaError) {
  const auto t = three_player_match().select_columns([](const ColumnSpec& c) { return c.name != "heals"; });
  EXPECT_THROW(engineer(t, {}), SchemaError);
}

TEST(Engineer, SyntheticInvariants) {
  SynthConfig cfg;
  cfg.n_matches = 40;
  cfg.afk_fraction = 0.1;
  const auto data = generate(cfg);
  for (const ZeroDivisionPolicy policy : {ZeroDivisionPolicy{EmitZero{}}, ZeroDivisionPolicy{CapAt{1e3}}}) {
    FeatureRecipe r;
    r.zero_division = policy;
    const auto e = engineer(data.table, r);
    for (const auto& n : engineered_feature_names())
      for (double v : e.numeric(n)) ASSERT_TRUE(std::isfinite(v)) << n;

    const auto kills = e.numeric("kills"), kn = e.numeric("killsNorm");
    const auto dmg = e.numeric("damageDealt"), dn = e.numeric("damageDealtNorm");
    for (std::size_t r2 = 0; r2 < e.rows(); ++r2)
      if (kills[r2] != 0.0 && dmg[r2] != 0.0) EXPECT_NEAR(kn[r2] / kills[r2], dn[r2] / dmg[r2], 1e-12);

    // Summing playersJoined over each match's first row gives the row count.
    const auto& match = e.column("matchId");
    std::map<std::uint32_t, bool> seen;
    double total = 0.0;
    for (std::size_t r2 = 0; r2 < e.rows(); ++r2)
      if (seen.emplace(match.codes[r2], true).second) total += e.numeric("playersJoined")[r2];
    EXPECT_EQ(total, static_cast<double>(e.rows()));
  }
}

TEST(OneHot, ExpandsCategoricalColumn) {
  const Schema s({{"matchType", ColumnKind::categorical}, {"kills", ColumnKind::numeric},
                  {"winPlacePerc", ColumnKind::numeric}},
                 "winPlacePerc");
  const auto t = testutil::read_table("matchType,kills,winPlacePerc\nsolo,1,0\nduo,2,1\nsolo,0,0.5\n", s);
  const auto o = one_hot(t, "matchType");
  EXPECT_FALSE(o.has("matchType"));
  EXPECT_EQ(o.numeric("matchType=solo")[0], 1.0);
  EXPECT_EQ(o.numeric("matchType=duo")[0], 0.0);
  EXPECT_EQ(o.numeric("matchType=duo")[1], 1.0);
  EXPECT_THROW(one_hot(t, "kills"), SchemaError);
}
