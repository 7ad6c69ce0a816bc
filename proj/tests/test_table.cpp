#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include <pubgml/log.hpp>
#include <pubgml/table.hpp>

#include "test_util.hpp"

using namespace pubgml;
using testutil::read_table;
using testutil::simple_schema;

namespace {

std::string movement_csv() {
  return "walkDistance,rideDistance,swimDistance,kills,winPlacePerc\n"
         "0,0,0,0,0.1\n"
         "0,0,0,2,0.5\n"
         "100,0,0,0,0.7\n"
         "0,10,0,0,0.2\n";
}

Schema movement_schema() {
  return simple_schema({"walkDistance", "rideDistance", "swimDistance", "kills", "winPlacePerc"}, "winPlacePerc");
}

class SilenceWarnings : public ::testing::Test {
 protected:
  void SetUp() override {
    old_ = log::set_sink([this](log::Level, const std::string& m) { messages.push_back(m); });
  }
  void TearDown() override { log::set_sink(old_); }
  std::vector<std::string> messages;

 private:
  std::function<void(log::Level, const std::string&)> old_;
};

}  // namespace

TEST(Schema, RejectsDuplicateNames) {
  EXPECT_THROW(Schema({{"a", ColumnKind::numeric}, {"a", ColumnKind::numeric}}, "a"), SchemaError);
}

TEST(Schema, TargetMustExistAndBeNumeric) {
  EXPECT_THROW(Schema({{"a", ColumnKind::numeric}}, "y"), SchemaError);
  EXPECT_THROW(Schema({{"a", ColumnKind::numeric}, {"y", ColumnKind::categorical}}, "y"), SchemaError);
}

TEST(Schema, NeedsAFeatureColumn) {
  EXPECT_THROW(Schema({{"id", ColumnKind::identifier}, {"y", ColumnKind::numeric}}, "y"), SchemaError);
}

TEST(Schema, DefaultHas29ColumnsAndThreeIdentifiers) {
  const auto s = default_pubg_schema();
  EXPECT_EQ(s.size(), 29u);
  EXPECT_EQ(s.target(), "winPlacePerc");
  int ids = 0;
  for (const auto& c : s.columns()) ids += c.kind == ColumnKind::identifier;
  EXPECT_EQ(ids, 3);
  EXPECT_EQ(s.columns()[s.index_of("matchType")].kind, ColumnKind::categorical);
}

TEST(Schema, JsonRoundTrip) {
  const auto s = default_pubg_schema();
  const auto back = Schema::from_json(s.to_json());
  EXPECT_EQ(back.to_json(), s.to_json());
}

TEST(LoadCsv, ThreeLineNumericFile) {
  const auto t = read_table("kills,walkDistance,winPlacePerc\n1,10,0.5\n0,0,0\n3,250.5,1\n",
                            simple_schema({"kills", "walkDistance", "winPlacePerc"}, "winPlacePerc"));
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_DOUBLE_EQ(t.numeric("walkDistance")[2], 250.5);
}

TEST(LoadCsv, HeaderOrderIsIrrelevant) {
  const auto schema = simple_schema({"kills", "walkDistance", "winPlacePerc"}, "winPlacePerc");
  const auto a = read_table("kills,walkDistance,winPlacePerc\n1,10,0.5\n", schema);
  const auto b = read_table("winPlacePerc,kills,walkDistance\n0.5,1,10\n", schema);
  EXPECT_EQ(a, b);
}

TEST(LoadCsv, MissingTargetColumnIsSchemaError) {
  std::istringstream in("Id,kills\nx,1\n");
  try {
    read_csv(in, default_pubg_schema());
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("missing column"), std::string::npos);
  }
}

TEST(LoadCsv, MissingColumnNamesTheColumn) {
  try {
    read_table("kills,winPlacePerc\n1,0.5\n", simple_schema({"kills", "walkDistance", "winPlacePerc"}, "winPlacePerc"));
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("walkDistance"), std::string::npos);
  }
}

TEST(LoadCsv, UnparseableCellReportsCoordinates) {
  try {
    read_table("kills,winPlacePerc\n1,0.5\nabc,0.2\n", simple_schema({"kills", "winPlacePerc"}, "winPlacePerc"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 3"), std::string::npos);
    EXPECT_NE(msg.find("kills"), std::string::npos);
  }
}

TEST(LoadCsv, EmptyNumericCellIsParseError) {
  EXPECT_THROW(read_table("kills,winPlacePerc\n,0.5\n", simple_schema({"kills", "winPlacePerc"}, "winPlacePerc")),
               ParseError);
}

TEST_F(SilenceWarnings, BlankLabelDropsRowWithWarning) {
  const auto t = read_table("kills,winPlacePerc\n1,0.5\n2,\n3,NaNx\n4,1\n",
                            simple_schema({"kills", "winPlacePerc"}, "winPlacePerc"));
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_DOUBLE_EQ(t.numeric("kills")[1], 4.0);
  EXPECT_FALSE(messages.empty());
}

TEST(LoadCsv, LabelOutsideUnitIntervalRejected) {
  EXPECT_THROW(read_table("kills,winPlacePerc\n1,1.5\n", simple_schema({"kills", "winPlacePerc"}, "winPlacePerc")),
               DomainError);
}

TEST(LoadCsv, CategoricalDictionaryInFirstOccurrenceOrder) {
  const Schema s({{"matchType", ColumnKind::categorical}, {"kills", ColumnKind::numeric},
                  {"winPlacePerc", ColumnKind::numeric}},
                 "winPlacePerc");
  const auto t = read_table("matchType,kills,winPlacePerc\nsquad,1,0\nsolo,2,0\nsquad,3,1\n", s);
  const auto& col = t.column("matchType");
  ASSERT_EQ(col.dictionary.size(), 2u);
  EXPECT_EQ(col.dictionary[0], "squad");
  EXPECT_EQ(col.dictionary[1], "solo");
  EXPECT_EQ(col.codes, (std::vector<std::uint32_t>{0, 1, 0}));
}

TEST(LoadCsv, UnknownHeaderColumnRejectedButSchemaForHeaderAccepts) {
  const auto base = simple_schema({"kills", "winPlacePerc"}, "winPlacePerc");
  const std::string csv = "kills,extra,winPlacePerc\n1,7,0.5\n";
  EXPECT_THROW(read_table(csv, base), SchemaError);
  const auto t = read_table(csv, schema_for_header({"kills", "extra", "winPlacePerc"}, base));
  EXPECT_DOUBLE_EQ(t.numeric("extra")[0], 7.0);
}

TEST(LoadCsv, CsvRoundTripIsIdentical) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Schema s({{"Id", ColumnKind::identifier}, {"mode", ColumnKind::categorical},
                  {"a", ColumnKind::numeric}, {"winPlacePerc", ColumnKind::numeric}},
                 "winPlacePerc");
  std::ostringstream csv;
  csv << "Id,mode,a,winPlacePerc\n";
  for (int i = 0; i < 200; ++i)
    csv << "id" << i << ',' << (i % 3 ? "duo" : "solo-fpp") << ',' << Table::format_real(u(rng) * 1e4 - 5e3) << ','
        << Table::format_real(u(rng)) << '\n';
  const auto t = read_table(csv.str(), s);
  std::ostringstream out;
  write_csv(t, out);
  EXPECT_EQ(read_table(out.str(), s), t);
}

TEST(FormatReal, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 123456789.125, 0.0}) {
    const auto s = Table::format_real(v);
    EXPECT_EQ(std::stod(s), v) << s;
  }
  EXPECT_EQ(Table::format_real(0.5), "0.5");
}

TEST(Clean, DropsAfkRowsOnly) {
  const auto t = read_table(movement_csv(), movement_schema());
  const auto c = clean(t, {false, true});
  ASSERT_EQ(c.rows(), 3u);
  EXPECT_DOUBLE_EQ(c.numeric("kills")[0], 2.0);  // walk 0 but kills 2: kept
  EXPECT_DOUBLE_EQ(c.numeric("walkDistance")[1], 100.0);
  EXPECT_DOUBLE_EQ(c.numeric("rideDistance")[2], 10.0);
}

TEST(Clean, DropsIdentifierColumns) {
  const Schema s({{"Id", ColumnKind::identifier}, {"groupId", ColumnKind::identifier},
                  {"matchId", ColumnKind::identifier}, {"kills", ColumnKind::numeric},
                  {"winPlacePerc", ColumnKind::numeric}},
                 "winPlacePerc");
  const auto t = read_table("Id,groupId,matchId,kills,winPlacePerc\na,b,c,1,0.5\n", s);
  const auto c = clean(t, {true, false});
  EXPECT_EQ(c.cols(), 2u);
  EXPECT_FALSE(c.has("Id"));
  EXPECT_FALSE(c.has("groupId"));
  EXPECT_FALSE(c.has("matchId"));
  EXPECT_TRUE(c.has("kills"));
}

TEST(Clean, AfkRuleNeedsMovementColumns) {
  const auto t = read_table("kills,winPlacePerc\n1,0.5\n", simple_schema({"kills", "winPlacePerc"}, "winPlacePerc"));
  EXPECT_THROW(clean(t, {false, true}), SchemaError);
}

TEST(Clean, IsIdempotentAndPreservesValues) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> z(0, 2);
  for (int trial = 0; trial < 20; ++trial) {
    std::ostringstream csv;
    csv << "walkDistance,rideDistance,swimDistance,kills,winPlacePerc\n";
    for (int r = 0; r < 50; ++r) csv << z(rng) << ',' << z(rng) / 2 << ',' << z(rng) / 2 << ',' << z(rng) / 2 << ",0.5\n";
    const auto t = read_table(csv.str(), movement_schema());
    const auto once = clean(t, {});
    EXPECT_EQ(clean(once, {}), once);
    EXPECT_LE(once.rows(), t.rows());
    for (std::size_t r = 0; r < once.rows(); ++r)
      EXPECT_FALSE(is_afk(once.numeric("walkDistance")[r], once.numeric("rideDistance")[r],
                          once.numeric("swimDistance")[r], once.numeric("kills")[r]));
  }
}

TEST(Summarize, ZeroFractionOfKills) {
  const auto t = read_table("kills,winPlacePerc\n0,0.1\n0,0.2\n1,0.3\n", simple_schema({"kills", "winPlacePerc"}, "winPlacePerc"));
  const auto s = summarize(t);
  EXPECT_DOUBLE_EQ(s.numeric[0].zero_fraction, 2.0 / 3.0);
}

TEST(Summarize, SingleRowHasEqualMinMaxMean) {
  const auto t = read_table("kills,walkDistance,winPlacePerc\n4,12.5,0.3\n",
                            simple_schema({"kills", "walkDistance", "winPlacePerc"}, "winPlacePerc"));
  for (const auto& n : summarize(t).numeric) {
    EXPECT_EQ(n.min, n.max);
    EXPECT_EQ(n.min, n.mean);
  }
}

TEST(Summarize, EmptyTableIsError) {
  const auto t = read_table("kills,winPlacePerc\n", simple_schema({"kills", "winPlacePerc"}, "winPlacePerc"));
  EXPECT_THROW(summarize(t), EmptyInputError);
}

TEST(Summarize, MatchTypesAndZeroMovement) {
  const Schema s({{"matchType", ColumnKind::categorical}, {"walkDistance", ColumnKind::numeric},
                  {"rideDistance", ColumnKind::numeric}, {"swimDistance", ColumnKind::numeric},
                  {"winPlacePerc", ColumnKind::numeric}},
                 "winPlacePerc");
  const auto t = read_table(
      "matchType,walkDistance,rideDistance,swimDistance,winPlacePerc\n"
      "solo,0,0,0,0\nsolo-fpp,1,0,0,0\nduo-fpp,2,0,0,0\nsquad-fpp,0,0,0,0\nnormal-squad,1,0,0,0\n",
      s);
  const auto stats = summarize(t);
  ASSERT_TRUE(stats.match_types);
  EXPECT_DOUBLE_EQ(stats.match_types->solo, 0.4);
  EXPECT_DOUBLE_EQ(stats.match_types->duo, 0.2);
  EXPECT_DOUBLE_EQ(stats.match_types->squad, 0.4);
  ASSERT_TRUE(stats.zero_distance_fraction);
  EXPECT_DOUBLE_EQ(*stats.zero_distance_fraction, 0.4);
  std::size_t total = 0;
  for (const auto& [v, c] : stats.categorical[0].frequencies) total += c;
  EXPECT_EQ(total, t.rows());
}

TEST(Summarize, MatchesNaiveOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  std::uniform_int_distribution<int> rows_dist(1, 1000);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = rows_dist(rng);
    std::ostringstream csv;
    csv << "a,b,winPlacePerc\n";
    std::vector<double> a, b;
    for (int r = 0; r < rows; ++r) {
      a.push_back(std::round(u(rng)));
      b.push_back(u(rng));
      csv << Table::format_real(a.back()) << ',' << Table::format_real(b.back()) << ",0\n";
    }
    const auto s = summarize(read_table(csv.str(), simple_schema({"a", "b", "winPlacePerc"}, "winPlacePerc")));
    for (int k = 0; k < 2; ++k) {
      const auto& v = k == 0 ? a : b;
      double mn = v[0], mx = v[0], sum = 0;
      int zeros = 0;
      for (double x : v) {
        mn = std::min(mn, x);
        mx = std::max(mx, x);
        sum += x;
        zeros += x == 0.0;
      }
      const double mean = sum / rows;
      EXPECT_EQ(s.numeric[k].min, mn);
      EXPECT_EQ(s.numeric[k].max, mx);
      EXPECT_NEAR(s.numeric[k].mean, mean, 1e-9 * std::max(1.0, std::abs(mean)));
      EXPECT_DOUBLE_EQ(s.numeric[k].zero_fraction, static_cast<double>(zeros) / rows);
    }
  }
}
