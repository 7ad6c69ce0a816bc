#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "log.hpp"
#include "parallel.hpp"

namespace pubgml {

enum class ColumnKind { numeric, categorical, identifier };

inline std::string to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::identifier: return "identifier";
  }
  return "numeric";
}

inline ColumnKind parse_column_kind(std::string_view s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "categorical") return ColumnKind::categorical;
  if (s == "identifier") return ColumnKind::identifier;
  throw ParseError("unknown column kind '" + std::string(s) + "'");
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  bool operator==(const ColumnSpec&) const = default;
};

/// Ordered column list plus the name of the label column.
///
/// Invariants (checked on construction): names are unique, the target is a
/// numeric column, and at least one column is neither the target nor an
/// identifier.
class Schema {
 public:
  Schema() = default;
  Schema(std::vector<ColumnSpec> columns, std::string target)
      : columns_(std::move(columns)), target_(std::move(target)) {
    validate();
  }

  const std::vector<ColumnSpec>& columns() const { return columns_; }
  const std::string& target() const { return target_; }
  std::size_t size() const { return columns_.size(); }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i].name == name) return i;
    return std::nullopt;
  }
  bool contains(std::string_view name) const { return find(name).has_value(); }

  std::size_t index_of(std::string_view name) const {
    auto idx = find(name);
    if (!idx) throw SchemaError("missing column '" + std::string(name) + "'");
    return *idx;
  }

  bool operator==(const Schema&) const = default;

  nlohmann::json to_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : columns_) cols.push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
    return {{"columns", cols}, {"target", target_}};
  }

  static Schema from_json(const nlohmann::json& j) {
    try {
      std::vector<ColumnSpec> cols;
      for (const auto& c : j.at("columns"))
        cols.push_back({c.at("name").get<std::string>(),
                        parse_column_kind(c.value("kind", std::string("numeric")))});
      return Schema(std::move(cols), j.at("target").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed schema document: ") + e.what());
    }
  }

 private:
  void validate() const {
    std::unordered_set<std::string> seen;
    bool has_feature = false;
    for (const auto& c : columns_) {
      if (!seen.insert(c.name).second) throw SchemaError("duplicate column '" + c.name + "'");
      if (c.name != target_ && c.kind != ColumnKind::identifier) has_feature = true;
    }
    auto t = find(target_);
    if (!t) throw SchemaError("missing column '" + target_ + "' (target)");
    if (columns_[*t].kind != ColumnKind::numeric)
      throw SchemaError("target column '" + target_ + "' must be numeric");
    if (!has_feature) throw SchemaError("schema has no feature column");
  }

  std::vector<ColumnSpec> columns_;
  std::string target_;
};

/// The 29-column layout of the public PUBG finish-placement training file.
inline Schema default_pubg_schema() {
  using K = ColumnKind;
  return Schema({{"Id", K::identifier},          {"groupId", K::identifier},
                 {"matchId", K::identifier},     {"assists", K::numeric},
                 {"boosts", K::numeric},         {"damageDealt", K::numeric},
                 {"DBNOs", K::numeric},          {"headshotKills", K::numeric},
                 {"heals", K::numeric},          {"killPlace", K::numeric},
                 {"killPoints", K::numeric},     {"kills", K::numeric},
                 {"killStreaks", K::numeric},    {"longestKill", K::numeric},
                 {"matchDuration", K::numeric},  {"matchType", K::categorical},
                 {"maxPlace", K::numeric},       {"numGroups", K::numeric},
                 {"rankPoints", K::numeric},     {"revives", K::numeric},
                 {"rideDistance", K::numeric},   {"roadKills", K::numeric},
                 {"swimDistance", K::numeric},   {"teamKills", K::numeric},
                 {"vehicleDestroys", K::numeric}, {"walkDistance", K::numeric},
                 {"weaponsAcquired", K::numeric}, {"winPoints", K::numeric},
                 {"winPlacePerc", K::numeric}},
                "winPlacePerc");
}

/// One column of a Table. Numeric columns use `values`; categorical and
/// identifier columns are dictionary encoded (`codes` index `dictionary`).
struct Column {
  ColumnKind kind = ColumnKind::numeric;
  std::vector<double> values;
  std::vector<std::uint32_t> codes;
  std::vector<std::string> dictionary;

  static Column numeric(std::vector<double> v) {
    Column c;
    c.values = std::move(v);
    return c;
  }

  std::size_t size() const { return kind == ColumnKind::numeric ? values.size() : codes.size(); }
  bool operator==(const Column&) const = default;
};

/// Builds dictionary-encoded columns with first-occurrence code order.
class DictionaryBuilder {
 public:
  std::uint32_t code(std::string_view s) {
    auto it = index_.find(std::string(s));
    if (it != index_.end()) return it->second;
    const auto c = static_cast<std::uint32_t>(dictionary_.size());
    dictionary_.emplace_back(s);
    index_.emplace(dictionary_.back(), c);
    return c;
  }
  std::vector<std::string> take() { return std::move(dictionary_); }

 private:
  std::vector<std::string> dictionary_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Immutable column store. Column i of the data corresponds to schema column i.
class Table {
 public:
  Table() = default;
  Table(Schema schema, std::vector<Column> columns)
      : schema_(std::move(schema)), columns_(std::move(columns)) {
    if (columns_.size() != schema_.size())
      throw SchemaError("column count does not match schema");
    rows_ = columns_.empty() ? 0 : columns_.front().size();
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      const auto& spec = schema_.columns()[i];
      auto& col = columns_[i];
      if (col.kind != spec.kind) throw SchemaError("column '" + spec.name + "' kind mismatch");
      if (col.size() != rows_) throw SchemaError("column '" + spec.name + "' has wrong length");
      if (col.kind != ColumnKind::numeric) {
        for (auto code : col.codes)
          if (code >= col.dictionary.size())
            throw SchemaError("column '" + spec.name + "' has a code outside its dictionary");
      }
    }
    if (schema_.target() == "winPlacePerc") {
      for (double v : numeric(schema_.target()))
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("winPlacePerc value outside [0, 1]");
    }
  }

  const Schema& schema() const { return schema_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return columns_.size(); }
  bool has(std::string_view name) const { return schema_.contains(name); }

  const Column& column(std::size_t i) const { return columns_.at(i); }
  const Column& column(std::string_view name) const { return columns_[schema_.index_of(name)]; }
  const std::vector<Column>& columns() const { return columns_; }

  std::span<const double> numeric(std::string_view name) const {
    const auto& c = column(name);
    if (c.kind != ColumnKind::numeric)
      throw SchemaError("column '" + std::string(name) + "' is not numeric");
    return c.values;
  }

  std::span<const double> target() const { return numeric(schema_.target()); }

  /// Non-target, non-identifier column names in schema order.
  std::vector<std::string> feature_names() const {
    std::vector<std::string> out;
    for (const auto& c : schema_.columns())
      if (c.name != schema_.target() && c.kind != ColumnKind::identifier) out.push_back(c.name);
    return out;
  }

  std::string cell_string(std::size_t col, std::size_t row) const {
    const auto& c = columns_[col];
    if (c.kind != ColumnKind::numeric) return c.dictionary[c.codes[row]];
    return format_real(c.values[row]);
  }

  /// Rows at `indices`, in that order. Dictionaries are kept as-is.
  Table select_rows(std::span<const std::size_t> indices) const {
    std::vector<Column> cols;
    cols.reserve(columns_.size());
    for (const auto& c : columns_) {
      Column out;
      out.kind = c.kind;
      out.dictionary = c.dictionary;
      if (c.kind == ColumnKind::numeric) {
        out.values.reserve(indices.size());
        for (auto r : indices) out.values.push_back(c.values.at(r));
      } else {
        out.codes.reserve(indices.size());
        for (auto r : indices) out.codes.push_back(c.codes.at(r));
      }
      cols.push_back(std::move(out));
    }
    return Table(schema_, std::move(cols));
  }

  /// Keeps columns for which keep(spec) is true, in schema order.
  Table select_columns(const std::function<bool(const ColumnSpec&)>& keep) const {
    std::vector<ColumnSpec> specs;
    std::vector<Column> cols;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (!keep(schema_.columns()[i])) continue;
      specs.push_back(schema_.columns()[i]);
      cols.push_back(columns_[i]);
    }
    return Table(Schema(std::move(specs), schema_.target()), std::move(cols));
  }

  /// Appends a column; a duplicate name is a schema error.
  Table with_column(ColumnSpec spec, Column col) const {
    if (schema_.contains(spec.name))
      throw SchemaError("column '" + spec.name + "' already exists");
    auto specs = schema_.columns();
    auto cols = columns_;
    col.kind = spec.kind;
    specs.push_back(std::move(spec));
    cols.push_back(std::move(col));
    return Table(Schema(std::move(specs), schema_.target()), std::move(cols));
  }

  bool operator==(const Table& o) const {
    return schema_ == o.schema_ && rows_ == o.rows_ && columns_ == o.columns_;
  }

  /// Shortest text that parses back to the identical double.
  static std::string format_real(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
  }

 private:
  Schema schema_;
  std::vector<Column> columns_;
  std::size_t rows_ = 0;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line, std::string& scratch) {
  std::vector<std::string_view> cells;
  if (line.find('"') == std::string_view::npos) {
    std::size_t start = 0;
    while (true) {
      auto pos = line.find(',', start);
      if (pos == std::string_view::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    return cells;
  }
  // Quoted fields: unescape into scratch, then slice.
  scratch.clear();
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t begin = 0;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          scratch.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        scratch.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      spans.emplace_back(begin, scratch.size() - begin);
      begin = scratch.size();
    } else {
      scratch.push_back(ch);
    }
  }
  spans.emplace_back(begin, scratch.size() - begin);
  std::string_view all(scratch);
  for (auto [b, n] : spans) cells.push_back(all.substr(b, n));
  return cells;
}

inline std::optional<double> parse_real(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

inline std::vector<std::string> read_csv_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("CSV input is empty (no header row)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::string scratch;
  std::vector<std::string> header;
  for (auto cell : split_csv_line(line, scratch)) header.emplace_back(cell);
  return header;
}

}  // namespace detail

/// Parses CSV text from a stream against `schema`. Header order may differ
/// from schema order; the returned table follows schema order.
///
/// A blank or non-numeric target cell drops that row with a warning; any
/// other unparseable numeric cell is a ParseError naming line and column.
inline Table read_csv(std::istream& in, const Schema& schema) {
  const auto header = detail::read_csv_header(in);
  std::vector<std::size_t> slot_of_cell(header.size());
  std::vector<bool> present(schema.size(), false);
  for (std::size_t i = 0; i < header.size(); ++i) {
    auto idx = schema.find(header[i]);
    if (!idx) throw SchemaError("unexpected column '" + header[i] + "' not in schema");
    if (present[*idx]) throw SchemaError("duplicate column '" + header[i] + "' in header");
    present[*idx] = true;
    slot_of_cell[i] = *idx;
  }
  for (std::size_t s = 0; s < schema.size(); ++s)
    if (!present[s]) throw SchemaError("missing column '" + schema.columns()[s].name + "'");

  const std::size_t ncol = schema.size();
  const std::size_t target_slot = schema.index_of(schema.target());
  std::vector<Column> cols(ncol);
  std::vector<DictionaryBuilder> dicts(ncol);
  for (std::size_t s = 0; s < ncol; ++s) cols[s].kind = schema.columns()[s].kind;

  std::string line, scratch;
  std::vector<double> row_values(ncol);
  std::vector<std::string_view> row_strings(ncol);
  std::size_t line_no = 1;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line, scratch);
    if (cells.size() != header.size())
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, found " +
                       std::to_string(cells.size()));
    bool drop = false;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::size_t s = slot_of_cell[i];
      if (cols[s].kind != ColumnKind::numeric) {
        row_strings[s] = cells[i];
        continue;
      }
      auto v = detail::parse_real(cells[i]);
      if (!v) {
        if (s == target_slot) {
          log::warn("line " + std::to_string(line_no) + ": unusable " + schema.target() +
                    " value '" + std::string(cells[i]) + "', row dropped");
          drop = true;
          break;
        }
        throw ParseError("line " + std::to_string(line_no) + ", column '" + header[i] +
                         "': cannot parse '" + std::string(cells[i]) + "' as a number");
      }
      row_values[s] = *v;
    }
    if (drop) {
      ++dropped;
      continue;
    }
    for (std::size_t s = 0; s < ncol; ++s) {
      if (cols[s].kind == ColumnKind::numeric)
        cols[s].values.push_back(row_values[s]);
      else
        cols[s].codes.push_back(dicts[s].code(row_strings[s]));
    }
  }
  for (std::size_t s = 0; s < ncol; ++s)
    if (cols[s].kind != ColumnKind::numeric) cols[s].dictionary = dicts[s].take();
  if (dropped > 0) log::warn(std::to_string(dropped) + " row(s) dropped for unusable labels");
  return Table(schema, std::move(cols));
}

inline Table load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_csv(in, schema);
}

/// Adds any header column unknown to `base` as a numeric column, so files
/// produced by later pipeline stages (e.g. engineered features) load with the
/// base schema. Columns of `base` absent from the header are dropped.
inline Schema schema_for_header(const std::vector<std::string>& header, const Schema& base) {
  std::vector<ColumnSpec> cols;
  for (const auto& name : header) {
    if (auto idx = base.find(name))
      cols.push_back(base.columns()[*idx]);
    else
      cols.push_back({name, ColumnKind::numeric});
  }
  return Schema(std::move(cols), base.target());
}

inline std::vector<std::string> read_csv_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return detail::read_csv_header(in);
}

inline void write_csv(const Table& table, std::ostream& out) {
  const auto& specs = table.schema().columns();
  for (std::size_t c = 0; c < specs.size(); ++c)
    out << (c ? "," : "") << detail::csv_escape(specs[c].name);
  out << '\n';
  std::string line;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    line.clear();
    for (std::size_t c = 0; c < specs.size(); ++c) {
      if (c) line += ',';
      line += detail::csv_escape(table.cell_string(c, r));
    }
    line += '\n';
    out << line;
  }
}

inline void save_csv(const Table& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  write_csv(table, out);
}

// ---------------------------------------------------------------------------
// Cleaning

struct CleanRules {
  bool drop_identifiers = true;
  bool drop_afk = true;
};

/// True for rows with no movement at all and no kills.
inline bool is_afk(double walk, double ride, double swim, double kills) {
  return walk + ride + swim == 0.0 && kills == 0.0;
}

inline Table clean(const Table& table, const CleanRules& rules) {
  Table out = table;
  if (rules.drop_afk) {
    for (const char* name : {"walkDistance", "rideDistance", "swimDistance", "kills"})
      if (!table.has(name)) throw SchemaError(std::string("missing column '") + name + "' required to drop AFK rows");
    auto walk = table.numeric("walkDistance");
    auto ride = table.numeric("rideDistance");
    auto swim = table.numeric("swimDistance");
    auto kills = table.numeric("kills");
    std::vector<std::size_t> keep;
    keep.reserve(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r)
      if (!is_afk(walk[r], ride[r], swim[r], kills[r])) keep.push_back(r);
    if (keep.size() != table.rows()) out = table.select_rows(keep);
  }
  if (rules.drop_identifiers)
    out = out.select_columns([](const ColumnSpec& c) { return c.kind != ColumnKind::identifier; });
  return out;
}

// ---------------------------------------------------------------------------
// Summary statistics

struct NumericSummary {
  std::string name;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double zero_fraction = 0.0;
};

struct CategoricalSummary {
  std::string name;
  std::vector<std::pair<std::string, std::size_t>> frequencies;  // dictionary order
};

struct MatchTypeFractions {
  double solo = 0.0;
  double duo = 0.0;
  double squad = 0.0;
};

struct SummaryStats {
  std::size_t rows = 0;
  std::vector<NumericSummary> numeric;
  std::vector<CategoricalSummary> categorical;
  std::optional<MatchTypeFractions> match_types;
  std::optional<double> zero_distance_fraction;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["rows"] = rows;
    j["numeric"] = nlohmann::json::array();
    for (const auto& n : numeric)
      j["numeric"].push_back({{"name", n.name},
                              {"min", n.min},
                              {"max", n.max},
                              {"mean", n.mean},
                              {"zero_fraction", n.zero_fraction}});
    j["categorical"] = nlohmann::json::array();
    for (const auto& c : categorical) {
      nlohmann::json freq = nlohmann::json::object();
      for (const auto& [value, count] : c.frequencies) freq[value] = count;
      j["categorical"].push_back({{"name", c.name}, {"frequencies", freq}});
    }
    if (match_types)
      j["match_types"] = {{"solo", match_types->solo}, {"duo", match_types->duo}, {"squad", match_types->squad}};
    if (zero_distance_fraction) j["zero_distance_fraction"] = *zero_distance_fraction;
    return j;
  }
};

/// Per-column statistics over all rows. Identifier columns are skipped.
inline SummaryStats summarize(const Table& table) {
  if (table.rows() == 0) throw EmptyInputError("cannot summarize an empty table");
  SummaryStats out;
  out.rows = table.rows();
  const auto& specs = table.schema().columns();
  const double n = static_cast<double>(table.rows());

  std::vector<std::size_t> numeric_idx, categorical_idx;
  for (std::size_t c = 0; c < specs.size(); ++c) {
    if (specs[c].kind == ColumnKind::numeric) numeric_idx.push_back(c);
    if (specs[c].kind == ColumnKind::categorical) categorical_idx.push_back(c);
  }
  out.numeric.resize(numeric_idx.size());
  parallel_for(numeric_idx.size(), [&](std::size_t k) {
    const auto& v = table.column(numeric_idx[k]).values;
    NumericSummary s{specs[numeric_idx[k]].name, v[0], v[0], 0.0, 0.0};
    double sum = 0.0;
    std::size_t zeros = 0;
    for (double x : v) {
      s.min = std::min(s.min, x);
      s.max = std::max(s.max, x);
      sum += x;
      zeros += (x == 0.0);
    }
    s.mean = sum / n;
    s.zero_fraction = static_cast<double>(zeros) / n;
    out.numeric[k] = std::move(s);
  });
  for (auto c : categorical_idx) {
    const auto& col = table.column(c);
    std::vector<std::size_t> counts(col.dictionary.size(), 0);
    for (auto code : col.codes) ++counts[code];
    CategoricalSummary s{specs[c].name, {}};
    for (std::size_t i = 0; i < counts.size(); ++i) s.frequencies.emplace_back(col.dictionary[i], counts[i]);
    out.categorical.push_back(std::move(s));
  }

  if (table.has("matchType") && table.schema().columns()[table.schema().index_of("matchType")].kind ==
                                    ColumnKind::categorical) {
    const auto& col = table.column("matchType");
    std::vector<int> group(col.dictionary.size(), -1);
    for (std::size_t i = 0; i < col.dictionary.size(); ++i) {
      std::string lower = col.dictionary[i];
      std::transform(lower.begin(), lower.end(), lower.begin(),
                     [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
      if (lower.find("solo") != std::string::npos) group[i] = 0;
      else if (lower.find("duo") != std::string::npos) group[i] = 1;
      else if (lower.find("squad") != std::string::npos) group[i] = 2;
    }
    std::size_t counts[3] = {0, 0, 0};
    for (auto code : col.codes)
      if (group[code] >= 0) ++counts[group[code]];
    out.match_types = MatchTypeFractions{static_cast<double>(counts[0]) / n,
                                         static_cast<double>(counts[1]) / n,
                                         static_cast<double>(counts[2]) / n};
  }

  if (table.has("walkDistance") && table.has("rideDistance") && table.has("swimDistance")) {
    auto walk = table.numeric("walkDistance");
    auto ride = table.numeric("rideDistance");
    auto swim = table.numeric("swimDistance");
    std::size_t still = 0;
    for (std::size_t r = 0; r < table.rows(); ++r) still += (walk[r] + ride[r] + swim[r] == 0.0);
    out.zero_distance_fraction = static_cast<double>(still) / n;
  }
  return out;
}

}  // namespace pubgml
