#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <pubgml/design.hpp>
#include <pubgml/table.hpp>

namespace testutil {

inline pubgml::DesignMatrix matrix(std::vector<std::vector<double>> columns) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < columns.size(); ++i) names.push_back("x" + std::to_string(i));
  return pubgml::DesignMatrix(std::move(names), std::move(columns));
}

inline pubgml::DesignMatrix one_column(std::vector<double> x) { return matrix({std::move(x)}); }

/// Random table of `cols` integer-valued features in [0, levels) so that
/// ties and repeated values are common, plus a real target.
struct RandomData {
  pubgml::DesignMatrix X;
  std::vector<double> y;
};

inline RandomData random_data(std::mt19937_64& rng, std::size_t rows, std::size_t cols, int levels) {
  std::uniform_int_distribution<int> level(0, levels - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::vector<double>> c(cols, std::vector<double>(rows));
  std::vector<double> y(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t f = 0; f < cols; ++f) {
      c[f][r] = level(rng);
      s += (f % 2 ? -1.0 : 1.0) * c[f][r] * c[f][r] * 0.1;
    }
    y[r] = s + noise(rng);
  }
  return {matrix(std::move(c)), std::move(y)};
}

inline pubgml::Table read_table(const std::string& csv, const pubgml::Schema& schema) {
  std::istringstream in(csv);
  return pubgml::read_csv(in, schema);
}

inline pubgml::Schema simple_schema(const std::vector<std::string>& numeric, const std::string& target) {
  std::vector<pubgml::ColumnSpec> cols;
  for (const auto& n : numeric) cols.push_back({n, pubgml::ColumnKind::numeric});
  return pubgml::Schema(cols, target);
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("pubgml_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace testutil
