#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "design.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "featsel.hpp"
#include "features.hpp"
#include "log.hpp"
#include "metrics.hpp"
#include "models.hpp"
#include "parallel.hpp"
#include "synth.hpp"
#include "table.hpp"

namespace pubgml::cli {

enum ExitCode : int { ok = 0, usage = 1, failure = 2 };

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << text;
  if (!f) throw Error("failed writing '" + path + "'");
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline Table load_table(const std::string& path, const Schema& base) {
  return load_csv(path, schema_for_header(read_csv_header(path), base));
}

/// Loads a CSV that may lack the target column (as for unlabeled test
/// files); a missing target is filled with zeros.
inline Table load_unlabeled(const std::string& path, const Schema& base) {
  auto header = read_csv_header(path);
  if (std::find(header.begin(), header.end(), base.target()) != header.end()) return load_table(path, base);
  std::ifstream in(path, std::ios::binary);
  std::ostringstream patched;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    patched << line << ',' << (first ? base.target() : std::string("0")) << '\n';
    first = false;
  }
  header.push_back(base.target());
  std::istringstream src(patched.str());
  return read_csv(src, schema_for_header(header, base));
}

inline void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") out << text;
  else write_text(path, text);
}

inline std::string format_fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace detail

/// Runs one subcommand. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pubgml: PUBG finish-placement modelling pipeline", "pubgml"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::size_t threads = 1;
  bool verbose = false;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Pipeline config JSON");
  app.add_option("--threads", threads, "Worker thread cap")->check(CLI::PositiveNumber);
  app.add_flag("--verbose,-v", verbose, "Progress output on standard error");
  app.add_option("--seed", seed, "Seed for folds, models and generation");

  std::string in_path, out_path, csv_path, model_name = "gbm", model_file, selection_path, truth_path;
  std::string method, feature_set = "all";
  std::optional<std::size_t> folds;
  std::optional<double> threshold;
  const std::vector<std::string> families = {"baseline", "m5p", "forest", "gbm", "mlp"};

  auto* ingest = app.add_subcommand("ingest", "Load a CSV and print summary statistics as JSON");
  ingest->add_option("--in", in_path)->required();
  ingest->add_option("--out", out_path, "Summary JSON path (default: stdout)");

  auto* clean_cmd = app.add_subcommand("clean", "Drop AFK rows and identifier columns");
  clean_cmd->add_option("--in", in_path)->required();
  clean_cmd->add_option("--out", out_path)->required();

  auto* engineer_cmd = app.add_subcommand("engineer", "Append the engineered feature columns");
  engineer_cmd->add_option("--in", in_path)->required();
  engineer_cmd->add_option("--out", out_path)->required();

  auto* select_cmd = app.add_subcommand("select", "Score and select attributes");
  select_cmd->add_option("--in", in_path)->required();
  select_cmd->add_option("--out", out_path, "SelectionResult JSON path (default: stdout)");
  select_cmd->add_option("--method", method)->check(CLI::IsMember({"classifier", "correlation", "info_gain", "cfs"}));
  select_cmd->add_option("--threshold", threshold);
  select_cmd->add_option("--folds", folds)->check(CLI::Range(2, 1000000));
  select_cmd->add_option("--csv", csv_path, "Write the selected table here");

  auto* train = app.add_subcommand("train", "Fit a model on the whole table");
  train->add_option("--in", in_path)->required();
  train->add_option("--out", out_path)->required();
  train->add_option("--model", model_name)->check(CLI::IsMember(families));
  train->add_option("--selection", selection_path, "Restrict features to a SelectionResult JSON");

  auto* predict = app.add_subcommand("predict", "Predict with a trained model file");
  predict->add_option("--in", in_path)->required();
  predict->add_option("--out", out_path, "Predictions CSV path (default: stdout)");
  predict->add_option("--model-file", model_file)->required();

  auto* evaluate = app.add_subcommand("evaluate", "k-fold cross-validation of one model");
  evaluate->add_option("--in", in_path)->required();
  evaluate->add_option("--out", out_path, "EvalReport JSON path (default: stdout)");
  evaluate->add_option("--model", model_name)->check(CLI::IsMember(families));
  evaluate->add_option("--folds", folds)->check(CLI::Range(2, 1000000));
  evaluate->add_option("--csv", csv_path, "Per-fold CSV path");
  evaluate->add_option("--selection", selection_path, "Restrict features to a SelectionResult JSON");
  evaluate->add_option("--feature-set", feature_set, "Tag written to the report");

  auto* compare = app.add_subcommand("compare", "Four models, pre/post selection, k-fold CV");
  compare->add_option("--in", in_path)->required();
  compare->add_option("--out", out_path, "Per-fold CSV path (default: stdout)");
  compare->add_option("--report", truth_path, "Full JSON report path");
  compare->add_option("--folds", folds)->check(CLI::Range(2, 1000000));

  SynthConfig synth;
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset");
  gen->add_option("--out", out_path)->required();
  gen->add_option("--matches", synth.n_matches)->check(CLI::PositiveNumber);
  gen->add_option("--min-players", synth.min_players);
  gen->add_option("--max-players", synth.max_players);
  gen->add_option("--noise", synth.noise_sd);
  gen->add_option("--afk", synth.afk_fraction);
  gen->add_option("--truth", truth_path, "Ground-truth JSON path (default: <out>.truth.json)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return usage;
  }

  const auto old_verbosity = log::verbosity();
  const auto old_threads = max_threads();
  log::set_verbosity(verbose ? 1 : 0);
  set_max_threads(threads);
  struct Restore {
    int v;
    std::size_t t;
    ~Restore() {
      log::set_verbosity(v);
      set_max_threads(t);
    }
  } restore{old_verbosity, old_threads};

  try {
    const PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : PipelineConfig::load(config_path);

    if (*ingest) {
      const auto table = detail::load_table(in_path, cfg.schema);
      detail::emit(out_path, summarize(table).to_json().dump(2) + "\n", out);
    } else if (*clean_cmd) {
      const auto table = detail::load_table(in_path, cfg.schema);
      const auto cleaned = clean(table, cfg.clean);
      log::info("clean: kept " + std::to_string(cleaned.rows()) + " of " + std::to_string(table.rows()) + " rows");
      save_csv(cleaned, out_path);
    } else if (*engineer_cmd) {
      auto table = engineer(detail::load_table(in_path, cfg.schema), cfg.features);
      if (cfg.features.one_hot_match_type && table.has("matchType")) table = one_hot(table, "matchType");
      save_csv(table, out_path);
    } else if (*select_cmd) {
      const auto table = detail::load_table(in_path, cfg.schema);
      auto s = cfg.selection;
      if (!method.empty()) s.method = method;
      if (threshold) s.threshold = *threshold;
      if (folds) s.folds = *folds;
      if (seed) s.seed = *seed;
      const auto result = run_selection(table, s);
      err << result.to_text();
      detail::emit(out_path, result.to_json().dump(2) + "\n", out);
      if (!csv_path.empty()) save_csv(apply_selection(table, result), csv_path);
    } else if (*train) {
      auto table = detail::load_table(in_path, cfg.schema);
      if (!selection_path.empty())
        table = apply_selection(table, SelectionResult::from_json(detail::read_json(selection_path)));
      const auto spec = cfg.model_spec(parse_model_family(model_name), seed);
      const auto encoder = FeatureEncoder::fit(table);
      const auto model = fit_model(spec, encoder.encode(table), table.target());
      const nlohmann::json file = {{"format", "pubgml.trained"},
                                   {"version", 1},
                                   {"family", model_name},
                                   {"target", table.schema().target()},
                                   {"encoder", encoder.to_json()},
                                   {"model", model_to_json(model)}};
      detail::write_text(out_path, file.dump() + "\n");
    } else if (*predict) {
      const auto file = detail::read_json(model_file);
      if (file.value("format", std::string()) != "pubgml.trained")
        throw ParseError("'" + model_file + "' is not a trained model file");
      const auto encoder = FeatureEncoder::from_json(file.at("encoder"));
      const auto model = model_from_json(file.at("model"));
      const auto table = detail::load_unlabeled(in_path, cfg.schema);
      const auto pred = predict_model(model, encoder.encode(table));
      std::ostringstream csv;
      const bool ids = table.has("Id");
      const auto id_col = ids ? table.schema().index_of("Id") : 0;
      csv << (ids ? "Id," : "") << "prediction\n";
      for (std::size_t r = 0; r < pred.size(); ++r) {
        if (ids) csv << table.cell_string(id_col, r) << ',';
        csv << Table::format_real(pred[r]) << '\n';
      }
      detail::emit(out_path, csv.str(), out);
    } else if (*evaluate) {
      auto table = detail::load_table(in_path, cfg.schema);
      if (!selection_path.empty()) {
        table = apply_selection(table, SelectionResult::from_json(detail::read_json(selection_path)));
        if (feature_set == "all") feature_set = "selected";
      }
      const auto spec = cfg.model_spec(parse_model_family(model_name), seed);
      const auto plan = kfold(table.rows(), folds.value_or(cfg.eval.folds), seed.value_or(cfg.eval.seed));
      const auto report = cross_validate(spec, table, plan, feature_set);
      detail::emit(out_path, report.to_json().dump(2) + "\n", out);
      if (!csv_path.empty()) {
        std::ostringstream csv;
        EvalReport::write_csv_header(csv);
        report.write_csv_rows(csv);
        detail::write_text(csv_path, csv.str());
      }
      err << report.model << " " << report.feature_set << ": mae " << detail::format_fixed(report.mean_mae)
          << " (sd " << detail::format_fixed(report.sd_mae) << "), rmse " << detail::format_fixed(report.mean_rmse)
          << "\n";
    } else if (*compare) {
      const auto raw = detail::load_table(in_path, cfg.schema);
      const auto pre = prepare_table(raw, cfg);
      log::info("compare: " + std::to_string(pre.rows()) + " rows after cleaning and engineering");
      auto sel_cfg = cfg.selection;
      if (seed) sel_cfg.seed = *seed;
      const auto selection = run_selection(pre, sel_cfg);
      const auto post = apply_selection(pre, selection);
      const auto plan = kfold(pre.rows(), folds.value_or(cfg.eval.folds), seed.value_or(cfg.eval.seed));

      std::ostringstream csv;
      EvalReport::write_csv_header(csv);
      nlohmann::json reports = nlohmann::json::array();
      std::ostringstream table_text;
      table_text << std::left << std::setw(10) << "model" << std::setw(10) << "features" << std::right
                 << std::setw(12) << "mae" << std::setw(12) << "sd" << std::setw(12) << "rmse" << '\n';
      auto add_row = [&](const EvalReport& r) {
        table_text << std::left << std::setw(10) << r.model << std::setw(10) << r.feature_set << std::right
                   << std::setw(12) << detail::format_fixed(r.mean_mae) << std::setw(12)
                   << detail::format_fixed(r.sd_mae) << std::setw(12) << detail::format_fixed(r.mean_rmse)
                   << '\n';
      };
      const auto baseline = cross_validate(ModelSpec::baseline(), pre, plan, "all");
      add_row(baseline);
      for (auto family : {ModelFamily::m5p, ModelFamily::forest, ModelFamily::gbm, ModelFamily::mlp}) {
        const auto spec = cfg.model_spec(family, seed);
        for (const auto* t : {&pre, &post}) {
          const std::string tag = t == &pre ? "pre" : "post";
          log::info("compare: " + to_string(family) + " " + tag);
          const auto r = cross_validate(spec, *t, plan, tag);
          r.write_csv_rows(csv);
          reports.push_back(r.to_json());
          add_row(r);
        }
      }
      err << table_text.str();
      detail::emit(out_path, csv.str(), out);
      if (!truth_path.empty()) {
        const nlohmann::json report = {{"rows", pre.rows()},
                                       {"folds", plan.k},
                                       {"selection", selection.to_json()},
                                       {"baseline", baseline.to_json()},
                                       {"reports", reports}};
        detail::write_text(truth_path, report.dump(2) + "\n");
      }
    } else if (*gen) {
      if (seed) synth.seed = *seed;
      const auto data = generate(synth);
      save_csv(data.table, out_path);
      detail::write_text(truth_path.empty() ? out_path + ".truth.json" : truth_path,
                         data.ground_truth.dump(2) + "\n");
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return failure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return failure;
  }
  return ok;
}

}  // namespace pubgml::cli
