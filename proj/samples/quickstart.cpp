// Generates a small synthetic dataset, prepares it the way the CLI does and
// cross-validates a baseline, an M5P model tree and a boosted ensemble.
#include <iostream>

#include <pubgml/pubgml.hpp>

int main() {
  using namespace pubgml;
  SynthConfig synth;
  synth.n_matches = 60;
  const auto data = generate(synth);

  PipelineConfig cfg;
  const auto table = prepare_table(data.table, cfg);
  std::cout << "rows after cleaning: " << table.rows() << ", features: " << table.feature_names().size() << "\n";

  const auto ranking = rank_by_correlation(table, table.schema().target());
  std::cout << ranking.to_text();

  GbmParams gbm;
  gbm.n_iterations = 100;
  const auto plan = kfold(table.rows(), 5, 7);
  for (const auto& spec : {ModelSpec::baseline(), ModelSpec::m5p(), ModelSpec::gbm(gbm)}) {
    const auto report = cross_validate(spec, table, plan);
    std::cout << report.model << ": mae " << report.mean_mae << " rmse " << report.mean_rmse << "\n";
  }
}
