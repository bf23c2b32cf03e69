#include "traitscale/gapfill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "traitscale/error.hpp"
#include "traitscale/parallel.hpp"
#include "traitscale/rng.hpp"

namespace traitscale {

GapfillGrid GapfillGrid::defaults() {
  GapfillGrid grid;
  for (int n_trees : {50, 100, 200})
    for (double lr : {0.05, 0.1, 0.3})
      for (int max_splits : {15, 63, 255}) grid.points.push_back({n_trees, lr, max_splits});
  return grid;
}

namespace {

ForestParams boosted_params(const ForestHyper& h, int n_threads) {
  ForestParams p;
  p.mode = ForestMode::Boosted;
  p.task = TreeTask::Regression;
  p.n_trees = h.n_trees;
  p.learning_rate = h.learning_rate;
  p.tree.max_splits = h.max_splits;
  p.n_threads = n_threads;
  return p;
}

}  // namespace

std::pair<TraitTable, GapfillReport> gapfill_trait(const TraitTable& table, Trait trait,
                                                   const GapfillGrid& grid, int folds,
                                                   uint64_t seed, int n_threads) {
  if (grid.points.empty()) throw Error("gapfill_trait: degenerate (empty) grid");
  if (folds < 2) throw Error("gapfill_trait: need at least 2 folds");

  const int trait_idx = static_cast<int>(trait);
  std::vector<size_t> observed, missing;
  for (size_t i = 0; i < table.size(); ++i) {
    if (is_missing(table[i].trait(trait)))
      missing.push_back(i);
    else
      observed.push_back(i);
  }
  if (observed.empty())
    throw Error("gapfill_trait: trait column fully missing: " + std::string(trait_name(trait)));
  if (observed.size() < static_cast<size_t>(2 * folds))
    throw Error("gapfill_trait: too few observed values for " +
                std::string(trait_name(trait)) + " (need >= " + std::to_string(2 * folds) + ")");

  const ColumnSchema schema = gapfill_predictor_schema(table, trait);
  const DataTable data = gapfill_predictor_matrix(table, trait, schema);
  std::vector<double> targets(table.size(), kMissingValue);
  for (size_t i : observed) targets[i] = table[i].trait(trait);

  // Fold assignment keyed on record_id so ingestion order is irrelevant.
  const uint64_t fold_seed = seed ^ (0x9e3779b97f4a7c15ull * (trait_idx + 1));
  std::vector<int> fold_of(table.size(), -1);
  for (size_t i : observed)
    fold_of[i] = static_cast<int>(stable_key_hash(table[i].record_id, fold_seed) %
                                  static_cast<uint64_t>(folds));

  struct CvResult {
    double rmse = 0.0;
    RegressionMetrics metrics;
    bool computed = false;
  };
  const size_t n_jobs = grid.points.size() * static_cast<size_t>(folds);
  std::vector<std::vector<double>> fold_preds(n_jobs);

  parallel_for(n_jobs, n_threads, [&](size_t job) {
    const size_t g = job / static_cast<size_t>(folds);
    const int fold = static_cast<int>(job % static_cast<size_t>(folds));
    std::vector<size_t> train_rows, test_rows;
    for (size_t i : observed)
      (fold_of[i] == fold ? test_rows : train_rows).push_back(i);
    if (test_rows.empty()) return;
    if (train_rows.empty()) throw Error("gapfill_trait: empty training fold");

    ForestParams params = boosted_params(grid.points[g], 1);
    // Fit on the training subset by masking held-out targets.
    std::vector<double> masked = targets;
    for (size_t i : test_rows) masked[i] = kMissingValue;
    ForestModel model = fit_forest(data, masked, params,
                                   RngStream::derive(seed, g * 1000 + fold).next_u64());

    std::vector<double>& preds = fold_preds[job];
    preds.resize(test_rows.size());
    std::vector<double> row(data.n_cols());
    for (size_t t = 0; t < test_rows.size(); ++t) {
      for (size_t c = 0; c < data.n_cols(); ++c) row[c] = data.at(test_rows[t], c);
      preds[t] = predict_forest(model, row).value;
    }
  });

  // Pool held-out predictions per grid point and score.
  std::vector<CvResult> results(grid.points.size());
  for (size_t g = 0; g < grid.points.size(); ++g) {
    std::vector<double> pred, obs;
    for (int fold = 0; fold < folds; ++fold) {
      const size_t job = g * static_cast<size_t>(folds) + static_cast<size_t>(fold);
      size_t t = 0;
      for (size_t i : observed) {
        if (fold_of[i] != fold) continue;
        pred.push_back(fold_preds[job][t++]);
        obs.push_back(targets[i]);
      }
    }
    if (pred.size() < 2) continue;
    results[g].metrics = compute_metrics(pred, obs);
    results[g].rmse = results[g].metrics.rmse;
    results[g].computed = true;
  }

  size_t best = 0;
  bool any = false;
  for (size_t g = 0; g < results.size(); ++g) {
    if (!results[g].computed) continue;
    if (!any || results[g].rmse < results[best].rmse) {
      best = g;
      any = true;
    }
  }
  if (!any) throw Error("gapfill_trait: cross-validation produced no scores");

  GapfillReport report;
  report.trait = trait;
  report.me = results[best].metrics.me;
  report.rmse = results[best].metrics.rmse;
  report.r = results[best].metrics.r;
  report.n_samples = observed.size();
  report.missing_fraction =
      table.size() == 0 ? 0.0
                        : static_cast<double>(missing.size()) / static_cast<double>(table.size());
  double mean = 0.0;
  for (size_t i : observed) mean += targets[i];
  report.mean_value = mean / static_cast<double>(observed.size());
  report.chosen = grid.points[best];

  std::vector<TraitRecord> records = table.records();
  if (!missing.empty()) {
    ForestParams params = boosted_params(grid.points[best], n_threads);
    ForestModel model =
        fit_forest(data, targets, params, RngStream::derive(seed, 0xf17ull + best).next_u64());
    std::vector<double> row(data.n_cols());
    for (size_t i : missing) {
      for (size_t c = 0; c < data.n_cols(); ++c) row[c] = data.at(i, c);
      records[i].set_trait(trait, predict_forest(model, row).value);
    }
  }
  return {TraitTable(std::move(records)), report};
}

std::pair<ImputedTable, std::vector<GapfillReport>> gapfill_all(const TraitTable& table,
                                                                const GapfillGrid& grid,
                                                                int folds, uint64_t seed,
                                                                int n_threads) {
  ImputedTable out;
  out.provenance.resize(table.size());
  for (size_t i = 0; i < table.size(); ++i)
    for (int t = 0; t < kNumTraits; ++t)
      out.provenance[i][t] = is_missing(table[i].traits[t])
                                 ? static_cast<uint8_t>(CellProvenance::Imputed)
                                 : static_cast<uint8_t>(CellProvenance::Observed);

  TraitTable working = table;
  std::vector<GapfillReport> reports;
  for (Trait trait : kAllTraits) {
    auto [next, report] = gapfill_trait(working, trait, grid, folds, seed, n_threads);
    working = std::move(next);
    reports.push_back(report);
  }
  out.table = std::move(working);
  return {std::move(out), std::move(reports)};
}

void write_gapfill_reports(const std::vector<GapfillReport>& reports,
                           const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["report"] = "gapfill";
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j;
    j["trait"] = std::string(trait_name(r.trait));
    j["me"] = r.me;
    j["rmse"] = r.rmse;
    if (r.r.has_value())
      j["r"] = *r.r;
    else
      j["r"] = nullptr;
    j["samples"] = r.n_samples;
    j["missing_pct"] = 100.0 * r.missing_fraction;
    j["mean_value"] = r.mean_value;
    j["chosen_params"] = {{"n_trees", r.chosen.n_trees},
                          {"learning_rate", r.chosen.learning_rate},
                          {"max_splits", r.chosen.max_splits}};
    arr.push_back(j);
  }
  doc["traits"] = arr;
  std::ofstream out(path);
  if (!out) throw Error("cannot write gapfill report: " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace traitscale
