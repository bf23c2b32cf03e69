#include "traitscale/classify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "traitscale/error.hpp"
#include "traitscale/parallel.hpp"
#include "traitscale/rng.hpp"

namespace traitscale {

SampleSelection select_training_samples(const RasterGrid& reference, const RasterGrid& quality,
                                        int per_class, double threshold, uint64_t seed) {
  if (!reference.geometry().same_grid(quality.geometry()))
    throw Error("select_training_samples: reference/quality geometry mismatch");
  if (per_class < 1) throw Error("select_training_samples: per_class must be >= 1");

  std::array<std::vector<size_t>, kNumPft> qualifying;
  for (size_t i = 0; i < reference.size(); ++i) {
    const double v = reference[i];
    if (reference.is_nodata(v)) continue;
    if (!(quality[i] > threshold)) continue;
    const auto pft = pft_from_code(static_cast<int>(std::lround(v)));
    if (!pft) continue;
    qualifying[pft_index(*pft)].push_back(i);
  }

  SampleSelection out;
  RngStream rng(seed);
  for (PftClass pft : kAllPft) {
    auto& pool = qualifying[pft_index(pft)];
    const size_t want = static_cast<size_t>(per_class);
    if (pool.size() < want) out.shortfalls.emplace_back(pft, pool.size());
    auto picks = rng.sample_without_replacement(pool.size(), std::min(want, pool.size()));
    std::sort(picks.begin(), picks.end());
    for (size_t p : picks) out.samples.push_back({pool[p], pft});
  }
  return out;
}

ClassifierResult train_classifier(const FeatureSet& features, const SampleSelection& samples,
                                  const ForestParams& params_in, uint64_t seed) {
  if (samples.samples.empty()) throw Error("train_classifier: no samples");

  // Class-stratified 50/50 train/validation split.
  std::array<std::vector<size_t>, kNumPft> by_class;
  for (size_t i = 0; i < samples.samples.size(); ++i)
    by_class[pft_index(samples.samples[i].label)].push_back(i);
  int classes_present = 0;
  for (const auto& v : by_class)
    if (!v.empty()) ++classes_present;
  if (classes_present < 2) throw Error("train_classifier: need at least 2 classes");

  RngStream rng(seed ^ 0x51a55ull);
  std::vector<size_t> train_idx, valid_idx;
  for (auto& members : by_class) {
    if (members.empty()) continue;
    rng.shuffle(members);
    const size_t half = (members.size() + 1) / 2;
    for (size_t i = 0; i < members.size(); ++i)
      (i < half ? train_idx : valid_idx).push_back(members[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(valid_idx.begin(), valid_idx.end());

  ColumnSchema schema;
  for (const auto& name : features.names)
    schema.columns.push_back({name, ColumnKind::Numeric, {}});

  DataTable data(schema);
  std::vector<double> targets;
  targets.reserve(samples.samples.size());
  for (const auto& s : samples.samples) {
    data.append_row(features.pixel_row(s.pixel));
    targets.push_back(static_cast<double>(pft_index(s.label)));
  }

  ForestParams params = params_in;
  params.task = TreeTask::Classification;
  params.mode = ForestMode::Bagged;
  params.n_classes = kNumPft;

  // Fit on the training half only.
  std::vector<double> masked = targets;
  for (size_t i : valid_idx) masked[i] = kMissingValue;
  ClassifierResult result{fit_forest(data, masked, params, seed), {}, train_idx.size(),
                          valid_idx.size()};

  std::vector<PftClass> ref, pred;
  std::vector<double> row(data.n_cols());
  for (size_t i : valid_idx) {
    for (size_t c = 0; c < data.n_cols(); ++c) row[c] = data.at(i, c);
    const ForestPrediction p = predict_forest(result.model, row);
    ref.push_back(samples.samples[i].label);
    pred.push_back(static_cast<PftClass>(p.class_index + 1));
  }
  if (!ref.empty()) result.validation = confusion_and_kappa(ref, pred);
  return result;
}

RasterGrid classify_map(const ForestModel& model, const FeatureSet& features) {
  if (model.schema.size() != features.names.size())
    throw Error("classify_map: feature band count differs from training schema");
  for (size_t i = 0; i < features.names.size(); ++i)
    if (model.schema.at(i).name != features.names[i])
      throw Error("classify_map: feature band '" + features.names[i] +
                  "' does not match training schema");

  const RasterGeometry& geom = features.geometry();
  RasterGrid out(geom);
  parallel_for(static_cast<size_t>(geom.height), 0, [&](size_t r) {
    for (int c = 0; c < geom.width; ++c) {
      const size_t i = r * static_cast<size_t>(geom.width) + c;
      std::vector<double> row = features.pixel_row(i);
      const bool all_missing =
          std::all_of(row.begin(), row.end(), [](double v) { return is_missing(v); });
      if (all_missing) continue;
      const ForestPrediction p = predict_forest(model, row);
      out.set_flat(i, static_cast<double>(p.class_index + 1));
    }
  });
  return out;
}

AbundanceGrid aggregate_abundance(const RasterGrid& fine_classes,
                                  const RasterGeometry& coarse) {
  const RasterGeometry& fine = fine_classes.geometry();
  const double ratio_d = coarse.pixel_size / fine.pixel_size;
  const int ratio = static_cast<int>(std::lround(ratio_d));
  if (ratio < 1 || std::abs(ratio_d - ratio) > 1e-9)
    throw Error("aggregate_abundance: coarse pixel size must be an integer multiple of fine");
  if (std::abs(coarse.origin_x - fine.origin_x) > 1e-9 ||
      std::abs(coarse.origin_y - fine.origin_y) > 1e-9)
    throw Error("aggregate_abundance: origins are not aligned");
  if (coarse.width * ratio != fine.width || coarse.height * ratio != fine.height)
    throw Error("aggregate_abundance: coarse grid does not tile the fine grid");

  AbundanceGrid out;
  out.geometry = coarse;
  out.fractions.assign(coarse.pixel_count(),
                       std::array<double, kNumPft>{std::nan(""), std::nan(""), std::nan(""),
                                                   std::nan(""), std::nan(""), std::nan(""),
                                                   std::nan("")});
  for (int cr = 0; cr < coarse.height; ++cr) {
    for (int cc = 0; cc < coarse.width; ++cc) {
      std::array<int64_t, kNumPft> counts{};
      int64_t valid = 0;
      for (int fr = cr * ratio; fr < (cr + 1) * ratio; ++fr) {
        for (int fc = cc * ratio; fc < (cc + 1) * ratio; ++fc) {
          const double v = fine_classes.at(fr, fc);
          if (fine_classes.is_nodata(v)) continue;
          const auto pft = pft_from_code(static_cast<int>(std::lround(v)));
          if (!pft) continue;
          ++counts[pft_index(*pft)];
          ++valid;
        }
      }
      if (valid == 0) continue;
      auto& frac = out.fractions[static_cast<size_t>(cr) * coarse.width + cc];
      for (int k = 0; k < kNumPft; ++k)
        frac[k] = static_cast<double>(counts[k]) / static_cast<double>(valid);
    }
  }
  return out;
}

void write_abundance(const AbundanceGrid& grid, const std::filesystem::path& path) {
  std::vector<RasterGrid> planes;
  planes.reserve(kNumPft);
  for (int k = 0; k < kNumPft; ++k) {
    RasterGrid plane(grid.geometry);
    for (size_t i = 0; i < grid.fractions.size(); ++i)
      if (grid.valid(i)) plane.set_flat(i, grid.fractions[i][k]);
    planes.push_back(std::move(plane));
  }
  TsrHeader header;
  header.band_id = "pft_abundance";
  for (PftClass p : kAllPft) header.class_codes[std::string(pft_name(p))] = pft_code(p);
  write_tsr_planes(path, planes, header);
}

AbundanceGrid read_abundance(const std::filesystem::path& path) {
  TsrFile file = read_tsr(path);
  if (file.planes.size() != kNumPft)
    throw Error("abundance raster must have " + std::to_string(kNumPft) + " planes");
  AbundanceGrid grid;
  grid.geometry = file.planes.front().geometry();
  grid.fractions.assign(grid.geometry.pixel_count(),
                        std::array<double, kNumPft>{std::nan(""), std::nan(""), std::nan(""),
                                                    std::nan(""), std::nan(""), std::nan(""),
                                                    std::nan("")});
  for (size_t i = 0; i < grid.fractions.size(); ++i) {
    if (file.planes.front().is_nodata(file.planes.front()[i])) continue;
    for (int k = 0; k < kNumPft; ++k) grid.fractions[i][k] = file.planes[k][i];
  }
  return grid;
}

void write_classification_report(const ClassifierResult& result,
                                 const std::vector<std::pair<PftClass, size_t>>& shortfalls,
                                 const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["report"] = "classification";
  doc["n_train"] = result.n_train;
  doc["n_validation"] = result.n_validation;
  doc["overall_accuracy"] = result.validation.overall_accuracy;
  if (result.validation.kappa.has_value())
    doc["kappa"] = *result.validation.kappa;
  else
    doc["kappa"] = nullptr;
  nlohmann::json matrix = nlohmann::json::array();
  for (int i = 0; i < kNumPft; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < kNumPft; ++j) row.push_back(result.validation.matrix.counts[i][j]);
    matrix.push_back(row);
  }
  doc["confusion_matrix"] = matrix;
  nlohmann::json sf = nlohmann::json::array();
  for (const auto& [pft, count] : shortfalls)
    sf.push_back({{"pft", std::string(pft_name(pft))}, {"qualifying", count}});
  doc["shortfalls"] = sf;
  std::ofstream out(path);
  if (!out) throw Error("cannot write classification report: " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace traitscale
