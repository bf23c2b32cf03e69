#include "traitscale/model_io.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "traitscale/error.hpp"
#include "traitscale/parallel.hpp"

namespace traitscale {

using nlohmann::json;

TrainedTraitModel fit_final_model(Method method, const Eigen::MatrixXd& X_raw,
                                  const Eigen::VectorXd& y,
                                  const std::vector<std::string>& feature_names, Trait trait,
                                  uint64_t seed, int inner_folds) {
  if (static_cast<size_t>(X_raw.cols()) != feature_names.size())
    throw Error("fit_final_model: feature name count mismatch");

  TrainedTraitModel model;
  model.method = method;
  model.trait = trait;
  model.feature_names = feature_names;

  Eigen::MatrixXd X = X_raw;
  model.stats = standardize_features(X);

  auto regressor = make_regressor(method, inner_folds, /*production=*/true);
  regressor->fit(X, y, seed);
  regressor->export_model(model);
  model.hyper_desc = regressor->hyper_desc();
  return model;
}

namespace {

std::vector<double> standardize_row(const TrainedTraitModel& model,
                                    std::span<const double> raw) {
  std::vector<double> row(raw.size());
  for (size_t j = 0; j < raw.size(); ++j) {
    if (is_missing(raw[j]))
      row[j] = kMissingValue;
    else if (model.stats.zero_variance[j])
      row[j] = 0.0;
    else
      row[j] = (raw[j] - model.stats.mean[static_cast<Eigen::Index>(j)]) /
               model.stats.std[static_cast<Eigen::Index>(j)];
  }
  return row;
}

Eigen::MatrixXd row_to_matrix(const std::vector<double>& row) {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(row.size()));
  for (size_t j = 0; j < row.size(); ++j) m(0, static_cast<Eigen::Index>(j)) = row[j];
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = r > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)].get<double>();
  return m;
}

}  // namespace

TraitPrediction predict_trait(const TrainedTraitModel& model, std::span<const double> raw_row) {
  if (raw_row.size() != model.feature_names.size())
    throw Error("predict_trait: row width mismatch");
  const std::vector<double> row = standardize_row(model, raw_row);
  const bool any_missing =
      std::any_of(row.begin(), row.end(), [](double v) { return is_missing(v); });
  const bool all_missing =
      std::all_of(row.begin(), row.end(), [](double v) { return is_missing(v); });

  TraitPrediction out;
  if (model.forest.has_value()) {
    if (all_missing) return out;
    const ForestPrediction p = predict_forest(*model.forest, row);
    out.value = p.value;
    out.stderr_value = p.dispersion;
    out.valid = true;
    return out;
  }
  if (any_missing) return out;  // only forests route missing inputs

  const Eigen::MatrixXd X = row_to_matrix(row);
  if (model.linear.has_value()) {
    out.value = predict(*model.linear, X)[0];
  } else if (model.elm.has_value()) {
    out.value = predict(*model.elm, X)[0];
  } else if (model.kernel.has_value()) {
    out.value = kernel_predict(*model.kernel, X)[0];
    if (model.kernel->is_gpr)
      out.stderr_value = std::sqrt(gpr_predictive_variance(*model.kernel, X)[0]);
  } else {
    throw Error("predict_trait: empty model");
  }
  out.valid = true;
  return out;
}

void save_trait_model(const TrainedTraitModel& model, const std::filesystem::path& path) {
  json doc;
  doc["format_version"] = 1;
  doc["model_type"] = "trait_model";
  doc["method"] = std::string(method_name(model.method));
  doc["trait"] = std::string(trait_name(model.trait));
  doc["feature_names"] = model.feature_names;
  doc["hyper_desc"] = model.hyper_desc;
  doc["stats"] = {{"mean", vector_to_json(model.stats.mean)},
                  {"std", vector_to_json(model.stats.std)},
                  {"zero_variance", model.stats.zero_variance}};

  if (model.forest.has_value()) {
    doc["payload_kind"] = "forest";
    doc["payload"] = json::parse(forest_to_json_string(*model.forest));
  } else if (model.linear.has_value()) {
    doc["payload_kind"] = "linear";
    doc["payload"] = {{"weights", vector_to_json(model.linear->weights)},
                      {"bias", model.linear->bias},
                      {"ridge_lambda", model.linear->ridge_lambda}};
  } else if (model.elm.has_value()) {
    doc["payload_kind"] = "elm";
    doc["payload"] = {{"hidden_weights", matrix_to_json(model.elm->hidden_weights)},
                      {"hidden_bias", vector_to_json(model.elm->hidden_bias.transpose())},
                      {"output_weights", vector_to_json(model.elm->output_weights)},
                      {"output_bias", model.elm->output_bias},
                      {"ridge_lambda", model.elm->ridge_lambda},
                      {"seed", model.elm->seed}};
  } else if (model.kernel.has_value()) {
    doc["payload_kind"] = "kernel";
    const KernelModel& k = *model.kernel;
    doc["payload"] = {{"train_X", matrix_to_json(k.train_X)},
                      {"alphas", vector_to_json(k.alphas)},
                      {"alpha0", k.alpha0},
                      {"nu", k.theta.nu},
                      {"sigma_f", vector_to_json(k.theta.sigma_f)},
                      {"sigma_n", k.theta.sigma_n},
                      {"kernel", k.kernel == KernelKind::Ard ? "ard" : "linear"},
                      {"is_gpr", k.is_gpr},
                      {"chol_lower", matrix_to_json(k.chol_lower)},
                      {"jitter", k.jitter}};
  } else {
    throw Error("save_trait_model: empty model");
  }

  std::ofstream out(path);
  if (!out) throw Error("cannot write model: " + path.string());
  out << doc.dump() << "\n";
}

TrainedTraitModel load_trait_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model: " + path.string());
  json doc = json::parse(in);
  if (doc.value("format_version", 0) != 1) throw Error("unsupported trait model version");
  if (doc.value("model_type", "") != "trait_model")
    throw Error("not a trait_model document: " + path.string());

  TrainedTraitModel model;
  const auto method = method_from_name(doc.at("method").get<std::string>());
  const auto trait = trait_from_name(doc.at("trait").get<std::string>());
  if (!method || !trait) throw Error("trait model: unknown method or trait tag");
  model.method = *method;
  model.trait = *trait;
  model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
  model.hyper_desc = doc.value("hyper_desc", "");
  model.stats.mean = vector_from_json(doc.at("stats").at("mean"));
  model.stats.std = vector_from_json(doc.at("stats").at("std"));
  model.stats.zero_variance = doc.at("stats").at("zero_variance").get<std::vector<uint8_t>>();

  const std::string kind = doc.at("payload_kind").get<std::string>();
  const json& payload = doc.at("payload");
  if (kind == "forest") {
    model.forest = forest_from_json_string(payload.dump());
  } else if (kind == "linear") {
    LinearModel m;
    m.weights = vector_from_json(payload.at("weights"));
    m.bias = payload.at("bias").get<double>();
    m.ridge_lambda = payload.at("ridge_lambda").get<double>();
    model.linear = std::move(m);
  } else if (kind == "elm") {
    ElmModel m;
    m.hidden_weights = matrix_from_json(payload.at("hidden_weights"));
    m.hidden_bias = vector_from_json(payload.at("hidden_bias")).transpose();
    m.output_weights = vector_from_json(payload.at("output_weights"));
    m.output_bias = payload.at("output_bias").get<double>();
    m.ridge_lambda = payload.at("ridge_lambda").get<double>();
    m.seed = payload.at("seed").get<uint64_t>();
    model.elm = std::move(m);
  } else if (kind == "kernel") {
    KernelModel k;
    k.train_X = matrix_from_json(payload.at("train_X"));
    k.alphas = vector_from_json(payload.at("alphas"));
    k.alpha0 = payload.at("alpha0").get<double>();
    k.theta.nu = payload.at("nu").get<double>();
    k.theta.sigma_f = vector_from_json(payload.at("sigma_f"));
    k.theta.sigma_n = payload.at("sigma_n").get<double>();
    k.kernel = payload.at("kernel").get<std::string>() == "ard" ? KernelKind::Ard
                                                                : KernelKind::Linear;
    k.is_gpr = payload.at("is_gpr").get<bool>();
    k.chol_lower = matrix_from_json(payload.at("chol_lower"));
    k.jitter = payload.at("jitter").get<double>();
    model.kernel = std::move(k);
  } else {
    throw Error("trait model: unknown payload kind " + kind);
  }
  return model;
}

std::pair<RasterGrid, RasterGrid> predict_raster(const TrainedTraitModel& model,
                                                 const FeatureSet& features) {
  // Bands are matched by name in the model's training order.
  std::vector<const RasterGrid*> bands;
  bands.reserve(model.feature_names.size());
  for (const auto& name : model.feature_names) bands.push_back(&features.band(name));

  const RasterGeometry& geom = features.geometry();
  RasterGrid value(geom), stderr_grid(geom);
  parallel_for(static_cast<size_t>(geom.height), 0, [&](size_t r) {
    std::vector<double> raw(bands.size());
    for (int c = 0; c < geom.width; ++c) {
      const size_t i = r * static_cast<size_t>(geom.width) + c;
      for (size_t b = 0; b < bands.size(); ++b) {
        const double v = (*bands[b])[i];
        raw[b] = bands[b]->is_nodata(v) ? kMissingValue : v;
      }
      const TraitPrediction p = predict_trait(model, raw);
      if (!p.valid) continue;
      value.set_flat(i, p.value);
      stderr_grid.set_flat(i, p.stderr_value);
    }
  });
  return {std::move(value), std::move(stderr_grid)};
}

}  // namespace traitscale
