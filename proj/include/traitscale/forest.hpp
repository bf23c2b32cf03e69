#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "traitscale/dataset.hpp"
#include "traitscale/rng.hpp"

namespace traitscale {

enum class TreeTask { Regression, Classification };
enum class ForestMode { Bagged, Boosted };
enum class SplitKind { NumericThreshold, CategoricalSubset };

/// Numeric rules route value < threshold left; categorical rules route
/// membership of left_categories left. Unseen category codes go right.
struct SplitRule {
  int predictor = -1;
  SplitKind kind = SplitKind::NumericThreshold;
  double threshold = 0.0;
  std::vector<int> left_categories;  // sorted codes

  bool routes_left(double value) const;
};

/// Alternative rule mimicking the primary partition; applied when the
/// primary predictor is missing. `flipped` inverts the rule's direction.
struct SurrogateSplit {
  SplitRule rule;
  double agreement = 0.0;
  bool flipped = false;
};

struct TreeNode {
  bool is_leaf = true;
  SplitRule split;
  std::vector<SurrogateSplit> surrogates;  // non-increasing agreement
  bool default_left = true;                // majority child of training rows
  double gain = 0.0;  // impurity decrease, normalized by tree sample count
  int left = -1;
  int right = -1;
  double value = 0.0;                // regression leaf mean
  std::vector<double> class_counts;  // classification leaf payload
};

struct Tree {
  std::vector<TreeNode> nodes;  // preorder, root at 0

  int branch_count() const {
    int n = 0;
    for (const auto& node : nodes)
      if (!node.is_leaf) ++n;
    return n;
  }
};

struct TreeParams {
  int max_splits = 255;
  int min_samples_split = 5;
  /// Per-node random feature subset size; 0 picks the task default
  /// (ceil(p/3) regression, ceil(sqrt(p)) classification). mtry >= p
  /// searches every feature deterministically in schema order.
  int mtry = 0;
  int max_surrogates = 5;
  /// Categorical splits enumerate subsets up to this many levels; larger
  /// vocabularies are ordered by mean target and scanned as ordinal.
  int max_exhaustive_categories = 10;
};

struct ForestParams {
  int n_trees = 100;
  ForestMode mode = ForestMode::Bagged;
  TreeTask task = TreeTask::Regression;
  double learning_rate = 0.1;  // boosted only
  bool bootstrap = true;       // bagged only
  int n_classes = 0;           // classification only
  TreeParams tree;
  int n_threads = 0;
};

struct ForestModel {
  ForestParams params;
  ColumnSchema schema;
  double base_prediction = 0.0;  // boosted running-prediction offset
  std::vector<Tree> trees;
  /// Appendix-C style importance: per-tree gains (primary plus
  /// agreement-weighted surrogates) divided by branch count, averaged
  /// over trees. Order follows schema.
  std::vector<double> importance;
};

/// Greedy CART partitioning over `rows`; targets must be finite for at
/// least one row. Classification targets are class indices in
/// [0, n_classes).
Tree fit_tree(const DataTable& data, std::span<const double> targets,
              std::span<const size_t> rows, const TreeParams& params, TreeTask task,
              int n_classes, RngStream& rng);

/// Max-agreement surrogate rules for `primary` over `rows`, one per
/// candidate predictor that beats the majority-direction baseline,
/// sorted by agreement descending.
std::vector<SurrogateSplit> find_surrogates(const DataTable& data,
                                            std::span<const size_t> rows,
                                            const SplitRule& primary,
                                            std::span<const int> candidates,
                                            int max_surrogates);

/// Routes a row to its leaf: primary rule if the predictor is present,
/// else the first applicable surrogate, else the default direction.
const TreeNode& predict_leaf(const Tree& tree, std::span<const double> row);

double predict_tree_value(const Tree& tree, std::span<const double> row);

ForestModel fit_forest(const DataTable& data, std::span<const double> targets,
                       const ForestParams& params, uint64_t seed);

struct ForestPrediction {
  double value = 0.0;       // regression estimate or class index
  double dispersion = 0.0;  // per-tree std (regression) or 1 - vote share
  int class_index = -1;
  std::vector<double> votes;
};

ForestPrediction predict_forest(const ForestModel& model, std::span<const double> row);

std::vector<double> variable_importance(const ForestModel& model);

/// JSON model document with a format-version field; load/save round
/// trips preserve predictions bit-exactly.
void save_forest(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_forest(const std::filesystem::path& path);

/// JSON document form, for embedding forests in larger documents.
std::string forest_to_json_string(const ForestModel& model);
ForestModel forest_from_json_string(const std::string& text);

}  // namespace traitscale
