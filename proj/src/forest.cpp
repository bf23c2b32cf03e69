#include "traitscale/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "traitscale/error.hpp"
#include "traitscale/parallel.hpp"

namespace traitscale {

bool SplitRule::routes_left(double value) const {
  if (kind == SplitKind::NumericThreshold) return value < threshold;
  const int code = static_cast<int>(std::lround(value));
  return std::binary_search(left_categories.begin(), left_categories.end(), code);
}

namespace {

/// Sufficient statistics for either task.
struct TargetStats {
  double n = 0.0;
  double sum = 0.0;
  double sum2 = 0.0;
  std::vector<double> counts;

  explicit TargetStats(int n_classes) {
    if (n_classes > 0) counts.assign(static_cast<size_t>(n_classes), 0.0);
  }
  void add(double y) {
    n += 1.0;
    sum += y;
    sum2 += y * y;
    if (!counts.empty()) counts[static_cast<size_t>(y)] += 1.0;
  }
  void merge(const TargetStats& o) {
    n += o.n;
    sum += o.sum;
    sum2 += o.sum2;
    for (size_t k = 0; k < counts.size(); ++k) counts[k] += o.counts[k];
  }
  void subtract(const TargetStats& o) {
    n -= o.n;
    sum -= o.sum;
    sum2 -= o.sum2;
    for (size_t k = 0; k < counts.size(); ++k) counts[k] -= o.counts[k];
  }
  /// SSE for regression, n*gini for classification; both in "summed"
  /// units so impurity decreases are directly comparable.
  double impurity(TreeTask task) const {
    if (n <= 0.0) return 0.0;
    if (task == TreeTask::Regression) return std::max(0.0, sum2 - sum * sum / n);
    double sq = 0.0;
    for (double c : counts) sq += c * c;
    return std::max(0.0, n - sq / n);
  }
  double mean() const { return n > 0.0 ? sum / n : 0.0; }
};

struct CandidateSplit {
  bool valid = false;
  SplitRule rule;
  double gain = 0.0;  // raw impurity decrease over present rows
};

/// Best threshold split for one numeric feature; `pairs` is (value, y).
CandidateSplit best_numeric_split(std::vector<std::pair<double, double>>& pairs, int predictor,
                                  TreeTask task, int n_classes) {
  CandidateSplit best;
  if (pairs.size() < 2) return best;
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  TargetStats total(n_classes), left(n_classes);
  for (const auto& [v, y] : pairs) total.add(y);
  const double parent = total.impurity(task);

  for (size_t i = 0; i + 1 < pairs.size(); ++i) {
    left.add(pairs[i].second);
    if (pairs[i].first == pairs[i + 1].first) continue;
    TargetStats right = total;
    right.subtract(left);
    const double gain = parent - left.impurity(task) - right.impurity(task);
    if (gain > best.gain + 1e-12 || !best.valid) {
      if (!best.valid || gain > best.gain + 1e-12) {
        best.valid = true;
        best.gain = std::max(0.0, gain);
        best.rule.predictor = predictor;
        best.rule.kind = SplitKind::NumericThreshold;
        best.rule.threshold = 0.5 * (pairs[i].first + pairs[i + 1].first);
      }
    }
  }
  return best;
}

/// Best subset split for one categorical feature; exhaustive up to
/// max_exhaustive levels, ordinal-by-mean-target above that.
CandidateSplit best_categorical_split(const std::vector<TargetStats>& level_stats,
                                      const std::vector<int>& levels, int predictor,
                                      TreeTask task, int n_classes, int max_exhaustive) {
  CandidateSplit best;
  const size_t n_levels = levels.size();
  if (n_levels < 2) return best;

  TargetStats total(n_classes);
  for (int code : levels) total.merge(level_stats[static_cast<size_t>(code)]);
  const double parent = total.impurity(task);

  auto consider = [&](const std::vector<int>& left_codes, const TargetStats& left) {
    if (left.n <= 0.0 || left.n >= total.n) return;
    TargetStats right = total;
    right.subtract(left);
    const double gain = parent - left.impurity(task) - right.impurity(task);
    if (!best.valid || gain > best.gain + 1e-12) {
      best.valid = true;
      best.gain = std::max(0.0, gain);
      best.rule.predictor = predictor;
      best.rule.kind = SplitKind::CategoricalSubset;
      best.rule.left_categories = left_codes;
      std::sort(best.rule.left_categories.begin(), best.rule.left_categories.end());
    }
  };

  if (n_levels <= static_cast<size_t>(max_exhaustive)) {
    // First level pinned right; masks enumerate subsets of the rest.
    const uint32_t n_masks = 1u << (n_levels - 1);
    std::vector<int> left_codes;
    for (uint32_t mask = 1; mask < n_masks; ++mask) {
      left_codes.clear();
      TargetStats left(n_classes);
      for (size_t b = 0; b + 1 < n_levels; ++b) {
        if (mask & (1u << b)) {
          left_codes.push_back(levels[b + 1]);
          left.merge(level_stats[static_cast<size_t>(levels[b + 1])]);
        }
      }
      consider(left_codes, left);
    }
  } else {
    // Ordinal reduction: order levels by mean target, scan prefixes.
    std::vector<int> ordered = levels;
    std::stable_sort(ordered.begin(), ordered.end(), [&](int a, int b) {
      const double ma = level_stats[static_cast<size_t>(a)].mean();
      const double mb = level_stats[static_cast<size_t>(b)].mean();
      if (ma != mb) return ma < mb;
      return a < b;
    });
    std::vector<int> left_codes;
    TargetStats left(n_classes);
    for (size_t i = 0; i + 1 < ordered.size(); ++i) {
      left_codes.push_back(ordered[i]);
      left.merge(level_stats[static_cast<size_t>(ordered[i])]);
      consider(left_codes, left);
    }
  }
  return best;
}

int default_mtry(TreeTask task, int p) {
  if (task == TreeTask::Regression)
    return static_cast<int>(std::ceil(static_cast<double>(p) / 3.0));
  return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
}

class TreeBuilder {
 public:
  TreeBuilder(const DataTable& data, std::span<const double> targets, const TreeParams& params,
              TreeTask task, int n_classes, RngStream& rng)
      : data_(data), targets_(targets), params_(params), task_(task), n_classes_(n_classes),
        rng_(rng) {}

  Tree build(std::span<const size_t> rows) {
    std::vector<size_t> usable;
    usable.reserve(rows.size());
    for (size_t r : rows)
      if (!is_missing(targets_[r])) usable.push_back(r);
    if (usable.empty()) throw Error("fit_tree: all targets missing");
    if (data_.n_cols() == 0) throw Error("fit_tree: empty feature set");
    n_root_ = usable.size();
    grow(usable);
    return std::move(tree_);
  }

 private:
  int make_leaf(const std::vector<size_t>& rows) {
    TreeNode node;
    node.is_leaf = true;
    if (task_ == TreeTask::Regression) {
      double sum = 0.0;
      for (size_t r : rows) sum += targets_[r];
      node.value = rows.empty() ? 0.0 : sum / static_cast<double>(rows.size());
    } else {
      node.class_counts.assign(static_cast<size_t>(n_classes_), 0.0);
      for (size_t r : rows) node.class_counts[static_cast<size_t>(targets_[r])] += 1.0;
    }
    tree_.nodes.push_back(std::move(node));
    return static_cast<int>(tree_.nodes.size() - 1);
  }

  std::vector<int> feature_subset() {
    const int p = static_cast<int>(data_.n_cols());
    int m = params_.mtry > 0 ? params_.mtry : default_mtry(task_, p);
    if (m >= p) {
      std::vector<int> all(static_cast<size_t>(p));
      std::iota(all.begin(), all.end(), 0);
      return all;
    }
    auto picks = rng_.sample_without_replacement(static_cast<size_t>(p), static_cast<size_t>(m));
    std::vector<int> subset(picks.begin(), picks.end());
    std::sort(subset.begin(), subset.end());
    return subset;
  }

  CandidateSplit search_feature(int feature, const std::vector<size_t>& rows) {
    const ColumnSpec& spec = data_.schema().at(static_cast<size_t>(feature));
    if (spec.kind == ColumnKind::Numeric) {
      std::vector<std::pair<double, double>> pairs;
      pairs.reserve(rows.size());
      for (size_t r : rows) {
        const double v = data_.at(r, static_cast<size_t>(feature));
        if (!is_missing(v)) pairs.emplace_back(v, targets_[r]);
      }
      return best_numeric_split(pairs, feature, task_, n_classes_);
    }
    std::vector<TargetStats> level_stats(spec.categories.size(), TargetStats(n_classes_));
    std::vector<int> levels;
    for (size_t r : rows) {
      const double v = data_.at(r, static_cast<size_t>(feature));
      if (is_missing(v)) continue;
      const int code = static_cast<int>(std::lround(v));
      if (code < 0 || code >= static_cast<int>(level_stats.size())) continue;
      if (level_stats[static_cast<size_t>(code)].n == 0.0) levels.push_back(code);
      level_stats[static_cast<size_t>(code)].add(targets_[r]);
    }
    std::sort(levels.begin(), levels.end());
    return best_categorical_split(level_stats, levels, feature, task_, n_classes_,
                                  params_.max_exhaustive_categories);
  }

  int grow(std::vector<size_t>& rows) {
    bool pure = true;
    for (size_t i = 1; i < rows.size(); ++i)
      if (targets_[rows[i]] != targets_[rows[0]]) {
        pure = false;
        break;
      }
    if (rows.size() < static_cast<size_t>(params_.min_samples_split) ||
        splits_used_ >= params_.max_splits || pure)
      return make_leaf(rows);

    const std::vector<int> subset = feature_subset();
    CandidateSplit best;
    for (int f : subset) {
      CandidateSplit c = search_feature(f, rows);
      if (c.valid && (!best.valid || c.gain > best.gain + 1e-12)) best = c;
    }
    if (!best.valid || best.gain <= 0.0) return make_leaf(rows);

    std::vector<int> candidates;
    if (params_.max_surrogates > 0) {
      for (int f = 0; f < static_cast<int>(data_.n_cols()); ++f)
        if (f != best.rule.predictor) candidates.push_back(f);
    }
    std::vector<SurrogateSplit> surrogates =
        find_surrogates(data_, rows, best.rule, candidates, params_.max_surrogates);

    // Partition. Present rows follow the rule; missing rows use the
    // first applicable surrogate, else the majority direction.
    size_t left_present = 0, right_present = 0;
    std::vector<int8_t> side(rows.size(), 0);  // +1 left, -1 right, 0 undecided
    for (size_t i = 0; i < rows.size(); ++i) {
      const double v = data_.at(rows[i], static_cast<size_t>(best.rule.predictor));
      if (is_missing(v)) continue;
      const bool go_left = best.rule.routes_left(v);
      side[i] = go_left ? 1 : -1;
      (go_left ? left_present : right_present) += 1;
    }
    const bool default_left = left_present >= right_present;
    for (size_t i = 0; i < rows.size(); ++i) {
      if (side[i] != 0) continue;
      bool resolved = false;
      for (const auto& s : surrogates) {
        const double v = data_.at(rows[i], static_cast<size_t>(s.rule.predictor));
        if (is_missing(v)) continue;
        side[i] = (s.rule.routes_left(v) != s.flipped) ? 1 : -1;
        resolved = true;
        break;
      }
      if (!resolved) side[i] = default_left ? 1 : -1;
    }

    std::vector<size_t> left_rows, right_rows;
    left_rows.reserve(rows.size());
    right_rows.reserve(rows.size());
    for (size_t i = 0; i < rows.size(); ++i)
      (side[i] > 0 ? left_rows : right_rows).push_back(rows[i]);
    if (left_rows.empty() || right_rows.empty()) return make_leaf(rows);

    ++splits_used_;
    TreeNode node;
    node.is_leaf = false;
    node.split = best.rule;
    node.surrogates = std::move(surrogates);
    node.default_left = default_left;
    node.gain = best.gain / static_cast<double>(n_root_);
    tree_.nodes.push_back(std::move(node));
    const int index = static_cast<int>(tree_.nodes.size() - 1);
    rows.clear();
    rows.shrink_to_fit();
    const int left_child = grow(left_rows);
    const int right_child = grow(right_rows);
    tree_.nodes[static_cast<size_t>(index)].left = left_child;
    tree_.nodes[static_cast<size_t>(index)].right = right_child;
    return index;
  }

  const DataTable& data_;
  std::span<const double> targets_;
  TreeParams params_;
  TreeTask task_;
  int n_classes_;
  RngStream& rng_;
  Tree tree_;
  int splits_used_ = 0;
  size_t n_root_ = 0;
};

}  // namespace

Tree fit_tree(const DataTable& data, std::span<const double> targets,
              std::span<const size_t> rows, const TreeParams& params, TreeTask task,
              int n_classes, RngStream& rng) {
  if (rows.empty()) throw Error("fit_tree: no rows");
  if (task == TreeTask::Classification && n_classes < 2)
    throw Error("fit_tree: classification needs n_classes >= 2");
  if (task == TreeTask::Regression) n_classes = 0;
  TreeBuilder builder(data, targets, params, task, n_classes, rng);
  return builder.build(rows);
}

std::vector<SurrogateSplit> find_surrogates(const DataTable& data,
                                            std::span<const size_t> rows,
                                            const SplitRule& primary,
                                            std::span<const int> candidates,
                                            int max_surrogates) {
  std::vector<SurrogateSplit> out;
  if (max_surrogates <= 0 || candidates.empty()) return out;

  // Primary direction for rows where the primary predictor is present.
  std::vector<size_t> present_rows;
  std::vector<uint8_t> went_left;
  present_rows.reserve(rows.size());
  for (size_t r : rows) {
    const double v = data.at(r, static_cast<size_t>(primary.predictor));
    if (is_missing(v)) continue;
    present_rows.push_back(r);
    went_left.push_back(primary.routes_left(v) ? 1 : 0);
  }
  if (present_rows.size() < 2) return out;

  for (int cand : candidates) {
    if (cand == primary.predictor) continue;
    const ColumnSpec& spec = data.schema().at(static_cast<size_t>(cand));

    // Rows where both predictors are present.
    std::vector<std::pair<double, uint8_t>> both;  // (candidate value, went_left)
    both.reserve(present_rows.size());
    for (size_t i = 0; i < present_rows.size(); ++i) {
      const double v = data.at(present_rows[i], static_cast<size_t>(cand));
      if (!is_missing(v)) both.emplace_back(v, went_left[i]);
    }
    const int64_t n_both = static_cast<int64_t>(both.size());
    if (n_both < 1) continue;
    int64_t n_left = 0;
    for (const auto& [v, l] : both) n_left += l;
    const int64_t n_right = n_both - n_left;
    const int64_t baseline_matches = std::max(n_left, n_right);

    int64_t best_matches = -1;
    SplitRule rule;
    rule.predictor = cand;
    bool flipped = false;

    if (spec.kind == ColumnKind::Numeric) {
      std::sort(both.begin(), both.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      int64_t prefix_left = 0;
      for (size_t i = 0; i + 1 < both.size(); ++i) {
        prefix_left += both[i].second;
        if (both[i].first == both[i + 1].first) continue;
        // first i+1 rows routed left by the candidate rule
        const int64_t to_left = static_cast<int64_t>(i) + 1;
        const int64_t matches =
            prefix_left + ((n_both - to_left) - (n_left - prefix_left));
        const int64_t matches_flipped = n_both - matches;
        const int64_t better = std::max(matches, matches_flipped);
        if (better > best_matches) {
          best_matches = better;
          rule.kind = SplitKind::NumericThreshold;
          rule.threshold = 0.5 * (both[i].first + both[i + 1].first);
          rule.left_categories.clear();
          flipped = matches_flipped > matches;
        }
      }
    } else {
      // Per-level majority assignment maximizes agreement exactly.
      std::vector<int64_t> level_left(spec.categories.size(), 0);
      std::vector<int64_t> level_total(spec.categories.size(), 0);
      for (const auto& [v, l] : both) {
        const int code = static_cast<int>(std::lround(v));
        if (code < 0 || code >= static_cast<int>(level_total.size())) continue;
        ++level_total[static_cast<size_t>(code)];
        level_left[static_cast<size_t>(code)] += l;
      }
      int64_t matches = 0;
      std::vector<int> left_codes;
      bool any_left = false, any_right = false;
      for (size_t code = 0; code < level_total.size(); ++code) {
        if (level_total[code] == 0) continue;
        const int64_t lh = level_left[code];
        const int64_t rh = level_total[code] - lh;
        if (lh > rh) {
          left_codes.push_back(static_cast<int>(code));
          matches += lh;
          any_left = true;
        } else {
          matches += rh;
          any_right = true;
        }
      }
      if (any_left && any_right && matches > best_matches) {
        best_matches = matches;
        rule.kind = SplitKind::CategoricalSubset;
        rule.left_categories = left_codes;
        flipped = false;
      }
    }

    if (best_matches > baseline_matches) {
      SurrogateSplit s;
      s.rule = std::move(rule);
      s.agreement = static_cast<double>(best_matches) / static_cast<double>(n_both);
      s.flipped = flipped;
      out.push_back(std::move(s));
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const SurrogateSplit& a, const SurrogateSplit& b) {
    if (a.agreement != b.agreement) return a.agreement > b.agreement;
    return a.rule.predictor < b.rule.predictor;
  });
  if (out.size() > static_cast<size_t>(max_surrogates)) out.resize(static_cast<size_t>(max_surrogates));
  return out;
}

const TreeNode& predict_leaf(const Tree& tree, std::span<const double> row) {
  const TreeNode* node = &tree.nodes.at(0);
  while (!node->is_leaf) {
    bool go_left = node->default_left;
    const double v = row[static_cast<size_t>(node->split.predictor)];
    if (!is_missing(v)) {
      go_left = node->split.routes_left(v);
    } else {
      for (const auto& s : node->surrogates) {
        const double sv = row[static_cast<size_t>(s.rule.predictor)];
        if (is_missing(sv)) continue;
        go_left = s.rule.routes_left(sv) != s.flipped;
        break;
      }
    }
    node = &tree.nodes.at(static_cast<size_t>(go_left ? node->left : node->right));
  }
  return *node;
}

double predict_tree_value(const Tree& tree, std::span<const double> row) {
  return predict_leaf(tree, row).value;
}

namespace {

std::vector<double> compute_importance(const std::vector<Tree>& trees, size_t n_features) {
  std::vector<double> importance(n_features, 0.0);
  if (trees.empty()) return importance;
  std::vector<double> tree_imp(n_features);
  for (const auto& tree : trees) {
    std::fill(tree_imp.begin(), tree_imp.end(), 0.0);
    int branches = 0;
    for (const auto& node : tree.nodes) {
      if (node.is_leaf) continue;
      ++branches;
      tree_imp[static_cast<size_t>(node.split.predictor)] += node.gain;
      for (const auto& s : node.surrogates)
        tree_imp[static_cast<size_t>(s.rule.predictor)] += node.gain * s.agreement;
    }
    if (branches == 0) continue;
    for (size_t f = 0; f < n_features; ++f)
      importance[f] += tree_imp[f] / static_cast<double>(branches);
  }
  for (double& v : importance) v /= static_cast<double>(trees.size());
  return importance;
}

}  // namespace

ForestModel fit_forest(const DataTable& data, std::span<const double> targets,
                       const ForestParams& params, uint64_t seed) {
  if (params.n_trees < 1) throw Error("fit_forest: n_trees must be >= 1");
  if (params.task == TreeTask::Classification) {
    if (params.mode == ForestMode::Boosted)
      throw Error("fit_forest: boosted mode supports regression only");
    if (params.n_classes < 2) throw Error("fit_forest: classification needs n_classes >= 2");
  }
  if (params.mode == ForestMode::Boosted &&
      !(params.learning_rate > 0.0 && params.learning_rate <= 1.0))
    throw Error("fit_forest: learning_rate must lie in (0, 1]");

  std::vector<size_t> observed;
  observed.reserve(data.n_rows());
  for (size_t r = 0; r < data.n_rows(); ++r)
    if (!is_missing(targets[r])) observed.push_back(r);
  if (observed.empty()) throw Error("fit_forest: all targets missing");

  ForestModel model;
  model.params = params;
  model.schema = data.schema();
  model.trees.resize(static_cast<size_t>(params.n_trees));

  if (params.mode == ForestMode::Bagged) {
    const size_t n = observed.size();
    parallel_for(static_cast<size_t>(params.n_trees), params.n_threads, [&](size_t t) {
      RngStream rng = RngStream::derive(seed, t);
      std::vector<size_t> rows;
      if (params.bootstrap) {
        rows.resize(n);
        for (size_t i = 0; i < n; ++i) rows[i] = observed[rng.next_below(n)];
      } else {
        rows = observed;
      }
      model.trees[t] = fit_tree(data, targets, rows, params.tree, params.task,
                                params.n_classes, rng);
    });
  } else {
    double base = 0.0;
    for (size_t r : observed) base += targets[r];
    base /= static_cast<double>(observed.size());
    model.base_prediction = base;

    std::vector<double> residuals(data.n_rows(), kMissingValue);
    for (size_t r : observed) residuals[r] = targets[r] - base;
    // Boosted trees consider every feature unless mtry narrows it.
    TreeParams tree_params = params.tree;
    if (tree_params.mtry == 0) tree_params.mtry = static_cast<int>(data.n_cols());

    std::vector<double> row_buf(data.n_cols());
    for (int t = 0; t < params.n_trees; ++t) {
      RngStream rng = RngStream::derive(seed, static_cast<uint64_t>(t));
      model.trees[static_cast<size_t>(t)] =
          fit_tree(data, residuals, observed, tree_params, TreeTask::Regression, 0, rng);
      const Tree& tree = model.trees[static_cast<size_t>(t)];
      for (size_t r : observed) {
        for (size_t c = 0; c < data.n_cols(); ++c) row_buf[c] = data.at(r, c);
        residuals[r] -= params.learning_rate * predict_tree_value(tree, row_buf);
      }
    }
  }

  model.importance = compute_importance(model.trees, data.n_cols());
  return model;
}

ForestPrediction predict_forest(const ForestModel& model, std::span<const double> row) {
  if (row.size() != model.schema.size()) throw Error("predict_forest: row width mismatch");
  ForestPrediction out;
  const size_t n_trees = model.trees.size();

  if (model.params.task == TreeTask::Regression) {
    double sum = 0.0, sum2 = 0.0;
    const double scale =
        model.params.mode == ForestMode::Boosted ? model.params.learning_rate : 1.0;
    for (const auto& tree : model.trees) {
      const double p = scale * predict_tree_value(tree, row);
      sum += p;
      sum2 += p * p;
    }
    if (model.params.mode == ForestMode::Boosted) {
      out.value = model.base_prediction + sum;
    } else {
      out.value = sum / static_cast<double>(n_trees);
    }
    const double mean = sum / static_cast<double>(n_trees);
    out.dispersion = std::sqrt(std::max(0.0, sum2 / static_cast<double>(n_trees) - mean * mean));
    return out;
  }

  out.votes.assign(static_cast<size_t>(model.params.n_classes), 0.0);
  for (const auto& tree : model.trees) {
    const TreeNode& leaf = predict_leaf(tree, row);
    int best = 0;
    for (int k = 1; k < model.params.n_classes; ++k)
      if (leaf.class_counts[static_cast<size_t>(k)] >
          leaf.class_counts[static_cast<size_t>(best)])
        best = k;
    out.votes[static_cast<size_t>(best)] += 1.0;
  }
  int winner = 0;
  for (int k = 1; k < model.params.n_classes; ++k)
    if (out.votes[static_cast<size_t>(k)] > out.votes[static_cast<size_t>(winner)]) winner = k;
  out.class_index = winner;
  out.value = static_cast<double>(winner);
  out.dispersion = 1.0 - out.votes[static_cast<size_t>(winner)] / static_cast<double>(n_trees);
  return out;
}

std::vector<double> variable_importance(const ForestModel& model) {
  if (!model.importance.empty()) return model.importance;
  return compute_importance(model.trees, model.schema.size());
}

namespace {

using nlohmann::json;

json rule_to_json(const SplitRule& r) {
  json j;
  j["predictor"] = r.predictor;
  j["kind"] = r.kind == SplitKind::NumericThreshold ? "numeric" : "categorical";
  if (r.kind == SplitKind::NumericThreshold)
    j["threshold"] = r.threshold;
  else
    j["left_categories"] = r.left_categories;
  return j;
}

SplitRule rule_from_json(const json& j) {
  SplitRule r;
  r.predictor = j.at("predictor").get<int>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "numeric") {
    r.kind = SplitKind::NumericThreshold;
    r.threshold = j.at("threshold").get<double>();
  } else {
    r.kind = SplitKind::CategoricalSubset;
    r.left_categories = j.at("left_categories").get<std::vector<int>>();
  }
  return r;
}

}  // namespace

namespace {

json forest_to_json(const ForestModel& model) {
  json doc;
  doc["format_version"] = 1;
  doc["model_type"] = "surrogate_forest";
  doc["task"] = model.params.task == TreeTask::Regression ? "regression" : "classification";
  doc["mode"] = model.params.mode == ForestMode::Bagged ? "bagged" : "boosted";
  json p;
  p["n_trees"] = model.params.n_trees;
  p["learning_rate"] = model.params.learning_rate;
  p["bootstrap"] = model.params.bootstrap;
  p["n_classes"] = model.params.n_classes;
  p["max_splits"] = model.params.tree.max_splits;
  p["min_samples_split"] = model.params.tree.min_samples_split;
  p["mtry"] = model.params.tree.mtry;
  p["max_surrogates"] = model.params.tree.max_surrogates;
  p["max_exhaustive_categories"] = model.params.tree.max_exhaustive_categories;
  doc["params"] = p;
  doc["base_prediction"] = model.base_prediction;
  doc["importance"] = model.importance;

  json cols = json::array();
  for (const auto& c : model.schema.columns) {
    json cj;
    cj["name"] = c.name;
    cj["kind"] = c.kind == ColumnKind::Numeric ? "numeric" : "categorical";
    if (c.kind == ColumnKind::Categorical) cj["categories"] = c.categories;
    cols.push_back(cj);
  }
  doc["schema"] = cols;

  json trees = json::array();
  for (const auto& tree : model.trees) {
    json nodes = json::array();
    for (const auto& node : tree.nodes) {
      json nj;
      nj["leaf"] = node.is_leaf;
      if (node.is_leaf) {
        if (node.class_counts.empty())
          nj["value"] = node.value;
        else
          nj["counts"] = node.class_counts;
      } else {
        nj["split"] = rule_to_json(node.split);
        json surr = json::array();
        for (const auto& s : node.surrogates) {
          json sj = rule_to_json(s.rule);
          sj["agreement"] = s.agreement;
          sj["flipped"] = s.flipped;
          surr.push_back(sj);
        }
        nj["surrogates"] = surr;
        nj["default_left"] = node.default_left;
        nj["gain"] = node.gain;
        nj["left"] = node.left;
        nj["right"] = node.right;
      }
      nodes.push_back(nj);
    }
    trees.push_back(json{{"nodes", nodes}});
  }
  doc["trees"] = trees;
  return doc;
}

ForestModel forest_from_json(const json& doc) {
  if (doc.value("format_version", 0) != 1)
    throw Error("unsupported forest format version");
  if (doc.value("model_type", "") != "surrogate_forest")
    throw Error("not a surrogate_forest model document");

  ForestModel model;
  model.params.task =
      doc.at("task").get<std::string>() == "regression" ? TreeTask::Regression
                                                        : TreeTask::Classification;
  model.params.mode =
      doc.at("mode").get<std::string>() == "bagged" ? ForestMode::Bagged : ForestMode::Boosted;
  const json& p = doc.at("params");
  model.params.n_trees = p.at("n_trees").get<int>();
  model.params.learning_rate = p.at("learning_rate").get<double>();
  model.params.bootstrap = p.at("bootstrap").get<bool>();
  model.params.n_classes = p.at("n_classes").get<int>();
  model.params.tree.max_splits = p.at("max_splits").get<int>();
  model.params.tree.min_samples_split = p.at("min_samples_split").get<int>();
  model.params.tree.mtry = p.at("mtry").get<int>();
  model.params.tree.max_surrogates = p.at("max_surrogates").get<int>();
  model.params.tree.max_exhaustive_categories = p.at("max_exhaustive_categories").get<int>();
  model.base_prediction = doc.at("base_prediction").get<double>();
  model.importance = doc.at("importance").get<std::vector<double>>();

  for (const auto& cj : doc.at("schema")) {
    ColumnSpec c;
    c.name = cj.at("name").get<std::string>();
    c.kind = cj.at("kind").get<std::string>() == "numeric" ? ColumnKind::Numeric
                                                           : ColumnKind::Categorical;
    if (c.kind == ColumnKind::Categorical)
      c.categories = cj.at("categories").get<std::vector<std::string>>();
    model.schema.columns.push_back(std::move(c));
  }

  for (const auto& tj : doc.at("trees")) {
    Tree tree;
    for (const auto& nj : tj.at("nodes")) {
      TreeNode node;
      node.is_leaf = nj.at("leaf").get<bool>();
      if (node.is_leaf) {
        if (nj.contains("counts"))
          node.class_counts = nj.at("counts").get<std::vector<double>>();
        else
          node.value = nj.at("value").get<double>();
      } else {
        node.split = rule_from_json(nj.at("split"));
        for (const auto& sj : nj.at("surrogates")) {
          SurrogateSplit s;
          s.rule = rule_from_json(sj);
          s.agreement = sj.at("agreement").get<double>();
          s.flipped = sj.at("flipped").get<bool>();
          node.surrogates.push_back(std::move(s));
        }
        node.default_left = nj.at("default_left").get<bool>();
        node.gain = nj.at("gain").get<double>();
        node.left = nj.at("left").get<int>();
        node.right = nj.at("right").get<int>();
      }
      tree.nodes.push_back(std::move(node));
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace

void save_forest(const ForestModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model: " + path.string());
  out << forest_to_json(model).dump() << "\n";
}

ForestModel load_forest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model: " + path.string());
  return forest_from_json(json::parse(in));
}

std::string forest_to_json_string(const ForestModel& model) {
  return forest_to_json(model).dump();
}

ForestModel forest_from_json_string(const std::string& text) {
  return forest_from_json(json::parse(text));
}

}  // namespace traitscale
