#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "support/oracles.hpp"
#include "traitscale/forest.hpp"
#include "traitscale/rng.hpp"

using namespace traitscale;

namespace {

ColumnSchema numeric_schema(int p) {
  ColumnSchema s;
  for (int i = 0; i < p; ++i) s.columns.push_back({"x" + std::to_string(i), ColumnKind::Numeric, {}});
  return s;
}

DataTable table_from(const std::vector<std::vector<double>>& cols, ColumnSchema schema) {
  DataTable data(std::move(schema));
  data.resize_rows(cols.front().size());
  for (size_t c = 0; c < cols.size(); ++c)
    for (size_t r = 0; r < cols[c].size(); ++r) data.set(r, c, cols[c][r]);
  return data;
}

std::vector<size_t> all_rows(const DataTable& data) {
  std::vector<size_t> rows(data.n_rows());
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

TreeParams exhaustive_params() {
  TreeParams p;
  p.min_samples_split = 2;
  p.mtry = 1000;  // every feature
  p.max_surrogates = 0;
  return p;
}

}  // namespace

TEST_CASE("stump on a clean step function") {
  const DataTable data = table_from({{1, 2, 3, 4}}, numeric_schema(1));
  const std::vector<double> y = {0, 0, 1, 1};
  TreeParams params = exhaustive_params();
  params.max_splits = 1;
  RngStream rng(1);
  const Tree tree = fit_tree(data, y, all_rows(data), params, TreeTask::Regression, 0, rng);
  REQUIRE(!tree.nodes[0].is_leaf);
  const double threshold = tree.nodes[0].split.threshold;
  CHECK(threshold > 2.0);
  CHECK(threshold <= 3.0);
  const TreeNode& left = tree.nodes[static_cast<size_t>(tree.nodes[0].left)];
  const TreeNode& right = tree.nodes[static_cast<size_t>(tree.nodes[0].right)];
  CHECK(left.value == doctest::Approx(0.0));
  CHECK(right.value == doctest::Approx(1.0));
}

TEST_CASE("degenerate trees") {
  SUBCASE("constant targets give a single zero-gain leaf") {
    const DataTable data = table_from({{1, 2, 3, 4, 5}}, numeric_schema(1));
    const std::vector<double> y(5, 3.5);
    TreeParams params = exhaustive_params();
    RngStream rng(1);
    const Tree tree = fit_tree(data, y, all_rows(data), params, TreeTask::Regression, 0, rng);
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].is_leaf);
    CHECK(tree.nodes[0].value == doctest::Approx(3.5));
  }
  SUBCASE("max_splits = 0 yields the target mean") {
    const DataTable data = table_from({{1, 2, 3, 4}}, numeric_schema(1));
    const std::vector<double> y = {1, 2, 3, 6};
    TreeParams params = exhaustive_params();
    params.max_splits = 0;
    RngStream rng(1);
    const Tree tree = fit_tree(data, y, all_rows(data), params, TreeTask::Regression, 0, rng);
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].value == doctest::Approx(3.0));
  }
  SUBCASE("all targets missing is an error") {
    const DataTable data = table_from({{1, 2, 3}}, numeric_schema(1));
    const std::vector<double> y(3, kMissingValue);
    TreeParams params = exhaustive_params();
    RngStream rng(1);
    CHECK_THROWS_AS(fit_tree(data, y, all_rows(data), params, TreeTask::Regression, 0, rng),
                    Error);
  }
}

TEST_CASE("primary split matches exhaustive search on enumerable datasets") {
  // All binary target patterns on a single ordered numeric predictor.
  for (int n = 2; n <= 8; ++n) {
    std::vector<double> x(static_cast<size_t>(n));
    std::iota(x.begin(), x.end(), 1.0);
    const DataTable data = table_from({x}, numeric_schema(1));
    for (uint32_t pattern = 0; pattern < (1u << n); ++pattern) {
      std::vector<double> y(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) y[static_cast<size_t>(i)] = (pattern >> i) & 1;
      TreeParams params = exhaustive_params();
      params.max_splits = 1;
      RngStream rng(1);
      const Tree tree =
          fit_tree(data, y, all_rows(data), params, TreeTask::Regression, 0, rng);
      const double fitted = oracles::root_gain(tree, static_cast<size_t>(n));
      const double oracle =
          oracles::best_gain_bruteforce(data, y, all_rows(data), TreeTask::Regression, 0);
      CHECK(fitted == doctest::Approx(oracle).epsilon(1e-12));
    }
  }

  // Random mixed datasets: 1..3 predictors, numeric + categorical,
  // missingness, regression and classification tasks.
  RngStream rng(20240601);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(7));
    const int p = 1 + static_cast<int>(rng.next_below(3));
    ColumnSchema schema;
    for (int f = 0; f < p; ++f) {
      if (rng.next_double() < 0.35) {
        ColumnSpec spec;
        spec.name = "c" + std::to_string(f);
        spec.kind = ColumnKind::Categorical;
        const int levels = 2 + static_cast<int>(rng.next_below(3));
        for (int l = 0; l < levels; ++l) spec.categories.push_back("l" + std::to_string(l));
        schema.columns.push_back(std::move(spec));
      } else {
        schema.columns.push_back({"x" + std::to_string(f), ColumnKind::Numeric, {}});
      }
    }
    DataTable data(schema);
    data.resize_rows(static_cast<size_t>(n));
    for (int f = 0; f < p; ++f) {
      const auto& spec = schema.at(static_cast<size_t>(f));
      for (int r = 0; r < n; ++r) {
        if (rng.next_double() < 0.15) continue;  // missing
        if (spec.kind == ColumnKind::Numeric)
          data.set(static_cast<size_t>(r), static_cast<size_t>(f),
                   std::round(rng.next_double() * 10.0) / 2.0);
        else
          data.set(static_cast<size_t>(r), static_cast<size_t>(f),
                   static_cast<double>(rng.next_below(spec.categories.size())));
      }
    }
    const bool classification = rng.next_double() < 0.4;
    std::vector<double> y(static_cast<size_t>(n));
    for (int r = 0; r < n; ++r)
      y[static_cast<size_t>(r)] = classification ? static_cast<double>(rng.next_below(3))
                                                 : std::round(rng.next_double() * 8.0);
    const TreeTask task = classification ? TreeTask::Classification : TreeTask::Regression;

    TreeParams params = exhaustive_params();
    params.max_splits = 1;
    RngStream fit_rng(7);
    const Tree tree = fit_tree(data, y, all_rows(data), params, task, 3, fit_rng);
    const double fitted = oracles::root_gain(tree, static_cast<size_t>(n));
    const double oracle =
        oracles::best_gain_bruteforce(data, y, all_rows(data), task, 3);
    CHECK(fitted == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("internal node gains are non-negative") {
  RngStream rng(31);
  std::vector<double> x0(60), x1(60), y(60);
  for (size_t i = 0; i < 60; ++i) {
    x0[i] = rng.next_double();
    x1[i] = rng.next_double();
    y[i] = std::sin(5 * x0[i]) + 0.5 * x1[i] + 0.1 * rng.next_normal();
  }
  const DataTable data = table_from({x0, x1}, numeric_schema(2));
  TreeParams params;
  params.min_samples_split = 4;
  params.max_splits = 31;
  params.mtry = 2;
  RngStream fit_rng(2);
  const Tree tree = fit_tree(data, y, all_rows(data), params, TreeTask::Regression, 0, fit_rng);
  CHECK(tree.branch_count() > 1);
  for (const auto& node : tree.nodes)
    if (!node.is_leaf) CHECK(node.gain >= 0.0);
}

TEST_CASE("surrogate discovery") {
  // x0 is the primary; x1 duplicates it, x2 is anti-correlated, x3 noise.
  const int n = 200;
  RngStream rng(77);
  std::vector<double> x0(n), x1(n), x2(n), x3(n), y(n);
  for (int i = 0; i < n; ++i) {
    x0[i] = rng.next_double();
    x1[i] = x0[i];
    x2[i] = -x0[i];
    x3[i] = rng.next_double();
    // imbalanced primary so the majority baseline is hard to beat by chance
    y[i] = x0[i] < 0.8 ? 0.0 : 1.0;
  }
  const DataTable data = table_from({x0, x1, x2, x3}, numeric_schema(4));
  SplitRule primary;
  primary.predictor = 0;
  primary.kind = SplitKind::NumericThreshold;
  primary.threshold = 0.8;

  const std::vector<int> candidates = {1, 2, 3};
  const auto rows = all_rows(data);
  const auto surrogates = find_surrogates(data, rows, primary, candidates, 5);

  REQUIRE(surrogates.size() >= 2);
  CHECK(surrogates[0].rule.predictor == 1);
  CHECK(surrogates[0].agreement == doctest::Approx(1.0));
  CHECK(!surrogates[0].flipped);
  CHECK(surrogates[1].rule.predictor == 2);
  CHECK(surrogates[1].agreement == doctest::Approx(1.0));
  CHECK(surrogates[1].flipped);
  for (const auto& s : surrogates) CHECK(s.rule.predictor != 3);  // noise not retained

  SUBCASE("agreement ordering is non-increasing") {
    for (size_t i = 1; i < surrogates.size(); ++i)
      CHECK(surrogates[i - 1].agreement >= surrogates[i].agreement);
  }
}

TEST_CASE("categorical surrogate uses per-level majority") {
  ColumnSchema schema = numeric_schema(1);
  ColumnSpec cat;
  cat.name = "c";
  cat.kind = ColumnKind::Categorical;
  cat.categories = {"a", "b", "c"};
  schema.columns.push_back(cat);

  // level a -> left, level b -> right, level c mixed (majority right)
  std::vector<double> x0 = {0, 0, 0, 1, 1, 1, 0, 1, 1};
  std::vector<double> cv = {0, 0, 0, 1, 1, 1, 2, 2, 2};
  const DataTable data = table_from({x0, cv}, schema);
  SplitRule primary;
  primary.predictor = 0;
  primary.threshold = 0.5;

  const std::vector<int> candidates = {1};
  const auto surrogates = find_surrogates(data, all_rows(data), primary, candidates, 5);
  REQUIRE(surrogates.size() == 1);
  CHECK(surrogates[0].rule.kind == SplitKind::CategoricalSubset);
  CHECK(surrogates[0].rule.left_categories == std::vector<int>{0});
  CHECK(surrogates[0].agreement == doctest::Approx(8.0 / 9.0));
}

TEST_CASE("routing with missing predictors") {
  // y = step(x0); x1 duplicates the primary, x2 anti-correlates.
  std::vector<double> x0, x1, x2, y;
  RngStream rng(5);
  for (int i = 0; i < 40; ++i) {
    const double v = rng.next_double();
    x0.push_back(v);
    x1.push_back(v * 2.0);
    x2.push_back(1.0 - v);
    y.push_back(v < 0.5 ? 10.0 : 20.0);
  }
  const DataTable data = table_from({x0, x1, x2}, numeric_schema(3));
  TreeParams params;
  params.min_samples_split = 2;
  params.max_splits = 1;
  params.mtry = 3;
  params.max_surrogates = 5;
  RngStream fit_rng(3);
  const Tree tree = fit_tree(data, y, all_rows(data), params, TreeTask::Regression, 0, fit_rng);
  REQUIRE(!tree.nodes[0].is_leaf);
  REQUIRE(tree.nodes[0].surrogates.size() >= 1);

  const double m = kMissingValue;
  SUBCASE("all present equals primary-only routing") {
    CHECK(predict_tree_value(tree, std::vector<double>{0.2, 100.0, -5.0}) ==
          doctest::Approx(10.0));
    CHECK(predict_tree_value(tree, std::vector<double>{0.7, -100.0, 5.0}) ==
          doctest::Approx(20.0));
  }
  SUBCASE("missing primary routes through the surrogate") {
    CHECK(predict_tree_value(tree, std::vector<double>{m, 0.4, 0.9}) == doctest::Approx(10.0));
    CHECK(predict_tree_value(tree, std::vector<double>{m, 1.6, 0.1}) == doctest::Approx(20.0));
  }
  SUBCASE("anti-correlated surrogate flips direction") {
    CHECK(predict_tree_value(tree, std::vector<double>{m, m, 0.9}) == doctest::Approx(10.0));
    CHECK(predict_tree_value(tree, std::vector<double>{m, m, 0.1}) == doctest::Approx(20.0));
  }
  SUBCASE("all missing falls back to the default direction") {
    const double fallback = predict_tree_value(tree, std::vector<double>{m, m, m});
    const bool left_default = tree.nodes[0].default_left;
    const double expected =
        tree.nodes[static_cast<size_t>(left_default ? tree.nodes[0].left
                                                    : tree.nodes[0].right)].value;
    CHECK(fallback == doctest::Approx(expected));
  }
}

TEST_CASE("hand-traced surrogate routing cases") {
  // Crafted tree: primary x0 < 0.5; duplicate x1 (agreement 1); anti x2
  // (agreement 1, flipped). 24 missingness scenarios checked against the
  // routing contract.
  std::vector<double> x0 = {0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> x1 = x0;
  std::vector<double> x2;
  for (double v : x0) x2.push_back(-v);
  std::vector<double> y = {0, 0, 0, 0, 1, 1, 1, 1};
  const DataTable data = table_from({x0, x1, x2}, numeric_schema(3));
  TreeParams params = exhaustive_params();
  params.max_splits = 1;
  params.max_surrogates = 5;
  RngStream rng(1);
  const Tree tree = fit_tree(data, y, all_rows(data), params, TreeTask::Regression, 0, rng);
  REQUIRE(!tree.nodes[0].is_leaf);
  REQUIRE(tree.nodes[0].surrogates.size() == 2);

  const double m = kMissingValue;
  const double threshold = tree.nodes[0].split.threshold;
  int checked = 0;
  for (double v : {0.05, 0.35, 0.55, 0.95}) {
    const double expected = v < threshold ? 0.0 : 1.0;
    // primary present
    CHECK(predict_tree_value(tree, std::vector<double>{v, m, m}) == doctest::Approx(expected));
    // surrogate 1 (same scale, unflipped)
    CHECK(predict_tree_value(tree, std::vector<double>{m, v, m}) == doctest::Approx(expected));
    // surrogate 2 (negated, flipped)
    CHECK(predict_tree_value(tree, std::vector<double>{m, m, -v}) == doctest::Approx(expected));
    // primary takes precedence over disagreeing surrogates
    CHECK(predict_tree_value(tree, std::vector<double>{v, 1.0 - v, v - 1.0}) ==
          doctest::Approx(expected));
    // first surrogate takes precedence over the second
    CHECK(predict_tree_value(tree, std::vector<double>{m, v, v}) == doctest::Approx(expected));
    checked += 5;
  }
  CHECK(checked >= 20);
}

TEST_CASE("forest of one tree without bootstrap equals fit_tree") {
  std::vector<double> x(50), y(50);
  RngStream rng(9);
  for (size_t i = 0; i < 50; ++i) {
    x[i] = rng.next_double();
    y[i] = 3.0 * x[i] + rng.next_normal() * 0.01;
  }
  const DataTable data = table_from({x}, numeric_schema(1));

  ForestParams fp;
  fp.n_trees = 1;
  fp.bootstrap = false;
  fp.tree.mtry = 1;
  const ForestModel forest = fit_forest(data, y, fp, 123);

  RngStream tree_rng = RngStream::derive(123, 0);
  const Tree tree =
      fit_tree(data, y, all_rows(data), fp.tree, TreeTask::Regression, 0, tree_rng);
  for (double probe : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const std::vector<double> row = {probe};
    CHECK(predict_forest(forest, row).value == doctest::Approx(predict_tree_value(tree, row)));
  }
}

TEST_CASE("bagged forest fits a noiseless line well") {
  std::vector<double> x(100), y(100);
  for (size_t i = 0; i < 100; ++i) {
    x[i] = static_cast<double>(i) / 99.0;
    y[i] = x[i];
  }
  const DataTable data = table_from({x}, numeric_schema(1));
  ForestParams fp;
  fp.n_trees = 100;
  fp.tree.min_samples_split = 2;
  fp.tree.max_surrogates = 0;
  const ForestModel forest = fit_forest(data, y, fp, 7);

  double se = 0.0;
  for (size_t i = 0; i < 100; ++i) {
    const double pred = predict_forest(forest, std::vector<double>{x[i]}).value;
    se += (pred - y[i]) * (pred - y[i]);
  }
  const double rmse = std::sqrt(se / 100.0);
  const double data_std = std::sqrt(1.0 / 12.0);  // uniform on [0,1]
  CHECK(rmse < data_std / 5.0);
}

TEST_CASE("same seed gives identical forests, prediction is the tree mean") {
  RngStream rng(41);
  std::vector<double> x0(80), x1(80), y(80);
  for (size_t i = 0; i < 80; ++i) {
    x0[i] = rng.next_double();
    x1[i] = rng.next_double();
    y[i] = x0[i] * 2 + x1[i] + 0.05 * rng.next_normal();
  }
  const DataTable data = table_from({x0, x1}, numeric_schema(2));
  ForestParams fp;
  fp.n_trees = 30;
  const ForestModel a = fit_forest(data, y, fp, 99);
  const ForestModel b = fit_forest(data, y, fp, 99);

  const std::vector<double> probe = {0.4, 0.6};
  CHECK(predict_forest(a, probe).value == predict_forest(b, probe).value);
  CHECK(predict_forest(a, probe).dispersion == predict_forest(b, probe).dispersion);

  // mean-of-trees identity
  double mean = 0.0;
  for (const auto& tree : a.trees) mean += predict_tree_value(tree, probe);
  mean /= static_cast<double>(a.trees.size());
  CHECK(predict_forest(a, probe).value == doctest::Approx(mean).epsilon(1e-15));
}

TEST_CASE("hand-built ensembles expose the prediction contract") {
  ColumnSchema schema = numeric_schema(1);
  auto leaf_tree = [](double value) {
    Tree t;
    TreeNode node;
    node.is_leaf = true;
    node.value = value;
    t.nodes.push_back(node);
    return t;
  };

  SUBCASE("all trees agree") {
    ForestModel model;
    model.params.task = TreeTask::Regression;
    model.params.n_trees = 3;
    model.schema = schema;
    for (int i = 0; i < 3; ++i) model.trees.push_back(leaf_tree(7.5));
    const auto p = predict_forest(model, std::vector<double>{0.0});
    CHECK(p.value == doctest::Approx(7.5));
    CHECK(p.dispersion == doctest::Approx(0.0));
  }
  SUBCASE("two trees predicting 1 and 3") {
    ForestModel model;
    model.params.task = TreeTask::Regression;
    model.params.n_trees = 2;
    model.schema = schema;
    model.trees.push_back(leaf_tree(1.0));
    model.trees.push_back(leaf_tree(3.0));
    const auto p = predict_forest(model, std::vector<double>{0.0});
    CHECK(p.value == doctest::Approx(2.0));
    CHECK(p.dispersion == doctest::Approx(1.0));  // population convention
  }
  SUBCASE("classification vote fraction") {
    ForestModel model;
    model.params.task = TreeTask::Classification;
    model.params.n_classes = kNumPft;
    model.params.n_trees = 10;
    model.schema = schema;
    auto class_leaf = [](int cls) {
      Tree t;
      TreeNode node;
      node.is_leaf = true;
      node.class_counts.assign(kNumPft, 0.0);
      node.class_counts[static_cast<size_t>(cls)] = 5.0;
      t.nodes.push_back(node);
      return t;
    };
    for (int i = 0; i < 7; ++i) model.trees.push_back(class_leaf(pft_index(PftClass::GRL)));
    for (int i = 0; i < 3; ++i) model.trees.push_back(class_leaf(pft_index(PftClass::SHL)));
    const auto p = predict_forest(model, std::vector<double>{0.0});
    CHECK(p.class_index == pft_index(PftClass::GRL));
    CHECK(p.dispersion == doctest::Approx(0.3));
  }
}

TEST_CASE("variable importance") {
  SUBCASE("single-split stump concentrates on its predictor") {
    std::vector<double> x0 = {1, 2, 3, 4, 5, 6};
    std::vector<double> x1 = {1, 1, 1, 1, 1, 1};
    std::vector<double> y = {0, 0, 0, 1, 1, 1};
    const DataTable data = table_from({x0, x1}, numeric_schema(2));
    ForestParams fp;
    fp.n_trees = 1;
    fp.bootstrap = false;
    fp.tree = TreeParams{1, 2, 2, 0, 10};
    const ForestModel model = fit_forest(data, y, fp, 5);
    const auto imp = variable_importance(model);
    CHECK(imp[0] > 0.0);
    CHECK(imp[1] == doctest::Approx(0.0));
  }
  SUBCASE("duplicated informative column gains importance via surrogates") {
    RngStream rng(55);
    std::vector<double> x0(120), x1, x2(120), y;
    for (size_t i = 0; i < 120; ++i) {
      x0[i] = rng.next_double();
      x2[i] = rng.next_double();
    }
    x1 = x0;
    for (size_t i = 0; i < 120; ++i) y.push_back(x0[i] > 0.5 ? 4.0 : 1.0);
    const DataTable data = table_from({x0, x1, x2}, numeric_schema(3));
    ForestParams fp;
    fp.n_trees = 30;
    fp.tree.max_surrogates = 5;
    fp.tree.mtry = 3;
    const ForestModel model = fit_forest(data, y, fp, 6);
    const auto imp = variable_importance(model);
    CHECK(imp[0] > 0.0);
    CHECK(imp[1] > 0.0);  // duplicate picks up surrogate credit
  }
  SUBCASE("pure-noise predictor ranks last") {
    RngStream rng(60);
    const size_t n = 300;
    std::vector<double> x0(n), x1(n), noise(n), y(n);
    for (size_t i = 0; i < n; ++i) {
      x0[i] = rng.next_double();
      x1[i] = rng.next_double();
      noise[i] = rng.next_double();
      y[i] = 3.0 * x0[i] + x1[i] + 0.02 * rng.next_normal();
    }
    const DataTable data = table_from({x0, x1, noise}, numeric_schema(3));
    ForestParams fp;
    fp.n_trees = 200;
    fp.tree.max_surrogates = 0;
    const ForestModel model = fit_forest(data, y, fp, 8);
    const auto imp = variable_importance(model);
    CHECK(imp[2] < imp[0]);
    CHECK(imp[2] < imp[1]);
  }
}

TEST_CASE("permuting predictor columns permutes importance and keeps predictions") {
  RngStream rng(71);
  const size_t n = 90;
  std::vector<double> a(n), b(n), c(n), y(n);
  for (size_t i = 0; i < n; ++i) {
    a[i] = rng.next_double();
    b[i] = rng.next_double() * 2.0;
    c[i] = rng.next_double() - 0.5;
    y[i] = 2.0 * a[i] + std::sin(3.0 * b[i]) + 0.3 * c[i] + 0.01 * rng.next_normal();
  }
  ForestParams fp;
  fp.n_trees = 20;
  fp.tree.mtry = 3;  // full subset: fitting is rng-free given bootstrap rows
  fp.tree.max_surrogates = 2;
  // generous node sizes keep split gains tie-free, so the first-wins
  // tie-break cannot interact with column order
  fp.tree.min_samples_split = 12;
  fp.tree.max_splits = 15;

  ColumnSchema s1 = numeric_schema(3);
  s1.columns[0].name = "a";
  s1.columns[1].name = "b";
  s1.columns[2].name = "c";
  const DataTable d1 = table_from({a, b, c}, s1);
  ColumnSchema s2;
  s2.columns = {s1.columns[2], s1.columns[0], s1.columns[1]};  // c, a, b
  const DataTable d2 = table_from({c, a, b}, s2);

  const ForestModel m1 = fit_forest(d1, y, fp, 17);
  const ForestModel m2 = fit_forest(d2, y, fp, 17);
  const auto i1 = variable_importance(m1);
  const auto i2 = variable_importance(m2);
  CHECK(i2[0] == doctest::Approx(i1[2]).epsilon(1e-12));
  CHECK(i2[1] == doctest::Approx(i1[0]).epsilon(1e-12));
  CHECK(i2[2] == doctest::Approx(i1[1]).epsilon(1e-12));

  for (int probe = 0; probe < 10; ++probe) {
    const double pa = rng.next_double(), pb = rng.next_double(), pc = rng.next_double();
    const double v1 = predict_forest(m1, std::vector<double>{pa, pb, pc}).value;
    const double v2 = predict_forest(m2, std::vector<double>{pc, pa, pb}).value;
    CHECK(v1 == doctest::Approx(v2).epsilon(1e-14));
  }
}

TEST_CASE("boosted mode drives residuals down and beats its own stump") {
  RngStream rng(83);
  const size_t n = 200;
  std::vector<double> x(n), y(n);
  for (size_t i = 0; i < n; ++i) {
    x[i] = rng.next_double() * 4.0;
    y[i] = std::sin(x[i]) * 3.0 + 0.05 * rng.next_normal();
  }
  const DataTable data = table_from({x}, numeric_schema(1));
  ForestParams fp;
  fp.mode = ForestMode::Boosted;
  fp.learning_rate = 0.3;
  fp.tree.max_splits = 7;

  auto rmse_of = [&](const ForestModel& model) {
    double se = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double e = predict_forest(model, std::vector<double>{x[i]}).value - y[i];
      se += e * e;
    }
    return std::sqrt(se / static_cast<double>(n));
  };
  fp.n_trees = 1;
  const double rmse1 = rmse_of(fit_forest(data, y, fp, 4));
  fp.n_trees = 50;
  const double rmse50 = rmse_of(fit_forest(data, y, fp, 4));
  CHECK(rmse50 < rmse1 * 0.5);
  CHECK(rmse50 < 0.2);
}

TEST_CASE("serialization round trip preserves predictions bit-exactly") {
  RngStream rng(91);
  const size_t n = 100;
  std::vector<double> x0(n), x1(n), y(n);
  ColumnSchema schema = numeric_schema(1);
  ColumnSpec cat;
  cat.name = "cat";
  cat.kind = ColumnKind::Categorical;
  cat.categories = {"u", "v", "w"};
  schema.columns.push_back(cat);
  for (size_t i = 0; i < n; ++i) {
    x0[i] = rng.next_double();
    x1[i] = static_cast<double>(rng.next_below(3));
    y[i] = x0[i] * 5.0 + x1[i] + 0.1 * rng.next_normal();
    if (rng.next_double() < 0.1) x0[i] = kMissingValue;
  }
  const DataTable data = table_from({x0, x1}, schema);
  ForestParams fp;
  fp.n_trees = 12;
  fp.tree.max_surrogates = 3;
  const ForestModel model = fit_forest(data, y, fp, 1234);

  const auto path = std::filesystem::temp_directory_path() / "forest_model.json";
  save_forest(model, path);
  const ForestModel loaded = load_forest(path);

  CHECK(loaded.schema == model.schema);
  CHECK(loaded.importance == model.importance);
  RngStream probe_rng(2);
  for (int probe = 0; probe < 25; ++probe) {
    std::vector<double> row = {probe_rng.next_double(),
                               static_cast<double>(probe_rng.next_below(3))};
    if (probe % 4 == 0) row[0] = kMissingValue;
    const auto a = predict_forest(model, row);
    const auto b = predict_forest(loaded, row);
    CHECK(a.value == b.value);
    CHECK(a.dispersion == b.dispersion);
  }
}
