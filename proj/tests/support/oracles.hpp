#pragma once

// Independent reference implementations used to check the library:
// exhaustive split search, brute-force CWM construction, and dense
// kernel algebra. Deliberately slow and simple.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "traitscale/cwm.hpp"
#include "traitscale/dataset.hpp"
#include "traitscale/forest.hpp"

namespace oracles {

using namespace traitscale;

inline double sse_of(const std::vector<double>& ys) {
  if (ys.empty()) return 0.0;
  double mean = 0.0;
  for (double y : ys) mean += y;
  mean /= static_cast<double>(ys.size());
  double sse = 0.0;
  for (double y : ys) sse += (y - mean) * (y - mean);
  return sse;
}

inline double gini_count_of(const std::vector<double>& ys, int n_classes) {
  if (ys.empty()) return 0.0;
  std::vector<double> counts(static_cast<size_t>(n_classes), 0.0);
  for (double y : ys) counts[static_cast<size_t>(y)] += 1.0;
  double sq = 0.0;
  for (double c : counts) sq += c * c;
  return static_cast<double>(ys.size()) - sq / static_cast<double>(ys.size());
}

inline double impurity_of(const std::vector<double>& ys, TreeTask task, int n_classes) {
  return task == TreeTask::Regression ? sse_of(ys) : gini_count_of(ys, n_classes);
}

/// Best achievable impurity decrease over every candidate split of every
/// feature, enumerated exhaustively (numeric midpoints; all categorical
/// subsets regardless of cardinality).
inline double best_gain_bruteforce(const DataTable& data, const std::vector<double>& targets,
                                   const std::vector<size_t>& rows, TreeTask task,
                                   int n_classes) {
  double best = 0.0;
  for (size_t f = 0; f < data.n_cols(); ++f) {
    std::vector<std::pair<double, double>> present;  // (x, y)
    for (size_t r : rows)
      if (!is_missing(data.at(r, f))) present.emplace_back(data.at(r, f), targets[r]);
    if (present.size() < 2) continue;

    std::vector<double> all_y;
    for (const auto& [x, y] : present) all_y.push_back(y);
    const double parent = impurity_of(all_y, task, n_classes);

    if (data.schema().at(f).kind == ColumnKind::Numeric) {
      std::sort(present.begin(), present.end());
      for (size_t i = 0; i + 1 < present.size(); ++i) {
        if (present[i].first == present[i + 1].first) continue;
        const double threshold = 0.5 * (present[i].first + present[i + 1].first);
        std::vector<double> left, right;
        for (const auto& [x, y] : present) (x < threshold ? left : right).push_back(y);
        best = std::max(best, parent - impurity_of(left, task, n_classes) -
                                  impurity_of(right, task, n_classes));
      }
    } else {
      std::vector<int> levels;
      for (const auto& [x, y] : present) {
        const int code = static_cast<int>(std::lround(x));
        if (std::find(levels.begin(), levels.end(), code) == levels.end())
          levels.push_back(code);
      }
      std::sort(levels.begin(), levels.end());
      if (levels.size() < 2) continue;
      const uint32_t n_masks = 1u << (levels.size() - 1);
      for (uint32_t mask = 1; mask < n_masks; ++mask) {
        std::vector<double> left, right;
        for (const auto& [x, y] : present) {
          const int code = static_cast<int>(std::lround(x));
          bool go_left = false;
          for (size_t b = 0; b + 1 < levels.size(); ++b)
            if ((mask & (1u << b)) && levels[b + 1] == code) go_left = true;
          (go_left ? left : right).push_back(y);
        }
        if (left.empty() || right.empty()) continue;
        best = std::max(best, parent - impurity_of(left, task, n_classes) -
                                  impurity_of(right, task, n_classes));
      }
    }
  }
  return best;
}

/// Root-split impurity decrease of a fitted tree in raw (un-normalized)
/// units.
inline double root_gain(const Tree& tree, size_t n_rows) {
  if (tree.nodes.empty() || tree.nodes[0].is_leaf) return 0.0;
  return tree.nodes[0].gain * static_cast<double>(n_rows);
}

/// Brute-force CWM: scans every record with no spatial prefilter; same
/// tie and rejection rules as the library contract.
inline std::optional<CwmSample> pixel_cwm_reference(size_t pixel_id, double lat, double lon,
                                                    const std::array<double, kNumPft>& abundance,
                                                    const std::vector<GeoRecord>& records,
                                                    const CwmConfig& config) {
  double veg_total = 0.0;
  for (int p = 0; p < kNumVegetatedPft; ++p) veg_total += abundance[p];
  if (!(veg_total > 0.0)) return std::nullopt;

  CwmSample sample;
  sample.pixel_id = pixel_id;
  sample.lat = lat;
  sample.lon = lon;
  sample.abundance = abundance;

  std::array<std::array<double, kNumTraits>, kNumVegetatedPft> means{};
  std::array<bool, kNumVegetatedPft> represented{};
  double rep_abundance = 0.0;

  for (int p = 0; p < kNumVegetatedPft; ++p) {
    if (!(abundance[p] > 0.0)) continue;
    std::vector<std::pair<double, const GeoRecord*>> hits;
    for (const auto& r : records) {
      if (pft_index(r.pft) != p) continue;
      const double d = haversine_km(lat, lon, r.lat, r.lon);
      if (d <= config.max_km) hits.emplace_back(d, &r);
    }
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return a.second->record_id < b.second->record_id;
    });
    if (hits.size() > static_cast<size_t>(config.k)) hits.resize(static_cast<size_t>(config.k));
    if (hits.empty()) continue;
    represented[p] = true;
    rep_abundance += abundance[p];
    for (const auto& [d, r] : hits) {
      sample.contributions[p].push_back({r->record_id, d});
      for (int t = 0; t < kNumTraits; ++t) means[p][t] += r->traits[t];
    }
    for (int t = 0; t < kNumTraits; ++t) means[p][t] /= static_cast<double>(hits.size());
  }

  sample.represented_fraction = rep_abundance / veg_total;
  if (!(sample.represented_fraction > config.min_represented)) return std::nullopt;
  for (int t = 0; t < kNumTraits; ++t) {
    double acc = 0.0;
    for (int p = 0; p < kNumVegetatedPft; ++p)
      if (represented[p]) acc += abundance[p] * means[p][t];
    sample.traits[t] = acc / rep_abundance;
  }
  return sample;
}

/// 3x3 matrix inverse by cofactors.
inline Eigen::Matrix3d inverse3(const Eigen::Matrix3d& m) {
  Eigen::Matrix3d adj;
  adj(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  adj(0, 1) = -(m(0, 1) * m(2, 2) - m(0, 2) * m(2, 1));
  adj(0, 2) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
  adj(1, 0) = -(m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0));
  adj(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
  adj(1, 2) = -(m(0, 0) * m(1, 2) - m(0, 2) * m(1, 0));
  adj(2, 0) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
  adj(2, 1) = -(m(0, 0) * m(2, 1) - m(0, 1) * m(2, 0));
  adj(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const double det = m(0, 0) * adj(0, 0) + m(0, 1) * adj(1, 0) + m(0, 2) * adj(2, 0);
  return adj / det;
}

}  // namespace oracles
