#include "cpmoe/feature_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cpmoe/audit.hpp"
#include "cpmoe/metrics.hpp"
#include "cpmoe/random.hpp"

namespace cpmoe {
namespace {

constexpr double kWorst = -std::numeric_limits<double>::infinity();

std::size_t feature_count(std::span<const LearningExample> examples) {
  if (examples.empty()) throw DataError("feature ranking needs examples");
  return examples.front().features.size();
}

struct Range {
  double lo, hi;
  bool constant() const { return !(hi > lo); }
};

Range range_of(std::span<const LearningExample> examples, std::size_t j) {
  Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& ex : examples) {
    r.lo = std::min(r.lo, ex.features[j]);
    r.hi = std::max(r.hi, ex.features[j]);
  }
  return r;
}

// Per-bin class counts over 10 equal-width bins; index 1 is Evol.
std::vector<std::array<double, 2>> binned_counts(std::span<const LearningExample> examples, std::size_t j, Range r) {
  std::vector<std::array<double, 2>> bins(kDiscretizationBins, {0.0, 0.0});
  const double width = (r.hi - r.lo) / static_cast<double>(kDiscretizationBins);
  for (const auto& ex : examples) {
    auto b = static_cast<std::size_t>((ex.features[j] - r.lo) / width);
    b = std::min(b, kDiscretizationBins - 1);
    bins[b][ex.label == Label::Evol] += 1.0;
  }
  return bins;
}

double entropy(double a, double b) {
  const double n = a + b;
  double h = 0.0;
  for (double c : {a, b})
    if (c > 0) h -= (c / n) * std::log2(c / n);
  return h;
}

std::vector<std::size_t> ranks_from_scores(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> rank(scores.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
  return rank;
}

}  // namespace

std::vector<double> point_biserial_scores(std::span<const LearningExample> examples) {
  const std::size_t d = feature_count(examples);
  const double n = static_cast<double>(examples.size());
  double y_mean = 0.0;
  for (const auto& ex : examples) y_mean += ex.label == Label::Evol;
  y_mean /= n;
  std::vector<double> out(d, kWorst);
  for (std::size_t j = 0; j < d; ++j) {
    if (range_of(examples, j).constant()) continue;
    double x_mean = 0.0;
    for (const auto& ex : examples) x_mean += ex.features[j];
    x_mean /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (const auto& ex : examples) {
      const double dx = ex.features[j] - x_mean;
      const double dy = (ex.label == Label::Evol ? 1.0 : 0.0) - y_mean;
      sxy += dx * dy;
      sxx += dx * dx;
      syy += dy * dy;
    }
    out[j] = syy > 0 && sxx > 0 ? std::abs(sxy / std::sqrt(sxx * syy)) : 0.0;
  }
  return out;
}

std::vector<double> information_gain_scores(std::span<const LearningExample> examples) {
  const std::size_t d = feature_count(examples);
  const double n = static_cast<double>(examples.size());
  double evol = 0.0;
  for (const auto& ex : examples) evol += ex.label == Label::Evol;
  const double prior = entropy(evol, n - evol);
  std::vector<double> out(d, kWorst);
  for (std::size_t j = 0; j < d; ++j) {
    const auto r = range_of(examples, j);
    if (r.constant()) continue;
    double conditional = 0.0;
    for (const auto& bin : binned_counts(examples, j, r)) {
      const double m = bin[0] + bin[1];
      if (m > 0) conditional += (m / n) * entropy(bin[0], bin[1]);
    }
    out[j] = prior - conditional;
  }
  return out;
}

std::vector<double> chi_square_scores(std::span<const LearningExample> examples) {
  const std::size_t d = feature_count(examples);
  const double n = static_cast<double>(examples.size());
  double evol = 0.0;
  for (const auto& ex : examples) evol += ex.label == Label::Evol;
  const std::array<double, 2> column{n - evol, evol};
  std::vector<double> out(d, kWorst);
  for (std::size_t j = 0; j < d; ++j) {
    const auto r = range_of(examples, j);
    if (r.constant()) continue;
    double chi2 = 0.0;
    for (const auto& bin : binned_counts(examples, j, r)) {
      const double row = bin[0] + bin[1];
      for (int c = 0; c < 2; ++c) {
        const double expected = row * column[c] / n;
        if (expected > 0) chi2 += (bin[c] - expected) * (bin[c] - expected) / expected;
      }
    }
    out[j] = chi2;
  }
  return out;
}

FeatureRanking rank_features(std::span<const LearningExample> examples) {
  audit::require_fit_input(examples, "rank_features");
  const std::size_t d = feature_count(examples);
  if (d < 2) throw DataError("rank_features: need at least 2 features");
  std::size_t evol = 0;
  for (const auto& ex : examples) evol += ex.label == Label::Evol;
  if (evol == 0 || evol == examples.size()) throw DataError("rank_features: both classes must be present");

  FeatureRanking r;
  r.filter_ranks[0] = ranks_from_scores(point_biserial_scores(examples));
  r.filter_ranks[1] = ranks_from_scores(information_gain_scores(examples));
  r.filter_ranks[2] = ranks_from_scores(chi_square_scores(examples));
  r.mean_rank.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    for (const auto& ranks : r.filter_ranks) r.mean_rank[j] += static_cast<double>(ranks[j]);
    r.mean_rank[j] /= static_cast<double>(kFilterCount);
  }
  r.order.resize(d);
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(), [&](auto a, auto b) { return r.mean_rank[a] < r.mean_rank[b]; });
  return r;
}

double kuncheva_index(std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t n_features) {
  if (a.size() != b.size()) throw InvariantError("kuncheva_index: subsets differ in size");
  const std::size_t k = a.size();
  if (k == 0 || k >= n_features) return 0.0;
  std::vector<std::size_t> sa(a.begin(), a.end()), sb(b.begin(), b.end()), common;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
  const double r = static_cast<double>(common.size());
  const double kk = static_cast<double>(k), n = static_cast<double>(n_features);
  return (r * n - kk * kk) / (kk * (n - kk));
}

std::vector<LearningExample> project(std::span<const LearningExample> examples, std::span<const std::size_t> features) {
  std::vector<LearningExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    LearningExample p = ex;
    p.features = project(ex.features, features);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<double> project(std::span<const double> x, std::span<const std::size_t> features) {
  std::vector<double> out;
  out.reserve(features.size());
  for (auto j : features) out.push_back(x[j]);
  return out;
}

SelectionResult select_top_k(std::span<const LearningExample> examples, const FeatureRanking& ranking,
                             std::span<const std::size_t> k_grid, std::size_t inner_folds, std::uint64_t seed,
                             const ClassifierSpec& spec) {
  audit::require_fit_input(examples, "select_top_k");
  const std::size_t d = feature_count(examples);
  if (ranking.order.size() != d) throw InvariantError("select_top_k: ranking does not match the feature count");
  if (k_grid.empty()) throw ConfigError("select_top_k: empty k grid");
  std::vector<std::size_t> grid(k_grid.begin(), k_grid.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() < 1 || grid.back() > d)
    throw ConfigError("select_top_k: k grid must lie within [1, " + std::to_string(d) + "]");

  SelectionResult result;
  auto take = [&](const FeatureRanking& r, std::size_t k) {
    std::vector<std::size_t> top(r.order.begin(), r.order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(top.begin(), top.end());
    return top;
  };

  if (grid.size() == 1) {
    result.k = grid.front();
    result.features = take(ranking, result.k);
    result.scores.push_back({result.k, 0.0, 0.0});
    return result;
  }

  const auto labels = labels_of(examples);
  const auto fold = stratified_kfold(labels, inner_folds, seed);
  std::vector<std::vector<LearningExample>> inner_train(inner_folds), inner_test(inner_folds);
  for (std::size_t i = 0; i < examples.size(); ++i)
    for (std::size_t f = 0; f < inner_folds; ++f) (fold[i] == f ? inner_test : inner_train)[f].push_back(examples[i]);
  std::vector<FeatureRanking> inner_rankings;
  for (const auto& t : inner_train) inner_rankings.push_back(rank_features(t));

  double best = -std::numeric_limits<double>::infinity();
  for (auto k : grid) {
    KScore score{k, 0.0, 0.0};
    std::vector<std::vector<std::size_t>> subsets;
    for (std::size_t f = 0; f < inner_folds; ++f) {
      subsets.push_back(take(inner_rankings[f], k));
      const auto model = train(spec, project(inner_train[f], subsets.back()));
      std::vector<double> scores;
      for (const auto& ex : inner_test[f]) scores.push_back(decision_score(model, project(ex.features, subsets.back())));
      score.auc += auc(scores, labels_of(inner_test[f]));
    }
    score.auc /= static_cast<double>(inner_folds);
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < subsets.size(); ++a)
      for (std::size_t b = a + 1; b < subsets.size(); ++b, ++pairs) score.stability += kuncheva_index(subsets[a], subsets[b], d);
    if (pairs) score.stability /= static_cast<double>(pairs);
    result.scores.push_back(score);
    if (score.objective() > best) {
      best = score.objective();
      result.k = k;
    }
  }
  result.features = take(ranking, result.k);
  return result;
}

}  // namespace cpmoe
