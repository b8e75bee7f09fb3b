#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cpmoe/classifiers.hpp"
#include "cpmoe/core.hpp"

namespace cpmoe {

inline constexpr std::size_t kFilterCount = 3;
inline constexpr std::size_t kDiscretizationBins = 10;

/// Filter statistics used by the consensus ranking; constant features score -inf.
std::vector<double> point_biserial_scores(std::span<const LearningExample> examples);
std::vector<double> information_gain_scores(std::span<const LearningExample> examples);
std::vector<double> chi_square_scores(std::span<const LearningExample> examples);

struct FeatureRanking {
  std::vector<std::size_t> order;                             // best first
  std::vector<double> mean_rank;                              // per feature, 1-based
  std::array<std::vector<std::size_t>, kFilterCount> filter_ranks;  // per filter, per feature, 1-based
};

/// Ranks by |point-biserial r|, information gain and chi-square (10 equal-width bins),
/// combined by mean rank; ties go to the lower feature index.
FeatureRanking rank_features(std::span<const LearningExample> examples);

/// Chance-corrected overlap (r n - k^2) / (k (n - k)) of two equal-size subsets of
/// n features. Defined as 0 when k is 0 or n.
double kuncheva_index(std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t n_features);

struct SelectionConfig {
  std::vector<std::size_t> k_grid;  // empty disables selection
  std::size_t folds = 3;
};

struct KScore {
  std::size_t k = 0;
  double auc = 0.0;
  double stability = 0.0;
  double objective() const { return 0.5 * (auc + stability); }
};

struct SelectionResult {
  std::vector<std::size_t> features;  // sorted ascending
  std::size_t k = 0;
  std::vector<KScore> scores;
};

/// Picks k from `k_grid` maximizing (mean inner-CV AUC + mean pairwise Kuncheva
/// stability) / 2, ties to the smaller k, and returns the top k of `ranking`.
SelectionResult select_top_k(std::span<const LearningExample> examples, const FeatureRanking& ranking,
                             std::span<const std::size_t> k_grid, std::size_t inner_folds, std::uint64_t seed,
                             const ClassifierSpec& spec);

/// Copies of `examples` restricted to `features`, in that order.
std::vector<LearningExample> project(std::span<const LearningExample> examples, std::span<const std::size_t> features);
std::vector<double> project(std::span<const double> x, std::span<const std::size_t> features);

}  // namespace cpmoe
