#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cpmoe/core.hpp"

namespace cpmoe {

/// Undersample the majority class to majority:minority = majority_share:minority_share,
/// then SMOTE the minority class up to the majority count.
struct RebalancePlan {
  int majority_share = 60;
  int minority_share = 40;
  std::size_t smote_k = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Keeps every minority example and a uniform sample without replacement of
/// `target_majority_count` majority examples. Original order is preserved.
std::vector<LearningExample> random_undersample(std::span<const LearningExample> examples,
                                                std::size_t target_majority_count, std::uint64_t seed);

/// Synthesizes `target_count - minority.size()` points by interpolating a random
/// minority point toward one of its k nearest minority neighbours (Euclidean distance
/// after per-feature standardization over the minority set). k is clamped to size - 1.
std::vector<LearningExample> smote(std::span<const LearningExample> minority, std::size_t target_count,
                                   std::size_t k, std::uint64_t seed);

/// Undersample then SMOTE. The result lists the retained originals followed by the
/// synthetic points.
std::vector<LearningExample> rebalance(std::span<const LearningExample> examples, const RebalancePlan& plan);

/// ceil(minority * majority_share / minority_share).
std::size_t undersample_target(std::size_t minority_count, const RebalancePlan& plan);

}  // namespace cpmoe
