#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cpmoe/core.hpp"

namespace cpmoe {

/// Fold index per example. Each class is shuffled with `seed` and dealt round-robin;
/// the dealing position carries over between classes so fold sizes stay level.
/// Throws ConfigError when a class has fewer than k members.
std::vector<std::size_t> stratified_kfold(std::span<const Label> labels, std::size_t k, std::uint64_t seed);

/// Same dealing over arbitrary integer strata. Small strata are allowed.
std::vector<std::size_t> stratified_assign(std::span<const int> strata, std::size_t k, std::uint64_t seed);

std::vector<Label> labels_of(std::span<const LearningExample> examples);

/// Mann-Whitney AUC with Evol as the positive class: (concordant + tied / 2) / (n_pos n_neg).
/// Throws DataError when one class is missing.
double auc(std::span<const double> scores, std::span<const Label> labels);

struct SensSpec {
  std::optional<double> sensitivity;  // absent when there are no Evol truths
  std::optional<double> specificity;  // absent when there are no NoEvol truths
};

SensSpec sens_spec(std::span<const Label> predictions, std::span<const Label> truths);

}  // namespace cpmoe
