#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpmoe/classifiers.hpp"
#include "cpmoe/core.hpp"
#include "cpmoe/feature_selection.hpp"
#include "cpmoe/resampling.hpp"

namespace cpmoe {

/// alpha = -y * decision_score: confidently correct examples get very negative alphas.
double nonconformity(const TrainedModel& model, std::span<const double> x, Label hypothesis);

/// (|{a in calibration : a >= alpha}| + 1) / (n + 1). Requires a non-empty list.
double p_value(std::span<const double> calibration, double alpha);

struct CalibrationScore {
  double alpha = 0.0;
  Label label = Label::NoEvol;
};

/// One cross-conformal fold: a model trained without the fold and that fold's
/// calibration scores, kept sorted by alpha.
struct FoldModel {
  std::vector<std::size_t> features;  // input columns seen by `model`
  TrainedModel model;
  std::vector<CalibrationScore> calibration;

  double nonconformity(std::span<const double> x, Label hypothesis) const;
  /// Number of calibration alphas >= alpha.
  std::size_t count_at_least(double alpha) const;
};

struct CcpModel {
  WindowId window = WindowId::W90;
  ClassifierSpec spec;
  std::size_t input_dim = 0;
  std::vector<std::string> feature_names;  // encoded input schema, may be empty
  std::vector<FoldModel> folds;

  std::size_t calibration_size() const;
};

struct CcpOptions {
  std::size_t k = 5;
  std::uint64_t seed = 0;
  std::optional<RebalancePlan> rebalance = RebalancePlan{};
  SelectionConfig selection;
  WindowId window = WindowId::W90;
};

/// Stratified k-fold cross-conformal fit. Rebalancing and feature selection are fitted
/// inside each proper-training set only; calibration alphas use true labels.
CcpModel ccp_fit(const ClassifierSpec& spec, std::span<const LearningExample> examples, const CcpOptions& options);

struct PValues {
  double p_evol = 1.0;
  double p_noevol = 1.0;

  double of(Label label) const { return label == Label::Evol ? p_evol : p_noevol; }
};

/// Pooled cross-conformal p-values: (sum_f count_f(alpha_f >=) + 1) / (n_cal + 1).
PValues ccp_p_values(const CcpModel& ccp, std::span<const double> x);

struct ForcedPrediction {
  Label label = Label::Evol;
  double credibility = 0.0;
  double confidence = 0.0;
};

/// argmax p-value (ties to Evol), credibility = max p, confidence = 1 - min p.
ForcedPrediction forced_prediction(const PValues& p);

struct LabelSet {
  bool evol = false;
  bool noevol = false;

  bool contains(Label label) const { return label == Label::Evol ? evol : noevol; }
  bool empty() const { return !evol && !noevol; }
  std::size_t size() const { return static_cast<std::size_t>(evol) + static_cast<std::size_t>(noevol); }
};

/// {y : p(y) > epsilon}.
LabelSet prediction_region(const PValues& p, double epsilon);

}  // namespace cpmoe
