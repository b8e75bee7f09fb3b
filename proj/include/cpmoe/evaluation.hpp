#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cpmoe/classifiers.hpp"
#include "cpmoe/conformal.hpp"
#include "cpmoe/dataset.hpp"
#include "cpmoe/feature_selection.hpp"
#include "cpmoe/resampling.hpp"

namespace cpmoe {

struct EvalConfig {
  std::size_t outer_folds = 5;
  std::size_t inner_folds = 5;  // cross-conformal k
  std::vector<double> taus{0.80, 0.90, 0.95};
  std::vector<double> epsilons{0.05, 0.10, 0.20};
  std::uint64_t seed = 0;
  ClassifierSpec classifier = ClassifierSpec::svm_poly();
  std::optional<RebalancePlan> rebalance = RebalancePlan{};
  SelectionConfig selection{{3, 6, 9, 12}, 3};
  // Negative control for the leakage audit: feeds the outer-test rows into rebalancing.
  bool leak_test_into_rebalance = false;

  void validate() const;
};

/// One Table-3 style row; tau absent is the "All" row.
struct MetricRow {
  std::optional<double> tau;
  std::optional<double> auc_mean;
  std::optional<double> auc_sd;
  std::optional<double> sens;
  std::optional<double> spec;
  double coverage = 1.0;
};

struct WindowReport {
  WindowId window = WindowId::W90;
  std::vector<MetricRow> rows;
};

struct MoeRow {
  std::optional<double> tau;
  std::size_t evol_as_evol = 0;
  std::size_t noevol_as_noevol = 0;
  std::size_t misclassifications = 0;
  std::size_t predictions = 0;  // made, i.e. not NoPrediction
  std::size_t total = 0;        // snapshot-window pairs in the validation set

  double misclassification_fraction() const;
  double prediction_fraction() const;
};

struct MoeReport {
  std::vector<MoeRow> rows;
};

struct ValidityRow {
  WindowId window = WindowId::W90;
  double epsilon = 0.0;
  double error_rate = 0.0;  // true label outside the prediction region
  std::size_t n = 0;
};

struct FoldSelection {
  std::size_t outer_fold = 0;
  WindowId window = WindowId::W90;
  std::vector<std::vector<std::string>> features;  // per cross-conformal fold
};

struct EvaluationResult {
  std::array<WindowReport, kWindowCount> windows;
  std::array<WindowReport, kWindowCount> standard;  // bare classifier, single All row
  MoeReport moe;
  std::vector<ValidityRow> validity;
  std::vector<FoldSelection> selections;
  std::array<std::size_t, kWindowCount> evol_counts{};
  std::array<std::size_t, kWindowCount> noevol_counts{};
  std::vector<std::string> warnings;
};

/// Nested protocol: outer stratified folds over snapshots, cross-conformal experts
/// per window inside each outer-train split, reports over the outer-test splits.
EvaluationResult evaluate(const SnapshotTable& table, const EvalConfig& config);

struct WindowEvaluation {
  std::array<WindowReport, kWindowCount> conformal;
  std::array<WindowReport, kWindowCount> standard;
};

WindowEvaluation evaluate_windows(const SnapshotTable& table, const EvalConfig& config);
MoeReport evaluate_moe(const SnapshotTable& table, const EvalConfig& config);

/// Column headers are fixed; see FORMATS.md.
void write_window_report_csv(std::ostream& os, std::span<const WindowReport> reports);
void write_moe_report_csv(std::ostream& os, const MoeReport& report);
void write_validity_csv(std::ostream& os, std::span<const ValidityRow> rows);
std::string summary_json(const EvaluationResult& result, const EvalConfig& config);

std::string tau_label(const std::optional<double>& tau);

}  // namespace cpmoe
