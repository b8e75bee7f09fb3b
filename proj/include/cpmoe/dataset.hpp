#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cpmoe/core.hpp"

namespace cpmoe {

/// A raw measurement: a real number or a categorical token.
using RawValue = std::variant<double, std::string>;
/// A snapshot cell; monostate marks an absent measurement.
using FeatureValue = std::variant<std::monostate, double, std::string>;

struct AssessmentEvent {
  std::string patient_id;
  std::string feature_name;
  RawValue value;
  int date = 0;  // days since the patient's baseline
};

/// Follow-up information for one patient (the ground-truth sidecar).
struct PatientOutcome {
  std::string patient_id;
  std::optional<int> niv_onset;
  int last_followup = 0;
};

struct Snapshot {
  std::string patient_id;
  int ref_date = 0;
  std::vector<FeatureValue> values;  // aligned with SnapshotTable::feature_names
  std::optional<int> niv_onset;
  int last_followup = 0;
  SplitTag split = SplitTag::Unassigned;
};

struct SnapshotTable {
  std::vector<std::string> feature_names;
  std::vector<Snapshot> rows;
};

struct ParsedCohort {
  std::vector<AssessmentEvent> events;  // sorted by (patient_id, date, feature_name)
  std::vector<std::string> warnings;
};

/// Reads the `patient_id,date,feature,value` event CSV. Throws DataError naming the
/// line on malformed rows and on duplicate (patient, date, feature) triples.
ParsedCohort parse_cohort(std::istream& in);

/// Reads the `patient_id,niv_onset,last_followup` sidecar; an empty niv_onset means none.
std::vector<PatientOutcome> parse_outcomes(std::istream& in);

void write_cohort_csv(std::ostream& os, std::span<const AssessmentEvent> events);
void write_outcomes_csv(std::ostream& os, std::span<const PatientOutcome> outcomes);

/// Constrained single-linkage agglomeration of one patient's events by date. Two
/// clusters may merge only if the merged date span stays within max_gap_days and
/// they share no feature_name. Returns clusters as index lists ordered by reference
/// date; indices within a cluster are ordered by (date, index).
std::vector<std::vector<std::size_t>> cluster_events(std::span<const AssessmentEvent> events,
                                                     int max_gap_days);

/// Lower median of the cluster's event dates.
int reference_date(std::span<const AssessmentEvent> events, std::span<const std::size_t> cluster);

/// Groups events by patient, clusters them and emits one snapshot per cluster. The
/// feature schema is the sorted set of feature names in `events`. Every patient must
/// have an outcome record.
SnapshotTable build_snapshots(std::span<const AssessmentEvent> events,
                              std::span<const PatientOutcome> outcomes, int max_gap_days = 45);

/// Result of labeling a snapshot for one window; nullopt means Excluded.
std::optional<Label> label_for_window(const Snapshot& snapshot, const TimeWindow& window);

/// Wide snapshot CSV: patient_id,ref_date,<feature columns>; empty cells are absent.
void write_snapshots_csv(std::ostream& os, const SnapshotTable& table);
SnapshotTable parse_snapshots_csv(std::istream& in);

/// Reorders columns to `names`. Throws DataError naming the first missing feature;
/// extra columns are dropped.
SnapshotTable align_schema(const SnapshotTable& table, std::span<const std::string> names);

/// Median imputation plus one-hot encoding, fitted once and reapplied unchanged.
class Imputer {
 public:
  enum class ColumnKind { Real, Categorical };

  struct Column {
    std::string name;
    std::size_t source = 0;  // index into the raw feature schema
    ColumnKind kind = ColumnKind::Real;
    double median = 0.0;
    std::vector<std::string> categories;  // sorted; one output column each
  };

  static constexpr double kMaxMissingFraction = 0.40;

  Imputer() = default;
  Imputer(std::vector<std::string> raw_names, std::vector<Column> columns);

  /// Fits on `table.rows[i]` for i in `rows` only. Dropped features are appended to
  /// `warnings` when given.
  static Imputer fit(const SnapshotTable& table, std::span<const std::size_t> rows,
                     std::vector<std::string>* warnings = nullptr);

  std::vector<double> transform(const Snapshot& snapshot) const;

  const std::vector<std::string>& raw_names() const { return raw_names_; }
  const std::vector<Column>& columns() const { return columns_; }
  std::vector<std::string> encoded_names() const;
  std::size_t encoded_size() const;

 private:
  std::vector<std::string> raw_names_;
  std::vector<Column> columns_;
};

struct FeatureMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
};

/// Fits an Imputer on every snapshot and transforms them all.
FeatureMatrix impute_and_encode(const SnapshotTable& table, std::vector<std::string>* warnings = nullptr);

/// Labeled examples for one window built from `table.rows[i]`, i in `rows`, with
/// features from `imputer`. Excluded snapshots are skipped.
std::vector<LearningExample> make_examples(const SnapshotTable& table, const Imputer& imputer,
                                           WindowId window, std::span<const std::size_t> rows,
                                           SplitTag tag);
std::vector<LearningExample> make_examples(const SnapshotTable& table, const Imputer& imputer,
                                           WindowId window, SplitTag tag = SplitTag::Unassigned);

struct SyntheticConfig {
  std::size_t n_features = 10;   // numeric features; every third is stage-, rate- or noise-driven
  bool categorical_site = true;  // adds a two-level categorical feature
  double noise = 1.0;            // scales feature noise and onset jitter; 0 makes onset exact
  int visit_interval_days = 90;
  int visit_jitter_days = 10;
  int test_spread_days = 14;       // lab tests land this many days after the consultation
  double censoring_rate = 0.25;    // yearly drop-out hazard
  int max_followup_days = 2500;
  double onset_scale_days = 300.0;
  double rate_sd = 1.3;            // sd of the log progression rate
  double missing_rate = 0.05;
  double label_noise = 0.0;        // fraction of patients whose onset ignores their latent rate

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct PatientTruth {
  std::string patient_id;
  double log_rate = 0.0;
  double expected_onset = 0.0;  // onset implied by the latent rate alone
  std::optional<int> niv_onset;
  int last_followup = 0;
};

struct SyntheticCohort {
  std::vector<AssessmentEvent> events;  // sorted like parse_cohort output
  std::vector<PatientTruth> truth;

  std::vector<PatientOutcome> outcomes() const;
};

/// Deterministic given seed; every patient draws from its own derived stream.
SyntheticCohort generate_synthetic_cohort(std::uint64_t seed, std::size_t n_patients,
                                          const SyntheticConfig& config = {});

}  // namespace cpmoe
