#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cpmoe {

enum class Label : int { NoEvol = 0, Evol = 1 };

/// +1 for Evol, -1 for NoEvol.
constexpr int sign_of(Label label) { return label == Label::Evol ? 1 : -1; }
constexpr Label other(Label label) { return label == Label::Evol ? Label::NoEvol : Label::Evol; }

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view token);

enum class WindowId : int { W90 = 0, W90_180 = 1, W180_365 = 2 };

/// Half-open prediction horizon [start_days, end_days) measured from a snapshot's reference date.
struct TimeWindow {
  WindowId id;
  int start_days;
  int end_days;
};

inline constexpr std::array<TimeWindow, 3> kWindows{{
    {WindowId::W90, 0, 90},
    {WindowId::W90_180, 90, 180},
    {WindowId::W180_365, 180, 365},
}};

inline constexpr std::size_t kWindowCount = kWindows.size();

constexpr const TimeWindow& window_of(WindowId id) { return kWindows[static_cast<std::size_t>(id)]; }
constexpr std::size_t index_of(WindowId id) { return static_cast<std::size_t>(id); }

std::string_view to_string(WindowId id);
std::optional<WindowId> parse_window(std::string_view token);

/// Where an example currently sits in the evaluation protocol. Fit routines refuse
/// Test and Calibration rows; see audit.hpp.
enum class SplitTag : int { Unassigned = 0, Train, ProperTrain, Calibration, Test };

std::string_view to_string(SplitTag tag);

struct LearningExample {
  std::vector<double> features;
  Label label = Label::NoEvol;
  WindowId window = WindowId::W90;
  std::string patient_id;
  int ref_date = 0;
  SplitTag split = SplitTag::Unassigned;
  bool synthetic = false;  // produced by SMOTE
};

/// Bad user configuration or command-line values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant does not hold (includes leakage-audit failures).
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cpmoe
