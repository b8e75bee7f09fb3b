#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>

#include "cpmoe/conformal.hpp"
#include "cpmoe/core.hpp"

namespace cpmoe {

struct ExpertPrediction {
  WindowId window = WindowId::W90;
  Label label = Label::NoEvol;
  double credibility = 0.0;
  double confidence = 0.0;
};

enum class Outcome { EvolW90, EvolW90_180, EvolW180_365, NoEvol, NoPrediction };

std::string_view to_string(Outcome outcome);
std::optional<Outcome> parse_outcome(std::string_view token);
Outcome evol_outcome(WindowId window);

struct MoeDecision {
  Outcome outcome = Outcome::NoPrediction;
  std::optional<double> credibility;  // winning expert's, absent for NoPrediction
  std::optional<WindowId> expert;     // winning expert's window
};

/// Credibility argmax over the experts at or above tau. Ties prefer Evol, then the
/// earlier window. Requires exactly one prediction per window.
MoeDecision aggregate(std::span<const ExpertPrediction> predictions, double tau);

struct PatientPrediction {
  MoeDecision decision;
  std::array<ExpertPrediction, kWindowCount> experts;  // indexed by window
};

ExpertPrediction expert_prediction(const CcpModel& expert, std::span<const double> x);

/// Runs every window expert on x and aggregates. Experts may be given in any order
/// but must cover the three windows and share one input schema.
PatientPrediction predict_patient(std::span<const CcpModel> experts, std::span<const double> x, double tau);

}  // namespace cpmoe
