#include "cpmoe/moe.hpp"

#include <stdexcept>

namespace cpmoe {

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::EvolW90: return "Evol@W90";
    case Outcome::EvolW90_180: return "Evol@W90_180";
    case Outcome::EvolW180_365: return "Evol@W180_365";
    case Outcome::NoEvol: return "NoEvol";
    case Outcome::NoPrediction: return "NoPrediction";
  }
  return "?";
}

std::optional<Outcome> parse_outcome(std::string_view token) {
  for (auto o : {Outcome::EvolW90, Outcome::EvolW90_180, Outcome::EvolW180_365, Outcome::NoEvol, Outcome::NoPrediction})
    if (to_string(o) == token) return o;
  return std::nullopt;
}

Outcome evol_outcome(WindowId window) {
  switch (window) {
    case WindowId::W90: return Outcome::EvolW90;
    case WindowId::W90_180: return Outcome::EvolW90_180;
    case WindowId::W180_365: return Outcome::EvolW180_365;
  }
  throw InvariantError("evol_outcome: unknown window");
}

MoeDecision aggregate(std::span<const ExpertPrediction> predictions, double tau) {
  if (predictions.size() != kWindowCount)
    throw InvariantError("aggregate: expected one prediction per window, got " + std::to_string(predictions.size()));
  std::array<const ExpertPrediction*, kWindowCount> by_window{};
  for (const auto& p : predictions) {
    auto& slot = by_window[index_of(p.window)];
    if (slot) throw InvariantError("aggregate: duplicate prediction for window " + std::string(to_string(p.window)));
    slot = &p;
  }

  // Scanning windows in order and replacing only on a strict improvement keeps the
  // earlier window on exact ties.
  const ExpertPrediction* winner = nullptr;
  for (const auto* p : by_window) {
    if (!(p->credibility >= tau)) continue;
    if (!winner || p->credibility > winner->credibility ||
        (p->credibility == winner->credibility && p->label == Label::Evol && winner->label == Label::NoEvol))
      winner = p;
  }
  if (!winner) return {};
  MoeDecision d;
  d.outcome = winner->label == Label::Evol ? evol_outcome(winner->window) : Outcome::NoEvol;
  d.credibility = winner->credibility;
  d.expert = winner->window;
  return d;
}

ExpertPrediction expert_prediction(const CcpModel& expert, std::span<const double> x) {
  const auto fp = forced_prediction(ccp_p_values(expert, x));
  return {expert.window, fp.label, fp.credibility, fp.confidence};
}

PatientPrediction predict_patient(std::span<const CcpModel> experts, std::span<const double> x, double tau) {
  if (experts.size() != kWindowCount)
    throw InvariantError("predict_patient: expected " + std::to_string(kWindowCount) + " experts");
  std::array<const CcpModel*, kWindowCount> by_window{};
  for (const auto& e : experts) {
    auto& slot = by_window[index_of(e.window)];
    if (slot) throw InvariantError("predict_patient: duplicate expert for window " + std::string(to_string(e.window)));
    if (e.input_dim != experts.front().input_dim || e.feature_names != experts.front().feature_names)
      throw DataError("predict_patient: experts do not share one feature schema");
    slot = &e;
  }
  PatientPrediction out;
  for (std::size_t w = 0; w < kWindowCount; ++w) out.experts[w] = expert_prediction(*by_window[w], x);
  out.decision = aggregate(out.experts, tau);
  return out;
}

}  // namespace cpmoe
