#include "cpmoe/core.hpp"

namespace cpmoe {

std::string_view to_string(Label label) { return label == Label::Evol ? "Evol" : "NoEvol"; }

std::optional<Label> parse_label(std::string_view token) {
  if (token == "Evol") return Label::Evol;
  if (token == "NoEvol") return Label::NoEvol;
  return std::nullopt;
}

std::string_view to_string(WindowId id) {
  switch (id) {
    case WindowId::W90: return "W90";
    case WindowId::W90_180: return "W90_180";
    case WindowId::W180_365: return "W180_365";
  }
  return "?";
}

std::optional<WindowId> parse_window(std::string_view token) {
  for (const auto& w : kWindows)
    if (to_string(w.id) == token) return w.id;
  return std::nullopt;
}

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::Unassigned: return "unassigned";
    case SplitTag::Train: return "train";
    case SplitTag::ProperTrain: return "proper-train";
    case SplitTag::Calibration: return "calibration";
    case SplitTag::Test: return "test";
  }
  return "?";
}

}  // namespace cpmoe
