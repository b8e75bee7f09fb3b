#pragma once

#include <string>

#include "json.hpp"

#include "cpmoe/classifiers.hpp"
#include "cpmoe/conformal.hpp"
#include "cpmoe/dataset.hpp"

namespace cpmoe {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const ClassifierSpec& spec);
ClassifierSpec spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Imputer& imputer);
Imputer imputer_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CcpModel& model);
CcpModel ccp_from_json(const nlohmann::json& j);

/// A window expert together with the encoder that produced its inputs.
struct ExpertBundle {
  Imputer imputer;
  CcpModel model;
};

std::string serialize(const ExpertBundle& bundle);
/// Throws DataError on malformed text or an unsupported version.
ExpertBundle deserialize_bundle(const std::string& text);

}  // namespace cpmoe
