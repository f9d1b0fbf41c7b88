#pragma once

#include <nlohmann/json.hpp>

#include "crm/adam.hpp"
#include "crm/dataset.hpp"
#include "crm/model.hpp"
#include "crm/train.hpp"

namespace crm {

// ADL hooks so nlohmann::json can (de)serialize the config structs. Unknown
// keys are rejected and error messages carry the offending field name.

void to_json(nlohmann::json& j, const SyntheticConfig& config);
void from_json(const nlohmann::json& j, SyntheticConfig& config);

void to_json(nlohmann::json& j, const ModelConfig& config);
void from_json(const nlohmann::json& j, ModelConfig& config);

void to_json(nlohmann::json& j, const AdamConfig& config);
void from_json(const nlohmann::json& j, AdamConfig& config);

void to_json(nlohmann::json& j, const EpochSegment& segment);
void from_json(const nlohmann::json& j, EpochSegment& segment);

void to_json(nlohmann::json& j, const PhaseConfig& phase);
void from_json(const nlohmann::json& j, PhaseConfig& phase);

void to_json(nlohmann::json& j, const TrainConfig& config);
void from_json(const nlohmann::json& j, TrainConfig& config);

}  // namespace crm
