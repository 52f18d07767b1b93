#pragma once

#include <string>

#include <json.hpp>

#include "cn/model.hpp"

// Internal JSON forms shared by the model and chain checkpoint writers.
// Not installed; include only from library sources.

namespace cn::detail {

// Complete checkpoint object for one model, format fields included.
nlohmann::json model_to_json(const TrainedCnModel& model);

// Inverse of model_to_json. `context` names the source in error messages.
TrainedCnModel model_from_json(const nlohmann::json& j, const std::string& context);

}  // namespace cn::detail
