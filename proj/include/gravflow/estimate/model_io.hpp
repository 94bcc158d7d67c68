#pragma once

#include "gravflow/core/json_io.hpp"
#include "gravflow/estimate/bootstrap.hpp"
#include "gravflow/estimate/compare.hpp"
#include "gravflow/estimate/glm.hpp"

namespace gravflow {

json to_json(const ModelSpec& spec);
// Missing keys keep their defaults; throws InputError for wrong types or values.
ModelSpec model_spec_from_json(const json& j);

// model.json layout. Round-trips every field the simulator needs.
json to_json(const FittedModel& f);
FittedModel fitted_model_from_json(const json& j);

json to_json(const ModelComparison& c);
json to_json(const FamilyComparison& c);
json to_json(const BootstrapReport& r);
json to_json(const std::vector<FloorSensitivityRow>& rows);

}  // namespace gravflow
