#pragma once

#include <json.hpp>

#include "nzlab/experiments.hpp"
#include "nzlab/model.hpp"

namespace nzlab {

// Matrices serialize row-major as nested arrays of [re, im] pairs.
nlohmann::json matrix_to_json(const OperatorMatrix& M);
OperatorMatrix matrix_from_json(const nlohmann::json& j);

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

// StudyConfig document: either {"model": "study"} naming a preset or a
// full {"model": {...}} spec, plus recipe/lambdas/tau_grid/eta/dt/seed
// and the optional wrong_reference for the secular demo.
StudyConfig study_config_from_json(const nlohmann::json& j);
nlohmann::json study_config_to_json(const StudyConfig& cfg);

}  // namespace nzlab
