#pragma once

#include <string>
#include <vector>

#include "nzlab/model.hpp"

namespace nzlab {

// Built-in desk-scale models, centered on construction:
//   small    two-level system and two off-resonant modes; every dense
//            cross-check runs here
//   study    40-mode quasi-continuum with a ring coupling profile and
//            anchor modes, the scaling-study workhorse
//   spinbath three spins at incommensurate frequencies, thermal reference
//   golden   81 flat-coupled modes for the golden-rule rate comparison
ModelSpec preset_model(const std::string& name);

// The matching correlated-state recipe (photon-packet style for the
// Friedrichs models, factorized for the others).
CorrelatedStateRecipe preset_recipe(const ModelSpec& spec, const std::string& name);

std::vector<std::string> preset_names();

}  // namespace nzlab
