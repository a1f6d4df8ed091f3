#include "nzlab/presets.hpp"

#include <cmath>

#include "nzlab/errors.hpp"

namespace nzlab {

namespace {

double hann(int j, int n) {
    double s = std::sin(M_PI * (j + 0.5) / n);
    return s * s;
}

// Ring profile for the quasi-continuum: coupling grows as sqrt(|detuning|)
// inside a ring of half-width 0.2 and vanishes at exact resonance, so no
// mode couples at zero Bohr frequency. The lowest eight modes are anchor
// modes with a fixed Hann envelope, well outside the ring.
double study_profile(double omega) {
    const double dw = 0.6 / 39.0;
    const double w1 = 1.0 - 25.0 * dw;
    int j = static_cast<int>(std::lround((omega - w1) / dw));
    if (j >= 0 && j < 8) return 0.05 * hann(j, 8);
    double delta = std::abs(omega - 1.0);
    if (delta <= 0.2 + 1e-12) return 0.018 * std::sqrt(delta / 0.2);
    return 0.0;
}

}  // namespace

ModelSpec preset_model(const std::string& name) {
    if (name == "small") {
        return center_interaction(
            build_friedrichs_model(2, 1.0, {1.5, 1.62}, [](double) { return 0.3; }));
    }
    if (name == "study") {
        const double dw = 0.6 / 39.0;
        return center_interaction(
            build_friedrichs_model(40, 1.0, {1.0 - 25.0 * dw, 1.0 + 14.0 * dw}, study_profile));
    }
    if (name == "spinbath") {
        return center_interaction(build_spin_bath_model(3, 1.0, {0.3, 0.25, 0.2}));
    }
    if (name == "golden") {
        return center_interaction(
            build_friedrichs_model(81, 1.0, {0.5, 1.5}, [](double) { return 0.05; }));
    }
    throw ValidationError("unknown preset model '" + name +
                          "'; expected small, study, spinbath, or golden");
}

CorrelatedStateRecipe preset_recipe(const ModelSpec& spec, const std::string& name) {
    if (name == "small") return packet_recipe(spec, 0.8, {0, 1}, true);
    if (name == "study") return packet_recipe(spec, 1.0, {36, 37, 38, 39}, true);
    if (name == "spinbath" || name == "golden") {
        CorrelatedStateRecipe r;
        r.ops_L.push_back(OperatorMatrix::Identity(spec.dim(), spec.dim()));
        return r;
    }
    throw ValidationError("unknown preset recipe '" + name + "'");
}

std::vector<std::string> preset_names() { return {"small", "study", "spinbath", "golden"}; }

}  // namespace nzlab
