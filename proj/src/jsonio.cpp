#include "nzlab/jsonio.hpp"

#include "nzlab/errors.hpp"
#include "nzlab/presets.hpp"

namespace nzlab {

using nlohmann::json;

json matrix_to_json(const OperatorMatrix& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            row.push_back(json::array({M(i, j).real(), M(i, j).imag()}));
        rows.push_back(std::move(row));
    }
    return rows;
}

OperatorMatrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty())
        throw ValidationError("matrix JSON must be a nonempty array of rows");
    size_t rows = j.size();
    if (!j[0].is_array()) throw ValidationError("matrix JSON rows must be arrays");
    size_t cols = j[0].size();
    OperatorMatrix M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw ValidationError("matrix JSON rows have inconsistent lengths");
        for (size_t c = 0; c < cols; ++c) {
            const json& e = j[i][c];
            if (e.is_number()) {
                M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                    cxd(e.get<double>(), 0.0);
            } else if (e.is_array() && e.size() == 2) {
                M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                    cxd(e[0].get<double>(), e[1].get<double>());
            } else {
                throw ValidationError("matrix JSON entries must be numbers or [re, im] pairs");
            }
        }
    }
    return M;
}

json spec_to_json(const ModelSpec& spec) {
    json j;
    j["dimS"] = spec.dimS;
    j["dimB"] = spec.dimB;
    j["lambda"] = spec.lambda;
    j["H_S"] = matrix_to_json(spec.H_S);
    j["H_B"] = matrix_to_json(spec.H_B);
    j["H_SB"] = matrix_to_json(spec.H_SB);
    j["omega_B"] = matrix_to_json(spec.omega_B);
    j["window"] = {{"t_rec", spec.window.t_rec}, {"usable_fraction", spec.window.usable_fraction}};
    j["tolerances"] = {{"herm_tol", spec.tol.herm_tol},
                       {"stat_tol", spec.tol.stat_tol},
                       {"degeneracy_tol", spec.tol.degeneracy_tol}};
    return j;
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec spec;
    try {
        spec.dimS = j.at("dimS").get<int>();
        spec.dimB = j.at("dimB").get<int>();
        spec.H_S = matrix_from_json(j.at("H_S"));
        spec.H_B = matrix_from_json(j.at("H_B"));
        spec.H_SB = matrix_from_json(j.at("H_SB"));
        spec.omega_B = matrix_from_json(j.at("omega_B"));
        spec.lambda = j.value("lambda", 1.0);
        if (j.contains("window")) {
            spec.window.t_rec = j["window"].value("t_rec", 0.0);
            spec.window.usable_fraction = j["window"].value("usable_fraction", 0.5);
        } else {
            spec.window = estimate_bath_window(spec.H_B, spec.tol.degeneracy_tol);
        }
        if (j.contains("tolerances")) {
            spec.tol.herm_tol = j["tolerances"].value("herm_tol", spec.tol.herm_tol);
            spec.tol.stat_tol = j["tolerances"].value("stat_tol", spec.tol.stat_tol);
            spec.tol.degeneracy_tol =
                j["tolerances"].value("degeneracy_tol", spec.tol.degeneracy_tol);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model JSON is malformed: ") + e.what());
    }
    spec.validate();
    return spec;
}

StudyConfig study_config_from_json(const json& j) {
    StudyConfig cfg;
    try {
        if (j.contains("model")) {
            if (j["model"].is_string()) {
                cfg.model_name = j["model"].get<std::string>();
                cfg.spec = preset_model(cfg.model_name);
            } else {
                cfg.model_name = "custom";
                cfg.spec = spec_from_json(j["model"]);
            }
        } else {
            cfg.spec = preset_model(cfg.model_name);
        }
        if (j.contains("recipe")) {
            const json& r = j["recipe"];
            cfg.recipe_strength = r.value("c", 1.0);
            cfg.recipe_hann = r.value("hann", true);
            cfg.recipe_modes.clear();
            for (const auto& m : r.value("modes", json::array()))
                cfg.recipe_modes.push_back(m.get<int>());
            cfg.recipe =
                packet_recipe(cfg.spec, cfg.recipe_strength, cfg.recipe_modes, cfg.recipe_hann);
        } else if (cfg.model_name != "custom") {
            cfg.recipe = preset_recipe(cfg.spec, cfg.model_name);
        } else {
            throw ValidationError("custom model configs must carry a recipe");
        }
        if (j.contains("lambdas")) cfg.lambdas = j["lambdas"].get<std::vector<double>>();
        if (j.contains("tau_grid")) cfg.tau_grid = j["tau_grid"].get<std::vector<double>>();
        cfg.eta = j.value("eta", cfg.eta);
        cfg.dt = j.value("dt", cfg.dt);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.output = j.value("output", cfg.output);
        if (j.contains("wrong_reference")) {
            const json& w = j["wrong_reference"];
            if (w.is_string()) {
                // "thermal:BETA" built against the model's bath
                const std::string s = w.get<std::string>();
                if (s.rfind("thermal:", 0) != 0)
                    throw ValidationError("wrong_reference string must look like thermal:BETA");
                double beta = std::stod(s.substr(8));
                cfg.wrong_reference = thermal_state(cfg.spec.H_B, beta);
            } else {
                cfg.wrong_reference = matrix_from_json(w);
            }
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("study config JSON is malformed: ") + e.what());
    }
    if (cfg.tau_grid.empty())
        for (int k = 0; k <= 32; ++k) cfg.tau_grid.push_back(k / 16.0);
    return cfg;
}

json study_config_to_json(const StudyConfig& cfg) {
    json j;
    if (cfg.model_name == "custom")
        j["model"] = spec_to_json(cfg.spec);
    else
        j["model"] = cfg.model_name;
    j["recipe"] = {{"c", cfg.recipe_strength},
                   {"hann", cfg.recipe_hann},
                   {"modes", cfg.recipe_modes}};
    j["lambdas"] = cfg.lambdas;
    j["tau_grid"] = cfg.tau_grid;
    j["eta"] = cfg.eta;
    j["dt"] = cfg.dt;
    j["seed"] = cfg.seed;
    if (!cfg.output.empty()) j["output"] = cfg.output;
    if (cfg.wrong_reference.size() > 0) j["wrong_reference"] = matrix_to_json(cfg.wrong_reference);
    return j;
}

}  // namespace nzlab
