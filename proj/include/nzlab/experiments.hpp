#pragma once

// Scenario runner: the van Hove scaling study, the secular-growth
// demonstration with a wrong reference state, the factorization table,
// and the command line entry point.

#include <cstdint>
#include <string>
#include <vector>

#include "nzlab/model.hpp"
#include "nzlab/nz.hpp"

namespace nzlab {

struct StudyConfig {
    std::string model_name = "study";
    ModelSpec spec;  // as loaded; recentered per lambda when the study runs
    CorrelatedStateRecipe recipe;
    double recipe_strength = 1.0;
    std::vector<int> recipe_modes;
    bool recipe_hann = true;
    std::vector<double> lambdas{0.4, 0.2, 0.1};
    std::vector<double> tau_grid;
    double eta = 0.0;  // <= 0 picks five bath level spacings
    double dt = 0.02;
    OperatorMatrix wrong_reference;  // secular demo only; empty otherwise
    std::uint64_t seed = 0;
    std::string output;

    // window guard for every lambda up front, plus shape checks
    void validate() const;
    std::string hash() const;  // FNV-1a over a canonical serialization, hex
};

// the frozen defaults: quasi-continuum model, photon-packet recipe,
// lambda in {0.4, 0.2, 0.1}, tau = k/16 up to 2
StudyConfig default_study_config();
// same scaffolding around any built-in model
StudyConfig config_for_model(const std::string& name);

struct StudyRow {
    double lambda = 0.0, tau = 0.0;
    double d_markov = 0.0, i_norm = 0.0, q_norm = 0.0;
};

struct StudyResult {
    std::vector<StudyRow> rows;  // config lambda order, tau ascending within
    std::string config_hash;
    double eta_used = 0.0;
    double eta_rate_shift = 0.0;  // worst relative rate change under eta doubling
    std::vector<double> per_lambda_seconds;
    double elapsed_seconds = 0.0;
};

StudyResult scaling_study(const StudyConfig& cfg);

struct StudySummary {
    std::vector<double> lambdas;  // descending
    std::vector<double> imax;     // max_tau i_norm per lambda
    std::vector<double> d_final;  // d_markov at the last tau
    std::vector<double> q_unit;   // q_norm at the tau nearest 1
    std::vector<double> q_zero;   // q_norm at tau = 0
    bool imax_decreasing = false;
    bool imax_ratio_in_band = false;  // successive ratios within [0.3, 0.8]
    bool d_final_decreasing = false;
    bool d_final_halved = false;  // smallest lambda under half of largest
    bool q_unit_decreasing = false;
    bool q_zero_lambda_free = false;  // to 1e-12
    bool eta_stable = false;          // rates move < 30% when eta doubles
    bool passed = false;
};

StudySummary summarize_study(const StudyResult& res, const StudyConfig& cfg);

struct SecularReport {
    double omega_m = 0.0;  // block the integral is taken in
    std::vector<double> T_grid;
    std::vector<double> wrong_values, correct_values;
    double wrong_slope = 0.0, wrong_intercept = 0.0, wrong_residual = 0.0, wrong_range = 0.0;
    double correct_slope = 0.0, correct_residual = 0.0, correct_range = 0.0;
    double operand_norm = 0.0;
    bool wrong_grows = false;    // positive slope, linear to < 1% of range
    bool correct_flat = false;   // slope below 1e-6 of the operand norm
    bool passed = false;
};

// S(T) = || int_0^T Q' e^{(L0 + i w_m) t} dt applied to a reference-range
// operand || for the wrong and the correct projector, with linear fits.
SecularReport secular_demo(const StudyConfig& cfg, int n_points = 8);

struct FactorizationReport {
    std::vector<double> lambdas;  // descending
    std::vector<double> taus;     // 0, 0.5, 1
    std::vector<std::vector<double>> q;  // [lambda][tau]
    std::vector<bool> decreasing;        // per tau > 0 column
    bool tau0_lambda_free = false;
    bool passed = false;
};

FactorizationReport factorization_decay(const StudyConfig& cfg);

void write_study_csv(const StudyResult& res, const std::string& path);

int run_cli(int argc, char** argv);

}  // namespace nzlab
