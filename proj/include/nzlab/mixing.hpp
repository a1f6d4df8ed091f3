#pragma once

// Diagnostics for how well a finite bath emulates a mixing reservoir:
// autocorrelation decay, relaxation of expectation values onto the
// bath-factorized reference, factorization under free evolution, and a
// spectrum quality report for L_B.

#include <complex>
#include <vector>

#include "nzlab/linalg.hpp"
#include "nzlab/model.hpp"

namespace nzlab {

// C(t) = tr{X(t) Y Omega} - tr{X Omega} tr{Y Omega}, X(t) Heisenberg.
std::vector<cxd> bath_autocorrelation(const ModelSpec& spec, const OperatorMatrix& X,
                                      const OperatorMatrix& Y,
                                      const std::vector<double>& t_grid);

struct DecayReport {
    std::vector<double> times;
    std::vector<std::vector<double>> deviation;  // [observable][time]
    std::vector<double> initial;
    std::vector<double> final_value;
    std::vector<double> first_below;  // first grid time below 5% of initial, inf if never
    std::vector<bool> stays_below;    // once below, stays below to the end
    std::vector<bool> observable_passed;
    bool passed = false;  // every observable ends below 5% of where it started
};

// Deviation |tr{D e^{L_B t} rho0} - tr{D (tr_B rho0 x Omega)}| per
// observable. Bath evolution only; the system factor rides along.
DecayReport relaxation_check(const ModelSpec& spec, const OperatorMatrix& rho0,
                             const std::vector<OperatorMatrix>& observables,
                             const std::vector<double>& t_grid);

// Same metric for the full free evolution against the factorized
// comparison e^{L_S t}(tr_B rho0 x Omega): how fast free motion alone
// erases the initial correlation footprint.
DecayReport free_factorization_check(const ModelSpec& spec, const OperatorMatrix& rho0,
                                     const std::vector<OperatorMatrix>& observables,
                                     const std::vector<double>& t_grid);

struct SpectrumLine {
    double omega = 0.0;
    int multiplicity = 0;
    bool flagged = false;  // nonzero frequency shared by several pairs
};

struct BathSpectrumReport {
    std::vector<SpectrumLine> lines;  // clustered Bohr frequencies of H_B, ascending
    int kernel_dimension = 0;
    double min_nonzero_gap = 0.0;  // between adjacent distinct frequencies
    bool quasi_continuum_ok = false;
};

BathSpectrumReport bath_spectrum_report(const ModelSpec& spec);

}  // namespace nzlab
