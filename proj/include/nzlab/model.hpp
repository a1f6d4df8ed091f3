#pragma once

// Finite system+reservoir models: a two-level atom against a discretized
// mode continuum, a qubit against a thermal spin bath, interaction
// centering, and correlated initial states of the sector form
// sum_i L_i (1 (x) Omega_B) L_i^dag.

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "nzlab/linalg.hpp"

namespace nzlab {

struct Tolerances {
    double herm_tol = 1e-9;
    double stat_tol = 1e-9;
    double degeneracy_tol = 1e-8;
};

// Finite-bath surrogate for the mixing hypothesis: beyond a fraction of the
// recurrence time the discrete reservoir starts to echo.
struct BathWindow {
    double t_rec = 0.0;
    double usable_fraction = 0.5;
    double usable() const { return t_rec * usable_fraction; }
};

struct ModelSpec {
    int dimS = 0;
    int dimB = 0;
    OperatorMatrix H_S;
    OperatorMatrix H_B;
    OperatorMatrix H_SB;
    double lambda = 0.0;
    OperatorMatrix omega_B;  // stationary reference state of the bath
    Tolerances tol;
    BathWindow window;

    int dim() const { return dimS * dimB; }
    OperatorMatrix total_hamiltonian() const;  // H_S (x) 1 + 1 (x) H_B + lambda*H_SB
    ModelSpec with_lambda(double lam) const;
    void validate() const;
};

struct CorrelatedStateRecipe {
    std::vector<OperatorMatrix> ops_L;
    bool normalize = true;
};

// Recurrence-time estimate from the spectrum of H_B: 2*pi over the smallest
// nonzero gap between sorted eigenvalues (gaps below degeneracy_tol merged).
BathWindow estimate_bath_window(const OperatorMatrix& H_B, double degeneracy_tol,
                                double usable_fraction = 0.5);

// The window every long-time guard trusts: spec.window when its recurrence
// time is set, otherwise the estimate above applied to spec.H_B.
BathWindow resolve_bath_window(const ModelSpec& spec);

// Two-level system (splitting omega0) coupled to N modes equally spaced
// across band, excitation-conserving coupling with per-mode amplitude
// coupling_profile(omega_k). N=1 puts the single mode at the band midpoint.
ModelSpec build_friedrichs_model(int N, double omega0, std::pair<double, double> band,
                                 const std::function<double(double)>& coupling_profile,
                                 double lambda = 1.0);

// Qubit coupled to N bath spins, thermal reference exp(-beta H_B)/Z. Each
// bath spin k couples through sigma_x(x)sigma_x^k + sigma_z(x)sigma_z^k with
// strength couplings[k], so the bath average of H_SB is nonzero and the
// centering step below is not a no-op.
ModelSpec build_spin_bath_model(int N, double beta, const std::vector<double>& couplings,
                                double lambda = 1.0);

// Shifts the mean field into H_S so that the projected interaction
// satisfies P L_SB P = 0. Total Hamiltonian unchanged.
ModelSpec center_interaction(const ModelSpec& spec);

// rho0 = sum_i L_i (1 (x) Omega_B) L_i^dag, optionally trace-normalized;
// the normalization factor is written to trace_out when given.
OperatorMatrix build_correlated_state(const ModelSpec& spec, const CorrelatedStateRecipe& recipe,
                                      double* trace_out = nullptr);

// Seeded +-percent perturbation of the bath mode frequencies, for breaking
// accidental spacing degeneracies. Recomputes the window estimate.
ModelSpec apply_frequency_jitter(const ModelSpec& spec, double percent, std::uint64_t seed);

// Thermal state of H: exp(-beta H) / Z.
OperatorMatrix thermal_state(const OperatorMatrix& H, double beta);

// Convenience packet recipe: L = 1 + c * (sigma_- (x) |w><vac|) with w a
// normalized window (Hann or flat) over the selected modes of a Friedrichs
// bath. Mode indices are 0-based.
CorrelatedStateRecipe packet_recipe(const ModelSpec& spec, double c,
                                    const std::vector<int>& modes, bool hann_window = true);

}  // namespace nzlab
