#pragma once

// Exact propagation, the Q-projected propagator e^{L0' t}, the windowed
// operator R_m(tau) = int_0^{tau/lambda^2} Q e^{(L0'+i w_m)t} dt, memory
// kernels, the initial-correlation term, the recurrence identity check,
// and the van Hove Markovian generator.

#include <vector>

#include "nzlab/linalg.hpp"
#include "nzlab/liouville.hpp"
#include "nzlab/model.hpp"

namespace nzlab {

struct Trajectory {
    std::vector<double> times;
    std::vector<OperatorMatrix> states;
};

struct MarkovGenerator {
    Superoperator K;        // acts on dimS x dimS system operators
    OperatorMatrix K_dense; // dimS^2 x dimS^2, column-major vec convention
    double eta = 0.0;
    std::vector<std::pair<double, OperatorMatrix>> per_block;  // (omega_m, contribution)
};

// rho(t) = e^{-iHt} rho0 e^{iHt} with the full H at spec.lambda.
Trajectory propagate_exact(const ModelSpec& spec, const OperatorMatrix& rho0,
                           const std::vector<double>& times);

// e^{L0' t} X0 for Q-ranged X0, L0' = L0 + lambda Q L_SB Q. Dense
// exponential stepping up to kDenseSuperCap, 4th-order stepping beyond.
OperatorMatrix propagate_Q_projected(const ProjectorPair& pair, const ModelSpec& spec,
                                     const OperatorMatrix& X0, double t, double dt);

// R_m(tau) over the window T = tau/lambda^2. eta > 0 damps the integrand
// by e^{-eta t} (used by the convergence diagnostics; the definition has
// eta = 0).
Superoperator R_operator(const ProjectorPair& pair, const ModelSpec& spec,
                         const BohrDecomposition& bohr, int m, double tau, double lambda,
                         double dt, double eta = 0.0);

// K_mn(tau) = P Qt_m L_SB R_m(tau) L_SB Qt_n P. dt <= 0 picks
// 0.05/||H|| automatically.
Superoperator memory_kernel(const ProjectorPair& pair, const ModelSpec& spec,
                            const BohrDecomposition& bohr, int m, int n, double tau,
                            double lambda, double dt = 0.0);

// I(tau) = lambda sum_m P Qt_m L_SB R_m(tau) Q rho0.
OperatorMatrix correlation_term(const ProjectorPair& pair, const ModelSpec& spec,
                                const BohrDecomposition& bohr, const OperatorMatrix& rho0,
                                double tau, double lambda, double dt = 0.0);

// Hilbert-Schmidt norms of I(tau) over a uniform tau grid, evaluated in a
// single propagation pass.
std::vector<double> correlation_norm_curve(const ProjectorPair& pair, const ModelSpec& spec,
                                           const BohrDecomposition& bohr,
                                           const OperatorMatrix& rho0,
                                           const std::vector<double>& tau_grid, double lambda,
                                           double dt = 0.0);

// Integrates the projected master equation (memory kernel plus initial
// correlation) for the reduced state; returns the interaction-picture
// trajectory rho_I(tau) on the system space. tau values must sit on the
// dt lattice of t = tau/lambda^2. include_correlation=false zeroes the
// inhomogeneous term (diagnostic switch).
Trajectory solve_nz(const ProjectorPair& pair, const ModelSpec& spec,
                    const BohrDecomposition& bohr, const OperatorMatrix& rho0,
                    const std::vector<double>& tau_grid, double lambda, double dt,
                    bool include_correlation = true);

// K = -sum_m P Qt_m L_SB Q (L0 + i w_m - eta)^{-1} L_SB Qt_m P reduced to
// the system operator space. Independent of lambda by construction.
MarkovGenerator vanhove_generator(const ProjectorPair& pair, const ModelSpec& spec,
                                  const BohrDecomposition& bohr, double eta);

// Worst relative disagreement between the resolvent assembly above and a
// damped time-integral route, over all generator columns.
double vanhove_two_route_residual(const ProjectorPair& pair, const ModelSpec& spec,
                                  const BohrDecomposition& bohr, double eta, double dt = 0.01);

// rho_I(tau) = e^{K tau} rho_S0 by dense exponentials.
Trajectory markov_propagate(const MarkovGenerator& gen, const OperatorMatrix& rhoS0,
                            const std::vector<double>& tau_grid);

struct RecurrenceReport {
    double residual = 0.0;            // || R - reassembled right side ||_F
    double r_norm = 0.0;              // || R ||_F
    double resolvent_term_norm = 0.0;
    double kernel_correction_norm = 0.0;  // finite-bath zero-mode term
    double conv_window = 0.0;             // base window for the boundedness check
    double conv_max_base = 0.0;           // max ||Conv(t)||_2 over [0, W]
    double conv_max_doubled = 0.0;        // max over [W, 2W]
    bool conv_bounded = false;            // conv_max_doubled <= 1.05 * conv_max_base
    double lambda_cubed_r = 0.0;          // lambda^3 ||R||_F, the discarded-order scale
    double omega_m = 0.0;
    double tau = 0.0, lambda = 0.0, dt = 0.0;
    int steps = 0;
};

// Rebuilds R_m(tau) from the convolution identity
//   R = Q phi_T(A) + lambda e^{i w_m T} A^+ Conv(T) - lambda A^+ Q L_SB R
//       + lambda Pi_ker Q L_SB (T R - R_1),
// A = L0 + i w_m, and reports the residual together with the boundedness
// of Conv(t) = int_0^t e^{L0(t-s)} Q L_SB Q e^{L0' s} ds over a doubled
// window. The zero-mode term is a finite-bath contribution: ker(A) meets
// the range of Q here, while a continuum bath buries it in the 0+
// prescription.
RecurrenceReport verify_recurrence(const ProjectorPair& pair, const ModelSpec& spec,
                                   const BohrDecomposition& bohr, int m, double tau,
                                   double lambda, double dt);

// e^{-L_S t} r: undoes the free system rotation using exact Bohr phases.
OperatorMatrix rotate_interaction(const BohrDecomposition& bohr, const OperatorMatrix& r, double t);

// Relaxation rates of the generator: -Re of the eigenvalues, ascending.
std::vector<double> decay_rates(const MarkovGenerator& gen);

}  // namespace nzlab
