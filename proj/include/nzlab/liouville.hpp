#pragma once

// Commutator Liouvillians, the Bohr-frequency eigenprojections of the
// system Liouvillian, and the projector pair (P, Q) built on the bath
// reference state.

#include <cstdint>
#include <string>
#include <vector>

#include "nzlab/linalg.hpp"
#include "nzlab/model.hpp"

namespace nzlab {

// L(X) = -i(HX - XH).
Superoperator liouvillian(const OperatorMatrix& H);

struct BohrBlock {
    double omega = 0.0;
    Superoperator projector;                    // acts on dimS x dimS operators
    std::vector<std::pair<int, int>> pairs;     // (i, j) eigenvector index pairs in the block
};

struct BohrDecomposition {
    std::vector<BohrBlock> entries;
    double degeneracy_tol = 0.0;
    OperatorMatrix eigenvectors;                // V with H_S = V E V^dag
    Eigen::VectorXd eigenvalues;
    int dimS() const { return int(eigenvalues.size()); }
};

// Eigenprojections of L_S = -i[H_S, .]: omega_m runs over the pairwise
// eigenvalue differences E_i - E_j, clustered within tol (default
// 1e-8 * ||H_S||). Q_m keeps exactly the |i><j| components of its cluster.
BohrDecomposition bohr_decomposition(const OperatorMatrix& H_S, double tol = -1.0);

// The block projector lifted to the full S+B space (bath factor untouched).
Superoperator total_space_projector(const BohrDecomposition& bohr, int m, int dim_b);

struct ProjectorPair {
    Superoperator P;           // X -> tr_B(X) (x) reference
    Superoperator Q;           // 1 - P
    OperatorMatrix reference;  // Omega_B
    int dimS = 0;
    int dimB = 0;
};

ProjectorPair build_projectors(const ModelSpec& spec);

struct AlgebraResidual {
    std::string relation;
    double residual = 0.0;
};

struct ProjectorAlgebraReport {
    std::vector<AlgebraResidual> residuals;
    double max_residual = 0.0;
    bool passed = false;
    int probes = 0;
    std::uint64_t seed = 0;
};

// Max residuals of the projector relations over seeded random probes:
// P^2-P, Q^2-Q, PQ, QP, [P,L_S], P L_B, L_B Q - L_B, P L_SB P.
// Passes when every residual is at most 1e-9.
ProjectorAlgebraReport verify_projector_algebra(const ProjectorPair& pair, const ModelSpec& spec,
                                                int probes, std::uint64_t seed = 0x5eed);

}  // namespace nzlab
