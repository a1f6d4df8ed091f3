#include "nzlab/liouville.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace nzlab {

Superoperator liouvillian(const OperatorMatrix& H) {
    require_hermitian(H, 1e-9 * std::max(1.0, H.norm()), "liouvillian");
    auto Hp = std::make_shared<OperatorMatrix>(H);
    return Superoperator(int(H.rows()), [Hp](const OperatorMatrix& X) {
        return (cxd(0.0, -1.0) * ((*Hp) * X - X * (*Hp))).eval();
    });
}

BohrDecomposition bohr_decomposition(const OperatorMatrix& H_S, double tol) {
    require_hermitian(H_S, 1e-9 * std::max(1.0, H_S.norm()), "bohr_decomposition");
    const int d = int(H_S.rows());
    if (tol < 0.0) tol = 1e-8 * std::max(1.0, H_S.norm());

    BohrDecomposition out;
    out.degeneracy_tol = tol;
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(H_S);
    out.eigenvalues = es.eigenvalues();
    out.eigenvectors = es.eigenvectors();

    // cluster the d^2 pairwise differences within tol
    struct Item { double omega; int i, j; };
    std::vector<Item> items;
    items.reserve(size_t(d) * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            items.push_back({out.eigenvalues(i) - out.eigenvalues(j), i, j});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.omega < b.omega; });

    size_t lo = 0;
    while (lo < items.size()) {
        size_t hi = lo + 1;
        while (hi < items.size() && items[hi].omega - items[hi - 1].omega <= tol) ++hi;
        BohrBlock block;
        double sum = 0.0;
        for (size_t k = lo; k < hi; ++k) {
            sum += items[k].omega;
            block.pairs.emplace_back(items[k].i, items[k].j);
        }
        block.omega = sum / double(hi - lo);
        if (std::abs(block.omega) <= tol) block.omega = 0.0;
        lo = hi;
        out.entries.push_back(std::move(block));
    }

    // attach mask-projector closures in the eigenbasis
    auto V = std::make_shared<OperatorMatrix>(out.eigenvectors);
    bool diagonal = ((*V) - OperatorMatrix::Identity(d, d)).norm() < 1e-13;
    for (auto& block : out.entries) {
        auto pairs = std::make_shared<std::vector<std::pair<int, int>>>(block.pairs);
        block.projector = Superoperator(d, [V, pairs, diagonal, d](const OperatorMatrix& X) {
            OperatorMatrix Xe = diagonal ? X : OperatorMatrix((*V).adjoint() * X * (*V));
            OperatorMatrix out_e = OperatorMatrix::Zero(d, d);
            for (auto [i, j] : *pairs) out_e(i, j) = Xe(i, j);
            return diagonal ? out_e : OperatorMatrix((*V) * out_e * (*V).adjoint());
        });
    }
    return out;
}

Superoperator total_space_projector(const BohrDecomposition& bohr, int m, int dim_b) {
    if (m < 0 || m >= int(bohr.entries.size()))
        throw ValidationError("total_space_projector: block index out of range");
    const int dS = bohr.dimS();
    const int D = dS * dim_b;
    auto V = std::make_shared<OperatorMatrix>(bohr.eigenvectors);
    bool diagonal = ((*V) - OperatorMatrix::Identity(dS, dS)).norm() < 1e-13;
    auto pairs = std::make_shared<std::vector<std::pair<int, int>>>(bohr.entries[m].pairs);
    return Superoperator(D, [V, pairs, diagonal, dS, dim_b, D](const OperatorMatrix& X) {
        OperatorMatrix W;
        if (!diagonal) W = tensor(*V, OperatorMatrix::Identity(dim_b, dim_b));
        OperatorMatrix Xe = diagonal ? X : OperatorMatrix(W.adjoint() * X * W);
        OperatorMatrix out_e = OperatorMatrix::Zero(D, D);
        for (auto [i, j] : *pairs)
            out_e.block(i * dim_b, j * dim_b, dim_b, dim_b) =
                Xe.block(i * dim_b, j * dim_b, dim_b, dim_b);
        return diagonal ? out_e : OperatorMatrix(W * out_e * W.adjoint());
    });
}

ProjectorPair build_projectors(const ModelSpec& spec) {
    spec.validate();
    double stat = (spec.H_B * spec.omega_B - spec.omega_B * spec.H_B).norm();
    if (stat > spec.tol.stat_tol)
        throw ValidationError("build_projectors: reference not stationary, ||[H_B, omega_B]|| = " +
                              std::to_string(stat));
    const int dS = spec.dimS, dB = spec.dimB, D = spec.dim();
    auto ref = std::make_shared<OperatorMatrix>(spec.omega_B);

    Superoperator P(D, [ref, dS, dB](const OperatorMatrix& X) {
        return tensor(partial_trace_bath(X, dS, dB), *ref);
    });
    Superoperator Q(D, [ref, dS, dB](const OperatorMatrix& X) {
        return (X - tensor(partial_trace_bath(X, dS, dB), *ref)).eval();
    });

    ProjectorPair pair;
    pair.P = std::move(P);
    pair.Q = std::move(Q);
    pair.reference = spec.omega_B;
    pair.dimS = dS;
    pair.dimB = dB;
    return pair;
}

ProjectorAlgebraReport verify_projector_algebra(const ProjectorPair& pair, const ModelSpec& spec,
                                                int probes, std::uint64_t seed) {
    spec.validate();
    const int D = spec.dim();
    OperatorMatrix id_b = OperatorMatrix::Identity(spec.dimB, spec.dimB);
    OperatorMatrix id_s = OperatorMatrix::Identity(spec.dimS, spec.dimS);
    Superoperator L_S = liouvillian(tensor(spec.H_S, id_b));
    Superoperator L_B = liouvillian(tensor(id_s, spec.H_B));
    Superoperator L_SB = liouvillian(spec.H_SB);
    const auto& P = pair.P;
    const auto& Q = pair.Q;

    ProjectorAlgebraReport report;
    report.probes = probes;
    report.seed = seed;
    report.residuals = {
        {"P^2 - P", 0.0},  {"Q^2 - Q", 0.0},     {"P Q", 0.0},
        {"Q P", 0.0},      {"[P, L_S]", 0.0},    {"P L_B", 0.0},
        {"L_B Q - L_B", 0.0}, {"P L_SB P", 0.0},
    };

    for (const auto& X : random_probe_set(D, probes, seed)) {
        OperatorMatrix PX = P(X), QX = Q(X);
        auto bump = [&](int k, const OperatorMatrix& R) {
            report.residuals[k].residual = std::max(report.residuals[k].residual, R.norm());
        };
        bump(0, P(PX) - PX);
        bump(1, Q(QX) - QX);
        bump(2, P(QX));
        bump(3, Q(PX));
        bump(4, P(L_S(X)) - L_S(PX));
        bump(5, P(L_B(X)));
        bump(6, L_B(QX) - L_B(X));
        bump(7, P(L_SB(PX)));
    }

    report.max_residual = 0.0;
    for (const auto& r : report.residuals)
        report.max_residual = std::max(report.max_residual, r.residual);
    report.passed = report.max_residual <= 1e-9;
    return report;
}

}  // namespace nzlab
