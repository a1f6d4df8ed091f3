#include "nzlab/nz.hpp"

#include <Eigen/SparseCore>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <sstream>
#include <vector>

namespace nzlab {

namespace {

constexpr cxd kI{0.0, 1.0};

void require_density(const OperatorMatrix& rho, int dim, const char* where) {
    if (rho.rows() != dim || rho.cols() != dim)
        throw DimensionError(std::string(where) + ": state has wrong dimension");
    double scale = std::max(1.0, rho.norm());
    if (std::abs(rho.trace() - cxd(1.0, 0.0)) > 1e-8 * scale)
        throw ValidationError(std::string(where) + ": state trace is not 1");
    if (hermiticity_defect(rho) > 1e-8 * scale)
        throw ValidationError(std::string(where) + ": state is not hermitian");
}

// Composite quadrature weights over n uniform intervals: fourth-order
// endpoint-corrected (Gregory) when there is room, trapezoid otherwise.
std::vector<double> quad_weights(int n, double h) {
    std::vector<double> w(static_cast<size_t>(n) + 1, h);
    if (n >= 6) {
        w[0] = w[n] = 3.0 / 8.0 * h;
        w[1] = w[n - 1] = 7.0 / 6.0 * h;
        w[2] = w[n - 2] = 23.0 / 24.0 * h;
    } else if (n >= 1) {
        w[0] = w[n] = 0.5 * h;
    } else {
        w[0] = 0.0;
    }
    return w;
}

// Joint eigenbasis of H_S and H_B. Inside it L0 acts entrywise through
// Bohr frequency differences, which every routine below leans on.
struct Frame {
    int dS = 0, dB = 0, D = 0;
    double lambda = 0.0;
    bool trivial = true;  // both Hamiltonians already diagonal
    OperatorMatrix VS, VB, V;
    Eigen::VectorXd epsS, epsB, eps;
    OperatorMatrix Hsb, Omega;
    OperatorMatrix minus_i_delta;  // entries -i (eps_i - eps_j)
    double hsb_norm = 0.0;
    Eigen::SparseMatrix<cxd> Hsb_sparse;  // used when the coupling is sparse enough
    bool sparse_coupling = false;

    Frame(const ModelSpec& spec, double lam)
        : dS(spec.dimS), dB(spec.dimB), D(spec.dim()), lambda(lam) {
        auto offdiag_norm = [](const OperatorMatrix& M) {
            double s = 0.0;
            for (Eigen::Index i = 0; i < M.rows(); ++i)
                for (Eigen::Index j = 0; j < M.cols(); ++j)
                    if (i != j) s += std::norm(M(i, j));
            return std::sqrt(s);
        };
        bool sdiag = offdiag_norm(spec.H_S) <= 1e-13 * (1.0 + spec.H_S.norm());
        bool bdiag = offdiag_norm(spec.H_B) <= 1e-13 * (1.0 + spec.H_B.norm());
        trivial = sdiag && bdiag;
        if (trivial) {
            epsS = spec.H_S.diagonal().real();
            epsB = spec.H_B.diagonal().real();
            Hsb = spec.H_SB;
            Omega = spec.omega_B;
        } else {
            Eigen::SelfAdjointEigenSolver<OperatorMatrix> sS(spec.H_S), sB(spec.H_B);
            VS = sS.eigenvectors();
            epsS = sS.eigenvalues();
            VB = sB.eigenvectors();
            epsB = sB.eigenvalues();
            V = tensor(VS, VB);
            Hsb = V.adjoint() * spec.H_SB * V;
            Omega = VB.adjoint() * spec.omega_B * VB;
        }
        eps.resize(D);
        for (int a = 0; a < dS; ++a)
            for (int mu = 0; mu < dB; ++mu) eps(a * dB + mu) = epsS(a) + epsB(mu);
        minus_i_delta.resize(D, D);
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) minus_i_delta(i, j) = cxd(0.0, -(eps(i) - eps(j)));
        hsb_norm = Hsb.norm();

        int nnz = 0;
        double cut = 1e-14 * std::max(1.0, hsb_norm);
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j)
                if (std::abs(Hsb(i, j)) > cut) ++nnz;
        sparse_coupling = nnz < D * D / 8;
        if (sparse_coupling) {
            std::vector<Eigen::Triplet<cxd>> trip;
            trip.reserve(static_cast<size_t>(nnz));
            for (int i = 0; i < D; ++i)
                for (int j = 0; j < D; ++j)
                    if (std::abs(Hsb(i, j)) > cut) trip.emplace_back(i, j, Hsb(i, j));
            Hsb_sparse.resize(D, D);
            Hsb_sparse.setFromTriplets(trip.begin(), trip.end());
        }
    }

    OperatorMatrix to_frame(const OperatorMatrix& X) const {
        return trivial ? X : OperatorMatrix(V.adjoint() * X * V);
    }
    OperatorMatrix from_frame(const OperatorMatrix& X) const {
        return trivial ? X : OperatorMatrix(V * X * V.adjoint());
    }
    OperatorMatrix sys_from_frame(const OperatorMatrix& r) const {
        return trivial ? r : OperatorMatrix(VS * r * VS.adjoint());
    }

    OperatorMatrix trB(const OperatorMatrix& X) const { return partial_trace_bath(X, dS, dB); }
    OperatorMatrix P(const OperatorMatrix& X) const { return tensor(trB(X), Omega); }
    OperatorMatrix Q(const OperatorMatrix& X) const { return X - P(X); }
    OperatorMatrix L0(const OperatorMatrix& X) const {
        return minus_i_delta.cwiseProduct(X);
    }
    OperatorMatrix Lsb(const OperatorMatrix& X) const {
        if (sparse_coupling) return -kI * OperatorMatrix(Hsb_sparse * X - X * Hsb_sparse);
        return -kI * (Hsb * X - X * Hsb);
    }
    OperatorMatrix L0p(const OperatorMatrix& X) const {
        return L0(X) + lambda * Q(Lsb(Q(X)));
    }

    OperatorMatrix dense_L0p() const {
        return Superoperator(D, [this](const OperatorMatrix& X) { return L0p(X); }).dense();
    }
    OperatorMatrix dense_Q() const {
        return Superoperator(D, [this](const OperatorMatrix& X) { return Q(X); }).dense();
    }
    OperatorMatrix dense_Lsb() const {
        return Superoperator(D, [this](const OperatorMatrix& X) { return Lsb(X); }).dense();
    }
};

// Assign every system index pair to the nearest Bohr frequency. Built from
// the omegas alone so it cannot disagree with the frame's eigenvalue order.
std::vector<Eigen::MatrixXd> block_masks(const Frame& f, const BohrDecomposition& bohr) {
    size_t nb = bohr.entries.size();
    if (nb == 0) throw ValidationError("Bohr decomposition has no blocks");
    std::vector<Eigen::MatrixXd> masks(nb, Eigen::MatrixXd::Zero(f.dS, f.dS));
    for (int a = 0; a < f.dS; ++a)
        for (int b = 0; b < f.dS; ++b) {
            double delta = f.epsS(a) - f.epsS(b);
            size_t best = 0;
            double bestd = std::numeric_limits<double>::infinity();
            for (size_t m = 0; m < nb; ++m) {
                double d = std::abs(delta - bohr.entries[m].omega);
                if (d < bestd) {
                    bestd = d;
                    best = m;
                }
            }
            masks[best](a, b) = 1.0;
        }
    return masks;
}

// Zero the entries of a product-space operator whose system pair lies
// outside the given block.
OperatorMatrix apply_mask_total(const Frame& f, const Eigen::MatrixXd& maskS,
                                const OperatorMatrix& X) {
    OperatorMatrix out = OperatorMatrix::Zero(f.D, f.D);
    for (int a = 0; a < f.dS; ++a)
        for (int b = 0; b < f.dS; ++b)
            if (maskS(a, b) != 0.0)
                out.block(a * f.dB, b * f.dB, f.dB, f.dB) =
                    X.block(a * f.dB, b * f.dB, f.dB, f.dB);
    return out;
}

// Advances frame-space operators under e^{L0' h}. Dense exponential when
// the superoperator fits, classical 4th-order stepping otherwise.
struct Stepper {
    const Frame& f;
    double h;
    bool dense;
    OperatorMatrix G;  // D^2 x D^2
    int substeps = 1;

    Stepper(const Frame& frame, double step) : f(frame), h(step) {
        dense = f.D <= kDenseSuperCap;
        if (dense) {
            G = OperatorMatrix(f.dense_L0p() * cxd(h, 0.0)).exp();
        } else {
            double bound = (f.eps.maxCoeff() - f.eps.minCoeff()) +
                           4.0 * std::abs(f.lambda) * f.hsb_norm;
            substeps = std::max(1, static_cast<int>(std::ceil(h * bound / 1.5)));
        }
    }

    void advance(OperatorMatrix& X) const {
        if (dense) {
            Eigen::Map<const Vec> v(X.data(), f.D * f.D);
            Vec w = G * v;
            X = Eigen::Map<const OperatorMatrix>(w.data(), f.D, f.D);
            return;
        }
        double hh = h / substeps;
        for (int s = 0; s < substeps; ++s) {
            OperatorMatrix k1 = f.L0p(X);
            OperatorMatrix k2 = f.L0p(X + 0.5 * hh * k1);
            OperatorMatrix k3 = f.L0p(X + 0.5 * hh * k2);
            OperatorMatrix k4 = f.L0p(X + hh * k3);
            X += (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if (!X.allFinite()) throw IntegrationError("projected propagation diverged");
    }
};

double guarded_window(const ModelSpec& spec, double tau, double lambda, const char* where) {
    double T = tau / (lambda * lambda);
    BathWindow w = resolve_bath_window(spec);
    double usable = w.usable();
    if (std::isfinite(usable) && T > usable * (1.0 + 1e-12) + 1e-12) {
        std::ostringstream os;
        os << where << ": rescaled time " << T << " exceeds the usable bath window " << usable
           << " (recurrence time " << w.t_rec << "); shrink tau or enlarge the bath";
        throw WindowError(os.str());
    }
    return T;
}

void check_pair(const ProjectorPair& pair, const ModelSpec& spec, const char* where) {
    if (pair.dimS != spec.dimS || pair.dimB != spec.dimB)
        throw DimensionError(std::string(where) + ": projector pair does not match the model");
}

void check_block_index(const BohrDecomposition& bohr, int m, const char* where) {
    if (m < 0 || static_cast<size_t>(m) >= bohr.entries.size())
        throw ValidationError(std::string(where) + ": Bohr block index out of range");
}

// P L_SB P must vanish for the projected equations below to close. A few
// probes catch an uncentered interaction early.
void check_centered(const Frame& f, const char* where) {
    if (f.hsb_norm == 0.0) return;
    auto probes = random_probe_set(f.D, 3, 0x5eedull);
    for (const auto& X : probes) {
        OperatorMatrix y = f.P(f.Lsb(f.P(X)));
        if (y.norm() > 1e-8 * f.hsb_norm * std::max(1.0, X.norm()))
            throw ValidationError(std::string(where) +
                                  ": interaction has a nonzero reference-state mean; "
                                  "recenter the model first");
    }
}

}  // namespace

Trajectory propagate_exact(const ModelSpec& spec, const OperatorMatrix& rho0,
                           const std::vector<double>& times) {
    spec.validate();
    require_density(rho0, spec.dim(), "propagate_exact");
    if (times.empty()) throw ValidationError("propagate_exact: empty time grid");
    for (size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1]))
            throw ValidationError("propagate_exact: times must be strictly increasing");

    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(spec.total_hamiltonian());
    const OperatorMatrix& U = es.eigenvectors();
    Eigen::VectorXd E = es.eigenvalues();
    OperatorMatrix A = U.adjoint() * rho0 * U;

    Trajectory out;
    out.times = times;
    out.states.reserve(times.size());
    for (double t : times) {
        Vec ph(E.size());
        for (Eigen::Index i = 0; i < E.size(); ++i) ph(i) = std::exp(-kI * E(i) * t);
        OperatorMatrix M = (ph * ph.adjoint()).cwiseProduct(A);
        out.states.push_back(U * M * U.adjoint());
    }
    return out;
}

OperatorMatrix propagate_Q_projected(const ProjectorPair& pair, const ModelSpec& spec,
                                     const OperatorMatrix& X0, double t, double dt) {
    check_pair(pair, spec, "propagate_Q_projected");
    if (X0.rows() != spec.dim() || X0.cols() != spec.dim())
        throw DimensionError("propagate_Q_projected: operand has wrong dimension");
    if (t < 0.0) throw ValidationError("propagate_Q_projected: negative time");
    double xnorm = std::max(1.0, hs_norm(X0));
    if (hs_norm(pair.Q(X0) - X0) > 1e-9 * xnorm)
        throw ValidationError("propagate_Q_projected: operand must lie in the range of Q");
    if (t == 0.0) return X0;
    if (dt <= 0.0) throw ValidationError("propagate_Q_projected: dt must be positive");

    Frame f(spec, spec.lambda);
    OperatorMatrix X = f.to_frame(X0);
    if (f.hsb_norm == 0.0 || spec.lambda == 0.0) {
        // free evolution is exact entrywise
        X = (f.minus_i_delta * t).array().exp().matrix().cwiseProduct(X);
    } else {
        int n = std::max(1, static_cast<int>(std::ceil(t / dt - 1e-9)));
        Stepper st(f, t / n);
        for (int k = 0; k < n; ++k) st.advance(X);
    }
    OperatorMatrix out = f.from_frame(X);
    if (hs_norm(pair.Q(out) - out) > 1e-8 * std::max(1.0, hs_norm(out)))
        throw IntegrationError("propagate_Q_projected: result drifted out of the range of Q");
    return out;
}

Superoperator R_operator(const ProjectorPair& pair, const ModelSpec& spec,
                         const BohrDecomposition& bohr, int m, double tau, double lambda,
                         double dt, double eta) {
    check_pair(pair, spec, "R_operator");
    check_block_index(bohr, m, "R_operator");
    if (lambda <= 0.0) throw ValidationError("R_operator: lambda must be positive");
    if (tau < 0.0) throw ValidationError("R_operator: negative tau");
    if (eta < 0.0) throw ValidationError("R_operator: negative eta");
    double T = guarded_window(spec, tau, lambda, "R_operator");
    int D = spec.dim();
    if (tau == 0.0) return Superoperator::zero(D);
    if (dt <= 0.0) throw ValidationError("R_operator: dt must be positive");

    auto f = std::make_shared<Frame>(spec, lambda);
    double omega = bohr.entries[static_cast<size_t>(m)].omega;
    int n = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
    double h = T / n;
    std::vector<double> w = quad_weights(n, h);

    if (D <= kDenseSuperCap) {
        OperatorMatrix A = f->dense_L0p();
        A.diagonal().array() += cxd(-eta, omega);
        OperatorMatrix G = OperatorMatrix(A * cxd(h, 0.0)).exp();
        OperatorMatrix S = OperatorMatrix::Identity(D * D, D * D);
        OperatorMatrix R = OperatorMatrix::Zero(D * D, D * D);
        for (int k = 0; k <= n; ++k) {
            R += w[static_cast<size_t>(k)] * S;
            if (k < n) S = G * S;
        }
        OperatorMatrix Rd = f->dense_Q() * R;
        return Superoperator(D, [f, Rd = std::move(Rd)](const OperatorMatrix& X) {
            OperatorMatrix Xe = f->to_frame(X);
            Eigen::Map<const Vec> v(Xe.data(), Xe.size());
            Vec y = Rd * v;
            OperatorMatrix Ye = Eigen::Map<const OperatorMatrix>(y.data(), Xe.rows(), Xe.cols());
            return f->from_frame(Ye);
        });
    }

    // matrix-free: redo the windowed integral per operand
    return Superoperator(D, [f, n, h, omega, eta, w](const OperatorMatrix& X) {
        OperatorMatrix V = f->to_frame(X);
        OperatorMatrix acc = OperatorMatrix::Zero(f->D, f->D);
        Stepper st(*f, h);
        for (int k = 0; k <= n; ++k) {
            cxd phase = std::exp(cxd(-eta, omega) * (k * h));
            acc += (w[static_cast<size_t>(k)] * phase) * V;
            if (k < n) st.advance(V);
        }
        return f->from_frame(f->Q(acc));
    });
}

namespace {

double auto_step(const ModelSpec& spec, double lambda) {
    ModelSpec s = spec.with_lambda(lambda);
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(s.total_hamiltonian());
    double nrm = es.eigenvalues().cwiseAbs().maxCoeff();
    return 0.05 / std::max(1.0, nrm);
}

}  // namespace

Superoperator memory_kernel(const ProjectorPair& pair, const ModelSpec& spec,
                            const BohrDecomposition& bohr, int m, int n, double tau,
                            double lambda, double dt) {
    check_pair(pair, spec, "memory_kernel");
    check_block_index(bohr, m, "memory_kernel");
    check_block_index(bohr, n, "memory_kernel");
    if (dt <= 0.0) dt = auto_step(spec, lambda);
    Superoperator R = R_operator(pair, spec, bohr, m, tau, lambda, dt);
    Superoperator Qtm = total_space_projector(bohr, m, spec.dimB);
    Superoperator Qtn = total_space_projector(bohr, n, spec.dimB);
    Superoperator Lsb = liouvillian(spec.H_SB);
    const Superoperator& P = pair.P;
    return Superoperator(spec.dim(), [=](const OperatorMatrix& X) {
        return P(Qtm(Lsb(R(Lsb(Qtn(P(X)))))));
    });
}

namespace {

// Single propagation of V(s) = e^{L0' s} Q rho0 with one windowed
// accumulator per Bohr block, snapshotting I(tau_j) on a shared lattice.
std::vector<OperatorMatrix> correlation_terms_on_lattice(
    const Frame& f, const BohrDecomposition& bohr, const OperatorMatrix& Qrho0_frame,
    const std::vector<int>& snap, double h, double lambda) {
    size_t nb = bohr.entries.size();
    std::vector<Eigen::MatrixXd> masks = block_masks(f, bohr);
    int n = snap.empty() ? 0 : *std::max_element(snap.begin(), snap.end());

    std::vector<OperatorMatrix> sums(nb, OperatorMatrix::Zero(f.D, f.D));
    // head and trailing integrand samples per block, for endpoint corrections
    std::vector<std::array<OperatorMatrix, 3>> head(nb), ring(nb);
    std::vector<OperatorMatrix> result;
    result.reserve(snap.size());

    OperatorMatrix V = Qrho0_frame;
    Stepper st(f, h);
    size_t next = 0;
    std::vector<size_t> order(snap.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return snap[a] < snap[b]; });
    std::vector<OperatorMatrix> staged(snap.size());

    for (int k = 0; k <= n; ++k) {
        double s = k * h;
        for (size_t m = 0; m < nb; ++m) {
            cxd phase = std::exp(kI * bohr.entries[m].omega * s);
            OperatorMatrix z = phase * V;
            sums[m] += h * z;
            if (k < 3) head[m][static_cast<size_t>(k)] = z;
            ring[m][static_cast<size_t>(k % 3)] = z;
        }
        while (next < order.size() && snap[order[next]] == k) {
            // assemble I at this lattice point
            OperatorMatrix I = OperatorMatrix::Zero(f.D, f.D);
            for (size_t m = 0; m < nb; ++m) {
                OperatorMatrix A;
                if (k == 0) {
                    A = OperatorMatrix::Zero(f.D, f.D);
                } else if (k < 6) {
                    A = sums[m] - 0.5 * h * (head[m][0] + ring[m][static_cast<size_t>(k % 3)]);
                } else {
                    A = sums[m] +
                        h * (-5.0 / 8.0 * (head[m][0] + ring[m][static_cast<size_t>(k % 3)]) +
                             1.0 / 6.0 *
                                 (head[m][1] + ring[m][static_cast<size_t>((k - 1) % 3)]) -
                             1.0 / 24.0 *
                                 (head[m][2] + ring[m][static_cast<size_t>((k - 2) % 3)]));
                }
                I += f.P(apply_mask_total(f, masks[m], f.Lsb(f.Q(A))));
            }
            staged[order[next]] = lambda * I;
            ++next;
        }
        if (k < n) st.advance(V);
    }
    for (auto& I : staged) result.push_back(f.from_frame(I));
    return result;
}

std::vector<OperatorMatrix> correlation_terms(const ProjectorPair& pair, const ModelSpec& spec,
                                              const BohrDecomposition& bohr,
                                              const OperatorMatrix& rho0,
                                              const std::vector<double>& taus, double lambda,
                                              double dt, const char* where) {
    check_pair(pair, spec, where);
    require_density(rho0, spec.dim(), where);
    if (lambda <= 0.0) throw ValidationError(std::string(where) + ": lambda must be positive");
    if (taus.empty()) return {};
    std::vector<double> Ts;
    for (double tau : taus) {
        if (tau < 0.0) throw ValidationError(std::string(where) + ": negative tau");
        Ts.push_back(guarded_window(spec, tau, lambda, where));
    }
    if (dt <= 0.0) dt = auto_step(spec, lambda);

    Frame f(spec, lambda);
    check_centered(f, where);
    OperatorMatrix Q0 = f.Q(f.to_frame(rho0));

    // try a shared lattice; otherwise run each tau on its own
    double Tmax = *std::max_element(Ts.begin(), Ts.end());
    if (Tmax == 0.0) return std::vector<OperatorMatrix>(taus.size(),
                                                        OperatorMatrix::Zero(spec.dim(), spec.dim()));
    double h = Tmax;
    bool shared = true;
    if (Ts.size() > 1) {
        double delta = std::numeric_limits<double>::infinity();
        for (size_t j = 0; j + 1 < Ts.size(); ++j)
            if (Ts[j + 1] - Ts[j] > 1e-12) delta = std::min(delta, Ts[j + 1] - Ts[j]);
        if (!std::isfinite(delta)) delta = Tmax;
        h = delta / std::ceil(delta / dt - 1e-9);
        for (double T : Ts) {
            double r = T / h;
            if (std::abs(r - std::round(r)) > 1e-6) shared = false;
        }
    } else {
        h = Tmax / std::ceil(Tmax / dt - 1e-9);
    }

    if (shared) {
        std::vector<int> snap;
        for (double T : Ts) snap.push_back(static_cast<int>(std::round(T / h)));
        return correlation_terms_on_lattice(f, bohr, Q0, snap, h, lambda);
    }
    std::vector<OperatorMatrix> out;
    for (double T : Ts) {
        double hh = T > 0.0 ? T / std::ceil(T / dt - 1e-9) : dt;
        std::vector<int> snap{T > 0.0 ? static_cast<int>(std::round(T / hh)) : 0};
        out.push_back(correlation_terms_on_lattice(f, bohr, Q0, snap, hh, lambda)[0]);
    }
    return out;
}

}  // namespace

OperatorMatrix correlation_term(const ProjectorPair& pair, const ModelSpec& spec,
                                const BohrDecomposition& bohr, const OperatorMatrix& rho0,
                                double tau, double lambda, double dt) {
    return correlation_terms(pair, spec, bohr, rho0, {tau}, lambda, dt, "correlation_term")[0];
}

std::vector<double> correlation_norm_curve(const ProjectorPair& pair, const ModelSpec& spec,
                                           const BohrDecomposition& bohr,
                                           const OperatorMatrix& rho0,
                                           const std::vector<double>& tau_grid, double lambda,
                                           double dt) {
    auto terms =
        correlation_terms(pair, spec, bohr, rho0, tau_grid, lambda, dt, "correlation_norm_curve");
    std::vector<double> out;
    out.reserve(terms.size());
    for (const auto& I : terms) out.push_back(hs_norm(I));
    return out;
}

Trajectory solve_nz(const ProjectorPair& pair, const ModelSpec& spec,
                    const BohrDecomposition& bohr, const OperatorMatrix& rho0,
                    const std::vector<double>& tau_grid, double lambda, double dt,
                    bool include_correlation) {
    check_pair(pair, spec, "solve_nz");
    require_density(rho0, spec.dim(), "solve_nz");
    if (lambda <= 0.0) throw ValidationError("solve_nz: lambda must be positive");
    if (dt <= 0.0) throw ValidationError("solve_nz: dt must be positive");
    if (tau_grid.empty()) throw ValidationError("solve_nz: empty tau grid");
    for (size_t k = 0; k < tau_grid.size(); ++k) {
        if (tau_grid[k] < 0.0) throw ValidationError("solve_nz: negative tau");
        if (k > 0 && !(tau_grid[k] > tau_grid[k - 1]))
            throw ValidationError("solve_nz: tau grid must be strictly increasing");
    }
    guarded_window(spec, tau_grid.back(), lambda, "solve_nz");

    std::vector<int> rec;
    for (double tau : tau_grid) {
        double t = tau / (lambda * lambda);
        double r = t / dt;
        if (std::abs(r - std::round(r)) > 1e-6 * std::max(1.0, r))
            throw ValidationError("solve_nz: tau does not sit on the dt lattice");
        rec.push_back(static_cast<int>(std::round(r)));
    }
    int n = rec.back();

    Frame f(spec, lambda);
    check_centered(f, "solve_nz");
    int dS = spec.dimS;
    int nS = dS * dS;

    // kernel slices and inhomogeneity on the lattice, from one propagation
    // of the kernel basis images and the projected initial state
    std::vector<OperatorMatrix> Ys;
    Ys.reserve(static_cast<size_t>(nS));
    for (int b = 0; b < dS; ++b)
        for (int a = 0; a < dS; ++a) {
            OperatorMatrix Eab = OperatorMatrix::Zero(dS, dS);
            Eab(a, b) = 1.0;
            Ys.push_back(f.Q(f.Lsb(tensor(Eab, f.Omega))));
        }
    OperatorMatrix W = f.Q(f.to_frame(rho0));

    std::vector<OperatorMatrix> kappa(static_cast<size_t>(n) + 1);
    std::vector<OperatorMatrix> hvec(static_cast<size_t>(n) + 1);
    Stepper st(f, dt);
    for (int j = 0; j <= n; ++j) {
        OperatorMatrix K(nS, nS);
        for (int b = 0; b < dS; ++b)
            for (int a = 0; a < dS; ++a) {
                OperatorMatrix red = f.trB(f.Lsb(Ys[static_cast<size_t>(b * dS + a)]));
                K.col(a + dS * b) = Eigen::Map<const Vec>(red.data(), nS);
            }
        kappa[static_cast<size_t>(j)] = std::move(K);
        hvec[static_cast<size_t>(j)] = include_correlation
                                           ? OperatorMatrix(lambda * f.trB(f.Lsb(W)))
                                           : OperatorMatrix::Zero(dS, dS);
        if (j < n) {
            for (auto& Y : Ys) st.advance(Y);
            st.advance(W);
        }
    }

    auto conv = [&](int m, const std::vector<OperatorMatrix>& rs) {
        OperatorMatrix out = OperatorMatrix::Zero(dS, dS);
        if (m == 0) return out;
        std::vector<double> w = quad_weights(m, dt);
        Vec acc = Vec::Zero(nS);
        for (int j = 0; j <= m; ++j) {
            Eigen::Map<const Vec> v(rs[static_cast<size_t>(j)].data(), nS);
            acc += w[static_cast<size_t>(j)] * (kappa[static_cast<size_t>(m - j)] * v);
        }
        return OperatorMatrix(Eigen::Map<const OperatorMatrix>(acc.data(), dS, dS));
    };
    auto fdot = [&](int m, const std::vector<OperatorMatrix>& rs) {
        const OperatorMatrix& r = rs[static_cast<size_t>(m)];
        OperatorMatrix out(dS, dS);
        for (int a = 0; a < dS; ++a)
            for (int b = 0; b < dS; ++b)
                out(a, b) = cxd(0.0, -(f.epsS(a) - f.epsS(b))) * r(a, b);
        out += lambda * lambda * conv(m, rs) + hvec[static_cast<size_t>(m)];
        return out;
    };

    std::vector<OperatorMatrix> rs{f.trB(f.to_frame(rho0))};
    rs.reserve(static_cast<size_t>(n) + 1);
    for (int m = 0; m < std::min(3, n); ++m) {
        // iterated trapezoid start: third order locally, three steps only
        OperatorMatrix fm = fdot(m, rs);
        rs.push_back(rs[static_cast<size_t>(m)] + dt * fm);
        OperatorMatrix fp = fdot(m + 1, rs);
        rs.back() = rs[static_cast<size_t>(m)] + 0.5 * dt * (fm + fp);
        fp = fdot(m + 1, rs);
        rs.back() = rs[static_cast<size_t>(m)] + 0.5 * dt * (fm + fp);
    }
    std::vector<OperatorMatrix> fs;
    for (size_t m = 0; m < rs.size(); ++m) fs.push_back(fdot(static_cast<int>(m), rs));
    for (int m = 3; m < n; ++m) {
        OperatorMatrix rp =
            rs[static_cast<size_t>(m)] +
            (dt / 24.0) * (55.0 * fs[static_cast<size_t>(m)] - 59.0 * fs[static_cast<size_t>(m - 1)] +
                           37.0 * fs[static_cast<size_t>(m - 2)] - 9.0 * fs[static_cast<size_t>(m - 3)]);
        rs.push_back(rp);
        OperatorMatrix fp = fdot(m + 1, rs);
        rs.back() = rs[static_cast<size_t>(m)] +
                    (dt / 24.0) * (9.0 * fp + 19.0 * fs[static_cast<size_t>(m)] -
                                   5.0 * fs[static_cast<size_t>(m - 1)] + fs[static_cast<size_t>(m - 2)]);
        fs.push_back(fdot(m + 1, rs));
    }

    Trajectory out;
    out.times = tau_grid;
    for (int idx : rec) {
        double t = idx * dt;
        OperatorMatrix r = rs[static_cast<size_t>(idx)];
        if (std::abs(r.trace() - cxd(1.0, 0.0)) > 1e-4)
            throw IntegrationError("solve_nz: trace drift exceeds 1e-4; reduce dt");
        // rotate to the interaction picture with exact Bohr phases
        OperatorMatrix ri(dS, dS);
        for (int a = 0; a < dS; ++a)
            for (int b = 0; b < dS; ++b)
                ri(a, b) = r(a, b) * std::exp(kI * (f.epsS(a) - f.epsS(b)) * t);
        out.states.push_back(f.sys_from_frame(ri));
    }
    return out;
}

MarkovGenerator vanhove_generator(const ProjectorPair& pair, const ModelSpec& spec,
                                  const BohrDecomposition& bohr, double eta) {
    check_pair(pair, spec, "vanhove_generator");
    if (eta <= 0.0) throw ValidationError("vanhove_generator: eta must be positive");
    Frame f(spec, 1.0);
    check_centered(f, "vanhove_generator");
    double scale = std::max(1.0, f.eps.cwiseAbs().maxCoeff());
    if (eta < 1e-12 * scale) {
        double worst = bohr.entries.front().omega;
        throw ConditioningError("vanhove_generator: eta regularizes an exactly resonant "
                                "resolvent (block omega = " +
                                std::to_string(worst) + "); increase eta");
    }

    int dS = spec.dimS;
    int nS = dS * dS;
    std::vector<Eigen::MatrixXd> masks = block_masks(f, bohr);
    MarkovGenerator gen;
    gen.eta = eta;
    OperatorMatrix K = OperatorMatrix::Zero(nS, nS);
    for (size_t m = 0; m < bohr.entries.size(); ++m) {
        double omega = bohr.entries[m].omega;
        OperatorMatrix denom(f.D, f.D);
        for (int i = 0; i < f.D; ++i)
            for (int j = 0; j < f.D; ++j)
                denom(i, j) = cxd(-eta, -(f.eps(i) - f.eps(j)) + omega);
        OperatorMatrix Km = OperatorMatrix::Zero(nS, nS);
        for (int jcol = 0; jcol < dS; ++jcol)
            for (int icol = 0; icol < dS; ++icol) {
                OperatorMatrix Eij = OperatorMatrix::Zero(dS, dS);
                Eij(icol, jcol) = 1.0;
                OperatorMatrix v = f.Q(f.Lsb(tensor(Eij, f.Omega)));
                OperatorMatrix r = f.Q(v.cwiseQuotient(denom));
                OperatorMatrix outm = -f.trB(apply_mask_total(f, masks[m], f.Lsb(r)));
                Km.col(icol + dS * jcol) += Eigen::Map<const Vec>(outm.data(), nS);
            }
        if (!f.trivial) {
            OperatorMatrix Wk = tensor(f.VS.conjugate(), f.VS);
            Km = Wk * Km * Wk.adjoint();
        }
        gen.per_block.emplace_back(omega, Km);
        K += Km;
    }
    gen.K_dense = K;
    gen.K = Superoperator(dS, [K](const OperatorMatrix& r) {
        Eigen::Map<const Vec> v(r.data(), r.size());
        Vec y = K * v;
        return OperatorMatrix(Eigen::Map<const OperatorMatrix>(y.data(), r.rows(), r.cols()));
    });
    return gen;
}

double vanhove_two_route_residual(const ProjectorPair& pair, const ModelSpec& spec,
                                  const BohrDecomposition& bohr, double eta, double dt) {
    check_pair(pair, spec, "vanhove_two_route_residual");
    if (eta <= 0.0) throw ValidationError("vanhove_two_route_residual: eta must be positive");
    if (dt <= 0.0) throw ValidationError("vanhove_two_route_residual: dt must be positive");
    Frame f(spec, 1.0);
    check_centered(f, "vanhove_two_route_residual");
    int dS = spec.dimS;
    std::vector<Eigen::MatrixXd> masks = block_masks(f, bohr);

    // damped integral truncated where e^{-eta t} has decayed past 1e-9
    double T = 21.0 / eta;
    int n = static_cast<int>(std::ceil(T / dt));
    if (n % 2 == 1) ++n;
    double h = T / n;

    double worst = 0.0;
    double colmax = 0.0;
    std::vector<std::pair<OperatorMatrix, OperatorMatrix>> routes;
    for (size_t m = 0; m < bohr.entries.size(); ++m) {
        double omega = bohr.entries[m].omega;
        OperatorMatrix denom(f.D, f.D);
        for (int i = 0; i < f.D; ++i)
            for (int j = 0; j < f.D; ++j)
                denom(i, j) = cxd(-eta, -(f.eps(i) - f.eps(j)) + omega);
        OperatorMatrix stepph(f.D, f.D);
        for (int i = 0; i < f.D; ++i)
            for (int j = 0; j < f.D; ++j)
                stepph(i, j) = std::exp(cxd(0.0, -(f.eps(i) - f.eps(j)) * h));
        for (int jcol = 0; jcol < dS; ++jcol)
            for (int icol = 0; icol < dS; ++icol) {
                OperatorMatrix Eij = OperatorMatrix::Zero(dS, dS);
                Eij(icol, jcol) = 1.0;
                OperatorMatrix v = f.Q(f.Lsb(tensor(Eij, f.Omega)));
                OperatorMatrix r1 = f.Q(v.cwiseQuotient(denom));
                OperatorMatrix out1 = -f.trB(apply_mask_total(f, masks[m], f.Lsb(r1)));

                OperatorMatrix ph = OperatorMatrix::Ones(f.D, f.D);
                OperatorMatrix acc = OperatorMatrix::Zero(f.D, f.D);
                for (int k = 0; k <= n; ++k) {
                    double wk = (k == 0 || k == n) ? h / 3.0 : (k % 2 == 1 ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
                    cxd damp = std::exp(cxd(-eta, omega) * (k * h));
                    acc += (wk * damp) * ph.cwiseProduct(v);
                    if (k < n) ph = ph.cwiseProduct(stepph);
                }
                // the damped integral equals minus the resolvent, so no leading sign here
                OperatorMatrix r2 = f.Q(acc);
                OperatorMatrix out2 = f.trB(apply_mask_total(f, masks[m], f.Lsb(r2)));
                routes.emplace_back(out1, out2);
                colmax = std::max(colmax, out1.norm());
            }
    }
    for (const auto& [a, b] : routes) {
        double ref = std::max(a.norm(), 1e-12 * std::max(1.0, colmax));
        worst = std::max(worst, (a - b).norm() / ref);
    }
    return worst;
}

Trajectory markov_propagate(const MarkovGenerator& gen, const OperatorMatrix& rhoS0,
                            const std::vector<double>& tau_grid) {
    int nS = static_cast<int>(gen.K_dense.rows());
    int dS = static_cast<int>(std::lround(std::sqrt(static_cast<double>(nS))));
    if (dS * dS != nS || nS == 0)
        throw DimensionError("markov_propagate: generator is not a square superoperator");
    require_density(rhoS0, dS, "markov_propagate");
    if (tau_grid.empty()) throw ValidationError("markov_propagate: empty tau grid");
    for (size_t k = 0; k < tau_grid.size(); ++k) {
        if (tau_grid[k] < 0.0) throw ValidationError("markov_propagate: negative tau");
        if (k > 0 && !(tau_grid[k] > tau_grid[k - 1]))
            throw ValidationError("markov_propagate: tau grid must be strictly increasing");
    }
    Trajectory out;
    out.times = tau_grid;
    Eigen::Map<const Vec> v0(rhoS0.data(), nS);
    for (double tau : tau_grid) {
        OperatorMatrix W = OperatorMatrix(gen.K_dense * cxd(tau, 0.0)).exp();
        Vec v = W * v0;
        OperatorMatrix r = Eigen::Map<const OperatorMatrix>(v.data(), dS, dS);
        if (std::abs(r.trace() - cxd(1.0, 0.0)) > 1e-8)
            throw IntegrationError("markov_propagate: generator does not preserve the trace");
        out.states.push_back(r);
    }
    return out;
}

RecurrenceReport verify_recurrence(const ProjectorPair& pair, const ModelSpec& spec,
                                   const BohrDecomposition& bohr, int m, double tau,
                                   double lambda, double dt) {
    check_pair(pair, spec, "verify_recurrence");
    check_block_index(bohr, m, "verify_recurrence");
    if (lambda <= 0.0) throw ValidationError("verify_recurrence: lambda must be positive");
    if (tau <= 0.0) throw ValidationError("verify_recurrence: tau must be positive");
    if (dt <= 0.0) throw ValidationError("verify_recurrence: dt must be positive");
    int D = spec.dim();
    if (D > kDenseSuperCap)
        throw DimensionError("verify_recurrence: the check materializes dense superoperators; "
                             "model dimension exceeds the dense cap");
    double T = guarded_window(spec, tau, lambda, "verify_recurrence");

    Frame f(spec, lambda);
    double omega = bohr.entries[static_cast<size_t>(m)].omega;
    int nD = D * D;
    OperatorMatrix L0pd = f.dense_L0p();
    OperatorMatrix Qd = f.dense_Q();
    OperatorMatrix Ld = f.dense_Lsb();
    OperatorMatrix QLQ = Qd * Ld * Qd;

    Vec avec0(nD);
    for (int q = 0; q < D; ++q)
        for (int p = 0; p < D; ++p) avec0(p + D * q) = cxd(0.0, -(f.eps(p) - f.eps(q)));
    Vec avec = avec0;
    avec.array() += cxd(0.0, omega);
    double scale = std::max(1.0, avec.cwiseAbs().maxCoeff());
    double ktol = 1e-8 * scale;

    int n = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
    double h = T / n;
    std::vector<double> w = quad_weights(n, h);

    OperatorMatrix G0 = OperatorMatrix(L0pd * cxd(h, 0.0)).exp();
    OperatorMatrix U = OperatorMatrix::Identity(nD, nD);
    OperatorMatrix R = OperatorMatrix::Zero(nD, nD);
    OperatorMatrix R1 = OperatorMatrix::Zero(nD, nD);
    OperatorMatrix CJ = OperatorMatrix::Zero(nD, nD);
    for (int k = 0; k <= n; ++k) {
        double t = k * h;
        cxd ph = std::exp(kI * omega * t);
        double wk = w[static_cast<size_t>(k)];
        R.noalias() += (wk * ph) * U;
        R1.noalias() += (wk * t * ph) * U;
        // Conv integrand with the left free phases pulled to the rows
        OperatorMatrix Z = QLQ * U;
        Vec lphase = (-avec0 * t).array().exp();
        CJ.noalias() += wk * (lphase.asDiagonal() * Z);
        if (k < n) U = G0 * U;
    }
    R = Qd * R;
    R1 = Qd * R1;
    Vec rphase = (avec0 * T).array().exp();
    OperatorMatrix Conv = rphase.asDiagonal() * CJ;

    Vec phi(nD), aplus(nD), kmask(nD);
    for (int p = 0; p < nD; ++p) {
        cxd a = avec(p);
        if (std::abs(a) > ktol) {
            phi(p) = (std::exp(a * T) - 1.0) / a;
            aplus(p) = 1.0 / a;
            kmask(p) = 0.0;
        } else {
            phi(p) = T;
            aplus(p) = 0.0;
            kmask(p) = 1.0;
        }
    }

    OperatorMatrix term1 = Qd * OperatorMatrix(phi.asDiagonal());
    cxd bph = std::exp(kI * omega * T);
    OperatorMatrix term2 = lambda * bph * (aplus.asDiagonal() * Conv);
    OperatorMatrix term3 = -lambda * (aplus.asDiagonal() * (Qd * (Ld * R)));
    OperatorMatrix term4 =
        lambda * (kmask.asDiagonal() * (Qd * (Ld * (T * R - R1))));
    OperatorMatrix rhs = term1 + term2 + term3 + term4;

    RecurrenceReport rep;
    rep.tau = tau;
    rep.lambda = lambda;
    rep.dt = dt;
    rep.steps = n;
    rep.omega_m = omega;
    rep.residual = (R - rhs).norm();
    rep.r_norm = R.norm();
    rep.resolvent_term_norm = (term2 + term3).norm();
    rep.kernel_correction_norm = term4.norm();
    rep.lambda_cubed_r = lambda * lambda * lambda * rep.r_norm;

    // boundedness of the convolution over a doubled window
    BathWindow bw = resolve_bath_window(spec);
    double Wc = std::min(T, bw.usable() / 2.0);
    rep.conv_window = Wc;
    double hw = std::min(0.05, 2.0 * Wc / 256.0);
    int ns = static_cast<int>(std::ceil(2.0 * Wc / hw));
    hw = 2.0 * Wc / ns;
    OperatorMatrix Gw = OperatorMatrix(L0pd * cxd(hw, 0.0)).exp();
    OperatorMatrix Uw = OperatorMatrix::Identity(nD, nD);
    OperatorMatrix J = OperatorMatrix::Zero(nD, nD);
    OperatorMatrix zprev = QLQ;  // integrand at t = 0 (phases are unity)
    double max_base = 0.0, max_doubled = 0.0;
    for (int k = 0; k <= ns; ++k) {
        double t = k * hw;
        if (k > 0) {
            Uw = Gw * Uw;
            Vec lphase = (-avec0 * t).array().exp();
            OperatorMatrix z = lphase.asDiagonal() * (QLQ * Uw);
            J.noalias() += (0.5 * hw) * (zprev + z);
            zprev = std::move(z);
        }
        Vec rp = (avec0 * t).array().exp();
        OperatorMatrix Ct = rp.asDiagonal() * J;
        double nrm = Ct.jacobiSvd().singularValues()(0);
        if (t <= Wc + 1e-12)
            max_base = std::max(max_base, nrm);
        else
            max_doubled = std::max(max_doubled, nrm);
    }
    rep.conv_max_base = max_base;
    rep.conv_max_doubled = max_doubled;
    rep.conv_bounded = max_doubled <= 1.05 * max_base + 1e-12;
    return rep;
}

OperatorMatrix rotate_interaction(const BohrDecomposition& bohr, const OperatorMatrix& r,
                                  double t) {
    int dS = bohr.dimS();
    if (r.rows() != dS || r.cols() != dS)
        throw DimensionError("rotate_interaction: operand has wrong dimension");
    OperatorMatrix A = bohr.eigenvectors.adjoint() * r * bohr.eigenvectors;
    for (int a = 0; a < dS; ++a)
        for (int b = 0; b < dS; ++b)
            A(a, b) *= std::exp(kI * (bohr.eigenvalues(a) - bohr.eigenvalues(b)) * t);
    return bohr.eigenvectors * A * bohr.eigenvectors.adjoint();
}

std::vector<double> decay_rates(const MarkovGenerator& gen) {
    Eigen::ComplexEigenSolver<OperatorMatrix> es(gen.K_dense);
    std::vector<double> rates;
    rates.reserve(static_cast<size_t>(es.eigenvalues().size()));
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        rates.push_back(-es.eigenvalues()(i).real());
    std::sort(rates.begin(), rates.end());
    return rates;
}

}  // namespace nzlab
