#include "nzlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace nzlab {

namespace {

OperatorMatrix pauli_x() {
    OperatorMatrix s(2, 2);
    s << 0, 1, 1, 0;
    return s;
}

OperatorMatrix pauli_z() {
    OperatorMatrix s(2, 2);
    s << 1, 0, 0, -1;
    return s;
}

std::vector<double> hann_weights(int n) {
    std::vector<double> w(n, 1.0);
    if (n <= 1) return w;
    for (int i = 0; i < n; ++i) {
        double s = std::sin(M_PI * (i + 0.5) / n);
        w[i] = s * s;
    }
    return w;
}

}  // namespace

OperatorMatrix ModelSpec::total_hamiltonian() const {
    OperatorMatrix id_s = OperatorMatrix::Identity(dimS, dimS);
    OperatorMatrix id_b = OperatorMatrix::Identity(dimB, dimB);
    return tensor(H_S, id_b) + tensor(id_s, H_B) + lambda * H_SB;
}

ModelSpec ModelSpec::with_lambda(double lam) const {
    ModelSpec out = *this;
    out.lambda = lam;
    return out;
}

void ModelSpec::validate() const {
    if (dimS <= 0 || dimB <= 0)
        throw ValidationError("ModelSpec: dimensions must be positive");
    if (dim() > kDimCap)
        throw DimensionError("ModelSpec: dimS*dimB = " + std::to_string(dim()) +
                             " exceeds cap " + std::to_string(kDimCap));
    if (H_S.rows() != dimS || H_S.cols() != dimS)
        throw DimensionError("ModelSpec: H_S shape does not match dimS");
    if (H_B.rows() != dimB || H_B.cols() != dimB)
        throw DimensionError("ModelSpec: H_B shape does not match dimB");
    if (H_SB.rows() != dim() || H_SB.cols() != dim())
        throw DimensionError("ModelSpec: H_SB shape does not match dimS*dimB");
    if (omega_B.rows() != dimB || omega_B.cols() != dimB)
        throw DimensionError("ModelSpec: omega_B shape does not match dimB");
    if (lambda < 0.0)
        throw ValidationError("ModelSpec: lambda must be >= 0");
    require_hermitian(H_S, tol.herm_tol * std::max(1.0, H_S.norm()), "ModelSpec H_S");
    require_hermitian(H_B, tol.herm_tol * std::max(1.0, H_B.norm()), "ModelSpec H_B");
    require_hermitian(H_SB, tol.herm_tol * std::max(1.0, H_SB.norm()), "ModelSpec H_SB");
    require_hermitian(omega_B, tol.herm_tol, "ModelSpec omega_B");
    if (std::abs(omega_B.trace().real() - 1.0) > 1e-8 || std::abs(omega_B.trace().imag()) > 1e-10)
        throw ValidationError("ModelSpec: omega_B trace is not 1");
    double stat = (H_B * omega_B - omega_B * H_B).norm();
    if (stat > tol.stat_tol) {
        std::ostringstream os;
        os << "ModelSpec: omega_B not stationary, ||[H_B, omega_B]|| = " << stat
           << " exceeds " << tol.stat_tol;
        throw ValidationError(os.str());
    }
}

BathWindow estimate_bath_window(const OperatorMatrix& H_B, double degeneracy_tol,
                                double usable_fraction) {
    require_hermitian(H_B, 1e-9 * std::max(1.0, H_B.norm()), "estimate_bath_window");
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(H_B);
    Eigen::VectorXd E = es.eigenvalues();
    double min_gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k + 1 < E.size(); ++k) {
        double gap = E(k + 1) - E(k);
        if (gap > degeneracy_tol && gap < min_gap) min_gap = gap;
    }
    BathWindow w;
    w.usable_fraction = usable_fraction;
    w.t_rec = std::isfinite(min_gap) ? 2.0 * M_PI / min_gap
                                     : std::numeric_limits<double>::infinity();
    return w;
}

BathWindow resolve_bath_window(const ModelSpec& spec) {
    if (spec.window.t_rec > 0.0) return spec.window;
    return estimate_bath_window(spec.H_B, spec.tol.degeneracy_tol, spec.window.usable_fraction);
}

ModelSpec build_friedrichs_model(int N, double omega0, std::pair<double, double> band,
                                 const std::function<double(double)>& coupling_profile,
                                 double lambda) {
    if (N < 1)
        throw ValidationError("build_friedrichs_model: need at least one mode");
    if (2 * (N + 1) > kDimCap)
        throw DimensionError("build_friedrichs_model: N = " + std::to_string(N) +
                             " exceeds the dimension cap");
    if (N > 1 && !(band.first < band.second))
        throw ValidationError("build_friedrichs_model: band must have omega_min < omega_max");
    if (!coupling_profile)
        throw ValidationError("build_friedrichs_model: missing coupling profile");

    ModelSpec spec;
    spec.dimS = 2;
    spec.dimB = N + 1;
    spec.lambda = lambda;
    spec.H_S = OperatorMatrix::Zero(2, 2);
    spec.H_S(1, 1) = omega0;

    // bath basis: index 0 vacuum, index k+1 the k-th mode singly occupied
    spec.H_B = OperatorMatrix::Zero(N + 1, N + 1);
    std::vector<double> freqs(N), g(N);
    for (int k = 0; k < N; ++k) {
        freqs[k] = (N == 1) ? 0.5 * (band.first + band.second)
                            : band.first + k * (band.second - band.first) / (N - 1);
        g[k] = coupling_profile(freqs[k]);
        if (!std::isfinite(g[k]))
            throw ValidationError("build_friedrichs_model: coupling profile returned a non-finite value");
        spec.H_B(k + 1, k + 1) = freqs[k];
    }

    // excitation-conserving coupling sigma_+ (x) |vac><k| + h.c.
    const int D = 2 * (N + 1);
    spec.H_SB = OperatorMatrix::Zero(D, D);
    for (int k = 0; k < N; ++k) {
        spec.H_SB(1 * (N + 1) + 0, 0 * (N + 1) + (k + 1)) = g[k];
        spec.H_SB(0 * (N + 1) + (k + 1), 1 * (N + 1) + 0) = g[k];
    }

    spec.omega_B = OperatorMatrix::Zero(N + 1, N + 1);
    spec.omega_B(0, 0) = 1.0;  // vacuum reference, trivially stationary

    spec.window = estimate_bath_window(spec.H_B, spec.tol.degeneracy_tol);
    spec.validate();
    return spec;
}

ModelSpec build_spin_bath_model(int N, double beta, const std::vector<double>& couplings,
                                double lambda) {
    if (N < 1)
        throw ValidationError("build_spin_bath_model: need at least one bath spin");
    if ((1 << (N + 1)) > kDimCap)
        throw DimensionError("build_spin_bath_model: 2^(N+1) exceeds the dimension cap");
    if (int(couplings.size()) != N)
        throw ValidationError("build_spin_bath_model: couplings list must have one entry per bath spin");

    const int dB = 1 << N;
    auto embed = [&](const OperatorMatrix& A, int k) {
        OperatorMatrix out = OperatorMatrix::Identity(1 << k, 1 << k);
        out = tensor(out, A);
        int rest = N - 1 - k;
        if (rest > 0)
            out = tensor(out, OperatorMatrix::Identity(1 << rest, 1 << rest));
        return out;
    };

    ModelSpec spec;
    spec.dimS = 2;
    spec.dimB = dB;
    spec.lambda = lambda;
    spec.H_S = OperatorMatrix::Zero(2, 2);
    spec.H_S(1, 1) = 1.0;

    // incommensurate splittings keep the bath frequency differences generic
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    spec.H_B = OperatorMatrix::Zero(dB, dB);
    for (int k = 0; k < N; ++k) {
        double nu = 0.7 + 0.4 * k * golden;
        spec.H_B += 0.5 * nu * embed(pauli_z(), k);
    }

    spec.H_SB = OperatorMatrix::Zero(2 * dB, 2 * dB);
    for (int k = 0; k < N; ++k) {
        spec.H_SB += couplings[k] * (tensor(pauli_x(), embed(pauli_x(), k)) +
                                     tensor(pauli_z(), embed(pauli_z(), k)));
    }

    spec.omega_B = thermal_state(spec.H_B, beta);
    spec.window = estimate_bath_window(spec.H_B, spec.tol.degeneracy_tol);
    spec.validate();
    return spec;
}

ModelSpec center_interaction(const ModelSpec& spec) {
    spec.validate();
    OperatorMatrix id_b = OperatorMatrix::Identity(spec.dimB, spec.dimB);
    OperatorMatrix mean = partial_trace_bath(tensor(OperatorMatrix::Identity(spec.dimS, spec.dimS),
                                                    spec.omega_B) * spec.H_SB,
                                             spec.dimS, spec.dimB);
    mean = 0.5 * (mean + mean.adjoint()).eval();  // symmetrize rounding noise
    ModelSpec out = spec;
    out.H_S = spec.H_S + spec.lambda * mean;
    out.H_SB = spec.H_SB - tensor(mean, id_b);
    return out;
}

OperatorMatrix build_correlated_state(const ModelSpec& spec, const CorrelatedStateRecipe& recipe,
                                      double* trace_out) {
    spec.validate();
    if (recipe.ops_L.empty())
        throw ValidationError("build_correlated_state: recipe has no operators");
    const int D = spec.dim();
    OperatorMatrix base = tensor(OperatorMatrix::Identity(spec.dimS, spec.dimS), spec.omega_B);
    OperatorMatrix rho = OperatorMatrix::Zero(D, D);
    for (const auto& L : recipe.ops_L) {
        if (L.rows() != D || L.cols() != D)
            throw DimensionError("build_correlated_state: recipe operator has wrong dimension");
        rho += L * base * L.adjoint();
    }
    rho = 0.5 * (rho + rho.adjoint()).eval();
    double tr = rho.trace().real();
    if (trace_out) *trace_out = tr;
    if (recipe.normalize) {
        double scale = std::max(1.0, rho.norm());
        if (tr <= 1e-12 * scale)
            throw DegenerateRecipeError("build_correlated_state: recipe trace " +
                                        std::to_string(tr) + " is numerically zero");
        rho /= tr;
    }
    return rho;
}

ModelSpec apply_frequency_jitter(const ModelSpec& spec, double percent, std::uint64_t seed) {
    spec.validate();
    OperatorMatrix off = spec.H_B;
    off.diagonal().setZero();
    if (off.norm() > 1e-12)
        throw ValidationError("apply_frequency_jitter: expects a diagonal bath Hamiltonian");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ModelSpec out = spec;
    for (int k = 0; k < spec.dimB; ++k) {
        double w = spec.H_B(k, k).real();
        if (w != 0.0)
            out.H_B(k, k) = w * (1.0 + 0.01 * percent * u(rng));
    }
    out.window = estimate_bath_window(out.H_B, out.tol.degeneracy_tol, spec.window.usable_fraction);
    return out;
}

OperatorMatrix thermal_state(const OperatorMatrix& H, double beta) {
    require_hermitian(H, 1e-9 * std::max(1.0, H.norm()), "thermal_state");
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(H);
    Eigen::VectorXd E = es.eigenvalues();
    double e0 = E.minCoeff();
    Eigen::VectorXd w(E.size());
    for (Eigen::Index k = 0; k < E.size(); ++k)
        w(k) = std::exp(-beta * (E(k) - e0));
    w /= w.sum();
    return es.eigenvectors() * w.cast<cxd>().asDiagonal() * es.eigenvectors().adjoint();
}

CorrelatedStateRecipe packet_recipe(const ModelSpec& spec, double c,
                                    const std::vector<int>& modes, bool hann_window) {
    if (spec.dimS != 2)
        throw ValidationError("packet_recipe: expects a two-level system");
    if (modes.empty())
        throw ValidationError("packet_recipe: empty mode selection");
    Vec w = Vec::Zero(spec.dimB);
    auto env = hann_window ? hann_weights(int(modes.size()))
                           : std::vector<double>(modes.size(), 1.0);
    for (size_t i = 0; i < modes.size(); ++i) {
        int k = modes[i];
        if (k < 0 || k + 1 >= spec.dimB)
            throw ValidationError("packet_recipe: mode index out of range");
        w(k + 1) = env[i];
    }
    w /= w.norm();

    OperatorMatrix raise = OperatorMatrix::Zero(spec.dimB, spec.dimB);
    raise.col(0) = w;  // |w><vac|
    OperatorMatrix sminus = OperatorMatrix::Zero(2, 2);
    sminus(0, 1) = 1.0;

    CorrelatedStateRecipe recipe;
    recipe.ops_L = {OperatorMatrix::Identity(spec.dim(), spec.dim()) + c * tensor(sminus, raise)};
    recipe.normalize = true;
    return recipe;
}

}  // namespace nzlab
