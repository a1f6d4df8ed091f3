#include "nzlab/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nzlab/errors.hpp"

namespace nzlab {

namespace {

constexpr cxd kI{0.0, 1.0};

void check_grid_window(const ModelSpec& spec, const std::vector<double>& t_grid,
                       const char* where) {
    if (t_grid.empty()) throw ValidationError(std::string(where) + ": empty time grid");
    double usable = resolve_bath_window(spec).usable();
    for (size_t k = 0; k < t_grid.size(); ++k) {
        if (t_grid[k] < 0.0) throw ValidationError(std::string(where) + ": negative time");
        if (k > 0 && !(t_grid[k] > t_grid[k - 1]))
            throw ValidationError(std::string(where) + ": times must be strictly increasing");
        if (std::isfinite(usable) && t_grid[k] > usable * (1.0 + 1e-12))
            throw WindowError(std::string(where) +
                              ": time grid leaves the usable bath window; stay below "
                              "half the recurrence time");
    }
}

// finishes a raw deviation table into the pass/fail bookkeeping
DecayReport finish_report(std::vector<double> times, std::vector<std::vector<double>> dev) {
    DecayReport rep;
    rep.times = std::move(times);
    rep.deviation = std::move(dev);
    bool all = true;
    for (const auto& curve : rep.deviation) {
        double d0 = curve.front();
        double dend = curve.back();
        rep.initial.push_back(d0);
        rep.final_value.push_back(dend);
        double thresh = 0.05 * d0;
        double first = std::numeric_limits<double>::infinity();
        bool stays = false;
        for (size_t k = 0; k < curve.size(); ++k) {
            if (curve[k] < thresh) {
                first = rep.times[k];
                stays = true;
                for (size_t j = k; j < curve.size(); ++j)
                    if (curve[j] >= thresh) stays = false;
                break;
            }
        }
        rep.first_below.push_back(first);
        rep.stays_below.push_back(stays);
        // an observable that never saw the correlation passes trivially
        bool ok = d0 <= 1e-12 ? true : dend < thresh;
        rep.observable_passed.push_back(ok);
        all = all && ok;
    }
    rep.passed = all && !rep.deviation.empty();
    return rep;
}

void check_observables(const std::vector<OperatorMatrix>& obs, int dim, const char* where) {
    if (obs.empty()) throw ValidationError(std::string(where) + ": empty observable panel");
    for (const auto& D : obs)
        if (D.rows() != dim || D.cols() != dim)
            throw DimensionError(std::string(where) + ": observable has wrong dimension");
}

void check_state(const OperatorMatrix& rho, int dim, const char* where) {
    if (rho.rows() != dim || rho.cols() != dim)
        throw DimensionError(std::string(where) + ": state has wrong dimension");
    double scale = std::max(1.0, rho.norm());
    if (std::abs(rho.trace() - cxd(1.0, 0.0)) > 1e-8 * scale)
        throw ValidationError(std::string(where) + ": state trace is not 1");
}

}  // namespace

std::vector<cxd> bath_autocorrelation(const ModelSpec& spec, const OperatorMatrix& X,
                                      const OperatorMatrix& Y,
                                      const std::vector<double>& t_grid) {
    spec.validate();
    if (X.rows() != spec.dimB || X.cols() != spec.dimB || Y.rows() != spec.dimB ||
        Y.cols() != spec.dimB)
        throw DimensionError("bath_autocorrelation: operators must live on the bath space");
    check_grid_window(spec, t_grid, "bath_autocorrelation");

    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(spec.H_B);
    const OperatorMatrix& V = es.eigenvectors();
    Eigen::VectorXd E = es.eigenvalues();
    OperatorMatrix Xe = V.adjoint() * X * V;
    OperatorMatrix Ye = V.adjoint() * Y * V;
    OperatorMatrix Oe = V.adjoint() * spec.omega_B * V;
    cxd mx = (Xe * Oe).trace();
    cxd my = (Ye * Oe).trace();
    OperatorMatrix YO = Ye * Oe;

    std::vector<cxd> out;
    out.reserve(t_grid.size());
    for (double t : t_grid) {
        OperatorMatrix Xt(Xe.rows(), Xe.cols());
        for (Eigen::Index i = 0; i < Xe.rows(); ++i)
            for (Eigen::Index j = 0; j < Xe.cols(); ++j)
                Xt(i, j) = Xe(i, j) * std::exp(kI * (E(i) - E(j)) * t);
        out.push_back((Xt * YO).trace() - mx * my);
    }
    return out;
}

DecayReport relaxation_check(const ModelSpec& spec, const OperatorMatrix& rho0,
                             const std::vector<OperatorMatrix>& observables,
                             const std::vector<double>& t_grid) {
    spec.validate();
    check_state(rho0, spec.dim(), "relaxation_check");
    check_observables(observables, spec.dim(), "relaxation_check");
    check_grid_window(spec, t_grid, "relaxation_check");

    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(spec.H_B);
    const OperatorMatrix& VB = es.eigenvectors();
    Eigen::VectorXd Eb = es.eigenvalues();
    OperatorMatrix V = tensor(OperatorMatrix::Identity(spec.dimS, spec.dimS), VB);
    OperatorMatrix rho_e = V.adjoint() * rho0 * V;
    OperatorMatrix ref = tensor(partial_trace_bath(rho0, spec.dimS, spec.dimB), spec.omega_B);
    std::vector<OperatorMatrix> obs_e;
    std::vector<cxd> ref_val;
    for (const auto& D : observables) {
        obs_e.push_back(V.adjoint() * D * V);
        ref_val.push_back((D * ref).trace());
    }

    std::vector<std::vector<double>> dev(observables.size());
    for (double t : t_grid) {
        OperatorMatrix rt(rho_e.rows(), rho_e.cols());
        for (int a = 0; a < spec.dimS; ++a)
            for (int b = 0; b < spec.dimS; ++b)
                for (int mu = 0; mu < spec.dimB; ++mu)
                    for (int nu = 0; nu < spec.dimB; ++nu)
                        rt(a * spec.dimB + mu, b * spec.dimB + nu) =
                            rho_e(a * spec.dimB + mu, b * spec.dimB + nu) *
                            std::exp(kI * (Eb(nu) - Eb(mu)) * t);
        for (size_t i = 0; i < obs_e.size(); ++i)
            dev[i].push_back(std::abs((obs_e[i] * rt).trace() - ref_val[i]));
    }
    return finish_report(t_grid, std::move(dev));
}

DecayReport free_factorization_check(const ModelSpec& spec, const OperatorMatrix& rho0,
                                     const std::vector<OperatorMatrix>& observables,
                                     const std::vector<double>& t_grid) {
    spec.validate();
    check_state(rho0, spec.dim(), "free_factorization_check");
    check_observables(observables, spec.dim(), "free_factorization_check");
    check_grid_window(spec, t_grid, "free_factorization_check");

    Eigen::SelfAdjointEigenSolver<OperatorMatrix> esS(spec.H_S), esB(spec.H_B);
    OperatorMatrix V = tensor(esS.eigenvectors(), esB.eigenvectors());
    Eigen::VectorXd Es = esS.eigenvalues(), Eb = esB.eigenvalues();
    Eigen::VectorXd eps(spec.dim());
    for (int a = 0; a < spec.dimS; ++a)
        for (int mu = 0; mu < spec.dimB; ++mu) eps(a * spec.dimB + mu) = Es(a) + Eb(mu);

    OperatorMatrix rho_e = V.adjoint() * rho0 * V;
    OperatorMatrix refS = partial_trace_bath(rho0, spec.dimS, spec.dimB);
    OperatorMatrix refS_e = esS.eigenvectors().adjoint() * refS * esS.eigenvectors();
    OperatorMatrix Omega_e =
        esB.eigenvectors().adjoint() * spec.omega_B * esB.eigenvectors();
    std::vector<OperatorMatrix> obs_e;
    for (const auto& D : observables) obs_e.push_back(V.adjoint() * D * V);

    std::vector<std::vector<double>> dev(observables.size());
    for (double t : t_grid) {
        OperatorMatrix rt(rho_e.rows(), rho_e.cols());
        for (Eigen::Index i = 0; i < rt.rows(); ++i)
            for (Eigen::Index j = 0; j < rt.cols(); ++j)
                rt(i, j) = rho_e(i, j) * std::exp(kI * (eps(j) - eps(i)) * t);
        OperatorMatrix rS(spec.dimS, spec.dimS);
        for (int a = 0; a < spec.dimS; ++a)
            for (int b = 0; b < spec.dimS; ++b)
                rS(a, b) = refS_e(a, b) * std::exp(kI * (Es(b) - Es(a)) * t);
        OperatorMatrix ref = tensor(rS, Omega_e);
        for (size_t i = 0; i < obs_e.size(); ++i)
            dev[i].push_back(std::abs((obs_e[i] * (rt - ref)).trace()));
    }
    return finish_report(t_grid, std::move(dev));
}

BathSpectrumReport bath_spectrum_report(const ModelSpec& spec) {
    spec.validate();
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(spec.H_B);
    Eigen::VectorXd E = es.eigenvalues();
    double tol = spec.tol.degeneracy_tol * std::max(1.0, spec.H_B.norm());

    std::vector<double> diffs;
    diffs.reserve(static_cast<size_t>(E.size()) * static_cast<size_t>(E.size()));
    for (Eigen::Index i = 0; i < E.size(); ++i)
        for (Eigen::Index j = 0; j < E.size(); ++j) diffs.push_back(E(i) - E(j));
    std::sort(diffs.begin(), diffs.end());

    BathSpectrumReport rep;
    size_t k = 0;
    while (k < diffs.size()) {
        size_t j = k + 1;
        while (j < diffs.size() && diffs[j] - diffs[j - 1] <= tol) ++j;
        double mean = 0.0;
        for (size_t q = k; q < j; ++q) mean += diffs[q];
        mean /= static_cast<double>(j - k);
        if (std::abs(mean) <= tol) mean = 0.0;
        SpectrumLine line;
        line.omega = mean;
        line.multiplicity = static_cast<int>(j - k);
        line.flagged = mean != 0.0 && line.multiplicity > 1;
        rep.lines.push_back(line);
        k = j;
    }

    rep.min_nonzero_gap = std::numeric_limits<double>::infinity();
    bool flagged_any = false;
    for (size_t i = 0; i < rep.lines.size(); ++i) {
        if (rep.lines[i].omega == 0.0) rep.kernel_dimension = rep.lines[i].multiplicity;
        if (rep.lines[i].flagged) flagged_any = true;
        if (i > 0) {
            double gap = rep.lines[i].omega - rep.lines[i - 1].omega;
            if (gap > tol) rep.min_nonzero_gap = std::min(rep.min_nonzero_gap, gap);
        }
    }
    rep.quasi_continuum_ok = !flagged_any;
    return rep;
}

}  // namespace nzlab
