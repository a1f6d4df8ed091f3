#include "nzlab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>

#include "nzlab/errors.hpp"
#include "nzlab/liouville.hpp"
#include "nzlab/presets.hpp"

namespace nzlab {

namespace {

constexpr cxd kI{0.0, 1.0};

struct Fnv {
    std::uint64_t h = 14695981039346656037ull;
    void feed(const char* s) {
        while (*s) {
            h ^= static_cast<unsigned char>(*s++);
            h *= 1099511628211ull;
        }
    }
    void num(double x) {
        char b[40];
        std::snprintf(b, sizeof b, "%.17g;", x);
        feed(b);
    }
    void mat(const OperatorMatrix& M) {
        num(static_cast<double>(M.rows()));
        num(static_cast<double>(M.cols()));
        for (Eigen::Index i = 0; i < M.rows(); ++i)
            for (Eigen::Index j = 0; j < M.cols(); ++j) {
                num(M(i, j).real());
                num(M(i, j).imag());
            }
    }
};

double default_eta(const ModelSpec& spec) {
    double t_rec = resolve_bath_window(spec).t_rec;
    if (!std::isfinite(t_rec) || t_rec <= 0.0)
        throw ValidationError("cannot pick eta automatically: bath has no finite recurrence "
                              "time; pass eta explicitly");
    return 5.0 * (2.0 * M_PI / t_rec);
}

struct LinFit {
    double slope = 0.0, intercept = 0.0, rms = 0.0, range = 0.0;
};

LinFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double det = n * sxx - sx * sx;
    LinFit f;
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sy * sxx - sx * sxy) / det;
    double ss = 0;
    double lo = y[0], hi = y[0];
    for (size_t i = 0; i < n; ++i) {
        double e = y[i] - (f.slope * x[i] + f.intercept);
        ss += e * e;
        lo = std::min(lo, y[i]);
        hi = std::max(hi, y[i]);
    }
    f.rms = std::sqrt(ss / n);
    f.range = hi - lo;
    return f;
}

std::vector<size_t> descending_lambda_order(const std::vector<double>& lambdas) {
    std::vector<size_t> idx(lambdas.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t a, size_t b) { return lambdas[a] > lambdas[b]; });
    return idx;
}

}  // namespace

void StudyConfig::validate() const {
    spec.validate();
    if (lambdas.empty()) throw ValidationError("study config: no lambda values");
    for (double l : lambdas)
        if (!(l > 0.0)) throw ValidationError("study config: lambda values must be positive");
    if (tau_grid.empty()) throw ValidationError("study config: empty tau grid");
    for (size_t k = 0; k < tau_grid.size(); ++k) {
        if (tau_grid[k] < 0.0) throw ValidationError("study config: negative tau");
        if (k > 0 && !(tau_grid[k] > tau_grid[k - 1]))
            throw ValidationError("study config: tau grid must be strictly increasing");
    }
    if (!(dt > 0.0)) throw ValidationError("study config: dt must be positive");
    if (recipe.ops_L.empty()) throw ValidationError("study config: recipe has no operators");
    double usable = resolve_bath_window(spec).usable();
    if (std::isfinite(usable)) {
        for (double l : lambdas) {
            double T = tau_grid.back() / (l * l);
            if (T > usable * (1.0 + 1e-12)) {
                std::ostringstream os;
                os << "study config: lambda = " << l
                   << " violates the window guard: tau_max/lambda^2 = " << T
                   << " exceeds the usable window " << usable;
                throw WindowError(os.str());
            }
        }
    }
}

std::string StudyConfig::hash() const {
    Fnv f;
    f.feed(model_name.c_str());
    f.num(static_cast<double>(spec.dimS));
    f.num(static_cast<double>(spec.dimB));
    f.mat(spec.H_S);
    f.mat(spec.H_B);
    f.mat(spec.H_SB);
    f.mat(spec.omega_B);
    for (const auto& L : recipe.ops_L) f.mat(L);
    for (double l : lambdas) f.num(l);
    for (double t : tau_grid) f.num(t);
    f.num(eta);
    f.num(dt);
    f.num(static_cast<double>(seed));
    if (wrong_reference.size() > 0) f.mat(wrong_reference);
    char out[24];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(f.h));
    return out;
}

StudyConfig default_study_config() { return config_for_model("study"); }

StudyConfig config_for_model(const std::string& name) {
    StudyConfig cfg;
    cfg.model_name = name;
    cfg.spec = preset_model(name);
    cfg.recipe = preset_recipe(cfg.spec, name);
    if (name == "small") {
        cfg.recipe_strength = 0.8;
        cfg.recipe_modes = {0, 1};
    } else if (name == "study") {
        cfg.recipe_strength = 1.0;
        cfg.recipe_modes = {36, 37, 38, 39};
    }
    for (int k = 0; k <= 32; ++k) cfg.tau_grid.push_back(k / 16.0);
    return cfg;
}

namespace {

struct LambdaSlice {
    std::vector<StudyRow> rows;
    double seconds = 0.0;
};

LambdaSlice run_lambda(const StudyConfig& cfg, double lambda, double eta_used) {
    auto t0 = std::chrono::steady_clock::now();
    ModelSpec spec_l = center_interaction(cfg.spec.with_lambda(lambda));
    ProjectorPair pair = build_projectors(spec_l);
    BohrDecomposition bohr = bohr_decomposition(spec_l.H_S);
    OperatorMatrix rho0 = build_correlated_state(spec_l, cfg.recipe);

    std::vector<double> times;
    times.reserve(cfg.tau_grid.size());
    for (double tau : cfg.tau_grid) times.push_back(tau / (lambda * lambda));
    Trajectory ex = propagate_exact(spec_l, rho0, times);

    MarkovGenerator gen = vanhove_generator(pair, spec_l, bohr, eta_used);
    OperatorMatrix r0 = partial_trace_bath(rho0, spec_l.dimS, spec_l.dimB);
    Trajectory mk = markov_propagate(gen, r0, cfg.tau_grid);
    std::vector<double> inorm =
        correlation_norm_curve(pair, spec_l, bohr, rho0, cfg.tau_grid, lambda, cfg.dt);

    LambdaSlice slice;
    for (size_t j = 0; j < cfg.tau_grid.size(); ++j) {
        StudyRow row;
        row.lambda = lambda;
        row.tau = cfg.tau_grid[j];
        row.q_norm = hs_norm(pair.Q(ex.states[j]));
        OperatorMatrix r = partial_trace_bath(ex.states[j], spec_l.dimS, spec_l.dimB);
        OperatorMatrix rI = rotate_interaction(bohr, r, times[j]);
        row.d_markov = trace_distance(rI, mk.states[j]);
        row.i_norm = inorm[j];
        if (!std::isfinite(row.d_markov) || !std::isfinite(row.i_norm) ||
            !std::isfinite(row.q_norm))
            throw IntegrationError("scaling_study: non-finite value recorded");
        slice.rows.push_back(row);
    }
    slice.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return slice;
}

}  // namespace

StudyResult scaling_study(const StudyConfig& cfg) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    double eta_used = cfg.eta > 0.0 ? cfg.eta : default_eta(cfg.spec);

    std::vector<std::future<LambdaSlice>> futs;
    futs.reserve(cfg.lambdas.size());
    for (double lambda : cfg.lambdas)
        futs.push_back(std::async(std::launch::async,
                                  [&cfg, lambda, eta_used] { return run_lambda(cfg, lambda, eta_used); }));

    StudyResult res;
    res.eta_used = eta_used;
    for (auto& fut : futs) {
        LambdaSlice slice = fut.get();
        res.per_lambda_seconds.push_back(slice.seconds);
        for (auto& row : slice.rows) res.rows.push_back(row);
    }

    // generator stability under doubling of the regularizer
    ModelSpec spec0 = center_interaction(cfg.spec.with_lambda(cfg.lambdas.front()));
    ProjectorPair pair0 = build_projectors(spec0);
    BohrDecomposition bohr0 = bohr_decomposition(spec0.H_S);
    std::vector<double> r1 = decay_rates(vanhove_generator(pair0, spec0, bohr0, eta_used));
    std::vector<double> r2 = decay_rates(vanhove_generator(pair0, spec0, bohr0, 2.0 * eta_used));
    double rmax = 0.0;
    for (double r : r1) rmax = std::max(rmax, std::abs(r));
    double shift = 0.0;
    for (size_t i = 0; i < r1.size(); ++i)
        if (std::abs(r1[i]) > 1e-12 * std::max(1.0, rmax))
            shift = std::max(shift, std::abs(r2[i] - r1[i]) / std::abs(r1[i]));
    res.eta_rate_shift = shift;

    res.config_hash = cfg.hash();
    res.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

StudySummary summarize_study(const StudyResult& res, const StudyConfig& cfg) {
    StudySummary s;
    size_t nt = cfg.tau_grid.size();
    std::vector<size_t> order = descending_lambda_order(cfg.lambdas);

    size_t unit_idx = 0;
    double best = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < nt; ++j) {
        double d = std::abs(cfg.tau_grid[j] - 1.0);
        if (d < best) {
            best = d;
            unit_idx = j;
        }
    }
    bool have_zero = std::abs(cfg.tau_grid.front()) <= 1e-12;

    for (size_t oi : order) {
        const StudyRow* block = res.rows.data() + oi * nt;
        double imax = 0.0;
        for (size_t j = 0; j < nt; ++j) imax = std::max(imax, block[j].i_norm);
        s.lambdas.push_back(cfg.lambdas[oi]);
        s.imax.push_back(imax);
        s.d_final.push_back(block[nt - 1].d_markov);
        s.q_unit.push_back(block[unit_idx].q_norm);
        if (have_zero) s.q_zero.push_back(block[0].q_norm);
    }

    auto strictly_decreasing = [](const std::vector<double>& v) {
        for (size_t i = 1; i < v.size(); ++i)
            if (!(v[i] < v[i - 1])) return false;
        return v.size() >= 2;
    };
    s.imax_decreasing = strictly_decreasing(s.imax);
    s.imax_ratio_in_band = s.imax.size() >= 2;
    for (size_t i = 1; i < s.imax.size(); ++i) {
        if (s.imax[i - 1] <= 0.0) {
            s.imax_ratio_in_band = false;
            break;
        }
        double r = s.imax[i] / s.imax[i - 1];
        if (r < 0.3 || r > 0.8) s.imax_ratio_in_band = false;
    }
    s.d_final_decreasing = strictly_decreasing(s.d_final);
    s.d_final_halved =
        s.d_final.size() >= 2 && s.d_final.back() < 0.5 * s.d_final.front();
    s.q_unit_decreasing = strictly_decreasing(s.q_unit);
    if (have_zero) {
        double lo = *std::min_element(s.q_zero.begin(), s.q_zero.end());
        double hi = *std::max_element(s.q_zero.begin(), s.q_zero.end());
        s.q_zero_lambda_free = (hi - lo) <= 1e-12 * std::max(1.0, hi);
    } else {
        s.q_zero_lambda_free = true;
    }
    s.eta_stable = res.eta_rate_shift < 0.30;
    s.passed = s.imax_decreasing && s.imax_ratio_in_band && s.d_final_decreasing &&
               s.d_final_halved && s.q_unit_decreasing && s.q_zero_lambda_free && s.eta_stable;
    return s;
}

SecularReport secular_demo(const StudyConfig& cfg, int n_points) {
    cfg.spec.validate();
    if (n_points < 4)
        throw ValidationError("secular_demo: need at least 4 grid points for the linear fit");
    const ModelSpec& spec = cfg.spec;
    if (cfg.wrong_reference.size() == 0)
        throw ValidationError("secular_demo: config carries no wrong_reference state");
    const OperatorMatrix& Op = cfg.wrong_reference;
    if (Op.rows() != spec.dimB || Op.cols() != spec.dimB)
        throw DimensionError("secular_demo: wrong_reference must live on the bath space");
    double oscale = std::max(1.0, Op.norm());
    if (hermiticity_defect(Op) > 1e-9 * oscale)
        throw ValidationError("secular_demo: wrong_reference is not hermitian");
    if (std::abs(Op.trace() - cxd(1.0, 0.0)) > 1e-8)
        throw ValidationError("secular_demo: wrong_reference trace is not 1");
    OperatorMatrix comm = spec.H_B * Op - Op * spec.H_B;
    if (comm.norm() > 1e-9 * std::max(1.0, spec.H_B.norm()) * oscale)
        throw ValidationError("secular_demo: wrong_reference is not stationary under H_B");

    double t_rec = resolve_bath_window(spec).t_rec;
    if (!std::isfinite(t_rec))
        throw ValidationError("secular_demo: bath has no finite recurrence time");

    BohrDecomposition bohr = bohr_decomposition(spec.H_S);
    size_t mstar = 0;
    for (size_t m = 1; m < bohr.entries.size(); ++m) {
        size_t a = bohr.entries[m].pairs.size(), b = bohr.entries[mstar].pairs.size();
        if (a > b || (a == b && std::abs(bohr.entries[m].omega) <
                                    std::abs(bohr.entries[mstar].omega)))
            mstar = m;
    }
    double omega = bohr.entries[mstar].omega;

    Eigen::SelfAdjointEigenSolver<OperatorMatrix> esS(spec.H_S), esB(spec.H_B);
    const OperatorMatrix& VS = esS.eigenvectors();
    const OperatorMatrix& VB = esB.eigenvectors();
    Eigen::VectorXd Es = esS.eigenvalues(), Eb = esB.eigenvalues();
    int dS = spec.dimS, dB = spec.dimB, D = spec.dim();

    // reference-range operand with a diagonal system factor; in the zero
    // frequency block its free evolution is constant, which makes the
    // wrong-projector growth exactly linear
    OperatorMatrix A = OperatorMatrix::Zero(dS, dS);
    for (int a = 0; a < dS; ++a) A(a, a) = (a % 2 == 0) ? 1.0 : -1.0;
    A /= std::sqrt(static_cast<double>(dS));
    OperatorMatrix Omega_e = VB.adjoint() * spec.omega_B * VB;
    OperatorMatrix Wrong_e = VB.adjoint() * Op * VB;
    OperatorMatrix Z = tensor(A, Omega_e);  // already in the eigenbasis
    // project onto the reference range explicitly
    Z = tensor(partial_trace_bath(Z, dS, dB), Omega_e);

    Eigen::VectorXd eps(D);
    for (int a = 0; a < dS; ++a)
        for (int mu = 0; mu < dB; ++mu) eps(a * dB + mu) = Es(a) + Eb(mu);
    double ascale = 1.0;
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j)
            ascale = std::max(ascale, std::abs(omega - (eps(i) - eps(j))));
    double ktol = 1e-8 * ascale;

    SecularReport rep;
    rep.omega_m = omega;
    rep.operand_norm = hs_norm(Z);
    double Tmax = 0.4 * t_rec;
    for (int k = 0; k < n_points; ++k) {
        double T = Tmax * k / (n_points - 1);
        OperatorMatrix W(D, D);
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) {
                cxd a = kI * (omega - (eps(i) - eps(j)));
                cxd phi = std::abs(a) > ktol ? (std::exp(a * T) - 1.0) / a : cxd(T, 0.0);
                W(i, j) = phi * Z(i, j);
            }
        OperatorMatrix red = partial_trace_bath(W, dS, dB);
        rep.T_grid.push_back(T);
        rep.wrong_values.push_back(hs_norm(W - tensor(red, Wrong_e)));
        rep.correct_values.push_back(hs_norm(W - tensor(red, Omega_e)));
    }

    LinFit fw = fit_line(rep.T_grid, rep.wrong_values);
    LinFit fc = fit_line(rep.T_grid, rep.correct_values);
    rep.wrong_slope = fw.slope;
    rep.wrong_intercept = fw.intercept;
    rep.wrong_residual = fw.rms;
    rep.wrong_range = fw.range;
    rep.correct_slope = fc.slope;
    rep.correct_residual = fc.rms;
    rep.correct_range = fc.range;
    rep.wrong_grows = fw.slope > 0.0 && fw.range > 0.0 && fw.rms < 0.01 * fw.range;
    rep.correct_flat = std::abs(fc.slope) <= 1e-6 * rep.operand_norm;
    rep.passed = rep.wrong_grows && rep.correct_flat;
    return rep;
}

FactorizationReport factorization_decay(const StudyConfig& cfg) {
    cfg.spec.validate();
    if (cfg.lambdas.size() < 2)
        throw ValidationError("factorization_decay: need at least two lambda values");
    FactorizationReport rep;
    rep.taus = {0.0, 0.5, 1.0};
    double usable = resolve_bath_window(cfg.spec).usable();
    std::vector<size_t> order = descending_lambda_order(cfg.lambdas);
    for (size_t oi : order) {
        double lambda = cfg.lambdas[oi];
        if (std::isfinite(usable) && rep.taus.back() / (lambda * lambda) > usable * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "factorization_decay: lambda = " << lambda
               << " violates the window guard at tau = " << rep.taus.back();
            throw WindowError(os.str());
        }
        rep.lambdas.push_back(lambda);
    }

    for (double lambda : rep.lambdas) {
        ModelSpec spec_l = center_interaction(cfg.spec.with_lambda(lambda));
        ProjectorPair pair = build_projectors(spec_l);
        OperatorMatrix rho0 = build_correlated_state(spec_l, cfg.recipe);
        std::vector<double> times;
        for (double tau : rep.taus) times.push_back(tau / (lambda * lambda));
        Trajectory ex = propagate_exact(spec_l, rho0, times);
        std::vector<double> qrow;
        for (const auto& st : ex.states) qrow.push_back(hs_norm(pair.Q(st)));
        rep.q.push_back(std::move(qrow));
    }

    bool all = true;
    rep.decreasing.assign(rep.taus.size(), true);
    rep.decreasing[0] = true;
    for (size_t j = 1; j < rep.taus.size(); ++j) {
        bool dec = true;
        for (size_t i = 1; i < rep.lambdas.size(); ++i)
            if (!(rep.q[i][j] < rep.q[i - 1][j])) dec = false;
        rep.decreasing[j] = dec;
        all = all && dec;
    }
    double lo = rep.q[0][0], hi = rep.q[0][0];
    for (const auto& row : rep.q) {
        lo = std::min(lo, row[0]);
        hi = std::max(hi, row[0]);
    }
    rep.tau0_lambda_free = (hi - lo) <= 1e-12 * std::max(1.0, hi);
    rep.passed = all;
    return rep;
}

void write_study_csv(const StudyResult& res, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open CSV output path " + path);
    out << "lambda,tau,d_markov,i_norm,q_norm\n";
    char b[200];
    for (const auto& r : res.rows) {
        std::snprintf(b, sizeof b, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.lambda, r.tau,
                      r.d_markov, r.i_norm, r.q_norm);
        out << b;
    }
}

}  // namespace nzlab
