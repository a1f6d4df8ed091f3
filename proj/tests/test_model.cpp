#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nzlab/model.hpp"

using namespace nzlab;

namespace {

ModelSpec tiny_friedrichs() {
    return build_friedrichs_model(2, 1.0, {0.8, 1.2}, [](double) { return 0.3; }, 0.5);
}

}  // namespace

TEST_CASE("friedrichs model layout") {
    ModelSpec m = tiny_friedrichs();
    CHECK(m.dimS == 2);
    CHECK(m.dimB == 3);  // vacuum plus two modes
    CHECK(m.lambda == 0.5);
    // H_B diagonal with 0 and the band frequencies
    CHECK(m.H_B(0, 0) == cxd(0, 0));
    CHECK(m.H_B(1, 1).real() == doctest::Approx(0.8));
    CHECK(m.H_B(2, 2).real() == doctest::Approx(1.2));
    CHECK((m.H_B - m.H_B.adjoint()).norm() < 1e-14);
    CHECK((m.H_SB - m.H_SB.adjoint()).norm() < 1e-14);
    // excitation conserving coupling: |e,vac> to |g,k| with weight g
    int dB = 3;
    int e_vac = 1 * dB + 0, g_1 = 0 * dB + 1, g_2 = 0 * dB + 2;
    CHECK(std::abs(m.H_SB(e_vac, g_1) - cxd(0.3, 0)) < 1e-14);
    CHECK(std::abs(m.H_SB(e_vac, g_2) - cxd(0.3, 0)) < 1e-14);
    // vacuum reference state
    CHECK(std::abs(m.omega_B(0, 0) - cxd(1, 0)) < 1e-14);
    CHECK(std::abs(m.omega_B.trace() - cxd(1, 0)) < 1e-14);
    m.validate();
}

TEST_CASE("single mode sits at the band midpoint") {
    ModelSpec m = build_friedrichs_model(1, 1.0, {0.5, 1.5}, [](double) { return 0.1; });
    CHECK(m.dimB == 2);
    CHECK(m.H_B(1, 1).real() == doctest::Approx(1.0));
}

TEST_CASE("total hamiltonian assembles the three pieces") {
    ModelSpec m = tiny_friedrichs();
    OperatorMatrix I_S = OperatorMatrix::Identity(m.dimS, m.dimS);
    OperatorMatrix I_B = OperatorMatrix::Identity(m.dimB, m.dimB);
    OperatorMatrix expect = tensor(m.H_S, I_B) + tensor(I_S, m.H_B) + m.lambda * m.H_SB;
    CHECK((m.total_hamiltonian() - expect).norm() < 1e-13);
    ModelSpec m2 = m.with_lambda(0.1);
    CHECK(m2.lambda == 0.1);
    CHECK((m2.total_hamiltonian() - (tensor(m.H_S, I_B) + tensor(I_S, m.H_B) + 0.1 * m.H_SB))
              .norm() < 1e-13);
}

TEST_CASE("window estimate equals two pi over the smallest gap") {
    OperatorMatrix H = OperatorMatrix::Zero(4, 4);
    H(0, 0) = 0.0;
    H(1, 1) = 0.3;
    H(2, 2) = 1.0;
    H(3, 3) = 1.2;  // smallest gap 0.2
    BathWindow w = estimate_bath_window(H, 1e-8);
    CHECK(w.t_rec == doctest::Approx(2.0 * M_PI / 0.2).epsilon(1e-12));
    CHECK(w.usable() == doctest::Approx(0.5 * w.t_rec).epsilon(1e-12));
}

TEST_CASE("window estimate merges near degenerate levels") {
    OperatorMatrix H = OperatorMatrix::Zero(3, 3);
    H(1, 1) = 1e-12;  // degenerate with 0 at tol 1e-8
    H(2, 2) = 0.5;
    BathWindow w = estimate_bath_window(H, 1e-8);
    CHECK(w.t_rec == doctest::Approx(2.0 * M_PI / 0.5).epsilon(1e-9));
}

TEST_CASE("resolve_bath_window prefers an explicit window") {
    ModelSpec m = tiny_friedrichs();
    BathWindow est = resolve_bath_window(m);
    CHECK(est.t_rec == doctest::Approx(estimate_bath_window(m.H_B, m.tol.degeneracy_tol).t_rec));
    m.window.t_rec = 7.0;
    CHECK(resolve_bath_window(m).t_rec == 7.0);
}

TEST_CASE("spin bath interaction has a nonzero bath mean until centered") {
    ModelSpec m = build_spin_bath_model(2, 1.0, {0.3, 0.25});
    CHECK(m.dimS == 2);
    CHECK(m.dimB == 4);
    // bath mean of the coupling under the thermal reference
    OperatorMatrix mean = OperatorMatrix::Zero(m.dimS, m.dimS);
    OperatorMatrix lift = tensor(OperatorMatrix::Identity(m.dimS, m.dimS), m.omega_B);
    mean = partial_trace_bath(lift * m.H_SB, m.dimS, m.dimB);
    CHECK(mean.norm() > 1e-3);

    ModelSpec c = center_interaction(m);
    OperatorMatrix lift2 = tensor(OperatorMatrix::Identity(c.dimS, c.dimS), c.omega_B);
    OperatorMatrix mean2 = partial_trace_bath(lift2 * c.H_SB, c.dimS, c.dimB);
    CHECK(mean2.norm() < 1e-12);
    // total hamiltonian unchanged by centering
    CHECK((c.total_hamiltonian() - m.total_hamiltonian()).norm() < 1e-12);
}

TEST_CASE("thermal state matches the explicit gibbs weights") {
    OperatorMatrix H = OperatorMatrix::Zero(3, 3);
    H(0, 0) = 0.0;
    H(1, 1) = 0.4;
    H(2, 2) = 1.1;
    double beta = 0.7;
    OperatorMatrix rho = thermal_state(H, beta);
    double Z = std::exp(0.0) + std::exp(-beta * 0.4) + std::exp(-beta * 1.1);
    CHECK(std::abs(rho(0, 0).real() - 1.0 / Z) < 1e-12);
    CHECK(std::abs(rho(1, 1).real() - std::exp(-beta * 0.4) / Z) < 1e-12);
    CHECK(std::abs(rho(2, 2).real() - std::exp(-beta * 1.1) / Z) < 1e-12);
    CHECK(std::abs(rho.trace() - cxd(1, 0)) < 1e-12);
    // beta 0 is maximally mixed
    OperatorMatrix flat = thermal_state(H, 0.0);
    CHECK(std::abs(flat(0, 0).real() - 1.0 / 3.0) < 1e-12);
    CHECK((flat - flat(0, 0).real() * OperatorMatrix::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("correlated state is a normalized density matrix") {
    ModelSpec m = tiny_friedrichs();
    CorrelatedStateRecipe rec = packet_recipe(m, 0.8, {0, 1});
    double factor = 0.0;
    OperatorMatrix rho = build_correlated_state(m, rec, &factor);
    CHECK(std::abs(rho.trace() - cxd(1, 0)) < 1e-12);
    CHECK(hermiticity_defect(rho) < 1e-12);
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(rho);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
    // the unnormalized trace: sum_i tr{L_i (1 x Omega) L_i^dag}
    double direct = 0.0;
    OperatorMatrix ref = tensor(OperatorMatrix::Identity(m.dimS, m.dimS), m.omega_B);
    for (const auto& L : rec.ops_L) direct += (L * ref * L.adjoint()).trace().real();
    CHECK(factor == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("packet recipe carries a normalized window with the hann profile") {
    ModelSpec m = build_friedrichs_model(4, 1.0, {0.7, 1.3}, [](double) { return 0.2; });
    CorrelatedStateRecipe rec = packet_recipe(m, 0.5, {0, 1, 2, 3});
    REQUIRE(rec.ops_L.size() == 1);
    const OperatorMatrix& L = rec.ops_L[0];
    // L = 1 + c sigma_- x |w><vac|; pull the window back out of the block
    // sigma_-: |g><e| so rows (0,mu), columns (1,0)
    int dB = m.dimB;
    Vec w(4);
    for (int k = 0; k < 4; ++k) w(k) = L(0 * dB + (k + 1), 1 * dB + 0) / 0.5;
    CHECK(std::abs(w.norm() - 1.0) < 1e-12);
    // hann profile ratios: sin^2(pi (k+1/2)/4)
    double h0 = std::pow(std::sin(M_PI * 0.5 / 4), 2), h1 = std::pow(std::sin(M_PI * 1.5 / 4), 2);
    CHECK(std::abs(w(0).real() / w(1).real() - h0 / h1) < 1e-10);
    // identity part untouched
    OperatorMatrix I = OperatorMatrix::Identity(m.dim(), m.dim());
    OperatorMatrix diff = L - I;
    CHECK(std::abs(diff(0, 0)) < 1e-14);
    // flat window variant
    CorrelatedStateRecipe fl = packet_recipe(m, 0.5, {0, 1}, false);
    Vec wf(2);
    for (int k = 0; k < 2; ++k) wf(k) = fl.ops_L[0](0 * dB + (k + 1), 1 * dB + 0) / 0.5;
    CHECK(std::abs(wf(0) - wf(1)) < 1e-14);
}

TEST_CASE("packet recipe rejects bad mode indices") {
    ModelSpec m = tiny_friedrichs();
    CHECK_THROWS_AS(packet_recipe(m, 0.5, {5}), ValidationError);
    CHECK_THROWS_AS(packet_recipe(m, 0.5, {}), ValidationError);
}

TEST_CASE("frequency jitter is bounded, seeded, and refreshes the window") {
    ModelSpec m = build_friedrichs_model(6, 1.0, {0.5, 1.5}, [](double) { return 0.1; });
    ModelSpec j1 = apply_frequency_jitter(m, 2.0, 42);
    ModelSpec j2 = apply_frequency_jitter(m, 2.0, 42);
    ModelSpec j3 = apply_frequency_jitter(m, 2.0, 43);
    CHECK((j1.H_B - j2.H_B).norm() == 0.0);
    CHECK((j1.H_B - j3.H_B).norm() > 0.0);
    for (int k = 1; k < m.dimB; ++k) {
        double base = m.H_B(k, k).real();
        double moved = j1.H_B(k, k).real();
        CHECK(std::abs(moved - base) <= 0.02 * std::abs(base) + 1e-15);
    }
}

TEST_CASE("validate rejects shape and hermiticity violations") {
    ModelSpec m = tiny_friedrichs();
    ModelSpec bad = m;
    bad.H_S = OperatorMatrix::Zero(3, 3);
    CHECK_THROWS_AS(bad.validate(), DimensionError);
    bad = m;
    bad.H_B(0, 1) = cxd(0.2, 0.1);  // not hermitian
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = m;
    bad.omega_B = OperatorMatrix::Identity(m.dimB, m.dimB);  // trace != 1
    CHECK_THROWS(bad.validate());
}

TEST_CASE("validate rejects a non stationary reference") {
    ModelSpec m = tiny_friedrichs();
    OperatorMatrix r = OperatorMatrix::Zero(m.dimB, m.dimB);
    r(0, 0) = 0.5;
    r(0, 1) = 0.5;
    r(1, 0) = 0.5;
    r(1, 1) = 0.5;  // coherence between levels of different energy
    m.omega_B = r;
    CHECK_THROWS_AS(m.validate(), ValidationError);
}
