#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "nzlab/linalg.hpp"

using namespace nzlab;

namespace {

// independent tensor product straight from the index formula
OperatorMatrix tensor_oracle(const OperatorMatrix& A, const OperatorMatrix& B) {
    OperatorMatrix out(A.rows() * B.rows(), A.cols() * B.cols());
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j)
            for (int k = 0; k < B.rows(); ++k)
                for (int l = 0; l < B.cols(); ++l)
                    out(i * B.rows() + k, j * B.cols() + l) = A(i, j) * B(k, l);
    return out;
}

OperatorMatrix ptrace_oracle(const OperatorMatrix& X, int dS, int dB) {
    OperatorMatrix out = OperatorMatrix::Zero(dS, dS);
    for (int i = 0; i < dS; ++i)
        for (int j = 0; j < dS; ++j)
            for (int mu = 0; mu < dB; ++mu) out(i, j) += X(i * dB + mu, j * dB + mu);
    return out;
}

}  // namespace

TEST_CASE("tensor product matches the index formula") {
    auto probes = random_probe_set(3, 2, 11);
    auto probes2 = random_probe_set(4, 2, 12);
    for (const auto& A : probes)
        for (const auto& B : probes2)
            CHECK((tensor(A, B) - tensor_oracle(A, B)).norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("tensor respects mixed products") {
    auto A = random_probe_set(3, 1, 21)[0];
    auto B = random_probe_set(2, 1, 22)[0];
    auto C = random_probe_set(3, 1, 23)[0];
    auto D = random_probe_set(2, 1, 24)[0];
    // (A x B)(C x D) = AC x BD
    CHECK((tensor(A, B) * tensor(C, D) - tensor(A * C, B * D)).norm() < 1e-13);
}

TEST_CASE("partial trace matches the index formula and kills the bath factor") {
    int dS = 3, dB = 4;
    auto X = random_probe_set(dS * dB, 3, 31);
    for (const auto& x : X)
        CHECK((partial_trace_bath(x, dS, dB) - ptrace_oracle(x, dS, dB)).norm() < 1e-14);
    auto A = random_probe_set(dS, 1, 32)[0];
    auto B = random_probe_set(dB, 1, 33)[0];
    OperatorMatrix red = partial_trace_bath(tensor(A, B), dS, dB);
    CHECK((red - B.trace() * A).norm() < 1e-13);
}

TEST_CASE("partial trace rejects inconsistent dimensions") {
    OperatorMatrix X = OperatorMatrix::Zero(6, 6);
    CHECK_THROWS_AS(partial_trace_bath(X, 4, 2), DimensionError);
}

TEST_CASE("vectorize is column major and inverse of devectorize") {
    OperatorMatrix X(2, 2);
    X << cxd(1, 0), cxd(3, 1), cxd(2, 0), cxd(4, -1);
    Vec v = vectorize(X);
    // column-major stacking: (0,0), (1,0), (0,1), (1,1)
    CHECK(v(0) == X(0, 0));
    CHECK(v(1) == X(1, 0));
    CHECK(v(2) == X(0, 1));
    CHECK(v(3) == X(1, 1));
    CHECK((devectorize(v) - X).norm() == 0.0);
    CHECK(std::abs(v.norm() - hs_norm(X)) < 1e-15);
}

TEST_CASE("unitary evolution has exact eigenphases") {
    // H diagonal: rho_ab picks up e^{-i(Ea-Eb)t}
    OperatorMatrix H = OperatorMatrix::Zero(3, 3);
    H(0, 0) = 0.0;
    H(1, 1) = 0.7;
    H(2, 2) = 1.9;
    auto rho = random_probe_set(3, 1, 41)[0];
    double t = 2.31;
    OperatorMatrix out = evolve_unitary(H, rho, t);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            cxd expect = rho(a, b) * std::exp(cxd(0, -(H(a, a).real() - H(b, b).real()) * t));
            CHECK(std::abs(out(a, b) - expect) < 1e-13);
        }
}

TEST_CASE("unitary evolution preserves trace and hermiticity of states") {
    auto probes = random_probe_set(4, 1, 51);
    OperatorMatrix rho = probes[0] * probes[0].adjoint();
    rho /= rho.trace();
    OperatorMatrix H = probes[0] + probes[0].adjoint();
    OperatorMatrix out = evolve_unitary(H, rho, 1.7);
    CHECK(std::abs(out.trace() - cxd(1, 0)) < 1e-12);
    CHECK(hermiticity_defect(out) < 1e-12);
    CHECK(std::abs(hs_norm(out) - hs_norm(rho)) < 1e-12);
}

TEST_CASE("trace distance on orthogonal and identical states") {
    OperatorMatrix a = OperatorMatrix::Zero(2, 2), b = OperatorMatrix::Zero(2, 2);
    a(0, 0) = 1.0;
    b(1, 1) = 1.0;
    CHECK(trace_distance(a, b) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(trace_distance(a, a) == doctest::Approx(0.0).epsilon(1e-14));
    // qubit formula: distance of diag(p,1-p) vs diag(q,1-q) is |p-q|
    OperatorMatrix c = OperatorMatrix::Zero(2, 2), d = OperatorMatrix::Zero(2, 2);
    c(0, 0) = 0.8;
    c(1, 1) = 0.2;
    d(0, 0) = 0.35;
    d(1, 1) = 0.65;
    CHECK(trace_distance(c, d) == doctest::Approx(0.45).epsilon(1e-12));
}

TEST_CASE("trace distance is unitarily invariant") {
    auto probes = random_probe_set(3, 2, 61);
    OperatorMatrix r1 = probes[0] * probes[0].adjoint();
    r1 /= r1.trace();
    OperatorMatrix r2 = probes[1] * probes[1].adjoint();
    r2 /= r2.trace();
    OperatorMatrix H = probes[0] + probes[0].adjoint();
    double d0 = trace_distance(r1, r2);
    double d1 = trace_distance(evolve_unitary(H, r1, 0.9), evolve_unitary(H, r2, 0.9));
    CHECK(std::abs(d0 - d1) < 1e-12);
}

TEST_CASE("superoperator dense layout follows the vec convention") {
    int d = 3;
    auto probes = random_probe_set(d, 2, 71);
    OperatorMatrix A = probes[0], B = probes[1];
    Superoperator S(d, [&](const OperatorMatrix& X) { return A * X * B; });
    OperatorMatrix Sd = S.dense();
    // oracle: vec(A X B) = (B^T kron A) vec X
    OperatorMatrix expect = tensor(B.transpose(), A);
    CHECK((Sd - expect).norm() < 1e-12);
    // round trip through from_dense
    Superoperator S2 = Superoperator::from_dense(d, Sd);
    auto X = random_probe_set(d, 1, 72)[0];
    CHECK((S(X) - S2(X)).norm() < 1e-12);
}

TEST_CASE("superoperator compose add scale act pointwise") {
    int d = 2;
    auto probes = random_probe_set(d, 3, 81);
    Superoperator A(d, [&](const OperatorMatrix& X) { return probes[0] * X; });
    Superoperator B(d, [&](const OperatorMatrix& X) { return X * probes[1]; });
    const OperatorMatrix& X = probes[2];
    CHECK((compose(A, B)(X) - probes[0] * (X * probes[1])).norm() < 1e-13);
    CHECK((add(A, B)(X) - (probes[0] * X + X * probes[1])).norm() < 1e-13);
    CHECK((scale(cxd(0, 2), A)(X) - cxd(0, 2) * (probes[0] * X)).norm() < 1e-13);
}

TEST_CASE("superoperator identity and zero") {
    auto X = random_probe_set(3, 1, 91)[0];
    CHECK((Superoperator::identity(3)(X) - X).norm() == 0.0);
    CHECK(Superoperator::zero(3)(X).norm() == 0.0);
}

TEST_CASE("dense export refuses dimensions over the cap") {
    int d = kDenseSuperCap + 1;
    Superoperator S(d, [](const OperatorMatrix& X) { return X; });
    CHECK_THROWS_AS(S.dense(), DimensionError);
}

TEST_CASE("probe sets are deterministic, normalized, and seed sensitive") {
    auto a = random_probe_set(4, 3, 123);
    auto b = random_probe_set(4, 3, 123);
    auto c = random_probe_set(4, 3, 124);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK((a[i] - b[i]).norm() == 0.0);
        CHECK(std::abs(hs_norm(a[i]) - 1.0) < 1e-12);
    }
    CHECK((a[0] - c[0]).norm() > 1e-3);
}

TEST_CASE("hermiticity defect separates hermitian from skew parts") {
    auto X = random_probe_set(3, 1, 131)[0];
    OperatorMatrix H = X + X.adjoint();
    CHECK(hermiticity_defect(H) < 1e-14);
    OperatorMatrix K = X - X.adjoint();
    CHECK(hermiticity_defect(K) > 0.1 * K.norm());
}

TEST_CASE("hs inner product matches the trace formula") {
    auto p = random_probe_set(3, 2, 141);
    cxd direct = (p[0].adjoint() * p[1]).trace();
    CHECK(std::abs(hs_inner(p[0], p[1]) - direct) < 1e-13);
}
