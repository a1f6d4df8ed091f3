#pragma once

// Dense complex linear algebra shared by every module: tensor products,
// partial traces, vectorization, unitary evolution, trace distance, and a
// thin matrix-free superoperator wrapper.

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "nzlab/errors.hpp"

namespace nzlab {

using cxd = std::complex<double>;
using OperatorMatrix = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

// Hard caps keeping every run at desk scale. Matrix-free paths go up to
// kDimCap; anything that materializes a D^2 x D^2 superoperator stops at
// kDenseSuperCap.
inline constexpr int kDimCap = 256;
inline constexpr int kDenseSuperCap = 64;

double hermiticity_defect(const OperatorMatrix& A);
void require_square(const OperatorMatrix& A, const char* who);
void require_hermitian(const OperatorMatrix& A, double tol, const char* who);

// Kronecker product, row-major index convention: (A (x) B)[i*rB+k, j*cB+l].
OperatorMatrix tensor(const OperatorMatrix& A, const OperatorMatrix& B);

// tr_B over the second tensor factor: out[i,j] = sum_mu X[i*dB+mu, j*dB+mu].
OperatorMatrix partial_trace_bath(const OperatorMatrix& X, int dim_s, int dim_b);

// Column-major stacking; mutually inverse, Hilbert-Schmidt isometric.
Vec vectorize(const OperatorMatrix& X);
OperatorMatrix devectorize(const Vec& v);
OperatorMatrix devectorize(const Vec& v, int rows, int cols);

// e^{-iHt} rho e^{+iHt} through one eigendecomposition of H.
OperatorMatrix evolve_unitary(const OperatorMatrix& H, const OperatorMatrix& rho, double t);

// (1/2)||rho - sigma||_1 via singular values.
double trace_distance(const OperatorMatrix& rho, const OperatorMatrix& sigma);

double hs_norm(const OperatorMatrix& X);
cxd hs_inner(const OperatorMatrix& A, const OperatorMatrix& B);

// A linear map on D x D operators, stored as a closure. dense() lays it out
// as a D^2 x D^2 matrix in the column-major vec convention, which is only
// allowed up to kDenseSuperCap.
class Superoperator {
  public:
    Superoperator() = default;
    Superoperator(int hilbert_dim, std::function<OperatorMatrix(const OperatorMatrix&)> action);

    int hilbert_dim() const { return dim_; }
    OperatorMatrix operator()(const OperatorMatrix& X) const;
    OperatorMatrix dense() const;

    static Superoperator from_dense(int hilbert_dim, OperatorMatrix M);
    static Superoperator identity(int hilbert_dim);
    static Superoperator zero(int hilbert_dim);

  private:
    int dim_ = 0;
    std::function<OperatorMatrix(const OperatorMatrix&)> action_;
};

Superoperator compose(const Superoperator& A, const Superoperator& B);  // A after B
Superoperator add(const Superoperator& A, const Superoperator& B);
Superoperator scale(cxd c, const Superoperator& A);

// Deterministic complex Gaussian test operators, unit Hilbert-Schmidt norm.
std::vector<OperatorMatrix> random_probe_set(int dim, int count, std::uint64_t seed);

}  // namespace nzlab
