#include "nzlab/linalg.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace nzlab {

double hermiticity_defect(const OperatorMatrix& A) {
    return (A - A.adjoint()).norm();
}

void require_square(const OperatorMatrix& A, const char* who) {
    if (A.rows() != A.cols()) {
        std::ostringstream os;
        os << who << ": matrix is " << A.rows() << "x" << A.cols() << ", expected square";
        throw DimensionError(os.str());
    }
}

void require_hermitian(const OperatorMatrix& A, double tol, const char* who) {
    require_square(A, who);
    double defect = hermiticity_defect(A);
    if (defect > tol) {
        std::ostringstream os;
        os << who << ": matrix not Hermitian, defect " << defect << " exceeds " << tol;
        throw ValidationError(os.str());
    }
}

OperatorMatrix tensor(const OperatorMatrix& A, const OperatorMatrix& B) {
    const Eigen::Index ra = A.rows(), ca = A.cols(), rb = B.rows(), cb = B.cols();
    OperatorMatrix out(ra * rb, ca * cb);
    for (Eigen::Index i = 0; i < ra; ++i)
        for (Eigen::Index j = 0; j < ca; ++j)
            out.block(i * rb, j * cb, rb, cb) = A(i, j) * B;
    return out;
}

OperatorMatrix partial_trace_bath(const OperatorMatrix& X, int dim_s, int dim_b) {
    require_square(X, "partial_trace_bath");
    if (dim_s <= 0 || dim_b <= 0 || X.rows() != Eigen::Index(dim_s) * dim_b) {
        std::ostringstream os;
        os << "partial_trace_bath: operand dim " << X.rows() << " is not " << dim_s << "*" << dim_b;
        throw DimensionError(os.str());
    }
    OperatorMatrix out = OperatorMatrix::Zero(dim_s, dim_s);
    for (int i = 0; i < dim_s; ++i)
        for (int j = 0; j < dim_s; ++j)
            for (int mu = 0; mu < dim_b; ++mu)
                out(i, j) += X(i * dim_b + mu, j * dim_b + mu);
    return out;
}

Vec vectorize(const OperatorMatrix& X) {
    return Eigen::Map<const Vec>(X.data(), X.size());
}

OperatorMatrix devectorize(const Vec& v) {
    const auto n = v.size();
    const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(double(n))));
    if (d * d != n)
        throw DimensionError("devectorize: length " + std::to_string(n) + " is not a perfect square");
    return devectorize(v, int(d), int(d));
}

OperatorMatrix devectorize(const Vec& v, int rows, int cols) {
    if (v.size() != Eigen::Index(rows) * cols)
        throw DimensionError("devectorize: length does not match requested shape");
    return Eigen::Map<const OperatorMatrix>(v.data(), rows, cols);
}

OperatorMatrix evolve_unitary(const OperatorMatrix& H, const OperatorMatrix& rho, double t) {
    require_hermitian(H, 1e-9 * std::max(1.0, H.norm()), "evolve_unitary");
    if (rho.rows() != H.rows() || rho.cols() != H.cols())
        throw DimensionError("evolve_unitary: state and Hamiltonian dimensions differ");
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> es(H);
    const Eigen::VectorXd& E = es.eigenvalues();
    const OperatorMatrix& V = es.eigenvectors();
    Vec phases(E.size());
    for (Eigen::Index k = 0; k < E.size(); ++k)
        phases(k) = std::exp(cxd(0.0, -E(k) * t));
    OperatorMatrix U = V * phases.asDiagonal() * V.adjoint();
    return U * rho * U.adjoint();
}

double trace_distance(const OperatorMatrix& rho, const OperatorMatrix& sigma) {
    require_square(rho, "trace_distance");
    if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols())
        throw DimensionError("trace_distance: operand dimensions differ");
    Eigen::JacobiSVD<OperatorMatrix> svd(rho - sigma);
    return 0.5 * svd.singularValues().sum();
}

double hs_norm(const OperatorMatrix& X) {
    return X.norm();
}

cxd hs_inner(const OperatorMatrix& A, const OperatorMatrix& B) {
    return (A.adjoint() * B).trace();
}

Superoperator::Superoperator(int hilbert_dim, std::function<OperatorMatrix(const OperatorMatrix&)> action)
    : dim_(hilbert_dim), action_(std::move(action)) {
    if (hilbert_dim <= 0 || hilbert_dim > kDimCap)
        throw DimensionError("Superoperator: Hilbert dimension " + std::to_string(hilbert_dim) +
                             " outside (0, " + std::to_string(kDimCap) + "]");
}

OperatorMatrix Superoperator::operator()(const OperatorMatrix& X) const {
    if (!action_)
        throw ValidationError("Superoperator: empty (default-constructed) map applied");
    if (X.rows() != dim_ || X.cols() != dim_)
        throw DimensionError("Superoperator: operand is " + std::to_string(X.rows()) + "x" +
                             std::to_string(X.cols()) + ", map acts on dimension " + std::to_string(dim_));
    return action_(X);
}

OperatorMatrix Superoperator::dense() const {
    if (dim_ > kDenseSuperCap)
        throw DimensionError("Superoperator::dense: dimension " + std::to_string(dim_) +
                             " exceeds dense cap " + std::to_string(kDenseSuperCap));
    const int D = dim_;
    OperatorMatrix M(D * D, D * D);
    OperatorMatrix E = OperatorMatrix::Zero(D, D);
    for (int col = 0; col < D * D; ++col) {
        E(col % D, col / D) = 1.0;
        M.col(col) = vectorize((*this)(E));
        E(col % D, col / D) = 0.0;
    }
    return M;
}

Superoperator Superoperator::from_dense(int hilbert_dim, OperatorMatrix M) {
    if (M.rows() != Eigen::Index(hilbert_dim) * hilbert_dim || M.rows() != M.cols())
        throw DimensionError("Superoperator::from_dense: matrix shape does not match dimension");
    auto mat = std::make_shared<OperatorMatrix>(std::move(M));
    return Superoperator(hilbert_dim, [mat, hilbert_dim](const OperatorMatrix& X) {
        return devectorize((*mat) * vectorize(X), hilbert_dim, hilbert_dim);
    });
}

Superoperator Superoperator::identity(int hilbert_dim) {
    return Superoperator(hilbert_dim, [](const OperatorMatrix& X) { return X; });
}

Superoperator Superoperator::zero(int hilbert_dim) {
    return Superoperator(hilbert_dim, [](const OperatorMatrix& X) {
        return OperatorMatrix::Zero(X.rows(), X.cols()).eval();
    });
}

Superoperator compose(const Superoperator& A, const Superoperator& B) {
    if (A.hilbert_dim() != B.hilbert_dim())
        throw DimensionError("compose: superoperator dimensions differ");
    return Superoperator(A.hilbert_dim(), [A, B](const OperatorMatrix& X) { return A(B(X)); });
}

Superoperator add(const Superoperator& A, const Superoperator& B) {
    if (A.hilbert_dim() != B.hilbert_dim())
        throw DimensionError("add: superoperator dimensions differ");
    return Superoperator(A.hilbert_dim(), [A, B](const OperatorMatrix& X) {
        return (A(X) + B(X)).eval();
    });
}

Superoperator scale(cxd c, const Superoperator& A) {
    return Superoperator(A.hilbert_dim(), [c, A](const OperatorMatrix& X) {
        return (c * A(X)).eval();
    });
}

std::vector<OperatorMatrix> random_probe_set(int dim, int count, std::uint64_t seed) {
    if (dim <= 0 || dim > kDimCap)
        throw DimensionError("random_probe_set: dimension outside cap");
    if (count < 0)
        throw ValidationError("random_probe_set: negative count");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<OperatorMatrix> probes;
    probes.reserve(count);
    for (int p = 0; p < count; ++p) {
        OperatorMatrix X(dim, dim);
        for (int j = 0; j < dim; ++j)
            for (int i = 0; i < dim; ++i)
                X(i, j) = cxd(g(rng), g(rng));
        X /= X.norm();
        probes.push_back(std::move(X));
    }
    return probes;
}

}  // namespace nzlab
