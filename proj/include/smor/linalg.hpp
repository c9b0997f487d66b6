#pragma once

// Dense linear-algebra kernel. All matrices are Eigen column-major doubles;
// contracts are stated as residual bounds, checked by the test suite.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "smor/errors.hpp"

namespace smor {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct LinalgTolerances {
    double symmetry = 1e-12;   // relative, max-norm
    double residual = 1e-10;
};

inline LinalgTolerances& linalg_tolerances() {
    static LinalgTolerances tol;
    return tol;
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

/// Throws ContractError when `m` contains NaN or Inf.
template <typename Derived>
const Derived& require_finite(const Eigen::MatrixBase<Derived>& m, const char* what = "matrix") {
    if (!m.allFinite()) throw ContractError(std::string(what) + " has non-finite entries");
    return m.derived();
}

inline double symmetry_defect(const Matrix& m) {
    if (m.rows() != m.cols()) return INFINITY;
    const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
    return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

/// Symmetric positive-definite matrix with a cached Cholesky factor.
/// Copies share the factor; the value is immutable after construction.
class SpdMatrix {
public:
    SpdMatrix() = default;

    explicit SpdMatrix(Matrix m, double sym_tol = linalg_tolerances().symmetry) {
        require(m.rows() == m.cols(), "SpdMatrix: matrix is not square");
        require_finite(m, "SpdMatrix");
        if (m.size() > 0 && symmetry_defect(m) > sym_tol)
            throw ContractError("SpdMatrix: symmetry defect " + std::to_string(symmetry_defect(m)));
        auto impl = std::make_shared<Impl>();
        impl->m = std::move(m);
        impl->llt.compute(impl->m);
        if (impl->llt.info() != Eigen::Success)
            throw FactorizationError("SpdMatrix: Cholesky failed (matrix not positive definite)");
        const auto d = impl->llt.matrixLLT().diagonal();
        if (d.size() > 0 && !(d.minCoeff() > 0.0))
            throw FactorizationError("SpdMatrix: non-positive Cholesky pivot");
        impl_ = std::move(impl);
    }

    static SpdMatrix identity(Index n) { return SpdMatrix(Matrix::Identity(n, n)); }

    Index size() const { return impl_ ? impl_->m.rows() : 0; }
    const Matrix& matrix() const { return impl_->m; }

    template <typename Derived>
    Matrix operator*(const Eigen::MatrixBase<Derived>& rhs) const {
        return impl_->m * rhs;
    }

    /// Solves M·x = rhs with the cached factor.
    template <typename Derived>
    Matrix solve(const Eigen::MatrixBase<Derived>& rhs) const {
        require(rhs.rows() == size(), "spd_solve: dimension mismatch");
        return impl_->llt.solve(rhs);
    }

    const Eigen::LLT<Matrix>& factor() const { return impl_->llt; }

private:
    struct Impl {
        Matrix m;
        Eigen::LLT<Matrix> llt;
    };
    std::shared_ptr<const Impl> impl_;
};

struct SvdResult {
    Matrix U;
    Vector sigma;  // nonincreasing
    Matrix V;
};

/// Thin SVD, M = U·diag(sigma)·V^T.
inline SvdResult svd(const Matrix& m) {
    require_finite(m, "svd input");
    SvdResult out;
    if (m.size() == 0) {
        out.U = Matrix(m.rows(), 0);
        out.V = Matrix(m.cols(), 0);
        return out;
    }
    if (std::min(m.rows(), m.cols()) <= 64) {
        Eigen::JacobiSVD<Matrix> s(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (s.info() != Eigen::Success) throw NumericalError("svd: no convergence");
        out.U = s.matrixU();
        out.sigma = s.singularValues();
        out.V = s.matrixV();
    } else {
        Eigen::BDCSVD<Matrix> s(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (s.info() != Eigen::Success) throw NumericalError("svd: no convergence");
        out.U = s.matrixU();
        out.sigma = s.singularValues();
        out.V = s.matrixV();
    }
    return out;
}

/// Singular values only.
inline Vector singular_values(const Matrix& m) {
    require_finite(m, "svd input");
    if (m.size() == 0) return Vector(0);
    Eigen::BDCSVD<Matrix> s(m);
    if (s.info() != Eigen::Success) throw NumericalError("svd: no convergence");
    return s.singularValues();
}

struct EigResult {
    Vector values;   // nonincreasing
    Matrix vectors;  // orthonormal columns, matching `values`
};

/// Eigen-decomposition of a symmetric matrix (eigenvalues sorted descending).
inline EigResult sym_eig(const Matrix& m, double sym_tol = linalg_tolerances().symmetry) {
    require(m.rows() == m.cols(), "sym_eig: matrix is not square");
    require_finite(m, "sym_eig input");
    if (m.size() > 0 && symmetry_defect(m) > sym_tol)
        throw ContractError("sym_eig: symmetry defect " + std::to_string(symmetry_defect(m)));
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success) throw NumericalError("sym_eig: no convergence");
    EigResult out;
    out.values = es.eigenvalues().reverse();
    out.vectors = es.eigenvectors().rowwise().reverse();
    return out;
}

inline EigResult sym_eig(const SpdMatrix& m) { return sym_eig(m.matrix()); }

inline Matrix spd_solve(const SpdMatrix& m, const Matrix& rhs) { return m.solve(rhs); }

/// Principal square root. Used only by test oracles: no library path forms X^{1/2}.
inline SpdMatrix spd_sqrt(const SpdMatrix& m) {
    const EigResult e = sym_eig(m);
    if (e.values.size() > 0 && !(e.values.minCoeff() > 0.0))
        throw FactorizationError("spd_sqrt: matrix not positive definite");
    Matrix r = e.vectors * e.values.cwiseSqrt().asDiagonal() * e.vectors.transpose();
    r = (0.5 * (r + r.transpose())).eval();
    return SpdMatrix(std::move(r));
}

}  // namespace smor
