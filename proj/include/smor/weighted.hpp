#pragma once

#include <vector>

#include "smor/symplectic.hpp"
#include "smor/weight.hpp"

namespace smor {

/// Snapshot columns with their time stamps.
struct SnapshotSet {
    Matrix states;              // one column per snapshot
    std::vector<double> times;  // same length as states.cols()

    Index count() const { return states.cols(); }
    Index dim() const { return states.rows(); }
};

inline double x_inner(const Vector& x, const Vector& y, const WeightMatrix& w) { return w.inner(x, y); }

/// V with V^T X V = I_k, plus the retained Gramian eigenvalues.
struct PodBasis {
    Matrix V;
    Vector values;
};

inline double& pod_rank_cutoff() {
    static double cutoff = 1e-12;  // λ < cutoff·λ_1 counts as zero
    return cutoff;
}

/// Weighted POD by the method of snapshots: eigenpairs (Λ, W) of the Gramian
/// G = S^T X S give V = S·W·Λ^{-1/2}. No square root of X is formed. When
/// V^T X V deviates from I (eigenpairs near the cutoff), V is re-orthonormalized
/// in the X inner product by Cholesky QR.
inline PodBasis weighted_pod(const Matrix& s, const WeightMatrix& x, Index k, double cutoff = pod_rank_cutoff()) {
    require(s.rows() == x.size(), "weighted_pod: dimension mismatch");
    require(k >= 0 && k <= s.cols(), "weighted_pod: k exceeds snapshot count");
    const Matrix xs = x.apply(s);
    Matrix g = s.transpose() * xs;
    g = (0.5 * (g + g.transpose())).eval();
    const EigResult e = sym_eig(g);
    if (k > 0) {
        const double lead = e.values(0);
        if (!(lead > 0.0) || !(e.values(k - 1) > 0.0) || e.values(k - 1) < cutoff * lead)
            throw NumericalError("weighted_pod: k = " + std::to_string(k) +
                                 " exceeds the numerical rank of the snapshots");
    }
    PodBasis out;
    out.values = e.values.head(k);
    out.V = s * e.vectors.leftCols(k) * out.values.cwiseSqrt().cwiseInverse().asDiagonal();
    for (int pass = 0; pass < 2 && k > 0; ++pass) {
        Matrix gram = out.V.transpose() * x.apply(out.V);
        gram = (0.5 * (gram + gram.transpose())).eval();
        if ((gram - Matrix::Identity(k, k)).norm() <= 1e-13) break;
        const Eigen::LLT<Matrix> llt(gram);
        if (llt.info() != Eigen::Success)
            throw NumericalError("weighted_pod: basis lost X-orthogonality beyond repair at k = " + std::to_string(k));
        out.V = llt.matrixU().solve<Eigen::OnTheRight>(out.V);
    }
    return out;
}

/// P_{X,V}(z) = V·V^T·X·z
inline Vector weighted_projection(const PodBasis& v, const WeightMatrix& x, const Vector& z) {
    return v.V * (v.V.transpose() * x.apply(z));
}

/// Coefficients y = J_std(2k)^T A^T X J_std X z of the weighted symplectic
/// projection, evaluated as J_std(2k)^T·B^T·J_std·(X z).
inline Vector symplectic_coefficients(const SymplecticBasis& basis, const Vector& z) {
    const Matrix xz = basis.weight().apply(z);
    return apply_jstd_t(Matrix(basis.B().transpose() * apply_jstd(xz))).col(0);
}

/// P(z) = A·J_std(2k)^T·A^T·X·J_std·X·z
inline Vector weighted_symplectic_projection(const SymplecticBasis& basis, const Vector& z) {
    return basis.A() * symplectic_coefficients(basis, z);
}

}  // namespace smor
