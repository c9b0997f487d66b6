#pragma once

// Symplectic structure: the standard matrix J_std = [[0, I], [-I, 0]] applied
// as a row/column permutation, weighted structures, symplectic inverses,
// symplectic Gram-Schmidt and the factorization J = T·J_std·T^T.

#include <vector>

#include "smor/linalg.hpp"
#include "smor/weight.hpp"

namespace smor {

/// J_std·M for M with an even number of rows: [top; bottom] -> [bottom; -top].
template <typename Derived>
Matrix apply_jstd(const Eigen::MatrixBase<Derived>& m) {
    require(m.rows() % 2 == 0, "apply_jstd: odd row count");
    const Index h = m.rows() / 2;
    Matrix out(m.rows(), m.cols());
    out.topRows(h) = m.bottomRows(h);
    out.bottomRows(h) = -m.topRows(h);
    return out;
}

/// J_std^T·M: [top; bottom] -> [-bottom; top].
template <typename Derived>
Matrix apply_jstd_t(const Eigen::MatrixBase<Derived>& m) {
    require(m.rows() % 2 == 0, "apply_jstd_t: odd row count");
    const Index h = m.rows() / 2;
    Matrix out(m.rows(), m.cols());
    out.topRows(h) = -m.bottomRows(h);
    out.bottomRows(h) = m.topRows(h);
    return out;
}

/// M·J_std(2k): [C1 | C2] -> [-C2 | C1].
template <typename Derived>
Matrix right_jstd(const Eigen::MatrixBase<Derived>& m) {
    require(m.cols() % 2 == 0, "right_jstd: odd column count");
    const Index h = m.cols() / 2;
    Matrix out(m.rows(), m.cols());
    out.leftCols(h) = -m.rightCols(h);
    out.rightCols(h) = m.leftCols(h);
    return out;
}

inline Matrix jstd_matrix(Index half) {
    Matrix j = Matrix::Zero(2 * half, 2 * half);
    j.topRightCorner(half, half).setIdentity();
    j.bottomLeftCorner(half, half) = -Matrix::Identity(half, half);
    return j;
}

/// Skew form on R^{2n} given by W·J_std·W with W in {I, X, X^{-1}}.
///
/// weighted(X) is the form seen by a working basis A when Ã = X^{1/2}·A is
/// measured against J_2n = X^{1/2}·J_std·X^{1/2}: Ã^T J_2n Ã = (XA)^T J_std (XA).
/// No square root is ever formed.
class Structure {
public:
    enum class Kind { standard, weighted, inverse_weighted };

    static Structure standard() { return Structure(Kind::standard, {}); }
    static Structure weighted(WeightMatrix x) { return Structure(Kind::weighted, std::move(x)); }
    static Structure inverse_weighted(WeightMatrix x) {
        return Structure(Kind::inverse_weighted, std::move(x));
    }

    Kind kind() const { return kind_; }

    /// W·v
    Matrix weigh(const Matrix& v) const {
        switch (kind_) {
            case Kind::weighted: return x_.apply(v);
            case Kind::inverse_weighted: return x_.solve(v);
            default: return v;
        }
    }

    /// (W·J_std·W)·v
    Matrix apply(const Matrix& v) const { return weigh(apply_jstd(weigh(v))); }

    /// Ω(x, y) = x^T·W·J_std·W·y
    double form(const Vector& x, const Vector& y) const {
        return weigh(x).col(0).dot(apply_jstd(weigh(y)).col(0));
    }

private:
    Structure(Kind k, WeightMatrix x) : kind_(k), x_(std::move(x)) {}
    Kind kind_;
    WeightMatrix x_;
};

/// A^+ = J_std(2k)^T·A^T·(W J_std W), materialized (2k x 2n).
inline Matrix symplectic_inverse(const Matrix& a, const Structure& s) {
    require(a.cols() % 2 == 0, "symplectic_inverse: odd column count");
    require(a.rows() % 2 == 0 && a.cols() <= a.rows(), "symplectic_inverse: bad shape");
    // A^T·W J W = (W J^T W A)^T
    const Matrix m = s.weigh(apply_jstd_t(s.weigh(a)));
    return apply_jstd_t(Matrix(m.transpose()));
}

/// A^+ applied as a sequence of products, without materializing the 2k x 2n matrix.
class SymplecticInverseOp {
public:
    SymplecticInverseOp(Matrix a, Structure s) : a_(std::move(a)), s_(std::move(s)) {
        require(a_.cols() % 2 == 0, "symplectic_inverse: odd column count");
    }

    Matrix operator()(const Matrix& z) const {
        return apply_jstd_t(Matrix(a_.transpose() * s_.apply(z)));
    }

    static constexpr Index materialize_threshold = 4096;

    Matrix materialize() const {
        require(a_.rows() <= materialize_threshold, "symplectic inverse too large to materialize");
        return symplectic_inverse(a_, s_);
    }

private:
    Matrix a_;
    Structure s_;
};

struct SymplecticCheck {
    bool ok = false;
    double defect = 0.0;
};

/// defect = ||A^T·(W J W)·A - J_std(2k)||_F
inline SymplecticCheck check_symplectic(const Matrix& a, const Structure& s, double tol) {
    require(a.cols() % 2 == 0, "check_symplectic: odd column count");
    const Matrix wa = s.weigh(a);
    const Matrix g = wa.transpose() * apply_jstd(wa);
    const double d = (g - jstd_matrix(a.cols() / 2)).norm();
    return {d <= tol, d};
}

struct GsInsert {
    bool degenerate = true;
    Vector e;       // unit vector, J_std-orthogonal to colspan(B)
    Vector coeffs;  // α with ẑ = w + B·α
    double residual_norm = 0.0;
};

inline double& deflation_tolerance() {
    static double tol = 1e-10;
    return tol;
}

/// Symplectic Gram-Schmidt of w against a J_std-symplectic orthonormal B.
/// α = J_std(2k)·B^T·J_std·w, i.e. α_i = -Ω(w, J^T ê_i) for i <= k and
/// α_i = Ω(w, ê_i) for i > k. A second pass removes rounding drift.
inline GsInsert symplectic_gs_insert(const Matrix& b, const Vector& w,
                                     double rel_tol = deflation_tolerance()) {
    require(b.rows() == w.size(), "symplectic_gs_insert: dimension mismatch");
    require(b.cols() % 2 == 0, "symplectic_gs_insert: odd column count");
    GsInsert out;
    out.coeffs = Vector::Zero(b.cols());
    const double wn = w.norm();
    if (!(wn > 0.0)) return out;

    Vector z = w;
    if (b.cols() > 0) {
        for (int pass = 0; pass < 2; ++pass) {
            const Vector a = apply_jstd(Matrix(b.transpose() * apply_jstd(z))).col(0);
            z += b * a;
            out.coeffs += a;
        }
    }
    out.residual_norm = z.norm();
    if (out.residual_norm <= rel_tol * wn) return out;
    out.degenerate = false;
    out.e = z / out.residual_norm;
    return out;
}

/// [E | J^T E] -> [E e | J^T E  J^T e]
inline Matrix append_symplectic_pair(const Matrix& b, const Vector& e) {
    require(b.cols() % 2 == 0 && (b.cols() == 0 || b.rows() == e.size()),
            "append_symplectic_pair: shape");
    const Index k = b.cols() / 2;
    Matrix out(e.size(), 2 * k + 2);
    out.leftCols(k) = b.leftCols(k);
    out.col(k) = e;
    out.block(0, k + 1, e.size(), k) = b.rightCols(k);
    out.col(2 * k + 1) = apply_jstd_t(e);
    return out;
}

/// J_2k = T·J_std·T^T.
struct SymplecticFactorization {
    Matrix T;
    Matrix J;
};

/// Skew-symmetric elimination with complete pivoting: repeatedly take the
/// largest |W_ab| (a < b, lowest index on ties), split off the rank-2 part
/// (c_a c_b^T - c_b c_a^T)/W_ab and store the scaled pair as columns of T.
inline SymplecticFactorization factor_structure(const Matrix& j, double rel_tol = 1e-12) {
    require(j.rows() == j.cols() && j.rows() % 2 == 0, "factor_structure: need even square matrix");
    require_finite(j, "factor_structure input");
    const double scale = j.size() ? j.cwiseAbs().maxCoeff() : 0.0;
    require(j.size() == 0 || (j + j.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
            "factor_structure: matrix is not skew-symmetric");
    const Index m = j.rows();
    const Index k = m / 2;
    Matrix w = j;
    Matrix t(m, m);
    for (Index step = 0; step < k; ++step) {
        Index pa = 0, pb = 0;
        double best = -1.0;
        for (Index a = 0; a < m; ++a)
            for (Index b = a + 1; b < m; ++b)
                if (std::abs(w(a, b)) > best) {
                    best = std::abs(w(a, b));
                    pa = a;
                    pb = b;
                }
        if (!(best > rel_tol * scale))
            throw NumericalError("factor_structure: singular structure matrix (pivot " +
                                 std::to_string(best) + ")");
        const double piv = w(pa, pb);
        const Vector ca = w.col(pa);
        const Vector cb = w.col(pb);
        const double s = std::sqrt(std::abs(piv));
        t.col(step) = ca / s;
        t.col(k + step) = cb * ((piv > 0 ? 1.0 : -1.0) / s);
        w -= (ca * cb.transpose() - cb * ca.transpose()) / piv;
        w.row(pa).setZero();
        w.row(pb).setZero();
        w.col(pa).setZero();
        w.col(pb).setZero();
    }
    return {std::move(t), j};
}

/// Working basis A (z ≈ A·y) paired with B = X·A, where B is J_std-symplectic
/// and orthonormal. Built by greedy enrichment; immutable.
class SymplecticBasis {
public:
    SymplecticBasis() = default;

    /// Recovers A by solving X·A = B.
    SymplecticBasis(Matrix b, WeightMatrix x) : b_(std::move(b)), x_(std::move(x)) {
        require(b_.cols() % 2 == 0, "SymplecticBasis: odd column count");
        require(b_.rows() == x_.size(), "SymplecticBasis: weight dimension mismatch");
        a_ = x_.solve(b_);
    }

    const Matrix& A() const { return a_; }
    const Matrix& B() const { return b_; }
    const WeightMatrix& weight() const { return x_; }
    Index k() const { return b_.cols() / 2; }
    Index dim() const { return b_.rows(); }

    Structure structure() const { return Structure::weighted(x_); }

    /// A^+ = J_std(2k)^T A^T X J_std X, as an operator.
    SymplecticInverseOp inverse_op() const { return SymplecticInverseOp(a_, structure()); }

    struct Defects {
        double symplectic;   // ||B^T J B - J||_F
        double orthonormal;  // ||B^T B - I||_F  (= ||Ã^T X Ã - I||_F with Ã = X^{1/2} A)
        double consistency;  // ||X A - B||_F / max(1, ||B||_F)
    };

    Defects defects() const {
        const Index m = b_.cols();
        Defects d;
        d.symplectic = (b_.transpose() * apply_jstd(b_) - jstd_matrix(m / 2)).norm();
        d.orthonormal = (b_.transpose() * b_ - Matrix::Identity(m, m)).norm();
        d.consistency = (x_.apply(a_) - b_).norm() / std::max(1.0, b_.norm());
        return d;
    }

private:
    Matrix a_;
    Matrix b_;
    WeightMatrix x_;
};

}  // namespace smor
