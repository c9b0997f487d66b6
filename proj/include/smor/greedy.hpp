#pragma once

// Greedy symplectic basis generation. One engine serves the Euclidean and the
// weighted variants (X = I is the Euclidean case), so both select identical
// pivots on identical input. Projection errors are kept as residual columns
// and updated incrementally after each enrichment.

#include <Eigen/LU>

#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "smor/symplectic.hpp"
#include "smor/weighted.hpp"

namespace smor {

struct GreedyReport {
    std::vector<Index> selected;  // snapshot index per enrichment
    std::vector<double> errors;   // worst-case error after each enrichment
    Index k_initial = 0;
    Index k_final = 0;
    Index deflation_events = 0;
    std::string phase;  // "state" or "nonlinear"

    /// iteration,selected_index,error
    void write_csv(std::ostream& os, bool header = true) const {
        if (header) os << "iteration,selected_index,error\n";
        os.precision(17);
        for (std::size_t i = 0; i < selected.size(); ++i)
            os << i + 1 << ',' << selected[i] << ',' << errors[i] << '\n';
    }
};

struct GreedyOptions {
    double delta = 1e-6;
    Index k_max = std::numeric_limits<Index>::max();  // pairs in the final basis
    bool stop_on_deflation = false;                   // record and stop instead of throwing
};

namespace detail {

/// Residual bookkeeping for the projection z -> A·B^T·(metric·z), where
/// B = metric·A is orthosymplectic. With metric = X this is the weighted
/// symplectic projection; the error of column j is r_j^T·(X r_j).
class GreedyState {
public:
    GreedyState(const Matrix& z, const WeightMatrix& metric, Matrix b)
        : metric_(metric), b_(std::move(b)), r_(z), xr_(metric.apply(z)) {
        w_ = xr_;
        if (b_.cols() > 0) {
            const Matrix c = b_.transpose() * w_;
            r_.noalias() -= metric_.solve(b_) * c;
            xr_.noalias() -= b_ * c;
        }
    }

    const Matrix& B() const { return b_; }
    const Matrix& W() const { return w_; }

    double error(Index j) const { return std::sqrt(std::max(r_.col(j).dot(xr_.col(j)), 0.0)); }

    /// argmax error, lowest index on ties
    std::pair<Index, double> worst() const {
        Index arg = 0;
        double best = -1.0;
        for (Index j = 0; j < r_.cols(); ++j) {
            const double e = error(j);
            if (e > best) {
                best = e;
                arg = j;
            }
        }
        return {arg, best};
    }

    void append(const Vector& e) {
        const Vector f = apply_jstd_t(e).col(0);
        b_ = append_symplectic_pair(b_, e);
        const Matrix ae = metric_.solve(e);
        const Matrix af = metric_.solve(f);
        const Eigen::RowVectorXd ce = e.transpose() * w_;
        const Eigen::RowVectorXd cf = f.transpose() * w_;
        r_.noalias() -= ae * ce + af * cf;
        xr_.noalias() -= e * ce + f * cf;
    }

private:
    WeightMatrix metric_;
    Matrix b_;
    Matrix w_;
    Matrix r_;
    Matrix xr_;
};

/// Enrich `state` with the worst column until the error drops to delta or
/// k_max pairs are reached.
inline void greedy_loop(GreedyState& st, const GreedyOptions& opt, GreedyReport& rep) {
    while (st.B().cols() / 2 < opt.k_max) {
        const auto [j, err] = st.worst();
        if (st.W().cols() == 0 || err <= opt.delta) break;
        const GsInsert gs = symplectic_gs_insert(st.B(), st.W().col(j));
        if (gs.degenerate) {
            ++rep.deflation_events;
            if (opt.stop_on_deflation) break;
            throw StagnationError(static_cast<std::size_t>(j), err);
        }
        st.append(gs.e);
        rep.selected.push_back(j);
        rep.errors.push_back(st.worst().second);
    }
}

inline void check_greedy_input(const Matrix& z, const GreedyOptions& opt) {
    require(opt.delta > 0.0, "greedy: delta must be positive");
    require(opt.k_max >= 1, "greedy: k_max must be >= 1");
    require(z.cols() >= 1, "greedy: empty snapshot set");
    require(z.rows() % 2 == 0, "greedy: odd state dimension");
    require_finite(z, "greedy snapshots");
    if (!(z.col(0).norm() > 0.0)) throw ContractError("greedy: initial snapshot z(0) is zero");
}

}  // namespace detail

struct GreedyResult {
    SymplecticBasis basis;
    GreedyReport report;
};

/// Weighted greedy without X^{1/2}: B = X·A is built by symplectic
/// Gram-Schmidt on the weighted snapshots X·z; selection maximizes
/// ||z - P z||_X; A solves X·A = B. Column 0 of z is z(0).
inline GreedyResult greedy_symplectic_weighted(const Matrix& z, const WeightMatrix& x,
                                               const GreedyOptions& opt = {}) {
    detail::check_greedy_input(z, opt);
    require(x.size() == z.rows(), "greedy: weight dimension mismatch");
    GreedyResult out;
    out.report.phase = "state";
    detail::GreedyState st(z, x, Matrix(z.rows(), 0));
    const Vector w0 = st.W().col(0);
    st.append(w0 / w0.norm());
    out.report.selected.push_back(0);
    out.report.errors.push_back(st.worst().second);
    detail::greedy_loop(st, opt, out.report);
    out.report.k_final = st.B().cols() / 2;
    out.basis = SymplecticBasis(st.B(), x);
    return out;
}

inline GreedyResult greedy_symplectic_weighted(const SnapshotSet& s, const WeightMatrix& x,
                                               const GreedyOptions& opt = {}) {
    return greedy_symplectic_weighted(s.states, x, opt);
}

/// Enriches B = X·A so that colspan(B) captures X^{-1}·g for every nonlinear
/// snapshot g: residual ||X^{-1} g - B·A^T g||_2 <= delta, or until
/// max_pairs pairs have been added. B stays orthosymplectic, so its
/// symplectic inverse transpose equals B itself and the recovered basis is
/// (B_new, A_new = X^{-1} B_new).
inline GreedyResult greedy_nonlinear_basis(const SymplecticBasis& basis, const Matrix& g,
                                           const GreedyOptions& opt = {},
                                           Index max_pairs = std::numeric_limits<Index>::max()) {
    require(opt.delta > 0.0, "greedy_nonlinear_basis: delta must be positive");
    require(g.rows() == basis.dim(), "greedy_nonlinear_basis: dimension mismatch");
    require_finite(g, "nonlinear snapshots");
    GreedyResult out;
    out.report.phase = "nonlinear";
    out.report.k_initial = basis.k();
    const Matrix v = basis.weight().solve(g);
    detail::GreedyState st(v, WeightMatrix::identity(v.rows()), basis.B());
    GreedyOptions o = opt;
    const Index budget = max_pairs == std::numeric_limits<Index>::max() ? max_pairs : basis.k() + max_pairs;
    o.k_max = std::min(opt.k_max, budget);
    if (g.cols() > 0) detail::greedy_loop(st, o, out.report);
    out.report.k_final = st.B().cols() / 2;
    if (out.report.selected.empty()) {
        out.basis = basis;
    } else {
        out.basis = SymplecticBasis(st.B(), basis.weight());
    }
    return out;
}

/// Euclidean greedy: loop 1 on the state snapshots, loop 2 enriches the
/// basis with the nonlinear snapshots (X = I, where (A^+)^T = A).
inline GreedyResult greedy_symplectic_euclidean(const Matrix& z, const Matrix& g, const GreedyOptions& opt = {},
                                                Index max_nonlinear_pairs = 0) {
    GreedyResult r = greedy_symplectic_weighted(z, WeightMatrix::identity(z.rows()), opt);
    if (g.cols() == 0 || max_nonlinear_pairs == 0) return r;
    GreedyOptions o2 = opt;
    o2.k_max = std::numeric_limits<Index>::max();
    GreedyResult r2 = greedy_nonlinear_basis(r.basis, g, o2, max_nonlinear_pairs);
    r.report.deflation_events += r2.report.deflation_events;
    r.basis = std::move(r2.basis);
    r.report.k_final = r.basis.k();
    return r;
}

// ---------------------------------------------------------------------------
// DEIM

class DeimOperator {
public:
    DeimOperator() = default;
    DeimOperator(std::vector<Index> indices, Matrix u) : idx_(std::move(indices)), u_(std::move(u)) {
        require(static_cast<Index>(idx_.size()) == u_.cols(), "DeimOperator: index count must equal columns");
        Matrix ptu(u_.cols(), u_.cols());
        for (Index i = 0; i < u_.cols(); ++i) ptu.row(i) = u_.row(idx_[static_cast<std::size_t>(i)]);
        Eigen::FullPivLU<Matrix> lu(ptu);
        if (u_.cols() > 0 && !lu.isInvertible())
            throw NumericalError("DeimOperator: P^T U is singular");
        inv_ = u_.cols() > 0 ? Matrix(lu.inverse()) : Matrix(0, 0);
        require_finite(inv_, "DEIM interpolation matrix");
    }

    const std::vector<Index>& indices() const { return idx_; }
    const Matrix& U() const { return u_; }
    /// (P^T U)^{-1}
    const Matrix& interpolation() const { return inv_; }
    Index size() const { return u_.cols(); }

    /// U·(P^T U)^{-1}·P^T·v
    Vector approximate(const Vector& v) const {
        Vector pv(size());
        for (Index i = 0; i < size(); ++i) pv(i) = v(idx_[static_cast<std::size_t>(i)]);
        return u_ * (inv_ * pv);
    }

private:
    std::vector<Index> idx_;
    Matrix u_;
    Matrix inv_;
};

/// Residual-maximizing index selection (largest |entry|, lowest index on ties).
inline DeimOperator deim_select(const Matrix& u, double rank_tol = 1e-12) {
    require(u.cols() <= u.rows(), "deim_select: more columns than rows");
    require_finite(u, "deim_select input");
    std::vector<Index> idx;
    const double scale = u.size() ? u.cwiseAbs().maxCoeff() : 0.0;
    for (Index l = 0; l < u.cols(); ++l) {
        Vector res = u.col(l);
        if (l > 0) {
            Matrix pu(l, l);
            Vector pv(l);
            for (Index i = 0; i < l; ++i) {
                pu.row(i) = u.row(idx[static_cast<std::size_t>(i)]).head(l);
                pv(i) = u(idx[static_cast<std::size_t>(i)], l);
            }
            res -= u.leftCols(l) * pu.partialPivLu().solve(pv);
        }
        Index arg = 0;
        double best = -1.0;
        for (Index i = 0; i < res.size(); ++i)
            if (std::abs(res(i)) > best) {
                best = std::abs(res(i));
                arg = i;
            }
        if (!(best > rank_tol * scale))
            throw NumericalError("deim_select: rank deficiency at column " + std::to_string(l));
        idx.push_back(arg);
    }
    return DeimOperator(std::move(idx), u);
}

}  // namespace smor
