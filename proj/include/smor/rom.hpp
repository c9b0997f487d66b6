#pragma once

// Reduced-order models of the form ẏ = K·y + b + N(y).
//
// Symplectic ROMs carry the reduced structure J_r and the gradient data of the
// reduced Hamiltonian, K = J_r·L_r, b = J_r·c_r, N(y) = J_r·G_n(y). POD ROMs
// are Galerkin projections in the X inner product and carry no structure.

#include <Eigen/LU>

#include <memory>
#include <optional>
#include <vector>

#include "smor/greedy.hpp"
#include "smor/integrators.hpp"
#include "smor/model.hpp"

namespace smor {

enum class RomKind { symplectic, pod };

/// none: linear model. exact: N(y) uses the full ∇f(D y).
/// symplectic_deim: sampled with U = X·J^T·B·J_std(2k), which keeps J_r in front.
/// deim_baseline: sampled with a POD basis of the nonlinear snapshots.
enum class NonlinearPath { none, exact, symplectic_deim, deim_baseline };

/// Online operation counts. full_dim_ops counts evaluations touching a
/// full-dimension vector.
struct OpCounters {
    std::size_t rhs_calls = 0;
    std::size_t stencil_evals = 0;
    std::size_t full_dim_ops = 0;
};

class ReducedModel {
public:
    RomKind kind = RomKind::symplectic;
    NonlinearPath path = NonlinearPath::none;

    Matrix decoder;  // D: z ≈ D·y
    Matrix J_r;      // symplectic only
    Matrix L_r;
    Vector c_r;
    double h_offset = 0.0;
    Matrix K;
    Vector b;
    Vector y0;

    /// N(y) = lift·s(y), s(y) = ∇f(D y) (exact) or P^T ∇f(D y) (DEIM).
    Matrix lift;
    /// Symplectic only: G_n(y) = grad_lift·s(y), lift = J_r·grad_lift.
    Matrix grad_lift;

    std::shared_ptr<const LocalNonlinearity> f;
    std::vector<Index> deim_rows;
    std::vector<Index> stencil_offsets;  // size deim_rows + 1
    std::vector<Index> stencil_cols;
    Matrix stencil_decoder;  // decoder rows gathered per stencil entry

    mutable OpCounters counters;

    Index dim() const { return y0.size(); }
    bool symplectic() const { return kind == RomKind::symplectic; }
    bool has_nonlinear() const { return path != NonlinearPath::none; }
    bool uses_deim() const { return path == NonlinearPath::symplectic_deim || path == NonlinearPath::deim_baseline; }

    Vector decode(const Vector& y) const { return decoder * y; }

    /// s(y); the DEIM branch reads only the stencil rows of the decoder.
    Vector sample(const Vector& y) const {
        if (!uses_deim()) {
            ++counters.full_dim_ops;
            return f->gradient(decoder * y);
        }
        const Index m = static_cast<Index>(deim_rows.size());
        Vector s(m);
        for (Index i = 0; i < m; ++i) {
            const Index off = stencil_offsets[static_cast<std::size_t>(i)];
            const Index len = stencil_offsets[static_cast<std::size_t>(i) + 1] - off;
            const Vector local = stencil_decoder.middleRows(off, len) * y;
            s(i) = len > 0 ? f->entry(deim_rows[static_cast<std::size_t>(i)], local) : 0.0;
        }
        counters.stencil_evals += static_cast<std::size_t>(m);
        return s;
    }

    /// ds/dy
    Matrix sample_jacobian(const Vector& y) const {
        if (!uses_deim()) {
            const Vector z = decoder * y;
            Matrix ds = Matrix::Zero(z.size(), dim());
            for (Index i = 0; i < z.size(); ++i) {
                const auto st = f->stencil(i);
                if (st.empty()) continue;
                Vector local(static_cast<Index>(st.size()));
                for (std::size_t j = 0; j < st.size(); ++j) local(static_cast<Index>(j)) = z(st[j]);
                const Vector d = f->entry_derivative(i, local);
                for (std::size_t j = 0; j < st.size(); ++j) ds.row(i) += d(static_cast<Index>(j)) * decoder.row(st[j]);
            }
            return ds;
        }
        const Index m = static_cast<Index>(deim_rows.size());
        Matrix ds = Matrix::Zero(m, dim());
        for (Index i = 0; i < m; ++i) {
            const Index off = stencil_offsets[static_cast<std::size_t>(i)];
            const Index len = stencil_offsets[static_cast<std::size_t>(i) + 1] - off;
            if (len == 0) continue;
            const Vector local = stencil_decoder.middleRows(off, len) * y;
            const Vector d = f->entry_derivative(deim_rows[static_cast<std::size_t>(i)], local);
            ds.row(i) = d.transpose() * stencil_decoder.middleRows(off, len);
        }
        return ds;
    }

    Vector rhs(const Vector& y) const {
        ++counters.rhs_calls;
        Vector out = K * y + b;
        if (has_nonlinear()) out.noalias() += lift * sample(y);
        return out;
    }

    Matrix jacobian(const Vector& y) const {
        if (!has_nonlinear()) return K;
        return K + lift * sample_jacobian(y);
    }

    /// G(y) with ẏ = J_r·G(y).
    Vector gradient(const Vector& y) const {
        require(symplectic(), "gradient: POD ROM has no reduced Hamiltonian structure");
        Vector g = L_r * y + c_r;
        if (has_nonlinear()) g.noalias() += grad_lift * sample(y);
        return g;
    }

    Matrix gradient_jacobian(const Vector& y) const {
        require(symplectic(), "gradient: POD ROM has no reduced Hamiltonian structure");
        if (!has_nonlinear()) return L_r;
        return L_r + grad_lift * sample_jacobian(y);
    }

    /// 𝓗(y) = H(D y), with f evaluated exactly (diagnostic).
    double hamiltonian(const Vector& y) const {
        double h = 0.5 * y.dot(L_r * y) + c_r.dot(y) + h_offset;
        if (f && !f->is_zero()) h += f->value(decoder * y);
        return h;
    }
};

inline Vector decode(const ReducedModel& rom, const Vector& y) { return rom.decode(y); }
inline double reduced_hamiltonian(const ReducedModel& rom, const Vector& y) { return rom.hamiltonian(y); }

namespace detail {

inline void check_weight_match(const HamiltonianModel& model, const WeightMatrix& w) {
    require(w.size() == model.dim(), "ROM: basis dimension does not match model");
    if (w.is_identity()) return;
    require(!model.X.is_identity(), "ROM: basis weight does not match model weight");
    const Matrix& a = w.spd().matrix();
    const Matrix& b = model.X.spd().matrix();
    if ((a - b).norm() > 1e-12 * std::max(1.0, b.norm()))
        throw ContractError("ROM: basis weight does not match model weight");
}

inline void attach_stencils(ReducedModel& rom, const std::vector<Index>& rows) {
    rom.deim_rows = rows;
    rom.stencil_offsets.assign(1, 0);
    rom.stencil_cols.clear();
    for (Index r : rows) {
        for (Index c : rom.f->stencil(r)) rom.stencil_cols.push_back(c);
        rom.stencil_offsets.push_back(static_cast<Index>(rom.stencil_cols.size()));
    }
    rom.stencil_decoder.resize(static_cast<Index>(rom.stencil_cols.size()), rom.decoder.cols());
    for (std::size_t j = 0; j < rom.stencil_cols.size(); ++j)
        rom.stencil_decoder.row(static_cast<Index>(j)) = rom.decoder.row(rom.stencil_cols[j]);
}

inline Matrix skew_part(const Matrix& m) { return 0.5 * (m - m.transpose()); }
inline Matrix sym_part(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace detail

/// U = X·J_std^T·B·J_std(2k), the transpose of the symplectic inverse of A.
inline Matrix symplectic_deim_basis(const SymplecticBasis& basis) {
    return basis.weight().apply(apply_jstd_t(right_jstd(basis.B())));
}

/// J_r = U^T·J_std·U, y0 = J_std(2k)^T·B^T·J_std·X·z0, L_r = A^T L A, c_r = A^T c_b.
inline ReducedModel assemble_linear_rom(const HamiltonianModel& model, const SymplecticBasis& basis) {
    detail::check_weight_match(model, basis.weight());
    ReducedModel rom;
    rom.kind = RomKind::symplectic;
    rom.path = NonlinearPath::none;
    const Matrix& a = basis.A();
    rom.decoder = a;
    const Matrix u = symplectic_deim_basis(basis);
    rom.J_r = detail::skew_part(u.transpose() * apply_jstd(u));
    rom.L_r = detail::sym_part(a.transpose() * model.L.matrix() * a);
    rom.c_r = a.transpose() * model.c_b;
    rom.h_offset = model.h_offset;
    rom.K = rom.J_r * rom.L_r;
    rom.b = rom.J_r * rom.c_r;
    rom.y0 = symplectic_coefficients(basis, model.z0);
    rom.f = model.f;
    return rom;
}

struct NonlinearRomOptions {
    NonlinearPath path = NonlinearPath::symplectic_deim;
    Matrix deim_basis;  // deim_baseline: U (2n x r) from the nonlinear snapshots
};

/// Symplectic ROM with the nonlinear term. For symplectic_deim the indices are
/// selected on U = X·J^T·B·J_std(2k) (one per column of U), and
/// G_n(y) = (P^T U)^{-1}·P^T·∇f(A y).
inline ReducedModel assemble_nonlinear_rom(const HamiltonianModel& model, const SymplecticBasis& basis,
                                           const NonlinearRomOptions& opt = {}) {
    ReducedModel rom = assemble_linear_rom(model, basis);
    if (model.f->is_zero()) return rom;
    rom.path = opt.path;
    switch (opt.path) {
        case NonlinearPath::none: return rom;
        case NonlinearPath::exact: rom.grad_lift = basis.A().transpose(); break;
        case NonlinearPath::symplectic_deim: {
            const DeimOperator d = deim_select(symplectic_deim_basis(basis));
            rom.grad_lift = d.interpolation();
            detail::attach_stencils(rom, d.indices());
            break;
        }
        case NonlinearPath::deim_baseline: {
            require(opt.deim_basis.rows() == model.dim() && opt.deim_basis.cols() > 0,
                    "assemble_nonlinear_rom: deim_baseline needs a nonlinear basis");
            const DeimOperator d = deim_select(opt.deim_basis);
            rom.grad_lift = basis.A().transpose() * d.U() * d.interpolation();
            detail::attach_stencils(rom, d.indices());
            break;
        }
    }
    rom.lift = rom.J_r * rom.grad_lift;
    return rom;
}

/// Galerkin POD ROM: ẏ = V^T X F(V y), y0 = V^T X z0, optionally with DEIM on
/// a nonlinear basis U: ∇f ≈ U (P^T U)^{-1} P^T ∇f.
inline ReducedModel assemble_pod_rom(const HamiltonianModel& model, const PodBasis& v,
                                     const std::optional<Matrix>& deim_basis = std::nullopt) {
    require(v.V.rows() == model.dim(), "assemble_pod_rom: dimension mismatch");
    ReducedModel rom;
    rom.kind = RomKind::pod;
    rom.decoder = v.V;
    const Matrix vtx = model.X.apply(v.V).transpose();  // V^T X
    const Matrix proj = apply_jstd_t(Matrix(vtx.transpose())).transpose();  // V^T X J_std
    rom.K = proj * model.L.matrix() * v.V;
    rom.b = proj * model.c_b;
    rom.L_r = detail::sym_part(v.V.transpose() * model.L.matrix() * v.V);
    rom.c_r = v.V.transpose() * model.c_b;
    rom.h_offset = model.h_offset;
    rom.y0 = vtx * model.z0;
    rom.f = model.f;
    if (model.f->is_zero()) return rom;
    if (deim_basis) {
        const DeimOperator d = deim_select(*deim_basis);
        rom.path = NonlinearPath::deim_baseline;
        rom.lift = proj * d.U() * d.interpolation();
        detail::attach_stencils(rom, d.indices());
    } else {
        rom.path = NonlinearPath::exact;
        rom.lift = proj;
    }
    return rom;
}

/// Integrates a ROM. Midpoint acts on y directly; Störmer-Verlet runs in
/// ỹ = T^{-1} y with J_r = T·J_std·T^T and maps the states back.
inline Trajectory run_rom(const ReducedModel& rom, const IntegratorConfig& cfg) {
    if (cfg.scheme == Scheme::implicit_midpoint) {
        OdeSystem sys;
        sys.dim = rom.dim();
        sys.rhs = [&rom](const Vector& y) { return rom.rhs(y); };
        if (rom.has_nonlinear()) {
            sys.jacobian = [&rom](const Vector& y) { return rom.jacobian(y); };
        }
        sys.linear_part = rom.K;
        sys.hamiltonian = [&rom](const Vector& y) { return rom.hamiltonian(y); };
        return implicit_midpoint_run(sys, rom.y0, cfg);
    }
    require(rom.symplectic(), "run_rom: Stormer-Verlet needs a symplectic ROM");
    const SymplecticFactorization fac = factor_structure(rom.J_r);
    const Matrix& t = fac.T;
    const Eigen::PartialPivLU<Matrix> tlu(t);
    CanonicalSystem sys;
    sys.half = rom.dim() / 2;
    sys.gradient = [&rom, &t](const Vector& yt) -> Vector { return t.transpose() * rom.gradient(t * yt); };
    if (rom.has_nonlinear())
        sys.hessian = [&rom, &t](const Vector& yt) -> Matrix {
            return t.transpose() * rom.gradient_jacobian(t * yt) * t;
        };
    sys.linear_hessian = Matrix(t.transpose() * rom.L_r * t);
    sys.hamiltonian = [&rom, &t](const Vector& yt) { return rom.hamiltonian(t * yt); };
    Trajectory tr = stormer_verlet_run(sys, tlu.solve(rom.y0), cfg);
    tr.states.states = t * tr.states.states;
    return tr;
}

}  // namespace smor
