#pragma once

// Full-order Hamiltonian models in canonical form
//     ż = J_std·(L·z + ∇f(z) + c_b),   H(z) = ½ zᵀLz + f(z) + c_bᵀz + h0.

#include <Eigen/Sparse>

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "smor/symplectic.hpp"
#include "smor/weight.hpp"

namespace smor {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Nonlinear potential f whose gradient entries depend on a small stencil of z.
/// Entry i of ∇f only reads z at stencil(i); the online phase of a DEIM
/// reduced model relies on this.
class LocalNonlinearity {
public:
    virtual ~LocalNonlinearity() = default;

    virtual bool is_zero() const = 0;
    virtual double value(const Vector& z) const = 0;
    virtual Vector gradient(const Vector& z) const = 0;

    virtual std::vector<Index> stencil(Index i) const = 0;
    /// ∇f_i from the values of z at stencil(i).
    virtual double entry(Index i, const Vector& local) const = 0;
    /// d(∇f_i)/d(local)
    virtual Vector entry_derivative(Index i, const Vector& local) const = 0;

    Matrix hessian(const Vector& z) const {
        Matrix h = Matrix::Zero(z.size(), z.size());
        for (Index i = 0; i < z.size(); ++i) {
            const auto st = stencil(i);
            if (st.empty()) continue;
            Vector local(static_cast<Index>(st.size()));
            for (std::size_t j = 0; j < st.size(); ++j) local(j) = z(st[j]);
            const Vector d = entry_derivative(i, local);
            for (std::size_t j = 0; j < st.size(); ++j) h(i, st[j]) += d(j);
        }
        return h;
    }
};

class ZeroNonlinearity final : public LocalNonlinearity {
public:
    explicit ZeroNonlinearity(Index dim) : dim_(dim) {}
    bool is_zero() const override { return true; }
    double value(const Vector&) const override { return 0.0; }
    Vector gradient(const Vector&) const override { return Vector::Zero(dim_); }
    std::vector<Index> stencil(Index) const override { return {}; }
    double entry(Index, const Vector&) const override { return 0.0; }
    Vector entry_derivative(Index, const Vector&) const override { return Vector(0); }

private:
    Index dim_;
};

/// f(q, p) = Σ (1 - cos q_i); ∇f = (sin q; 0).
class SinePotential final : public LocalNonlinearity {
public:
    explicit SinePotential(Index n) : n_(n) {}
    bool is_zero() const override { return false; }
    double value(const Vector& z) const override {
        return (1.0 - z.head(n_).array().cos()).sum();
    }
    Vector gradient(const Vector& z) const override {
        Vector g = Vector::Zero(2 * n_);
        g.head(n_) = z.head(n_).array().sin();
        return g;
    }
    std::vector<Index> stencil(Index i) const override {
        if (i < n_) return {i};
        return {};
    }
    double entry(Index i, const Vector& local) const override {
        return i < n_ ? std::sin(local(0)) : 0.0;
    }
    Vector entry_derivative(Index i, const Vector& local) const override {
        if (i >= n_) return Vector(0);
        return Vector::Constant(1, std::cos(local(0)));
    }

private:
    Index n_;
};

class HamiltonianModel {
public:
    std::string name;
    SpdMatrix L;
    std::optional<SparseMatrix> L_sparse;  // fast path for rhs evaluation
    std::shared_ptr<const LocalNonlinearity> f;
    Vector c_b;
    double h_offset = 0.0;
    Vector z0;
    WeightMatrix X;

    Index dim() const { return L.size(); }
    Index half() const { return L.size() / 2; }

    Vector apply_L(const Vector& z) const {
        if (L_sparse) return (*L_sparse) * z;
        return L.matrix() * z;
    }

    Vector nonlinear_grad(const Vector& z) const { return f->gradient(z); }

    /// ∇H(z) = L z + ∇f(z) + c_b
    Vector gradient(const Vector& z) const {
        Vector g = apply_L(z) + c_b;
        if (!f->is_zero()) g += f->gradient(z);
        return g;
    }

    double hamiltonian(const Vector& z) const {
        return 0.5 * z.dot(apply_L(z)) + f->value(z) + c_b.dot(z) + h_offset;
    }

    Vector rhs(const Vector& z) const { return apply_jstd(gradient(z)).col(0); }

    /// ∇²H(z) = L + ∇²f(z)
    Matrix hessian(const Vector& z) const {
        if (f->is_zero()) return L.matrix();
        return L.matrix() + f->hessian(z);
    }
};

inline Vector eval_rhs(const HamiltonianModel& m, const Vector& z) { return m.rhs(z); }
inline double eval_hamiltonian(const HamiltonianModel& m, const Vector& z) { return m.hamiltonian(z); }
inline Vector eval_nonlinear_grad(const HamiltonianModel& m, const Vector& z) {
    return m.nonlinear_grad(z);
}

// ---------------------------------------------------------------------------
// sine-Gordon: u_t = v, v_t = u_xx - sin u on [0, l], Dirichlet data from the
// soliton limits, central second differences on n interior points.

enum class SolitonKind { kink = 1, antikink = -1 };

/// 4·arctan(exp(±(x - x0 - c t)/√(1-c²)))
inline double soliton_exact(double t, double x, double c, double x0, SolitonKind kind) {
    require(std::abs(c) < 1.0, "soliton: |c| must be < 1");
    const double s = static_cast<double>(static_cast<int>(kind));
    const double xi = (x - x0 - c * t) / std::sqrt(1.0 - c * c);
    return 4.0 * std::atan(std::exp(s * xi));
}

/// ∂u/∂t of the soliton.
inline double soliton_velocity(double t, double x, double c, double x0, SolitonKind kind) {
    require(std::abs(c) < 1.0, "soliton: |c| must be < 1");
    const double s = static_cast<double>(static_cast<int>(kind));
    const double gamma = std::sqrt(1.0 - c * c);
    const double xi = (x - x0 - c * t) / gamma;
    return -2.0 * s * c / (gamma * std::cosh(xi));
}

struct SineGordonParams {
    Index n = 500;
    double l = 50.0;
    double c = 0.2;
    double x0 = 20.0;
    SolitonKind kind = SolitonKind::kink;
};

class SineGordonModel : public HamiltonianModel {
public:
    SineGordonParams params;
    double dx = 0.0;
    std::vector<double> grid;  // interior points x_i = i·dx
    SparseMatrix Dx;           // (n+1) x n forward differences
    Vector d_b;                // boundary lift: D_x u_ext = Dx·q + d_b

    /// Δx-scaled energy Δx·½|p|² + Δx·|D_x q|² + Σ Δx(1 - cos q_i), reported as
    /// a diagnostic only (it is not the first integral of the ODE).
    double scaled_energy(const Vector& z) const {
        const Index n = params.n;
        const Vector dq = Dx * z.head(n) + d_b;
        return dx * 0.5 * z.tail(n).squaredNorm() + dx * dq.squaredNorm() +
               dx * (1.0 - z.head(n).array().cos()).sum();
    }

    Vector exact_state(double t) const {
        const Index n = params.n;
        Vector z(2 * n);
        for (Index i = 0; i < n; ++i) {
            z(i) = soliton_exact(t, grid[i], params.c, params.x0, params.kind);
            z(n + i) = soliton_velocity(t, grid[i], params.c, params.x0, params.kind);
        }
        return z;
    }
};

inline SineGordonModel build_sine_gordon(const SineGordonParams& p) {
    require(p.n >= 3, "sine-Gordon: n must be >= 3");
    if (!(std::abs(p.c) < 1.0)) throw ContractError("sine-Gordon: wave speed must satisfy |c| < 1");
    require(p.l > 0.0 && p.x0 > 0.0 && p.x0 < p.l, "sine-Gordon: need 0 < x0 < l");
    const Index n = p.n;
    SineGordonModel m;
    m.name = "sine_gordon";
    m.params = p;
    m.dx = p.l / static_cast<double>(n + 1);
    m.grid.resize(n);
    for (Index i = 0; i < n; ++i) m.grid[i] = static_cast<double>(i + 1) * m.dx;

    const double two_pi = 2.0 * std::numbers::pi;
    const double u_left = p.kind == SolitonKind::kink ? 0.0 : two_pi;
    const double u_right = p.kind == SolitonKind::kink ? two_pi : 0.0;

    std::vector<Eigen::Triplet<double>> trip;
    for (Index r = 0; r <= n; ++r) {
        if (r >= 1) trip.emplace_back(r, r - 1, -1.0 / m.dx);
        if (r < n) trip.emplace_back(r, r, 1.0 / m.dx);
    }
    m.Dx.resize(n + 1, n);
    m.Dx.setFromTriplets(trip.begin(), trip.end());
    m.d_b = Vector::Zero(n + 1);
    m.d_b(0) = -u_left / m.dx;
    m.d_b(n) = u_right / m.dx;

    const SparseMatrix dtd = SparseMatrix(m.Dx.transpose()) * m.Dx;
    std::vector<Eigen::Triplet<double>> lt;
    for (Index k = 0; k < dtd.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(dtd, k); it; ++it) lt.emplace_back(it.row(), it.col(), it.value());
    for (Index i = 0; i < n; ++i) lt.emplace_back(n + i, n + i, 1.0);
    SparseMatrix ls(2 * n, 2 * n);
    ls.setFromTriplets(lt.begin(), lt.end());
    m.L = SpdMatrix(Matrix(ls));
    m.L_sparse = std::move(ls);

    m.f = std::make_shared<SinePotential>(n);
    m.c_b = Vector::Zero(2 * n);
    m.c_b.head(n) = SparseMatrix(m.Dx.transpose()) * m.d_b;
    m.h_offset = 0.5 * m.d_b.squaredNorm();
    m.X = WeightMatrix(m.L);
    m.z0 = m.exact_state(0.0);
    return m;
}

// ---------------------------------------------------------------------------
// 1D linear wave with piecewise-linear hat functions, clamped at both ends:
//     M q̈ = -K q + g_q,   p = M q̇,   L = blockdiag(K, M^{-1}).

struct FemWaveParams {
    std::vector<double> nodes;      // strictly increasing, boundary nodes included
    double force_density = -0.4;
    double stiffness = 1.0;
    double initial_amplitude = 0.1;  // q0(x) = a·sin(π (x - x_0)/(x_end - x_0))
};

inline std::vector<double> uniform_nodes(double a, double b, Index elements) {
    std::vector<double> x(static_cast<std::size_t>(elements + 1));
    for (Index i = 0; i <= elements; ++i)
        x[static_cast<std::size_t>(i)] = a + (b - a) * static_cast<double>(i) / static_cast<double>(elements);
    return x;
}

class FemWaveModel : public HamiltonianModel {
public:
    FemWaveParams params;
    Matrix M;  // interior mass matrix
    Matrix K;  // interior stiffness matrix
    Vector g_q;
};

inline FemWaveModel build_fem_wave(const FemWaveParams& p) {
    const auto& x = p.nodes;
    if (x.size() < 4) throw ContractError("fem mesh: need at least 4 nodes (2 interior)");
    for (std::size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1])) throw ContractError("fem mesh: nodes must be strictly increasing");
    require(p.stiffness > 0.0, "fem: stiffness must be positive");

    const Index m = static_cast<Index>(x.size()) - 2;
    FemWaveModel out;
    out.name = "fem_wave";
    out.params = p;
    out.M = Matrix::Zero(m, m);
    out.K = Matrix::Zero(m, m);
    out.g_q = Vector::Zero(m);
    // element e spans nodes e, e+1; interior unknown j <-> node j+1
    for (std::size_t e = 0; e + 1 < x.size(); ++e) {
        const double h = x[e + 1] - x[e];
        const Index dofs[2] = {static_cast<Index>(e) - 1, static_cast<Index>(e)};
        const double me[2][2] = {{h / 3.0, h / 6.0}, {h / 6.0, h / 3.0}};
        const double ke[2][2] = {{p.stiffness / h, -p.stiffness / h}, {-p.stiffness / h, p.stiffness / h}};
        for (int a = 0; a < 2; ++a) {
            const Index i = dofs[a];
            if (i < 0 || i >= m) continue;
            out.g_q(i) += p.force_density * h / 2.0;
            for (int b = 0; b < 2; ++b) {
                const Index j = dofs[b];
                if (j < 0 || j >= m) continue;
                out.M(i, j) += me[a][b];
                out.K(i, j) += ke[a][b];
            }
        }
    }

    const SpdMatrix mass(out.M);
    Matrix minv = mass.solve(Matrix::Identity(m, m));
    minv = (0.5 * (minv + minv.transpose())).eval();
    Matrix l = Matrix::Zero(2 * m, 2 * m);
    l.topLeftCorner(m, m) = out.K;
    l.bottomRightCorner(m, m) = minv;
    out.L = SpdMatrix(std::move(l));
    out.f = std::make_shared<ZeroNonlinearity>(2 * m);
    // J_std·c_b = (0; g_q)  =>  c_b = J_std^T (0; g_q) = (-g_q; 0)
    out.c_b = Vector::Zero(2 * m);
    out.c_b.head(m) = -out.g_q;
    out.X = WeightMatrix(out.L);
    out.z0 = Vector::Zero(2 * m);
    const double span = x.back() - x.front();
    for (Index i = 0; i < m; ++i)
        out.z0(i) = p.initial_amplitude *
                    std::sin(std::numbers::pi * (x[static_cast<std::size_t>(i + 1)] - x.front()) / span);
    return out;
}

}  // namespace smor
