#pragma once

#include <Eigen/LU>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "smor/model.hpp"
#include "smor/weighted.hpp"

namespace smor {

enum class Scheme { stormer_verlet, implicit_midpoint };

struct IntegratorConfig {
    double dt = 0.01;
    double t_final = 1.0;
    double newton_tol = 1e-12;
    int newton_max_iter = 50;
    Scheme scheme = Scheme::implicit_midpoint;
    Index stride = 1;  // store every stride-th step
    Index newton_dim_threshold = 256;

    Index steps() const { return static_cast<Index>(std::llround(t_final / dt)); }

    void validate() const {
        require(dt > 0.0 && std::isfinite(dt), "integrator: dt must be positive");
        require(t_final >= 0.0, "integrator: t_final must be nonnegative");
        require(newton_tol > 0.0, "integrator: newton_tol must be positive");
        require(newton_max_iter > 0, "integrator: newton_max_iter must be positive");
        require(stride >= 1, "integrator: stride must be >= 1");
    }
};

struct Trajectory {
    SnapshotSet states;
    std::vector<double> hamiltonian;  // empty when the system has no Hamiltonian

    const std::vector<double>& times() const { return states.times; }
};

/// ż = F(z). `jacobian` enables Newton, `linear_part` (a constant
/// approximation of DF) enables a frozen-Jacobian iteration.
struct OdeSystem {
    Index dim = 0;
    std::function<Vector(const Vector&)> rhs;
    std::function<Matrix(const Vector&)> jacobian;
    std::optional<Matrix> linear_part;
    std::function<double(const Vector&)> hamiltonian;
};

/// ż = J_std ∇H(z) with z = (q; p). `hessian` and the constant
/// `linear_hessian` (quadratic part of H) are optional.
struct CanonicalSystem {
    Index half = 0;
    std::function<Vector(const Vector&)> gradient;
    std::function<Matrix(const Vector&)> hessian;
    std::optional<Matrix> linear_hessian;
    std::function<double(const Vector&)> hamiltonian;
};

inline OdeSystem make_ode(const HamiltonianModel& m) {
    OdeSystem s;
    s.dim = m.dim();
    s.rhs = [&m](const Vector& z) { return m.rhs(z); };
    s.jacobian = [&m](const Vector& z) { return apply_jstd(m.hessian(z)); };
    s.hamiltonian = [&m](const Vector& z) { return m.hamiltonian(z); };
    return s;
}

inline CanonicalSystem make_canonical(const HamiltonianModel& m) {
    CanonicalSystem s;
    s.half = m.half();
    s.gradient = [&m](const Vector& z) { return m.gradient(z); };
    s.hessian = [&m](const Vector& z) { return m.hessian(z); };
    s.hamiltonian = [&m](const Vector& z) { return m.hamiltonian(z); };
    return s;
}

namespace detail {

enum class SolveMode { newton, frozen, fixed_point };

/// Solves R(x) = 0 for R(x) = x - G(x); `jac` returns dR/dx. Newton runs as a
/// chord iteration: the factored Jacobian is reused until the residual stops
/// contracting by half. The frozen mode uses a fixed factorization and hands
/// over to Newton (from the best iterate) once it stops contracting.
inline Vector solve_implicit(const std::function<Vector(const Vector&)>& residual,
                             const std::function<Matrix(const Vector&)>& jac,
                             const Eigen::PartialPivLU<Matrix>* frozen, SolveMode mode, Vector x,
                             double abs_tol, int max_iter, std::size_t step) {
    std::optional<Eigen::PartialPivLU<Matrix>> chord;
    Vector best = x;
    double best_norm = std::numeric_limits<double>::infinity();
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        const Vector r = residual(x);
        const double rn = r.norm();
        if (!std::isfinite(rn)) break;
        if (rn <= abs_tol) return x;
        if (rn < best_norm) {
            best_norm = rn;
            best = x;
        }
        const bool stalled = rn > 0.5 * prev;
        prev = rn;
        switch (mode) {
            case SolveMode::newton:
                if (!chord || stalled) chord.emplace(jac(x));
                x -= chord->solve(r);
                break;
            case SolveMode::frozen:
                if (stalled && jac) return solve_implicit(residual, jac, nullptr, SolveMode::newton, best, abs_tol,
                                                          max_iter, step);
                x -= frozen->solve(r);
                break;
            case SolveMode::fixed_point: x -= r; break;
        }
    }
    const Vector r = residual(x);
    if (r.allFinite() && r.norm() <= abs_tol) return x;
    if (mode == SolveMode::frozen && jac)
        return solve_implicit(residual, jac, nullptr, SolveMode::newton, best, abs_tol, max_iter, step);
    const double shown = r.allFinite() ? r.norm() : best_norm;
    throw StepFailure(step, "nonlinear solve did not converge (residual " + std::to_string(shown) + ")");
}

inline void store(Trajectory& tr, Index slot, double t, const Vector& z,
                  const std::function<double(const Vector&)>& h) {
    tr.states.states.col(slot) = z;
    tr.states.times.push_back(t);
    if (h) tr.hamiltonian.push_back(h(z));
}

inline Trajectory allocate(Index dim, const IntegratorConfig& cfg) {
    Trajectory tr;
    const Index stored = cfg.steps() / cfg.stride + 1;
    tr.states.states.resize(dim, stored);
    tr.states.times.reserve(static_cast<std::size_t>(stored));
    return tr;
}

}  // namespace detail

/// z_{m+1} = z_m + Δt·F((z_m + z_{m+1})/2), solved to
/// ||residual|| <= newton_tol·(1 + ||z_m||). A system with a linear part is
/// solved by simplified Newton on the frozen linear-part Jacobian (full Newton
/// as fallback); otherwise Newton below newton_dim_threshold, fixed-point
/// iteration above.
inline Trajectory implicit_midpoint_run(const OdeSystem& sys, const Vector& z0, const IntegratorConfig& cfg) {
    cfg.validate();
    require(z0.size() == sys.dim, "implicit_midpoint: initial state dimension mismatch");
    const double dt = cfg.dt;
    const Index nsteps = cfg.steps();

    detail::SolveMode mode = detail::SolveMode::fixed_point;
    std::optional<Eigen::PartialPivLU<Matrix>> frozen;
    if (sys.linear_part) {
        mode = detail::SolveMode::frozen;
        frozen.emplace(Matrix(Matrix::Identity(sys.dim, sys.dim) - 0.5 * dt * (*sys.linear_part)));
    } else if (sys.jacobian && sys.dim < cfg.newton_dim_threshold) {
        mode = detail::SolveMode::newton;
    }
    std::function<Matrix(const Vector&)> no_jac;

    Trajectory tr = detail::allocate(sys.dim, cfg);
    Vector z = z0;
    Index slot = 0;
    detail::store(tr, slot++, 0.0, z, sys.hamiltonian);
    for (Index m = 1; m <= nsteps; ++m) {
        const Vector zm = z;
        auto residual = [&](const Vector& x) -> Vector { return x - zm - dt * sys.rhs(0.5 * (x + zm)); };
        std::function<Matrix(const Vector&)> jac = no_jac;
        if (sys.jacobian)
            jac = [&](const Vector& x) -> Matrix {
                return Matrix::Identity(sys.dim, sys.dim) - 0.5 * dt * sys.jacobian(0.5 * (x + zm));
            };
        const Vector guess = mode == detail::SolveMode::fixed_point ? Vector(zm + dt * sys.rhs(zm)) : zm;
        z = detail::solve_implicit(residual, jac, frozen ? &*frozen : nullptr, mode, guess,
                                   cfg.newton_tol * (1.0 + zm.norm()), cfg.newton_max_iter,
                                   static_cast<std::size_t>(m));
        if (m % cfg.stride == 0) detail::store(tr, slot++, static_cast<double>(m) * dt, z, sys.hamiltonian);
    }
    return tr;
}

/// Störmer-Verlet in canonical coordinates z = (q; p):
///   q_{m+1/2} = q_m + Δt/2·∇_p H(q_{m+1/2}, p_m)
///   p_{m+1}   = p_m - Δt/2·(∇_q H(q_{m+1/2}, p_m) + ∇_q H(q_{m+1/2}, p_{m+1}))
///   q_{m+1}   = q_{m+1/2} + Δt/2·∇_p H(q_{m+1/2}, p_{m+1})
/// The first two stages are implicit for nonseparable H and are solved like
/// the midpoint step; for separable H they converge in one update.
inline Trajectory stormer_verlet_run(const CanonicalSystem& sys, const Vector& z0, const IntegratorConfig& cfg) {
    cfg.validate();
    const Index n = sys.half;
    require(z0.size() == 2 * n, "stormer_verlet: initial state dimension mismatch");
    const double dt = cfg.dt;
    const double h = 0.5 * dt;
    const Index nsteps = cfg.steps();
    auto mode = detail::SolveMode::fixed_point;
    std::optional<Eigen::PartialPivLU<Matrix>> frozen1, frozen2;
    if (sys.linear_hessian) {
        mode = detail::SolveMode::frozen;
        const Matrix& hl = *sys.linear_hessian;
        frozen1.emplace(Matrix(Matrix::Identity(n, n) - h * hl.bottomLeftCorner(n, n)));
        frozen2.emplace(Matrix(Matrix::Identity(n, n) + h * hl.topRightCorner(n, n)));
    } else if (sys.hessian && 2 * n < cfg.newton_dim_threshold) {
        mode = detail::SolveMode::newton;
    }
    std::function<Matrix(const Vector&)> no_jac;

    auto join = [n](const Vector& q, const Vector& p) {
        Vector z(2 * n);
        z.head(n) = q;
        z.tail(n) = p;
        return z;
    };

    Trajectory tr = detail::allocate(2 * n, cfg);
    Vector z = z0;
    Index slot = 0;
    detail::store(tr, slot++, 0.0, z, sys.hamiltonian);
    for (Index m = 1; m <= nsteps; ++m) {
        const Vector q = z.head(n);
        const Vector p = z.tail(n);
        const double tol = cfg.newton_tol * (1.0 + z.norm());
        const auto step = static_cast<std::size_t>(m);

        auto r1 = [&](const Vector& qh) -> Vector { return qh - q - h * sys.gradient(join(qh, p)).tail(n); };
        std::function<Matrix(const Vector&)> j1 = no_jac, j2 = no_jac;
        if (sys.hessian) {
            j1 = [&](const Vector& qh) -> Matrix {
                return Matrix::Identity(n, n) - h * sys.hessian(join(qh, p)).bottomLeftCorner(n, n);
            };
        }
        const Vector qh = detail::solve_implicit(r1, j1, frozen1 ? &*frozen1 : nullptr, mode, Vector(q + h * sys.gradient(z).tail(n)),
                                                 tol, cfg.newton_max_iter, step);

        const Vector gq_old = sys.gradient(join(qh, p)).head(n);
        auto r2 = [&](const Vector& p1) -> Vector {
            return p1 - p + h * (gq_old + sys.gradient(join(qh, p1)).head(n));
        };
        if (sys.hessian) {
            j2 = [&](const Vector& p1) -> Matrix {
                return Matrix::Identity(n, n) + h * sys.hessian(join(qh, p1)).topRightCorner(n, n);
            };
        }
        const Vector p1 = detail::solve_implicit(r2, j2, frozen2 ? &*frozen2 : nullptr, mode, Vector(p - dt * gq_old), tol,
                                                 cfg.newton_max_iter, step);

        const Vector q1 = qh + h * sys.gradient(join(qh, p1)).tail(n);
        z = join(q1, p1);
        if (m % cfg.stride == 0) detail::store(tr, slot++, static_cast<double>(m) * dt, z, sys.hamiltonian);
    }
    return tr;
}

}  // namespace smor
