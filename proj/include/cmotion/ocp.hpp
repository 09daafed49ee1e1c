#ifndef CMOTION_OCP_HPP
#define CMOTION_OCP_HPP

#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmotion/expr.hpp"

namespace cmotion {

enum class ControlSetKind { Free, Box };

struct ControlBounds {
    double lo = -1.0;
    double hi = 1.0;
};

struct ControlSet {
    ControlSetKind kind = ControlSetKind::Free;
    std::vector<ControlBounds> bounds; // one per control when kind == Box
};

/// Optimal control problem in Lagrange form: minimize the integral of the
/// running cost subject to dx/dt = dynamics, t in [a, b].
struct OCProblem {
    std::string name;
    int n = 0; // state dimension
    int r = 0; // control dimension
    double a = 0.0;
    double b = 1.0;
    Expr lagrangian;
    std::vector<Expr> dynamics;
    ControlSet control_set;
    Rational psi0 = Rational(-1); // abnormal multiplier, <= 0

    static std::string state_name(int i) { return "x" + std::to_string(i); }
    static std::string control_name(int j) { return "u" + std::to_string(j); }
    static std::string costate_name(int i) { return "psi" + std::to_string(i); }

    /// Symbols allowed in the Lagrangian and dynamics: t, states, controls.
    std::set<std::string> input_symbols() const {
        std::set<std::string> s = {"t"};
        for (int i = 1; i <= n; ++i) s.insert(state_name(i));
        for (int j = 1; j <= r; ++j) s.insert(control_name(j));
        return s;
    }

    /// Symbols allowed in candidate conserved quantities: inputs plus psi0
    /// and the costates.
    std::set<std::string> phase_symbols() const {
        std::set<std::string> s = input_symbols();
        s.insert("psi0");
        for (int i = 1; i <= n; ++i) s.insert(costate_name(i));
        return s;
    }
};

/// Checks the problem's structural invariants and returns a copy with the
/// Lagrangian and dynamics normalized.
inline OCProblem validate(OCProblem p) {
    if (p.n < 1) throw DimensionMismatch("state dimension must be at least 1");
    if (p.r < 1) throw DimensionMismatch("control dimension must be at least 1");
    if (static_cast<int>(p.dynamics.size()) != p.n)
        throw DimensionMismatch("expected " + std::to_string(p.n) + " dynamics entries, got " +
                                std::to_string(p.dynamics.size()));
    if (!(p.a < p.b) || !std::isfinite(p.a) || !std::isfinite(p.b))
        throw BadHorizon("horizon must satisfy a < b with finite endpoints");
    if (p.psi0 > Rational(0)) throw BadPsi0("psi0 must be nonpositive");
    if (p.control_set.kind == ControlSetKind::Box) {
        if (static_cast<int>(p.control_set.bounds.size()) != p.r)
            throw DimensionMismatch("box control set needs one bound pair per control");
        for (const auto& bd : p.control_set.bounds)
            if (!(bd.lo < bd.hi)) throw InvalidArgument("box control bounds must satisfy lo < hi");
    }

    const std::set<std::string> allowed = p.input_symbols();
    auto check = [&](const Expr& e, const std::string& where) {
        for (const auto& v : free_variables(e))
            if (!allowed.count(v))
                throw ForbiddenSymbol(v + " may not appear in the " + where);
    };
    check(p.lagrangian, "lagrangian");
    for (int i = 0; i < p.n; ++i)
        check(p.dynamics[i], "dynamics for " + OCProblem::state_name(i + 1));

    p.lagrangian = normalize(p.lagrangian);
    for (auto& d : p.dynamics) d = normalize(d);
    return p;
}

/// Pontryagin Hamiltonian psi0*L + sum_i psi_i*phi_i with psi0 symbolic.
inline Expr build_hamiltonian(const OCProblem& p) {
    std::vector<Expr> terms;
    terms.push_back(Expr::variable("psi0") * p.lagrangian);
    for (int i = 0; i < p.n; ++i)
        terms.push_back(Expr::variable(OCProblem::costate_name(i + 1)) * p.dynamics[i]);
    return normalize(Expr::sum(std::move(terms)));
}

/// Gradient of H in the controls; each entry normalized.
inline std::vector<Expr> stationarity_system(const OCProblem& p, const Expr& H) {
    std::vector<Expr> out;
    out.reserve(p.r);
    for (int j = 1; j <= p.r; ++j)
        out.push_back(differentiate(H, OCProblem::control_name(j)));
    return out;
}

/// Result of solving the stationarity system for the controls.
struct ControlElimination {
    Substitution control_map;       // u_j -> expression in t, x, psi, psi0
    std::vector<Expr> stationarity; // dH/du_j before elimination
};

namespace detail {

constexpr std::uint64_t kEliminationSeed = 0x5DEECE66DULL;

inline bool nonzero_pivot(const Expr& e) {
    try {
        return !is_zero(e, kEliminationSeed);
    } catch (const Undecidable&) {
        // A doubtful pivot is used formally; the post-solve verification
        // rejects the outcome if the formal step was wrong.
        return true;
    }
}

} // namespace detail

/// Solves dH/du = 0 symbolically for the controls. Requires a free control
/// set and H quadratic in u whose Hessian entries depend on t and psi0 only;
/// the stationary point must be a (negative semidefinite) maximum.
inline ControlElimination eliminate_controls(const OCProblem& p, const Expr& H) {
    if (p.control_set.kind != ControlSetKind::Free) throw BoxControlUnsupported();

    const int r = p.r;
    ControlElimination result;
    result.stationarity = stationarity_system(p, H);

    // Write the system as A(t, psi0) * u + c = 0 and check it really is one.
    Substitution zero_u;
    for (int j = 1; j <= r; ++j) zero_u[OCProblem::control_name(j)] = Expr::constant(0);

    std::vector<std::vector<Expr>> A(r, std::vector<Expr>(r));
    std::vector<Expr> rhs(r);
    for (int j = 0; j < r; ++j) {
        const Expr& Sj = result.stationarity[j];
        for (int k = 0; k < r; ++k)
            A[j][k] = differentiate(Sj, OCProblem::control_name(k + 1));
        Expr c = substitute(Sj, zero_u);
        rhs[j] = normalize(Expr::neg(c));

        std::vector<Expr> rebuild = {c};
        for (int k = 0; k < r; ++k)
            rebuild.push_back(A[j][k] * Expr::variable(OCProblem::control_name(k + 1)));
        if (compare(normalize(Expr::sum(std::move(rebuild))), Sj) != 0)
            throw NotSolvable("hamiltonian is not quadratic in the controls");

        for (int k = 0; k < r; ++k)
            for (const auto& v : free_variables(A[j][k]))
                if (v != "t" && v != "psi0")
                    throw NotSolvable("stationarity coefficient for " +
                                      OCProblem::control_name(j + 1) + " depends on " + v);
    }

    // The maximality check needs the Hessian before elimination destroys it.
    std::vector<std::vector<Expr>> hessian = A;

    // Gauss-Jordan over the field of expressions in t and psi0.
    for (int col = 0; col < r; ++col) {
        int pivot = -1;
        for (int row = col; row < r; ++row)
            if (detail::nonzero_pivot(A[row][col])) {
                pivot = row;
                break;
            }
        if (pivot < 0)
            throw NotSolvable("stationarity system is singular in the controls");
        std::swap(A[pivot], A[col]);
        std::swap(rhs[pivot], rhs[col]);
        Expr inv = normalize(Expr::pow(A[col][col], -1));
        for (int k = col; k < r; ++k) A[col][k] = normalize(A[col][k] * inv);
        rhs[col] = normalize(rhs[col] * inv);
        for (int row = 0; row < r; ++row) {
            if (row == col) continue;
            Expr f = A[row][col];
            if (f.is_constant(Rational(0))) continue;
            for (int k = col; k < r; ++k)
                A[row][k] = normalize(A[row][k] - f * A[col][k]);
            rhs[row] = normalize(rhs[row] - f * rhs[col]);
        }
    }
    for (int j = 0; j < r; ++j)
        result.control_map[OCProblem::control_name(j + 1)] = rhs[j];

    // The solution must actually zero the stationarity system.
    for (int j = 0; j < r; ++j) {
        try {
            if (!is_zero(substitute(result.stationarity[j], result.control_map),
                         detail::kEliminationSeed))
                throw NotSolvable("control solution does not satisfy stationarity");
        } catch (const Undecidable&) {
            throw NotSolvable("control solution could not be verified");
        }
    }

    // Maximality: the u-Hessian must be negative semidefinite on the horizon.
    std::mt19937_64 rng(detail::kEliminationSeed);
    for (int trial = 0; trial < 8; ++trial) {
        double u01 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        Binding bind;
        bind["t"] = p.a + (p.b - p.a) * u01;
        bind["psi0"] = p.psi0.to_double();
        Eigen::MatrixXd Hm(r, r);
        for (int j = 0; j < r; ++j)
            for (int k = 0; k < r; ++k) Hm(j, k) = evaluate(hessian[j][k], bind);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hm);
        double lo = es.eigenvalues().minCoeff();
        double hi = es.eigenvalues().maxCoeff();
        if (hi > 1e-9 * std::max(1.0, std::abs(lo)))
            throw NotConcave("hamiltonian is not concave in the controls at t = " +
                             std::to_string(bind["t"]));
    }

    return result;
}

} // namespace cmotion

#endif
