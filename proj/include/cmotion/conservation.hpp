#ifndef CMOTION_CONSERVATION_HPP
#define CMOTION_CONSERVATION_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cmotion/extremal.hpp"
#include "cmotion/ocp.hpp"

namespace cmotion {

enum class SymbolicStatus { ConservedSymbolically, NonzeroResidual, Undecidable };

inline const char* to_label(SymbolicStatus s) {
    switch (s) {
        case SymbolicStatus::ConservedSymbolically: return "conserved";
        case SymbolicStatus::NonzeroResidual: return "nonzero-residual";
        case SymbolicStatus::Undecidable: return "undecidable";
    }
    return "?";
}

struct DriftReport {
    double initial_value = 0.0;
    double max_abs_deviation = 0.0;
    double relative_drift = 0.0; // max |F - F(0)| / (1 + |F(0)|)
};

struct ConservationVerdict {
    Expr candidate;
    Expr raw_residual;
    std::optional<Expr> reduced_residual;
    SymbolicStatus symbolic_status = SymbolicStatus::Undecidable;
    std::string note;
    std::vector<DriftReport> drift_reports;
    bool numeric_checked = false;
    bool numeric_pass = false;
};

/// Total time derivative of F along the Hamiltonian flow:
///   dF/dt = @F/@t + sum_i (@F/@x_i * @H/@psi_i - @F/@psi_i * @H/@x_i).
/// There is deliberately no @F/@u term; along a stationarity-reduced flow the
/// control contribution vanishes when dF/du itself does.
inline Expr residual(const Expr& F, const Expr& H, const OCProblem& p) {
    std::vector<Expr> terms;
    terms.push_back(differentiate(F, "t"));
    for (int i = 1; i <= p.n; ++i) {
        const std::string xi = OCProblem::state_name(i);
        const std::string pi = OCProblem::costate_name(i);
        terms.push_back(differentiate(F, xi) * differentiate(H, pi));
        terms.push_back(Expr::neg(differentiate(F, pi) * differentiate(H, xi)));
    }
    return normalize(Expr::sum(std::move(terms)));
}

/// Substitutes the stationary controls into an expression.
inline Expr reduce_modulo_stationarity(const Expr& e, const ControlElimination& elim) {
    return substitute(e, elim.control_map);
}

/// Symbolic conservation check of a candidate first integral. The residual is
/// reduced modulo the stationarity system when control elimination succeeds;
/// a control-dependent candidate additionally needs each dF/du_j to vanish on
/// the stationarity manifold before a conserved verdict is allowed.
inline ConservationVerdict check_symbolic(const Expr& F, const OCProblem& p,
                                          std::uint64_t seed = 0) {
    const std::set<std::string> allowed = p.phase_symbols();
    for (const auto& v : free_variables(F))
        if (!allowed.count(v)) throw ForbiddenSymbol(v + " may not appear in a candidate");

    ConservationVerdict v;
    v.candidate = normalize(F);

    Expr H = build_hamiltonian(p);
    v.raw_residual = residual(v.candidate, H, p);

    ControlElimination elim;
    try {
        elim = eliminate_controls(p, H);
    } catch (const Error& e) {
        v.symbolic_status = SymbolicStatus::Undecidable;
        v.note = std::string("control elimination unavailable: ") + e.what();
        return v;
    }

    v.reduced_residual = reduce_modulo_stationarity(v.raw_residual, elim);

    const std::set<std::string> fv = free_variables(v.candidate);
    for (int j = 1; j <= p.r; ++j) {
        const std::string uj = OCProblem::control_name(j);
        if (!fv.count(uj)) continue;
        try {
            Expr cert = reduce_modulo_stationarity(differentiate(v.candidate, uj), elim);
            if (!is_zero(cert, seed)) {
                v.symbolic_status = SymbolicStatus::Undecidable;
                v.note = "d(candidate)/d" + uj + " does not vanish at the stationary controls";
                return v;
            }
        } catch (const Undecidable&) {
            v.symbolic_status = SymbolicStatus::Undecidable;
            v.note = "d(candidate)/d" + uj + " could not be decided";
            return v;
        }
    }

    try {
        v.symbolic_status = is_zero(*v.reduced_residual, seed)
                                ? SymbolicStatus::ConservedSymbolically
                                : SymbolicStatus::NonzeroResidual;
    } catch (const Undecidable& e) {
        v.symbolic_status = SymbolicStatus::Undecidable;
        v.note = e.what();
    }
    return v;
}

/// Evaluates the candidate along each trajectory and records the drift.
/// Passing means every relative drift stays within the tolerance.
inline bool check_numeric(ConservationVerdict& v, const std::vector<Trajectory>& trajectories,
                          double tol = 1e-7) {
    v.drift_reports.clear();
    bool pass = true;
    for (const auto& tr : trajectories) {
        std::vector<double> vals = evaluate_along(tr, v.candidate);
        DriftReport rep;
        rep.initial_value = vals.empty() ? 0.0 : vals.front();
        for (double val : vals)
            rep.max_abs_deviation = std::max(rep.max_abs_deviation,
                                             std::abs(val - rep.initial_value));
        rep.relative_drift = rep.max_abs_deviation / (1.0 + std::abs(rep.initial_value));
        if (!(rep.relative_drift <= tol)) pass = false;
        v.drift_reports.push_back(rep);
    }
    v.numeric_checked = true;
    v.numeric_pass = pass;
    return pass;
}

} // namespace cmotion

#endif
