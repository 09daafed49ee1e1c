#ifndef CMOTION_REPORT_HPP
#define CMOTION_REPORT_HPP

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmotion/conservation.hpp"
#include "cmotion/discovery.hpp"
#include "cmotion/extremal.hpp"

namespace cmotion {

inline constexpr const char* kToolVersion = "0.1.0";

struct CandidateReport {
    std::string name;
    ConservationVerdict verdict;
};

struct DerivationReport {
    std::string hamiltonian;
    std::vector<std::string> stationarity;
    std::vector<std::pair<std::string, std::string>> elimination; // u_j -> expr
    std::vector<std::pair<std::string, std::string>> reduced_field; // var' -> expr
    std::string error; // nonempty when elimination failed
};

/// Everything a subcommand reports. The machine-readable (JSON) form omits
/// the wall clock so identical inputs and seed reproduce identical bytes.
struct RunReport {
    std::string command;
    std::string problem_name;
    int n = 0;
    int r = 0;
    double a = 0.0;
    double b = 0.0;
    std::uint64_t seed = 0;
    DerivationReport derivation;
    std::vector<CandidateReport> candidates;
    std::optional<DiscoveryResult> discovery;
    double wall_ms = 0.0;
};

namespace detail {

inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline nlohmann::ordered_json verdict_json(const ConservationVerdict& v) {
    nlohmann::ordered_json j;
    j["candidate"] = to_string(v.candidate);
    j["raw_residual"] = to_string(v.raw_residual);
    if (v.reduced_residual) j["reduced_residual"] = to_string(*v.reduced_residual);
    else j["reduced_residual"] = nullptr;
    j["symbolic_status"] = to_label(v.symbolic_status);
    j["note"] = v.note;
    j["numeric_checked"] = v.numeric_checked;
    if (v.numeric_checked) {
        j["numeric_pass"] = v.numeric_pass;
        nlohmann::ordered_json drifts = nlohmann::ordered_json::array();
        for (const auto& d : v.drift_reports) {
            nlohmann::ordered_json row;
            row["initial_value"] = d.initial_value;
            row["max_abs_deviation"] = d.max_abs_deviation;
            row["relative_drift"] = d.relative_drift;
            drifts.push_back(row);
        }
        j["drift"] = drifts;
    }
    return j;
}

} // namespace detail

inline nlohmann::ordered_json to_json(const RunReport& rep) {
    nlohmann::ordered_json j;
    j["tool"] = "cmotion";
    j["version"] = kToolVersion;
    j["command"] = rep.command;
    j["problem"] = rep.problem_name;
    j["states"] = rep.n;
    j["controls"] = rep.r;
    j["horizon"] = {rep.a, rep.b};
    j["seed"] = rep.seed;

    nlohmann::ordered_json d;
    d["hamiltonian"] = rep.derivation.hamiltonian;
    d["stationarity"] = rep.derivation.stationarity;
    nlohmann::ordered_json elim = nlohmann::ordered_json::object();
    for (const auto& [k, v] : rep.derivation.elimination) elim[k] = v;
    d["elimination"] = elim;
    nlohmann::ordered_json field = nlohmann::ordered_json::object();
    for (const auto& [k, v] : rep.derivation.reduced_field) field[k] = v;
    d["reduced_field"] = field;
    if (!rep.derivation.error.empty()) d["error"] = rep.derivation.error;
    j["derivation"] = d;

    nlohmann::ordered_json cands = nlohmann::ordered_json::array();
    for (const auto& c : rep.candidates) {
        nlohmann::ordered_json cj = detail::verdict_json(c.verdict);
        cj["name"] = c.name;
        cands.push_back(cj);
    }
    j["candidates"] = cands;

    if (rep.discovery) {
        const DiscoveryResult& res = *rep.discovery;
        nlohmann::ordered_json dj;
        nlohmann::ordered_json basis = nlohmann::ordered_json::array();
        for (const auto& g : res.basis) basis.push_back(to_string(g));
        dj["basis"] = basis;
        dj["singular_values"] = res.singular_values;
        dj["threshold"] = res.threshold;
        dj["nullspace_dimension"] = res.coefficient_vectors.size();
        dj["coefficient_vectors"] = res.coefficient_vectors;
        nlohmann::ordered_json dcands = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < res.candidates.size(); ++i) {
            nlohmann::ordered_json cj = detail::verdict_json(res.verdicts[i]);
            dcands.push_back(cj);
        }
        dj["candidates"] = dcands;
        nlohmann::ordered_json rej = nlohmann::ordered_json::array();
        for (const auto& rc : res.rejected) {
            nlohmann::ordered_json rj;
            rj["candidate"] = to_string(rc.candidate);
            rj["reason"] = rc.reason;
            rej.push_back(rj);
        }
        dj["rejected"] = rej;
        j["discovery"] = dj;
    }
    return j;
}

inline std::string to_text(const RunReport& rep) {
    std::string out;
    auto line = [&](const std::string& s) { out += s + "\n"; };

    line("cmotion " + std::string(kToolVersion) + " (" + rep.command + ")");
    line("problem: " + rep.problem_name + "  n=" + std::to_string(rep.n) +
         " r=" + std::to_string(rep.r) + "  horizon [" + detail::fmt_short(rep.a) + ", " +
         detail::fmt_short(rep.b) + "]");
    line("seed: " + std::to_string(rep.seed));
    line("");
    line("H = " + rep.derivation.hamiltonian);
    for (std::size_t j = 0; j < rep.derivation.stationarity.size(); ++j)
        line("dH/du" + std::to_string(j + 1) + " = " + rep.derivation.stationarity[j]);
    if (!rep.derivation.error.empty()) {
        line("elimination failed: " + rep.derivation.error);
    } else {
        for (const auto& [k, v] : rep.derivation.elimination) line(k + " = " + v);
        for (const auto& [k, v] : rep.derivation.reduced_field) line(k + " = " + v);
    }

    for (const auto& c : rep.candidates) {
        const auto& v = c.verdict;
        line("");
        line("candidate " + c.name + " = " + to_string(v.candidate));
        line("  raw residual:     " + to_string(v.raw_residual));
        if (v.reduced_residual) line("  reduced residual: " + to_string(*v.reduced_residual));
        line("  symbolic status:  " + std::string(to_label(v.symbolic_status)));
        if (!v.note.empty()) line("  note: " + v.note);
        if (v.numeric_checked) {
            for (std::size_t i = 0; i < v.drift_reports.size(); ++i) {
                const auto& d = v.drift_reports[i];
                line("  drift[" + std::to_string(i) + "]: initial=" +
                     detail::fmt_short(d.initial_value) + " max=" +
                     detail::fmt_short(d.max_abs_deviation) + " relative=" +
                     detail::fmt_short(d.relative_drift));
            }
            line(std::string("  numeric: ") + (v.numeric_pass ? "pass" : "FAIL"));
        }
    }

    if (rep.discovery) {
        const DiscoveryResult& res = *rep.discovery;
        line("");
        line("discovery: basis size " + std::to_string(res.basis.size()) +
             ", nullspace dimension " + std::to_string(res.coefficient_vectors.size()));
        std::string sv = "singular values:";
        for (double s : res.singular_values) sv += " " + detail::fmt_short(s);
        line(sv);
        for (std::size_t i = 0; i < res.candidates.size(); ++i) {
            line("found: " + to_string(res.candidates[i]) + "  [" +
                 to_label(res.verdicts[i].symbolic_status) + "]");
            std::string coeff = "  coefficients:";
            for (double c : res.coefficient_vectors[i]) coeff += " " + detail::fmt17(c);
            line(coeff);
        }
        for (const auto& rc : res.rejected)
            line("rejected: " + to_string(rc.candidate) + "  (" + rc.reason + ")");
    }

    line("");
    line("wall clock: " + detail::fmt_short(rep.wall_ms) + " ms");
    return out;
}

/// CSV columns: t, states, controls, costates, H, then one column per named
/// candidate; every value printed with 17 significant digits.
inline void write_csv(std::ostream& os, const Trajectory& tr, const ExtremalField& field,
                      const std::vector<std::pair<std::string, Expr>>& candidates) {
    const int n = tr.n();
    const int r = tr.r();
    os << "t";
    for (int i = 1; i <= n; ++i) os << "," << OCProblem::state_name(i);
    for (int j = 1; j <= r; ++j) os << "," << OCProblem::control_name(j);
    for (int i = 1; i <= n; ++i) os << "," << OCProblem::costate_name(i);
    os << ",H";
    for (const auto& [name, expr] : candidates) os << "," << name;
    os << "\n";

    std::vector<double> hvals = evaluate_along(tr, field.h_reduced());
    std::vector<std::vector<double>> cvals;
    for (const auto& [name, expr] : candidates) cvals.push_back(evaluate_along(tr, expr));

    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        os << detail::fmt17(tr.t[k]);
        for (int i = 0; i < n; ++i) os << "," << detail::fmt17(tr.x[k][i]);
        for (int j = 0; j < r; ++j) os << "," << detail::fmt17(tr.u[k][j]);
        for (int i = 0; i < n; ++i) os << "," << detail::fmt17(tr.psi[k][i]);
        os << "," << detail::fmt17(hvals[k]);
        for (const auto& col : cvals) os << "," << detail::fmt17(col[k]);
        os << "\n";
    }
}

} // namespace cmotion

#endif
