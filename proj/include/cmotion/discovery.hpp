#ifndef CMOTION_DISCOVERY_HPP
#define CMOTION_DISCOVERY_HPP

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cmotion/conservation.hpp"

namespace cmotion {

enum class AnsatzFamily { BilinearPsiX, BilinearPlusHT, Custom };

/// Linear ansatz for the search: F = sum_k c_k * g_k over a fixed basis.
struct AnsatzSpec {
    AnsatzFamily family = AnsatzFamily::BilinearPsiX;
    std::vector<Expr> custom_basis;
    int max_t_degree = 0;
    int sample_count = -1; // < 0 means 4 x basis size
    std::uint64_t seed = 0;
};

struct RejectedCandidate {
    Expr candidate;
    std::string reason;
};

struct DiscoveryResult {
    std::vector<Expr> basis;
    std::vector<std::vector<double>> coefficient_vectors; // orthonormal nullspace
    std::vector<Expr> candidates;                         // snapped and normalized
    std::vector<ConservationVerdict> verdicts;            // parallel to candidates
    std::vector<double> singular_values;
    double threshold = 0.0; // absolute cutoff applied to the singular values
    std::vector<RejectedCandidate> rejected;
};

namespace detail {

inline void require_phase_basis(const Expr& g, const OCProblem& p) {
    std::set<std::string> allowed = {"t", "psi0"};
    for (int i = 1; i <= p.n; ++i) {
        allowed.insert(OCProblem::state_name(i));
        allowed.insert(OCProblem::costate_name(i));
    }
    for (const auto& v : free_variables(g))
        if (!allowed.count(v))
            throw ForbiddenSymbol(v + " may not appear in an ansatz basis");
}

inline double unit_sample(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double annulus_sample(std::mt19937_64& rng, double lo, double hi) {
    double m = lo + (hi - lo) * unit_sample(rng);
    return (rng() & 1u) ? -m : m;
}

inline std::optional<Rational> snap_rational(double c, long long max_den, double tol) {
    for (long long den = 1; den <= max_den; ++den) {
        double scaled = c * static_cast<double>(den);
        if (std::abs(scaled) > 9.0e18) return std::nullopt;
        long long num = std::llround(scaled);
        if (std::abs(c - static_cast<double>(num) / static_cast<double>(den)) <= tol)
            return Rational(num, den);
    }
    return std::nullopt;
}

// Continued-fraction fallback for coefficients that refuse to snap.
inline Rational rational_near(double c) {
    if (auto r = snap_rational(c, 1 << 20, 1e-12 * std::max(1.0, std::abs(c)))) return *r;
    long long den = 1LL << 31;
    return Rational(std::llround(c * static_cast<double>(den)), den);
}

} // namespace detail

/// Builds the ansatz basis in a deterministic order. Bilinear families list
/// psi_i*x_j with i major, j minor, once per time power t^d, d ascending;
/// BilinearPlusHT appends the control-eliminated Hamiltonian times t^d.
inline std::vector<Expr> generate_basis(const OCProblem& p, const AnsatzSpec& spec) {
    if (spec.max_t_degree < 0) throw InvalidArgument("max_t_degree must be >= 0");

    std::vector<Expr> basis;
    if (spec.family == AnsatzFamily::Custom) {
        for (const auto& g : spec.custom_basis) basis.push_back(normalize(g));
    } else {
        std::vector<Expr> tails;
        for (int d = 0; d <= spec.max_t_degree; ++d)
            tails.push_back(normalize(Expr::pow(Expr::variable("t"), d)));
        for (const auto& td : tails)
            for (int i = 1; i <= p.n; ++i)
                for (int j = 1; j <= p.n; ++j)
                    basis.push_back(normalize(Expr::variable(OCProblem::costate_name(i)) *
                                              Expr::variable(OCProblem::state_name(j)) * td));
        if (spec.family == AnsatzFamily::BilinearPlusHT) {
            Expr H = build_hamiltonian(p);
            Expr h_red = reduce_modulo_stationarity(H, eliminate_controls(p, H));
            for (const auto& td : tails) basis.push_back(normalize(h_red * td));
        }
    }

    if (basis.empty()) throw EmptyBasis();
    for (const auto& g : basis) detail::require_phase_basis(g, p);
    for (std::size_t i = 0; i < basis.size(); ++i)
        for (std::size_t j = i + 1; j < basis.size(); ++j)
            if (compare(basis[i], basis[j]) == 0)
                throw InvalidArgument("ansatz basis elements must be distinct");
    return basis;
}

/// Samples the stationarity-reduced residual of every basis element at seeded
/// random phase points: entry (s, k) is the reduced residual of g_k at
/// binding s. Rows hitting a domain fault are redrawn.
inline Eigen::MatrixXd residual_matrix(const std::vector<Expr>& basis, const OCProblem& p,
                                       const AnsatzSpec& spec) {
    if (basis.empty()) throw EmptyBasis();
    if (spec.sample_count == 0) throw InvalidArgument("sample_count must be positive");
    const int cols = static_cast<int>(basis.size());
    const int rows = spec.sample_count < 0 ? 4 * cols : spec.sample_count;

    Expr H = build_hamiltonian(p);
    ControlElimination elim = eliminate_controls(p, H);
    std::vector<Expr> reduced;
    reduced.reserve(basis.size());
    for (const auto& g : basis)
        reduced.push_back(reduce_modulo_stationarity(residual(g, H, p), elim));

    Eigen::MatrixXd M(rows, cols);
    std::mt19937_64 rng(spec.seed);
    for (int s = 0; s < rows; ++s) {
        bool filled = false;
        for (int attempt = 0; attempt < 256 && !filled; ++attempt) {
            Binding b;
            b["t"] = p.a + (p.b - p.a) * detail::unit_sample(rng);
            b["psi0"] = p.psi0.to_double();
            for (int i = 1; i <= p.n; ++i) {
                b[OCProblem::state_name(i)] = detail::annulus_sample(rng, 0.1, 2.0);
                b[OCProblem::costate_name(i)] = detail::annulus_sample(rng, 0.1, 2.0);
            }
            try {
                for (int k = 0; k < cols; ++k) M(s, k) = evaluate(reduced[k], b);
                filled = true;
            } catch (const DomainError&) {
            }
        }
        if (!filled)
            throw Undecidable("could not sample the residual matrix away from domain faults");
    }
    return M;
}

/// Orthonormal basis of the right nullspace, by SVD. The threshold is
/// relative to the largest singular value; vectors are sign-normalized so
/// their largest-magnitude component is positive.
inline std::vector<std::vector<double>> extract_nullspace(const Eigen::MatrixXd& M,
                                                          double threshold = 1e-8) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const auto& V = svd.matrixV();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    const double cutoff = threshold * smax;

    std::vector<std::vector<double>> out;
    for (int i = 0; i < V.cols(); ++i) {
        double s = i < sv.size() ? sv(i) : 0.0;
        if (s > cutoff) continue;
        Eigen::VectorXd v = V.col(i);
        int pivot = 0;
        for (int k = 1; k < v.size(); ++k)
            if (std::abs(v(k)) > std::abs(v(pivot))) pivot = k;
        if (v(pivot) < 0.0) v = -v;
        out.emplace_back(v.data(), v.data() + v.size());
    }
    return out;
}

/// Full search pipeline: basis, sampled residual operator, nullspace,
/// coefficient snapping, then symbolic and numeric verification of each
/// candidate. Candidates failing both checks are dropped with a reason.
inline DiscoveryResult discover(const OCProblem& p, const AnsatzSpec& spec) {
    DiscoveryResult res;
    res.basis = generate_basis(p, spec);

    Eigen::MatrixXd M = residual_matrix(res.basis, p, spec);
    {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
        for (int i = 0; i < svd.singularValues().size(); ++i)
            res.singular_values.push_back(svd.singularValues()(i));
        res.threshold = 1e-8 * (res.singular_values.empty() ? 0.0 : res.singular_values[0]);
    }
    res.coefficient_vectors = extract_nullspace(M);

    ExtremalField field = build_field(p, eliminate_controls(p, build_hamiltonian(p)));
    std::vector<Trajectory> extremals;
    std::mt19937_64 rng(spec.seed ^ 0x9E3779B97F4A7C15ull);
    for (int attempt = 0; attempt < 50 && extremals.size() < 5; ++attempt) {
        std::vector<double> x0(p.n), l0(p.n);
        for (int i = 0; i < p.n; ++i) x0[i] = detail::annulus_sample(rng, 0.3, 1.0);
        for (int i = 0; i < p.n; ++i) l0[i] = detail::annulus_sample(rng, 0.3, 1.0);
        try {
            extremals.push_back(integrate(field, x0, l0, p.a, p.b));
        } catch (const Error&) {
        }
    }

    for (const auto& vec : res.coefficient_vectors) {
        int pivot = 0;
        for (std::size_t k = 1; k < vec.size(); ++k)
            if (std::abs(vec[k]) > std::abs(vec[pivot])) pivot = static_cast<int>(k);
        std::vector<Expr> terms;
        for (std::size_t k = 0; k < vec.size(); ++k) {
            double c = vec[k] / vec[pivot];
            Rational r = detail::snap_rational(c, 64, 1e-9).value_or(detail::rational_near(c));
            if (r == Rational(0)) continue;
            terms.push_back(Expr::constant(r) * res.basis[k]);
        }
        Expr cand = normalize(Expr::sum(std::move(terms)));

        ConservationVerdict v = check_symbolic(cand, p, spec.seed);
        if (!extremals.empty()) check_numeric(v, extremals, 1e-7);

        if (v.symbolic_status == SymbolicStatus::ConservedSymbolically ||
            (v.symbolic_status == SymbolicStatus::Undecidable && v.numeric_checked &&
             v.numeric_pass)) {
            res.candidates.push_back(cand);
            res.verdicts.push_back(std::move(v));
        } else {
            std::string why = to_label(v.symbolic_status);
            if (!v.note.empty()) why += ": " + v.note;
            if (v.numeric_checked && !v.numeric_pass) why += " (numeric drift over tolerance)";
            res.rejected.push_back({cand, why});
        }
    }
    return res;
}

} // namespace cmotion

#endif
