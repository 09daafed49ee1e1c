#ifndef CMOTION_EXTREMAL_HPP
#define CMOTION_EXTREMAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "cmotion/ocp.hpp"

namespace cmotion {

/// Flat instruction tape for fast repeated evaluation inside the integrator.
/// Domain faults surface as NaN/inf rather than exceptions; the step
/// controller treats non-finite values as rejected steps.
class Tape {
public:
    Tape() = default;

    Tape(const Expr& e, const std::map<std::string, int>& slots) {
        int depth = compile(normalize(e), slots);
        stack_.resize(std::max(1, depth));
    }

    double eval(const double* vars) const {
        double* sp = stack_.data();
        for (const auto& in : code_) {
            switch (in.op) {
                case Op::PushConst: *sp++ = consts_[in.a]; break;
                case Op::PushVar: *sp++ = vars[in.a]; break;
                case Op::Add: {
                    double acc = 0.0;
                    for (int i = 0; i < in.a; ++i) acc += *--sp;
                    *sp++ = acc;
                    break;
                }
                case Op::Mul: {
                    double acc = 1.0;
                    for (int i = 0; i < in.a; ++i) acc *= *--sp;
                    *sp++ = acc;
                    break;
                }
                case Op::Neg: sp[-1] = -sp[-1]; break;
                case Op::Powi: sp[-1] = powi(sp[-1], in.a); break;
                case Op::Sin: sp[-1] = std::sin(sp[-1]); break;
                case Op::Cos: sp[-1] = std::cos(sp[-1]); break;
                case Op::Exp: sp[-1] = std::exp(sp[-1]); break;
                case Op::Log: sp[-1] = sp[-1] > 0.0 ? std::log(sp[-1])
                                                    : std::numeric_limits<double>::quiet_NaN();
                    break;
                case Op::Sqrt: sp[-1] = sp[-1] < 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                                     : std::sqrt(sp[-1]);
                    break;
            }
        }
        return sp[-1];
    }

private:
    enum class Op : std::uint8_t { PushConst, PushVar, Add, Mul, Neg, Powi, Sin, Cos, Exp, Log, Sqrt };

    struct Instr {
        Op op;
        std::int32_t a = 0;
    };

    static double powi(double base, long long k) {
        if (k < 0) {
            base = 1.0 / base; // 0 becomes inf; rejected downstream
            k = -k;
        }
        double out = 1.0, sq = base;
        while (k > 0) {
            if (k & 1) out *= sq;
            k >>= 1;
            if (k > 0) sq *= sq;
        }
        return out;
    }

    // Emits postorder code and returns the stack depth the subtree needs.
    int compile(const Expr& e, const std::map<std::string, int>& slots) {
        switch (e.kind()) {
            case Kind::Constant: {
                consts_.push_back(e.value().to_double());
                code_.push_back({Op::PushConst, static_cast<std::int32_t>(consts_.size() - 1)});
                return 1;
            }
            case Kind::Variable: {
                auto it = slots.find(e.name());
                if (it == slots.end()) throw UnboundVariable(e.name());
                code_.push_back({Op::PushVar, it->second});
                return 1;
            }
            case Kind::Negate: {
                int d = compile(e.child(), slots);
                code_.push_back({Op::Neg, 0});
                return d;
            }
            case Kind::Power: {
                int d = compile(e.child(), slots);
                code_.push_back({Op::Powi, static_cast<std::int32_t>(e.exponent())});
                return d;
            }
            case Kind::Call: {
                int d = compile(e.child(), slots);
                Op op = Op::Sin;
                if (e.name() == "cos") op = Op::Cos;
                else if (e.name() == "exp") op = Op::Exp;
                else if (e.name() == "log") op = Op::Log;
                else if (e.name() == "sqrt") op = Op::Sqrt;
                code_.push_back({op, 0});
                return d;
            }
            case Kind::Sum:
            case Kind::Product: {
                int depth = 0;
                int i = 0;
                for (const auto& k : e.children()) {
                    depth = std::max(depth, i + compile(k, slots));
                    ++i;
                }
                code_.push_back({e.kind() == Kind::Sum ? Op::Add : Op::Mul,
                                 static_cast<std::int32_t>(e.children().size())});
                return depth;
            }
        }
        return 0;
    }

    std::vector<Instr> code_;
    std::vector<double> consts_;
    mutable std::vector<double> stack_;
};

struct IntegratorStats {
    long long accepted = 0;
    long long rejected = 0;
    double max_local_error = 0.0; // largest accepted local error estimate (abs)
    double sum_local_error = 0.0; // accumulated estimates, a crude global bound
};

/// Sampled extremal. The time grid is strictly increasing regardless of
/// integration direction; controls are filled from the control map.
struct Trajectory {
    std::vector<double> t;
    std::vector<std::vector<double>> x;   // [sample][state]
    std::vector<std::vector<double>> u;   // [sample][control]
    std::vector<std::vector<double>> psi; // [sample][costate]
    double psi0 = -1.0;
    IntegratorStats stats;

    int n() const { return t.empty() ? 0 : static_cast<int>(x.front().size()); }
    int r() const { return t.empty() ? 0 : static_cast<int>(u.front().size()); }
};

/// Hamiltonian vector field of a problem after control elimination:
/// dx_i/dt = dH/dpsi_i, dpsi_i/dt = -dH/dx_i, controls substituted out.
class ExtremalField {
public:
    ExtremalField() = default;

    ExtremalField(const OCProblem& p, const ControlElimination& elim) : problem_(p) {
        Expr H = build_hamiltonian(p);
        // Two stages: the control map reintroduces psi0, so bind it after.
        const Substitution bind_psi0 = {{"psi0", Expr::constant(p.psi0)}};
        auto fold = [&](const Expr& e) {
            return substitute(substitute(e, elim.control_map), bind_psi0);
        };
        h_reduced_ = fold(H);

        for (int i = 1; i <= p.n; ++i)
            rhs_.push_back(fold(differentiate(H, OCProblem::costate_name(i))));
        for (int i = 1; i <= p.n; ++i)
            rhs_.push_back(fold(Expr::neg(differentiate(H, OCProblem::state_name(i)))));
        for (int j = 1; j <= p.r; ++j)
            controls_.push_back(fold(elim.control_map.at(OCProblem::control_name(j))));

        for (const auto& e : rhs_) assert_phase_only(e);
        for (const auto& e : controls_) assert_phase_only(e);
        assert_phase_only(h_reduced_);

        slots_["t"] = 0;
        for (int i = 1; i <= p.n; ++i) slots_[OCProblem::state_name(i)] = i;
        for (int i = 1; i <= p.n; ++i) slots_[OCProblem::costate_name(i)] = p.n + i;
        for (const auto& e : rhs_) rhs_tapes_.emplace_back(e, slots_);
        for (const auto& e : controls_) control_tapes_.emplace_back(e, slots_);
    }

    const OCProblem& problem() const { return problem_; }
    const Expr& h_reduced() const { return h_reduced_; }
    const std::vector<Expr>& rhs() const { return rhs_; }
    const std::vector<Expr>& control_exprs() const { return controls_; }

    /// Evaluates the 2n-dimensional field; z = (t, x_1..x_n, psi_1..psi_n).
    void eval_rhs(const double* z, double* out) const {
        for (std::size_t i = 0; i < rhs_tapes_.size(); ++i) out[i] = rhs_tapes_[i].eval(z);
    }

    void eval_controls(const double* z, double* out) const {
        for (std::size_t j = 0; j < control_tapes_.size(); ++j)
            out[j] = control_tapes_[j].eval(z);
    }

private:
    void assert_phase_only(const Expr& e) const {
        for (const auto& v : free_variables(e))
            if (v == "psi0" || v.rfind('u', 0) == 0)
                throw InvalidArgument("field expression still depends on " + v);
    }

    OCProblem problem_;
    Expr h_reduced_;
    std::vector<Expr> rhs_;
    std::vector<Expr> controls_;
    std::map<std::string, int> slots_;
    std::vector<Tape> rhs_tapes_;
    std::vector<Tape> control_tapes_;
};

inline ExtremalField build_field(const OCProblem& p, const ControlElimination& elim) {
    return ExtremalField(p, elim);
}

namespace detail {

// Dormand-Prince 5(4) tableau.
struct Dopri5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    // Dense-output correction weights. The quartic term they build is the gap
    // between the emitted cubic Hermite and the 4th-order interpolant, so it
    // doubles as an interpolation error estimate.
    static constexpr double d1 = -12715105075.0 / 11282082432.0,
                            d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0,
                            d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

} // namespace detail

/// Integrates the Hamiltonian system with an adaptive embedded 5(4) pair and
/// cubic Hermite dense output on a uniform sample grid. t_end < t_start runs
/// the field backward; samples are returned in increasing time either way.
inline Trajectory integrate(const ExtremalField& field, const std::vector<double>& x0,
                            const std::vector<double>& psi_init, double t_start, double t_end,
                            double rtol = 1e-10, double atol = 1e-12, int samples = 200) {
    const OCProblem& p = field.problem();
    const int n = p.n;
    const int N = 2 * n;
    using D = detail::Dopri5;

    if (static_cast<int>(x0.size()) != n || static_cast<int>(psi_init.size()) != n)
        throw DimensionMismatch("initial state and costate must each have length n");
    if (t_start == t_end) throw InvalidArgument("integration span is empty");
    if (std::min(t_start, t_end) < p.a - 1e-12 || std::max(t_start, t_end) > p.b + 1e-12)
        throw InvalidArgument("integration span must lie inside the problem horizon");
    if (!(rtol > 0.0) || !(atol > 0.0)) throw InvalidArgument("tolerances must be positive");
    if (samples < 2) throw InvalidArgument("need at least two samples");

    Trajectory tr;
    tr.psi0 = p.psi0.to_double();

    std::vector<double> z(1 + N), y(N), k1(N), k2(N), k3(N), k4(N), k5(N), k6(N), k7(N);
    std::vector<double> ytmp(N), ynew(N), est(N);
    for (int i = 0; i < n; ++i) y[i] = x0[i];
    for (int i = 0; i < n; ++i) y[n + i] = psi_init[i];

    auto f = [&](double t, const std::vector<double>& yy, std::vector<double>& out) {
        z[0] = t;
        for (int i = 0; i < N; ++i) z[1 + i] = yy[i];
        field.eval_rhs(z.data(), out.data());
    };
    auto finite = [](const std::vector<double>& v) {
        for (double d : v)
            if (!std::isfinite(d)) return false;
        return true;
    };

    double t = t_start;
    f(t, y, k1);
    if (!finite(y) || !finite(k1)) throw NonFiniteState(t);

    // Sample grid in integration order; rows are emitted as steps pass them.
    std::vector<double> grid(samples);
    for (int k = 0; k < samples; ++k)
        grid[k] = t_start + (t_end - t_start) * static_cast<double>(k) / (samples - 1);

    auto emit = [&](double tg, const std::vector<double>& yy) {
        tr.t.push_back(tg);
        tr.x.emplace_back(yy.begin(), yy.begin() + n);
        tr.psi.emplace_back(yy.begin() + n, yy.end());
        z[0] = tg;
        for (int i = 0; i < N; ++i) z[1 + i] = yy[i];
        std::vector<double> uu(p.r);
        field.eval_controls(z.data(), uu.data());
        tr.u.push_back(std::move(uu));
    };
    emit(grid[0], y);
    int next_sample = 1;

    const double dir = t_end > t_start ? 1.0 : -1.0;
    const double span = std::abs(t_end - t_start);

    // Initial step size: standard two-probe heuristic.
    double h;
    {
        double d0 = 0.0, d1 = 0.0;
        for (int i = 0; i < N; ++i) {
            double sk = atol + rtol * std::abs(y[i]);
            d0 += (y[i] / sk) * (y[i] / sk);
            d1 += (k1[i] / sk) * (k1[i] / sk);
        }
        d0 = std::sqrt(d0 / N);
        d1 = std::sqrt(d1 / N);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, span);
        for (int i = 0; i < N; ++i) ytmp[i] = y[i] + h0 * dir * k1[i];
        f(t + h0 * dir, ytmp, k2);
        double d2 = 0.0;
        for (int i = 0; i < N; ++i) {
            double sk = atol + rtol * std::abs(y[i]);
            d2 += ((k2[i] - k1[i]) / sk) * ((k2[i] - k1[i]) / sk);
        }
        d2 = std::sqrt(d2 / N) / h0;
        double dm = std::max(d1, d2);
        double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        if (!std::isfinite(h1)) h1 = 1e-6;
        h = std::min({100.0 * h0, h1, span});
    }

    bool last_rejected = false;
    while ((t_end - t) * dir > 0.0) {
        h = std::min(h, std::abs(t_end - t));
        if (h < 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), 1.0))
            throw StepSizeUnderflow(t);
        const double hs = h * dir;

        for (int i = 0; i < N; ++i) ytmp[i] = y[i] + hs * D::a21 * k1[i];
        f(t + D::c2 * hs, ytmp, k2);
        for (int i = 0; i < N; ++i) ytmp[i] = y[i] + hs * (D::a31 * k1[i] + D::a32 * k2[i]);
        f(t + D::c3 * hs, ytmp, k3);
        for (int i = 0; i < N; ++i)
            ytmp[i] = y[i] + hs * (D::a41 * k1[i] + D::a42 * k2[i] + D::a43 * k3[i]);
        f(t + D::c4 * hs, ytmp, k4);
        for (int i = 0; i < N; ++i)
            ytmp[i] = y[i] +
                      hs * (D::a51 * k1[i] + D::a52 * k2[i] + D::a53 * k3[i] + D::a54 * k4[i]);
        f(t + D::c5 * hs, ytmp, k5);
        for (int i = 0; i < N; ++i)
            ytmp[i] = y[i] + hs * (D::a61 * k1[i] + D::a62 * k2[i] + D::a63 * k3[i] +
                                   D::a64 * k4[i] + D::a65 * k5[i]);
        f(t + hs, ytmp, k6);
        for (int i = 0; i < N; ++i)
            ynew[i] = y[i] + hs * (D::b1 * k1[i] + D::b3 * k3[i] + D::b4 * k4[i] +
                                   D::b5 * k5[i] + D::b6 * k6[i]);
        f(t + hs, ynew, k7);

        double err = 0.0;
        double erri = 0.0; // Hermite midpoint gap, worth rcont5/16 per component
        double abs_est = 0.0;
        bool ok = finite(ynew) && finite(k7);
        if (ok) {
            for (int i = 0; i < N; ++i) {
                est[i] = hs * (D::e1 * k1[i] + D::e3 * k3[i] + D::e4 * k4[i] + D::e5 * k5[i] +
                               D::e6 * k6[i] + D::e7 * k7[i]);
                double gap = hs / 16.0 *
                             (D::d1 * k1[i] + D::d3 * k3[i] + D::d4 * k4[i] + D::d5 * k5[i] +
                              D::d6 * k6[i] + D::d7 * k7[i]);
                double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
                err += (est[i] / sc) * (est[i] / sc);
                erri += (gap / sc) * (gap / sc);
                abs_est = std::max(abs_est, std::abs(est[i]));
            }
            err = std::max(std::sqrt(err / N), std::sqrt(erri / N));
            ok = std::isfinite(err);
        }

        if (!ok) {
            h *= 0.5;
            ++tr.stats.rejected;
            last_rejected = true;
            continue;
        }

        if (err <= 1.0) {
            // Accepted: fill every grid point inside (t, t+hs] by cubic
            // Hermite interpolation on the step endpoints and slopes.
            double t1 = t + hs;
            while (next_sample < samples && (grid[next_sample] - t1) * dir <= 0.0) {
                double th = (grid[next_sample] - t) / hs;
                double h00 = (1 + 2 * th) * (1 - th) * (1 - th);
                double h10 = th * (1 - th) * (1 - th);
                double h01 = th * th * (3 - 2 * th);
                double h11 = th * th * (th - 1);
                for (int i = 0; i < N; ++i)
                    ytmp[i] = h00 * y[i] + h10 * hs * k1[i] + h01 * ynew[i] + h11 * hs * k7[i];
                emit(grid[next_sample], ytmp);
                ++next_sample;
            }
            t = t1;
            y = ynew;
            k1 = k7;
            ++tr.stats.accepted;
            tr.stats.max_local_error = std::max(tr.stats.max_local_error, abs_est);
            tr.stats.sum_local_error += abs_est;
            double fac = 0.9 * std::pow(err > 1e-300 ? err : 1e-300, -0.2);
            fac = std::min(last_rejected ? 1.0 : 5.0, std::max(0.2, fac));
            h *= fac;
            last_rejected = false;
        } else {
            double fac = std::max(0.2, 0.9 * std::pow(err, -0.2));
            h *= fac;
            ++tr.stats.rejected;
            last_rejected = true;
        }
    }

    // Anything left on the grid sits within roundoff of t_end.
    while (next_sample < samples) {
        emit(grid[next_sample], y);
        ++next_sample;
    }

    if (dir < 0) {
        std::reverse(tr.t.begin(), tr.t.end());
        std::reverse(tr.x.begin(), tr.x.end());
        std::reverse(tr.u.begin(), tr.u.end());
        std::reverse(tr.psi.begin(), tr.psi.end());
    }
    return tr;
}

/// Evaluates an expression sample-by-sample along a trajectory. The binding
/// provides t, the states, controls, costates, and psi0.
inline std::vector<double> evaluate_along(const Trajectory& tr, const Expr& F) {
    Expr nf = normalize(F);
    std::vector<double> out;
    out.reserve(tr.t.size());
    const int n = tr.n();
    const int r = tr.r();
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        Binding b;
        b["t"] = tr.t[k];
        b["psi0"] = tr.psi0;
        for (int i = 0; i < n; ++i) {
            b[OCProblem::state_name(i + 1)] = tr.x[k][i];
            b[OCProblem::costate_name(i + 1)] = tr.psi[k][i];
        }
        for (int j = 0; j < r; ++j) b[OCProblem::control_name(j + 1)] = tr.u[k][j];
        out.push_back(evaluate(nf, b));
    }
    return out;
}

} // namespace cmotion

#endif
