#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cmotion/conservation.hpp"
#include "cmotion/parse.hpp"
#include "test_util.hpp"

using namespace cmotion;

namespace {

Expr quartic_first_integral(const OCProblem& p) {
    return parse("-psi1*x2 + psi2*x1 - psi3*x4 + psi4*x3", p.phase_symbols());
}

} // namespace

TEST_CASE("quartic oscillator: rotational first integral") {
    OCProblem p = testutil::make_quartic();
    Expr H = build_hamiltonian(p);
    Expr F = quartic_first_integral(p);

    SECTION("raw residual collapses to the control torque") {
        Expr r = residual(F, H, p);
        CHECK(r == parse("psi4*u1 - psi3*u2", p.phase_symbols()));
    }

    SECTION("residual vanishes modulo stationarity") {
        ControlElimination elim = eliminate_controls(p, H);
        Expr reduced = reduce_modulo_stationarity(residual(F, H, p), elim);
        CHECK(reduced == Expr::constant(0));
    }

    SECTION("symbolic verdict is conserved") {
        ConservationVerdict v = check_symbolic(F, p);
        CHECK(v.symbolic_status == SymbolicStatus::ConservedSymbolically);
        REQUIRE(v.reduced_residual.has_value());
        CHECK(*v.reduced_residual == Expr::constant(0));
    }

    SECTION("numeric drift stays below 1e-7 on seeded extremals") {
        ExtremalField f = build_field(p, eliminate_controls(p, H));
        auto trs = testutil::seeded_extremals(f, 10, 20240915);
        ConservationVerdict v = check_symbolic(F, p);
        CHECK(check_numeric(v, trs, 1e-7));
        REQUIRE(v.drift_reports.size() == 10);
        for (const auto& rep : v.drift_reports) CHECK(rep.relative_drift <= 1e-7);
        CHECK(v.numeric_checked);
        CHECK(v.numeric_pass);
    }

    SECTION("perturbing the candidate is caught both ways") {
        Expr bad = normalize(F + parse("psi1*x1", p.phase_symbols()));
        ConservationVerdict v = check_symbolic(bad, p);
        CHECK(v.symbolic_status == SymbolicStatus::NonzeroResidual);

        ExtremalField f = build_field(p, eliminate_controls(p, H));
        auto trs = testutil::seeded_extremals(f, 5, 20240915);
        check_numeric(v, trs, 1e-7);
        CHECK_FALSE(v.numeric_pass);
        double worst = 0.0;
        for (const auto& rep : v.drift_reports) worst = std::max(worst, rep.relative_drift);
        CHECK(worst > 1e-3);
    }
}

TEST_CASE("the Hamiltonian is its own clock: dH/dt along the flow equals dH/dt") {
    SECTION("autonomous problem") {
        OCProblem p = testutil::make_quartic();
        Expr H = build_hamiltonian(p);
        CHECK(residual(H, H, p) == Expr::constant(0));
        ConservationVerdict v = check_symbolic(H, p);
        CHECK(v.symbolic_status == SymbolicStatus::ConservedSymbolically);
    }

    SECTION("time-dependent problem") {
        OCProblem p = testutil::make_time_scaled();
        Expr H = build_hamiltonian(p);
        CHECK(residual(H, H, p) == differentiate(H, "t"));
        ConservationVerdict v = check_symbolic(H, p);
        CHECK(v.symbolic_status == SymbolicStatus::NonzeroResidual);
    }
}

TEST_CASE("state-scaled problem conserves H*psi1*x1") {
    OCProblem p = testutil::make_state_scaled();
    Expr H = build_hamiltonian(p);
    Expr F = normalize(H * parse("psi1*x1", p.phase_symbols()));

    ConservationVerdict v = check_symbolic(F, p);
    CHECK(v.symbolic_status == SymbolicStatus::ConservedSymbolically);

    ExtremalField f = build_field(p, eliminate_controls(p, H));
    auto trs = testutil::seeded_extremals(f, 5, 777);
    CHECK(check_numeric(v, trs, 1e-7));
}

TEST_CASE("time-scaled problem conserves psi1*x1 + H*t") {
    OCProblem p = testutil::make_time_scaled();
    Expr H = build_hamiltonian(p);
    Expr F = normalize(parse("psi1*x1", p.phase_symbols()) + H * Expr::variable("t"));

    ConservationVerdict v = check_symbolic(F, p);
    CHECK(v.symbolic_status == SymbolicStatus::ConservedSymbolically);
    // The raw residual already cancels; no stationarity reduction is needed.
    CHECK(v.raw_residual == Expr::constant(0));

    ExtremalField f = build_field(p, eliminate_controls(p, H));
    auto trs = testutil::seeded_extremals(f, 5, 778);
    CHECK(check_numeric(v, trs, 1e-7));
}

TEST_CASE("momentum map survives only the homogeneous interpolation dynamics") {
    Expr F = parse("psi1*x1 + psi2*x2", {"x1", "x2", "psi1", "psi2"});

    SECTION("homogeneous fields conserve it") {
        OCProblem p = testutil::make_riemannian(true);
        ConservationVerdict v = check_symbolic(F, p);
        CHECK(v.symbolic_status == SymbolicStatus::ConservedSymbolically);
        CHECK(v.raw_residual == Expr::constant(0));

        ExtremalField f = build_field(p, eliminate_controls(p, build_hamiltonian(p)));
        auto trs = testutil::seeded_extremals(f, 5, 41);
        CHECK(check_numeric(v, trs, 1e-7));
    }

    SECTION("quadratic fields break it, symbolically and numerically") {
        OCProblem p = testutil::make_riemannian(false);
        ConservationVerdict v = check_symbolic(F, p);
        CHECK(v.symbolic_status == SymbolicStatus::NonzeroResidual);
        REQUIRE(v.reduced_residual.has_value());
        CHECK(*v.reduced_residual == parse("psi2^2*x1^4/psi0", p.phase_symbols()));

        ExtremalField f = build_field(p, eliminate_controls(p, build_hamiltonian(p)));
        auto trs = testutil::seeded_extremals(f, 5, 41);
        check_numeric(v, trs, 1e-7);
        CHECK_FALSE(v.numeric_pass);
        double worst = 0.0;
        for (const auto& rep : v.drift_reports) worst = std::max(worst, rep.relative_drift);
        CHECK(worst > 1e-3);
    }
}

TEST_CASE("control-dependent candidates need a vanishing control derivative") {
    OCProblem p = testutil::make_quartic();
    // F = u1 has zero raw residual but is not a function of the flow alone.
    ConservationVerdict v = check_symbolic(Expr::variable("u1"), p);
    CHECK(v.raw_residual == Expr::constant(0));
    CHECK(v.symbolic_status == SymbolicStatus::Undecidable);
    CHECK(v.note.find("u1") != std::string::npos);
}

TEST_CASE("candidates over alien symbols are rejected") {
    OCProblem p = testutil::make_scalar();
    CHECK_THROWS_AS(check_symbolic(parse("x1*q7", {"x1", "q7"}), p), ForbiddenSymbol);
    CHECK_THROWS_AS(check_symbolic(parse("x2", {"x2"}), p), ForbiddenSymbol);
}

TEST_CASE("problems without eliminable controls yield undecidable verdicts") {
    OCProblem p = testutil::make_scalar();
    p.control_set.kind = ControlSetKind::Box;
    p.control_set.bounds = {{-1.0, 1.0}};
    p = validate(p);
    ConservationVerdict v = check_symbolic(Expr::variable("x1"), p);
    CHECK(v.symbolic_status == SymbolicStatus::Undecidable);
    CHECK(v.note.find("control elimination unavailable") == 0);
    CHECK_FALSE(v.reduced_residual.has_value());
}

TEST_CASE("numeric drift: growing and constant candidates behave as documented") {
    OCProblem p = testutil::make_scalar();
    ExtremalField f = build_field(p, eliminate_controls(p, build_hamiltonian(p)));
    Trajectory tr = integrate(f, {0.0}, {2.0}, 0.0, 1.0);

    SECTION("x1 grows linearly and fails a tight tolerance") {
        ConservationVerdict v = check_symbolic(Expr::variable("x1"), p);
        CHECK(v.symbolic_status == SymbolicStatus::NonzeroResidual);
        CHECK_FALSE(check_numeric(v, {tr}, 1e-7));
        REQUIRE(v.drift_reports.size() == 1);
        // x(t) = t from x0 = 0: relative drift is |b - a| / (1 + 0).
        CHECK(std::abs(v.drift_reports[0].relative_drift - 1.0) < 1e-9);
    }

    SECTION("the constant symbol psi0 has exactly zero drift") {
        ConservationVerdict v = check_symbolic(Expr::variable("psi0"), p);
        CHECK(check_numeric(v, {tr}, 1e-7));
        CHECK(v.drift_reports[0].max_abs_deviation == 0.0);
        CHECK(v.drift_reports[0].relative_drift == 0.0);
    }
}
