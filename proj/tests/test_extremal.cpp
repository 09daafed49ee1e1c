#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cmotion/extremal.hpp"
#include "cmotion/parse.hpp"
#include "test_util.hpp"

using namespace cmotion;

namespace {

ExtremalField field_for(const OCProblem& p) {
    Expr H = build_hamiltonian(p);
    return build_field(p, eliminate_controls(p, H));
}

} // namespace

TEST_CASE("build_field substitutes controls and psi0 out of the system") {
    OCProblem p = testutil::make_quartic();
    ExtremalField f = field_for(p);
    REQUIRE(f.rhs().size() == 8);
    for (const auto& e : f.rhs()) {
        auto fv = free_variables(e);
        CHECK(fv.count("psi0") == 0);
        CHECK(fv.count("u1") == 0);
        CHECK(fv.count("u2") == 0);
    }
    // dx3/dt = -x1*(x1^2+x2^2) + u1 with u1 = psi3/2 at psi0 = -1.
    CHECK(compare(f.rhs()[2],
                  parse("-x1^3 - x1*x2^2 + 1/2*psi3", p.phase_symbols())) == 0);
    // dpsi1/dt = -dH/dx1.
    CHECK(compare(f.rhs()[4],
                  parse("3*psi3*x1^2 + psi3*x2^2 + 2*psi4*x1*x2", p.phase_symbols())) == 0);
}

TEST_CASE("straight-line extremal integrates exactly") {
    OCProblem p = testutil::make_scalar();
    ExtremalField f = field_for(p);
    Trajectory tr = integrate(f, {0.0}, {2.0}, 0.0, 1.0);
    REQUIRE(tr.t.size() == 200);
    CHECK(tr.t.front() == 0.0);
    CHECK(tr.t.back() == 1.0);
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        CHECK(std::abs(tr.x[k][0] - tr.t[k]) < 1e-12);    // x(t) = t
        CHECK(std::abs(tr.psi[k][0] - 2.0) < 1e-14);      // psi constant
        CHECK(std::abs(tr.u[k][0] - 1.0) < 1e-14);        // u = psi/2
    }
    CHECK(tr.psi0 == -1.0);
    for (std::size_t k = 1; k < tr.t.size(); ++k) CHECK(tr.t[k] > tr.t[k - 1]);
}

TEST_CASE("polynomial flows are reproduced to machine accuracy") {
    // n=2 double integrator: psi2 is linear in t, x cubic; RK5 is exact.
    OCProblem p;
    p.n = 2;
    p.r = 1;
    p.a = 0.0;
    p.b = 2.0;
    auto syms = p.input_symbols();
    p.lagrangian = parse("u1^2", syms);
    p.dynamics = {parse("x2", syms), parse("u1", syms)};
    p = validate(p);
    ExtremalField f = field_for(p);

    const double c = 0.7, d = -0.3;
    Trajectory tr = integrate(f, {0.5, -1.0}, {c, d}, 0.0, 2.0);
    // psi1 = c, psi2 = d - c*t, u = psi2/2, x2 = x2(0) + (d*t - c*t^2/2)/2.
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        double t = tr.t[k];
        double psi2 = d - c * t;
        double x2 = -1.0 + 0.5 * (d * t - 0.5 * c * t * t);
        double x1 = 0.5 - t + 0.5 * (0.5 * d * t * t - c * t * t * t / 6.0);
        CHECK(std::abs(tr.psi[k][1] - psi2) < 1e-12);
        CHECK(std::abs(tr.x[k][1] - x2) < 1e-12);
        CHECK(std::abs(tr.x[k][0] - x1) < 1e-11);
        CHECK(std::abs(tr.u[k][0] - psi2 / 2.0) < 1e-12);
    }
}

TEST_CASE("autonomous Hamiltonian drifts no more than 100x rtol") {
    OCProblem p = testutil::make_quartic();
    ExtremalField f = field_for(p);
    const double rtol = 1e-10;
    auto trs = testutil::seeded_extremals(f, 3, 31415, rtol, 1e-12, 200);
    for (const auto& tr : trs) {
        std::vector<double> h = evaluate_along(tr, f.h_reduced());
        double h0 = h.front();
        for (double v : h) CHECK(std::abs(v - h0) <= 100.0 * rtol * (1.0 + std::abs(h0)));
    }
}

TEST_CASE("tightening tolerances reduces the terminal error") {
    OCProblem p = testutil::make_quartic();
    ExtremalField f = field_for(p);
    std::vector<double> x0 = {0.8, -0.4, 0.3, 0.6}, l0 = {0.5, -0.7, 0.9, 0.2};

    Trajectory oracle = integrate(f, x0, l0, 0.0, 5.0, 1e-12, 1e-14, 2);
    auto terminal_err = [&](double rtol, double atol) {
        Trajectory tr = integrate(f, x0, l0, 0.0, 5.0, rtol, atol, 2);
        double err = 0.0;
        for (int i = 0; i < p.n; ++i) {
            err = std::max(err, std::abs(tr.x.back()[i] - oracle.x.back()[i]));
            err = std::max(err, std::abs(tr.psi.back()[i] - oracle.psi.back()[i]));
        }
        return err;
    };

    double loose = terminal_err(1e-5, 1e-7);
    double mid = terminal_err(1e-7, 1e-9);
    double tight = terminal_err(1e-9, 1e-11);
    CHECK(loose > tight);
    CHECK(mid < loose * 1.01);
    CHECK(tight < 1e-6);
}

TEST_CASE("backward integration returns an increasing grid and retraces the flow") {
    OCProblem p = testutil::make_quartic();
    ExtremalField f = field_for(p);
    std::vector<double> x0 = {0.8, -0.4, 0.3, 0.6}, l0 = {0.5, -0.7, 0.9, 0.2};
    Trajectory fwd = integrate(f, x0, l0, 0.0, 5.0);

    std::vector<double> xT = fwd.x.back(), lT = fwd.psi.back();
    Trajectory bwd = integrate(f, xT, lT, 5.0, 0.0);
    for (std::size_t k = 1; k < bwd.t.size(); ++k) CHECK(bwd.t[k] > bwd.t[k - 1]);
    CHECK(bwd.t.front() == 0.0);
    CHECK(bwd.t.back() == 5.0);

    double mismatch = 0.0;
    for (int i = 0; i < p.n; ++i) {
        mismatch = std::max(mismatch, std::abs(bwd.x.front()[i] - x0[i]));
        mismatch = std::max(mismatch, std::abs(bwd.psi.front()[i] - l0[i]));
    }
    double budget = 10.0 * (fwd.stats.sum_local_error + bwd.stats.sum_local_error);
    CHECK(mismatch <= budget);
}

TEST_CASE("controls on the grid satisfy the stationary control map") {
    OCProblem p = testutil::make_quartic();
    ExtremalField f = field_for(p);
    Trajectory tr = integrate(f, {0.5, 0.4, -0.3, 0.2}, {0.1, -0.6, 0.7, 0.3}, 0.0, 5.0);
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        CHECK(tr.u[k][0] == tr.psi[k][2] / 2.0);  // u1 = -psi3/(2*psi0), psi0 = -1
        CHECK(tr.u[k][1] == tr.psi[k][3] / 2.0);
    }
}

TEST_CASE("finite-time blow-up ends in StepSizeUnderflow with the last good time") {
    OCProblem p;
    p.n = 1;
    p.r = 1;
    p.a = 0.0;
    p.b = 1.0;
    auto syms = p.input_symbols();
    p.lagrangian = parse("u1^2", syms);
    p.dynamics = {parse("x1^2 + u1", syms)};
    p = validate(p);
    ExtremalField f = field_for(p);
    // psi = 0 kills the control; dx/dt = x^2 from x=3 blows up at t = 1/3.
    try {
        integrate(f, {3.0}, {0.0}, 0.0, 1.0);
        FAIL("expected StepSizeUnderflow");
    } catch (const StepSizeUnderflow& e) {
        CHECK(e.last_good_time() > 0.2);
        CHECK(e.last_good_time() < 0.4);
    }
}

TEST_CASE("non-finite initial data is rejected") {
    OCProblem p = testutil::make_scalar();
    ExtremalField f = field_for(p);
    CHECK_THROWS_AS(
        integrate(f, {std::numeric_limits<double>::infinity()}, {1.0}, 0.0, 1.0),
        NonFiniteState);
}

TEST_CASE("integration preconditions are enforced") {
    OCProblem p = testutil::make_scalar();
    ExtremalField f = field_for(p);
    CHECK_THROWS_AS(integrate(f, {0.0, 1.0}, {1.0}, 0.0, 1.0), DimensionMismatch);
    CHECK_THROWS_AS(integrate(f, {0.0}, {1.0}, 0.0, 0.0), InvalidArgument);
    CHECK_THROWS_AS(integrate(f, {0.0}, {1.0}, 0.0, 3.0), InvalidArgument);
    CHECK_THROWS_AS(integrate(f, {0.0}, {1.0}, 0.0, 1.0, 1e-10, 1e-12, 1), InvalidArgument);
    CHECK_THROWS_AS(integrate(f, {0.0}, {1.0}, 0.0, 1.0, -1.0), InvalidArgument);
}

TEST_CASE("evaluate_along binds the full phase and fails on alien symbols") {
    OCProblem p = testutil::make_scalar();
    ExtremalField f = field_for(p);
    Trajectory tr = integrate(f, {0.0}, {2.0}, 0.0, 1.0);

    // H restated with controls in place: psi0*u1^2 + psi1*u1.
    Expr H_full = parse("psi0*u1^2 + psi1*u1", p.phase_symbols());
    std::vector<double> vals = evaluate_along(tr, H_full);
    for (double v : vals) CHECK(std::abs(v - 1.0) < 1e-12);

    CHECK_THROWS_AS(evaluate_along(tr, Expr::variable("q9")), UnboundVariable);
}
