#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cmotion/discovery.hpp"
#include "cmotion/parse.hpp"
#include "test_util.hpp"

using namespace cmotion;

TEST_CASE("generate_basis enumerates bilinear monomials deterministically") {
    AnsatzSpec spec;

    SECTION("n=2, degree 0") {
        OCProblem p = testutil::make_riemannian(true);
        auto basis = generate_basis(p, spec);
        REQUIRE(basis.size() == 4);
        auto syms = p.phase_symbols();
        CHECK(basis[0] == parse("psi1*x1", syms));
        CHECK(basis[1] == parse("psi1*x2", syms));
        CHECK(basis[2] == parse("psi2*x1", syms));
        CHECK(basis[3] == parse("psi2*x2", syms));
    }

    SECTION("n=4, degree 0 has all 16 products") {
        OCProblem p = testutil::make_quartic();
        auto basis = generate_basis(p, spec);
        REQUIRE(basis.size() == 16);
        auto syms = p.phase_symbols();
        CHECK(basis[4] == parse("psi2*x1", syms));   // i=2, j=1
        CHECK(basis[14] == parse("psi4*x3", syms));  // i=4, j=3
    }

    SECTION("time powers multiply the whole block") {
        OCProblem p = testutil::make_scalar();
        spec.max_t_degree = 2;
        auto basis = generate_basis(p, spec);
        REQUIRE(basis.size() == 3);
        auto syms = p.phase_symbols();
        CHECK(basis[1] == parse("psi1*x1*t", syms));
        CHECK(basis[2] == parse("psi1*x1*t^2", syms));
    }

    SECTION("BilinearPlusHT appends the reduced Hamiltonian block") {
        OCProblem p = testutil::make_time_scaled();
        spec.family = AnsatzFamily::BilinearPlusHT;
        spec.max_t_degree = 1;
        auto basis = generate_basis(p, spec);
        REQUIRE(basis.size() == 4);
        Expr H = build_hamiltonian(p);
        Expr h_red = reduce_modulo_stationarity(H, eliminate_controls(p, H));
        CHECK(basis[2] == h_red);
        CHECK(basis[3] == normalize(h_red * Expr::variable("t")));
    }

    SECTION("custom bases pass through after validation") {
        OCProblem p = testutil::make_riemannian(true);
        spec.family = AnsatzFamily::Custom;
        spec.custom_basis = {parse("psi1*x1 + psi2*x2", {"x1", "x2", "psi1", "psi2"})};
        auto basis = generate_basis(p, spec);
        REQUIRE(basis.size() == 1);
        CHECK(basis[0] == spec.custom_basis[0]);
    }

    SECTION("invalid bases are rejected") {
        OCProblem p = testutil::make_scalar();
        spec.family = AnsatzFamily::Custom;
        CHECK_THROWS_AS(generate_basis(p, spec), EmptyBasis);
        spec.custom_basis = {parse("u1*x1", {"x1", "u1"})};
        CHECK_THROWS_AS(generate_basis(p, spec), ForbiddenSymbol);
        spec.custom_basis = {parse("q3", {"q3"})};
        CHECK_THROWS_AS(generate_basis(p, spec), ForbiddenSymbol);
        spec.custom_basis = {Expr::variable("x1"), parse("x1 + 0", {"x1"})};
        CHECK_THROWS_AS(generate_basis(p, spec), InvalidArgument);
    }
}

TEST_CASE("residual_matrix samples the reduced residual operator") {
    OCProblem p = testutil::make_quartic();
    AnsatzSpec spec;
    spec.seed = 99;

    SECTION("a symbolically conserved element gives an exactly zero column") {
        spec.family = AnsatzFamily::Custom;
        spec.custom_basis = {
            parse("-psi1*x2 + psi2*x1 - psi3*x4 + psi4*x3", p.phase_symbols())};
        Eigen::MatrixXd M = residual_matrix(spec.custom_basis, p, spec);
        REQUIRE(M.rows() == 4);
        CHECK(M.cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("entries agree with direct evaluation of the reduced residual") {
        spec.family = AnsatzFamily::Custom;
        spec.custom_basis = {parse("psi1*x1", p.phase_symbols())};
        spec.sample_count = 3;
        Eigen::MatrixXd M = residual_matrix(spec.custom_basis, p, spec);

        Expr H = build_hamiltonian(p);
        ControlElimination elim = eliminate_controls(p, H);
        Expr col = reduce_modulo_stationarity(
            residual(spec.custom_basis[0], H, p), elim);

        std::mt19937_64 rng(spec.seed);
        for (int s = 0; s < 3; ++s) {
            Binding b;
            b["t"] = p.a + (p.b - p.a) * detail::unit_sample(rng);
            b["psi0"] = p.psi0.to_double();
            for (int i = 1; i <= p.n; ++i) {
                b[OCProblem::state_name(i)] = detail::annulus_sample(rng, 0.1, 2.0);
                b[OCProblem::costate_name(i)] = detail::annulus_sample(rng, 0.1, 2.0);
            }
            CHECK(M(s, 0) == Catch::Approx(evaluate(col, b)).epsilon(1e-12));
            CHECK(std::abs(M(s, 0)) > 1e-6); // generically nonzero
        }
    }

    SECTION("columns are linear in the basis element") {
        auto syms = p.phase_symbols();
        Expr g1 = parse("psi1*x1", syms), g2 = parse("psi3*x2", syms);
        auto column = [&](const Expr& g) {
            AnsatzSpec s2 = spec;
            s2.family = AnsatzFamily::Custom;
            s2.custom_basis = {g};
            s2.sample_count = 8;
            return residual_matrix(s2.custom_basis, p, s2);
        };
        Eigen::MatrixXd c1 = column(g1), c2 = column(g2);
        Eigen::MatrixXd mix = column(normalize(Expr::constant(3) * g1 + g2));
        CHECK((mix - (3.0 * c1 + c2)).cwiseAbs().maxCoeff() < 1e-12 * mix.cwiseAbs().maxCoeff() + 1e-12);
    }

    SECTION("zero sample count is a precondition violation") {
        spec.sample_count = 0;
        auto basis = generate_basis(p, AnsatzSpec{});
        CHECK_THROWS_AS(residual_matrix(basis, p, spec), InvalidArgument);
    }
}

TEST_CASE("extract_nullspace finds orthonormal kernels") {
    SECTION("identity has none") {
        CHECK(extract_nullspace(Eigen::MatrixXd::Identity(2, 2)).empty());
    }

    SECTION("zero matrix is all kernel") {
        auto vs = extract_nullspace(Eigen::MatrixXd::Zero(5, 3));
        REQUIRE(vs.size() == 3);
        for (std::size_t i = 0; i < vs.size(); ++i)
            for (std::size_t j = 0; j < vs.size(); ++j) {
                double dot = 0.0;
                for (int k = 0; k < 3; ++k) dot += vs[i][k] * vs[j][k];
                CHECK(dot == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-12));
            }
    }

    SECTION("quartic bilinear matrix contains the rotational integral") {
        OCProblem p = testutil::make_quartic();
        AnsatzSpec spec;
        spec.seed = 7;
        auto basis = generate_basis(p, spec);
        auto vs = extract_nullspace(residual_matrix(basis, p, spec));
        REQUIRE(!vs.empty());

        // Coefficients of -psi1*x2 + psi2*x1 - psi3*x4 + psi4*x3 in basis
        // order (psi_i major, x_j minor), unit length.
        Eigen::VectorXd target = Eigen::VectorXd::Zero(16);
        target(1) = -0.5;
        target(4) = 0.5;
        target(11) = -0.5;
        target(14) = 0.5;

        Eigen::VectorXd proj = Eigen::VectorXd::Zero(16);
        for (const auto& v : vs) {
            Eigen::Map<const Eigen::VectorXd> vv(v.data(), 16);
            proj += vv.dot(target) * vv;
        }
        CHECK((target - proj).norm() <= 1e-8);
    }
}

TEST_CASE("discover recovers the quartic oscillator's rotational integral") {
    OCProblem p = testutil::make_quartic();
    AnsatzSpec spec;
    spec.seed = 12345;
    DiscoveryResult res = discover(p, spec);

    REQUIRE(!res.candidates.empty());
    Expr F = parse("-psi1*x2 + psi2*x1 - psi3*x4 + psi4*x3", p.phase_symbols());
    bool found = false;
    for (const auto& c : res.candidates)
        if (c == F || c == normalize(Expr::constant(-1) * F)) found = true;
    CHECK(found);

    for (std::size_t i = 0; i < res.candidates.size(); ++i) {
        if (res.verdicts[i].symbolic_status == SymbolicStatus::ConservedSymbolically &&
            res.verdicts[i].numeric_checked)
            CHECK(res.verdicts[i].numeric_pass);
    }
    CHECK(res.singular_values.size() == 16);
    CHECK(res.threshold > 0.0);
}

TEST_CASE("discover separates the homogeneous and quadratic interpolation dynamics") {
    AnsatzSpec spec;
    spec.seed = 5150;
    Expr momentum = parse("psi1*x1 + psi2*x2", {"x1", "x2", "psi1", "psi2"});

    SECTION("homogeneous fields: momentum map recovered and certified") {
        DiscoveryResult res = discover(testutil::make_riemannian(true), spec);
        REQUIRE(res.candidates.size() == 1);
        CHECK(res.candidates[0] == momentum);
        CHECK(res.verdicts[0].symbolic_status == SymbolicStatus::ConservedSymbolically);
        CHECK(res.verdicts[0].numeric_pass);
    }

    SECTION("quadratic fields: momentum map absent") {
        DiscoveryResult res = discover(testutil::make_riemannian(false), spec);
        for (const auto& c : res.candidates) CHECK_FALSE(c == momentum);
    }
}

TEST_CASE("discover finds the time-rescaled integral over the extended ansatz") {
    OCProblem p = testutil::make_time_scaled();
    AnsatzSpec spec;
    spec.family = AnsatzFamily::BilinearPlusHT;
    spec.max_t_degree = 1;
    spec.seed = 2024;
    DiscoveryResult res = discover(p, spec);

    Expr H = build_hamiltonian(p);
    Expr h_red = reduce_modulo_stationarity(H, eliminate_controls(p, H));
    Expr want = normalize(parse("psi1*x1", p.phase_symbols()) + h_red * Expr::variable("t"));
    bool found = false;
    for (const auto& c : res.candidates)
        if (c == want || c == normalize(Expr::constant(-1) * want)) found = true;
    CHECK(found);
}

TEST_CASE("scaling a basis element rescales its coefficient, not the candidate") {
    OCProblem p = testutil::make_riemannian(true);
    AnsatzSpec spec;
    spec.family = AnsatzFamily::Custom;
    spec.seed = 31;
    auto syms = p.phase_symbols();
    spec.custom_basis = {parse("psi1*x1", syms), parse("psi2*x2", syms),
                         parse("psi2*x1", syms)};
    DiscoveryResult plain = discover(p, spec);

    spec.custom_basis[0] = parse("3*psi1*x1", syms);
    DiscoveryResult scaled = discover(p, spec);

    REQUIRE(plain.candidates.size() == 1);
    REQUIRE(scaled.candidates.size() == 1);
    CHECK(plain.candidates[0] == scaled.candidates[0]);
    REQUIRE(plain.coefficient_vectors.size() == 1);
    REQUIRE(scaled.coefficient_vectors.size() == 1);
    double r_plain = plain.coefficient_vectors[0][0] / plain.coefficient_vectors[0][1];
    double r_scaled = scaled.coefficient_vectors[0][0] / scaled.coefficient_vectors[0][1];
    CHECK(r_scaled == Catch::Approx(r_plain / 3.0).epsilon(1e-9));
}

TEST_CASE("discovery is deterministic for a fixed seed") {
    OCProblem p = testutil::make_quartic();
    AnsatzSpec spec;
    spec.seed = 4242;
    DiscoveryResult a = discover(p, spec);
    DiscoveryResult b = discover(p, spec);

    REQUIRE(a.singular_values.size() == b.singular_values.size());
    for (std::size_t i = 0; i < a.singular_values.size(); ++i)
        CHECK(a.singular_values[i] == b.singular_values[i]);
    REQUIRE(a.coefficient_vectors.size() == b.coefficient_vectors.size());
    for (std::size_t i = 0; i < a.coefficient_vectors.size(); ++i)
        for (std::size_t k = 0; k < a.coefficient_vectors[i].size(); ++k)
            CHECK(a.coefficient_vectors[i][k] == b.coefficient_vectors[i][k]);
    REQUIRE(a.candidates.size() == b.candidates.size());
    for (std::size_t i = 0; i < a.candidates.size(); ++i)
        CHECK(to_string(a.candidates[i]) == to_string(b.candidates[i]));
}
