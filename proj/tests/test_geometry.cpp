#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "liouville/geometry.hpp"
#include "liouville/rng.hpp"
#include "support/oracles.hpp"

using namespace liouville;

namespace {

vec pt(std::initializer_list<double> xs) {
    vec z(static_cast<int>(xs.size()));
    int i = 0;
    for (double x : xs) z[i++] = x;
    return z;
}

symplectic_structure nonstandard_2d() {
    return symplectic_structure::from_expressions(
        2, {{0, 1, expr::parse("1+q1^2", 2)}});
}

/// Random polynomial in dim variables, degree <= 3, built as expression.
expr::ptr random_poly(rng& r, int dim) {
    expr::ptr acc = expr::constant(r.uniform(-1, 1));
    for (int term = 0; term < 6; ++term) {
        expr::ptr t = expr::constant(r.uniform(-1, 1));
        const int deg = static_cast<int>(r.below(4));
        for (int d = 0; d < deg; ++d)
            t = expr::mul(t, expr::variable(static_cast<int>(r.below(dim))));
        acc = expr::add(acc, t);
    }
    return acc;
}

}  // namespace

TEST_CASE("hamiltonian vector field on the standard plane") {
    auto omega = symplectic_structure::standard(1);
    auto q = field_from_expression("q1", 2);
    auto H = field_from_expression("(q1^2+p1^2)/2", 2);
    auto c = field_from_expression("3", 2);

    const vec xq = hamiltonian_vector_field(omega, q, pt({1, 2}));
    CHECK(xq[0] == Catch::Approx(0.0).margin(1e-14));
    CHECK(xq[1] == Catch::Approx(1.0).margin(1e-14));

    const vec xc = hamiltonian_vector_field(omega, c, pt({0.3, -0.7}));
    CHECK(xc.norm() == 0.0);

    // H = (q^2+p^2)/2 generates X_H = (-p, q)
    const vec xh = hamiltonian_vector_field(omega, H, pt({1, 0}));
    CHECK(xh[0] == Catch::Approx(0.0).margin(1e-14));
    CHECK(xh[1] == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("degenerate form is rejected") {
    auto omega = symplectic_structure::from_expressions(
        2, {{0, 1, expr::parse("q1", 2)}});
    auto f = field_from_expression("q1", 2);
    CHECK_THROWS_AS(hamiltonian_vector_field(omega, f, pt({0, 0})),
                    singular_form_error);
}

TEST_CASE("poisson bracket convention {q,p} = +1") {
    auto omega = symplectic_structure::standard(1);
    auto q = field_from_expression("q1", 2);
    auto p = field_from_expression("p1", 2);
    rng r(3);
    for (int k = 0; k < 20; ++k) {
        const vec z = pt({r.uniform(-2, 2), r.uniform(-2, 2)});
        CHECK(poisson_bracket(omega, q, p, z) == Catch::Approx(1.0).margin(1e-13));
    }
    CHECK(poisson_bracket(omega, q, q, pt({0.4, 1.1})) == 0.0);
}

TEST_CASE("uncoupled oscillators commute") {
    auto omega = symplectic_structure::standard(2);
    auto h1 = field_from_expression("(q1^2+p1^2)/2", 4);
    auto h2 = field_from_expression("(q2^2+p2^2)/2", 4);
    rng r(5);
    for (int k = 0; k < 10; ++k) {
        vec z(4);
        for (int i = 0; i < 4; ++i) z[i] = r.uniform(-2, 2);
        CHECK(std::abs(poisson_bracket(omega, h1, h2, z)) < 1e-13);
    }
}

TEST_CASE("bracket antisymmetry is exact in floating point") {
    rng r(11);
    for (int trial = 0; trial < 25; ++trial) {
        mat W = mat::Zero(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j) {
                W(i, j) = r.uniform(-1, 1);
                W(j, i) = -W(i, j);
            }
        if (std::abs(W.determinant()) < 1e-2) continue;
        auto omega = symplectic_structure::constant(W);
        auto f = field_from_expression(random_poly(r, 4), 4);
        auto g = field_from_expression(random_poly(r, 4), 4);
        vec z(4);
        for (int i = 0; i < 4; ++i) z[i] = r.uniform(-1, 1);
        const double fg = poisson_bracket(omega, f, g, z);
        const double gf = poisson_bracket(omega, g, f, z);
        REQUIRE(fg == -gf);
    }
}

TEST_CASE("solver agrees with an independent dense solve") {
    rng r(17);
    for (int trial = 0; trial < 50; ++trial) {
        const int dim = (trial % 2 == 0) ? 4 : 6;
        mat W = mat::Zero(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = i + 1; j < dim; ++j) {
                W(i, j) = r.uniform(-1, 1);
                W(j, i) = -W(i, j);
            }
        if (std::abs(W.determinant()) < 1e-3) {
            --trial;
            continue;
        }
        auto omega = symplectic_structure::constant(W);
        auto f = field_from_expression(random_poly(r, dim), dim);
        vec z(dim);
        for (int i = 0; i < dim; ++i) z[i] = r.uniform(-1, 1);
        const vec mine = hamiltonian_vector_field(omega, f, z);
        const vec ref = oracles::gauss_solve(W, f.grad(z));
        REQUIRE((mine - ref).norm() <= 1e-12 * (1.0 + ref.norm()));
    }
}

TEST_CASE("closedness residuals") {
    auto grid2 = grid_points(chart_domain::box(1, -2, 2), 5);
    auto grid4 = grid_points(chart_domain::box(2, -2, 2), 3);

    SECTION("constant form is closed") {
        auto rep = check_closed(symplectic_structure::standard(2), grid4);
        CHECK(rep.max_residual == 0.0);
        CHECK(rep.pass);
    }
    SECTION("top-degree form on the plane is closed") {
        auto rep = check_closed(nonstandard_2d(), grid2);
        CHECK(rep.max_residual == 0.0);
    }
    SECTION("dq1^dp1 + (1+q1) dq2^dp2 is not closed") {
        auto omega = symplectic_structure::from_expressions(
            4, {{0, 2, expr::constant(1)}, {1, 3, expr::parse("1+q1", 4)}});
        auto rep = check_closed(omega, grid4, 1e-8);
        CHECK(rep.max_residual == Catch::Approx(1.0).margin(1e-12));
        CHECK_FALSE(rep.pass);
    }
}

TEST_CASE("nondegeneracy reports") {
    SECTION("standard determinant is one") {
        auto rep = check_nondegenerate(symplectic_structure::standard(2),
                                       grid_points(chart_domain::box(2, -1, 1), 3));
        CHECK(rep.min_abs_det == Catch::Approx(1.0).margin(1e-13));
        CHECK(rep.pass);
    }
    SECTION("scaled plane form at q=2") {
        std::vector<vec> g{pt({2.0, 0.0})};
        auto rep = check_nondegenerate(nonstandard_2d(), g);
        CHECK(rep.min_abs_det == Catch::Approx(25.0).margin(1e-12));
    }
    SECTION("vanishing form is flagged") {
        auto omega = symplectic_structure::from_expressions(
            2, {{0, 1, expr::parse("q1", 2)}});
        std::vector<vec> g{pt({0.0, 0.0})};
        auto rep = check_nondegenerate(omega, g);
        CHECK_FALSE(rep.pass);
    }
}

TEST_CASE("pullbacks") {
    auto omega = symplectic_structure::standard(1);

    SECTION("identity pullback") {
        point_map id = point_map::from_function([](const vec& z) { return z; });
        auto pulled = pullback_two_form(id, omega);
        CHECK(pulled.coeff(pt({0.3, 0.4}), 0, 1) == Catch::Approx(1.0).margin(1e-10));
    }
    SECTION("cubic shear gives (1+x^2) dx^dy") {
        point_map phi = point_map::from_function([](const vec& z) {
            vec w(2);
            w << z[0] + z[0] * z[0] * z[0] / 3.0, z[1];
            return w;
        });
        auto pulled = pullback_two_form(phi, omega);
        for (double x : {-1.0, -0.2, 0.0, 0.7, 1.4}) {
            CHECK(pulled.coeff(pt({x, 0.1}), 0, 1) ==
                  Catch::Approx(1.0 + x * x).margin(1e-9));
        }
    }
    SECTION("evaluation on coordinate directions") {
        const vec u = pt({1, 0});
        const vec v = pt({0, 1});
        CHECK(omega(pt({0, 0}), u, v) == 1.0);
        CHECK(omega(pt({0, 0}), v, u) == -1.0);
    }
    SECTION("image leaving a target box raises") {
        point_map far = point_map::from_function([](const vec& z) { return z * 100.0; });
        chart_domain target = chart_domain::box(1, -1, 1);
        auto pulled = pullback_two_form(far, omega, &target);
        CHECK_THROWS_AS(pulled.coeff(pt({0.5, 0.5}), 0, 1), out_of_domain_error);
    }
}

TEST_CASE("jacobi identity holds when the form is closed") {
    rng r(23);
    auto omega = symplectic_structure::from_expressions(
        4, {{0, 2, expr::parse("1+q1^2", 4)}, {1, 3, expr::constant(1)}});
    REQUIRE(check_closed(omega, grid_points(chart_domain::box(2, -1, 1), 3)).pass);
    for (int trial = 0; trial < 8; ++trial) {
        auto f = field_from_expression(random_poly(r, 4), 4);
        auto g = field_from_expression(random_poly(r, 4), 4);
        auto h = field_from_expression(random_poly(r, 4), 4);
        auto bracket_field = [&](const scalar_field& a, const scalar_field& b) {
            return scalar_field::from_function(
                [&omega, a, b](const vec& z) { return poisson_bracket(omega, a, b, z); },
                1e-5);
        };
        vec z(4);
        for (int i = 0; i < 4; ++i) z[i] = r.uniform(-0.8, 0.8);
        const double jac = poisson_bracket(omega, f, bracket_field(g, h), z) +
                           poisson_bracket(omega, g, bracket_field(h, f), z) +
                           poisson_bracket(omega, h, bracket_field(f, g), z);
        REQUIRE(std::abs(jac) < 1e-6);
    }
}

TEST_CASE("finite-difference gradients track exact ones at O(h^2)") {
    rng r(29);
    for (int trial = 0; trial < 30; ++trial) {
        auto poly = random_poly(r, 4);
        auto exact = field_from_expression(poly, 4);
        auto fd = scalar_field::from_function(exact.eval);
        vec z(4);
        for (int i = 0; i < 4; ++i) z[i] = r.uniform(-1, 1);
        REQUIRE((exact.grad(z) - fd.grad(z)).norm() < 1e-8 * (1.0 + exact.grad(z).norm()));
    }
}
