#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "biharm/grid.hpp"
#include "doctest.h"

using namespace biharm;

TEST_CASE("unit square lattice") {
    const GridPtr g = build_domain(DomainSpec::unit_square(), 65);
    CHECK(g->nx() == 65);
    CHECK(g->ny() == 65);
    CHECK(g->h() == doctest::Approx(1.0 / 64).epsilon(1e-15));
    CHECK(g->unknown_count() == 63 * 63);
    std::size_t boundary = 0;
    for (std::size_t j = 0; j < g->ny(); ++j) {
        for (std::size_t i = 0; i < g->nx(); ++i) {
            const bool edge = i == 0 || j == 0 || i + 1 == g->nx() || j + 1 == g->ny();
            CHECK((g->node_class(i, j) == NodeClass::boundary) == edge);
            CHECK(g->node_class(i, j) != NodeClass::exterior);
            boundary += edge ? 1 : 0;
        }
    }
    CHECK(boundary == 4 * 64);
    // Unknown order follows row-major node order.
    const auto nodes = g->interior_nodes();
    for (std::size_t k = 1; k < nodes.size(); ++k) CHECK(nodes[k - 1] < nodes[k]);
    CHECK(g->unknown_of(g->index(1, 1)) == 0);
    CHECK(g->unknown_of(g->index(0, 3)) == -1);
}

TEST_CASE("rectangle geometry validation") {
    CHECK_THROWS_AS((void)build_domain(DomainSpec::unit_square(), 4), GeometryError);
    CHECK_THROWS_AS((void)build_domain(DomainSpec::rectangle({0, 0}, {1.0, 0.37}), 11), GeometryError);
    const GridPtr r = build_domain(DomainSpec::rectangle({0.1, 0.2}, {2.0, 1.0}), 41);
    CHECK(r->ny() == 21);
    CHECK(r->x(0) == 0.1);
    CHECK(r->y(20) == doctest::Approx(1.2));
}

TEST_CASE("disk mask") {
    const GridPtr g = build_domain(DomainSpec::disk({0.5, 0.5}, 0.45), 129);
    const double h = g->h();
    const double expected = std::numbers::pi * 0.45 * 0.45 / (h * h);
    CHECK(std::abs(static_cast<double>(g->unknown_count()) / expected - 1.0) <= 0.02);

    for (std::size_t j = 1; j + 1 < g->ny(); ++j) {
        for (std::size_t i = 1; i + 1 < g->nx(); ++i) {
            if (!g->is_interior(i, j)) continue;
            CHECK(g->node_class(i + 1, j) != NodeClass::exterior);
            CHECK(g->node_class(i - 1, j) != NodeClass::exterior);
            CHECK(g->node_class(i, j + 1) != NodeClass::exterior);
            CHECK(g->node_class(i, j - 1) != NodeClass::exterior);
            const double r = std::hypot(g->x(i) - 0.5, g->y(j) - 0.5);
            CHECK(r < 0.45);
        }
    }
    // Interior count scales like area / h^2.
    const GridPtr coarse = build_domain(DomainSpec::disk({0.5, 0.5}, 0.45), 65);
    const double ratio = static_cast<double>(g->unknown_count()) / static_cast<double>(coarse->unknown_count());
    CHECK(std::abs(ratio / 4.0 - 1.0) <= 0.05);

    CHECK_THROWS_AS((void)build_domain(DomainSpec::disk({0.5, 0.5}, 0.01), 65), GeometryError);
    CHECK_THROWS_AS((void)build_domain(DomainSpec::disk({0.5, 0.5}, 0.6), 65), GeometryError);
}

TEST_CASE("sampling") {
    const GridPtr g = build_domain(DomainSpec::unit_square(), 33);
    const GridFunction zero = sample(expr::parse("0"), g);
    CHECK(zero.max_abs() == 0.0);

    const GridFunction s = sample(expr::parse("sin(pi*x)*sin(pi*y)"), g);
    for (std::size_t k = 0; k < g->nx(); ++k) {
        CHECK(std::abs(s(k, 0)) < 1e-15);
        CHECK(std::abs(s(0, k)) < 1e-15);
        CHECK(std::abs(s(k, g->ny() - 1)) < 1e-15);
        CHECK(std::abs(s(g->nx() - 1, k)) < 1e-15);
    }

    const GridPtr quarter = build_domain(DomainSpec::unit_square(), 5);
    const GridFunction q = sample(expr::parse("x^2+y^2"), quarter);
    CHECK(q(1, 2) == 0.3125);

    const GridFunction again = sample(expr::parse("sin(pi*x)*sin(pi*y)"), g);
    CHECK(std::equal(s.values().begin(), s.values().end(), again.values().begin()));

    CHECK_THROWS_AS((void)sample(expr::parse("log(x)"), g), EvalError);

    const GridPtr d = build_domain(DomainSpec::disk({0.5, 0.5}, 0.3), 33);
    const GridFunction one = sample(expr::parse("1"), d);
    for (std::size_t n = 0; n < d->size(); ++n) {
        if (d->node_class(n) == NodeClass::exterior) CHECK(one[n] == 0.0);
    }
}

TEST_CASE("quadrature") {
    const GridPtr g = build_domain(DomainSpec::unit_square(), 65);
    const double h = g->h();
    const double one = integrate(sample(expr::parse("1"), g));
    CHECK(one == doctest::Approx(63.0 * 63.0 * h * h).epsilon(1e-14));
    CHECK(std::abs(one - 1.0) <= 2.0 * h);
    const double s2 = integrate(sample(expr::parse("sin(pi*x)^2*sin(pi*y)^2"), g));
    CHECK(std::abs(s2 - 0.25) <= 1e-4);
    CHECK(integrate(GridFunction::zeros(g)) == 0.0);

    const GridFunction u = sample(expr::parse("x*exp(y)"), g);
    const GridFunction v = sample(expr::parse("cos(3*x*y)"), g);
    const double lhs = integrate(combine(2.5, u, -1.25, v));
    const double rhs = 2.5 * integrate(u) - 1.25 * integrate(v);
    CHECK(std::abs(lhs - rhs) <= 1e-14 * (std::abs(lhs) + 1.0));
}

TEST_CASE("unknown vector round trip") {
    const GridPtr g = build_domain(DomainSpec::disk({0.5, 0.5}, 0.4), 33);
    const GridFunction u = sample(expr::parse("1+x*y"), g);
    const auto w = to_unknowns(u);
    CHECK(w.size() == g->unknown_count());
    const GridFunction back = from_unknowns(g, w);
    CHECK(back.zero_trace());
    for (std::size_t n = 0; n < g->size(); ++n) {
        if (g->node_class(n) == NodeClass::interior) CHECK(back[n] == u[n]);
        else CHECK(back[n] == 0.0);
    }
}

TEST_CASE("bumps") {
    const GridPtr g = build_domain(DomainSpec::unit_square(), 65);
    const auto first = random_bump(g, 42, 5);
    const auto second = random_bump(g, 42, 5);
    REQUIRE(first.size() == 5);
    for (std::size_t k = 0; k < first.size(); ++k) {
        CHECK(first[k].zero_trace());
        CHECK(std::equal(first[k].values().begin(), first[k].values().end(), second[k].values().begin()));
    }
    const auto params = random_bump_params(*g, 42, 5);
    for (std::size_t k = 0; k < params.size(); ++k) {
        const Bump& b = params[k];
        CHECK(b.radius >= 4.0 * g->h());
        for (std::size_t j = 0; j < g->ny(); ++j) {
            for (std::size_t i = 0; i < g->nx(); ++i) {
                const double r = std::hypot(g->x(i) - b.cx, g->y(j) - b.cy) / b.radius;
                if (r >= 1.0 || !g->is_interior(i, j)) CHECK(first[k](i, j) == 0.0);
                else if (r < 0.95) CHECK(first[k](i, j) > 0.0);
            }
        }
    }

    // A bump centred on a node peaks there at exp(-1).
    const GridFunction centred = sample_bump(g, Bump{0.5, 0.5, 0.2});
    CHECK(centred(32, 32) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(centred.max_abs() == centred(32, 32));

    const GridPtr tiny = build_domain(DomainSpec::unit_square(), 9);
    BumpOptions big;
    big.min_radius = 0.6;
    big.max_radius = 0.7;
    big.max_attempts = 100;
    CHECK_THROWS_AS((void)random_bump(tiny, 1, 1, big), GeometryError);
}

TEST_CASE("csv output") {
    const GridPtr g = build_domain(DomainSpec::unit_square(), 5);
    const GridFunction u = sample(expr::parse("x+2*y"), g);
    std::ostringstream out;
    write_csv(u, out);
    const std::string text = out.str();
    CHECK(text.rfind("x,y,value\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 26);
    CHECK(text.find("0.25,0.5,1.25\n") != std::string::npos);
    CHECK(text.find('\r') == std::string::npos);
}
