#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "biharm/expr.hpp"
#include "biharm/grid.hpp"
#include "biharm/linalg.hpp"
#include "biharm/operators.hpp"
#include "biharm/picone.hpp"
#include "doctest.h"

using namespace biharm;
using expr::Expr;
using expr::Var;

namespace {

const char* const kU = "x*(1-x)*y*(1-y)";
const char* const kV = "sin(pi*x)*sin(pi*y)";

Expr lap(const Expr& e) {
    return expr::diff(expr::diff(e, Var::x), Var::x) + expr::diff(expr::diff(e, Var::y), Var::y);
}

double at(const Expr& e, double x, double y) {
    expr::Bindings b;
    b.set(Var::x, x).set(Var::y, y);
    return expr::eval(e, b);
}

// Exact pointwise inputs from symbolic derivatives.
PiconePoint exact_point(const Expr& u, const Expr& v, double x, double y) {
    return {at(u, x, y), at(lap(u), x, y), at(expr::diff(u, Var::x), x, y), at(expr::diff(u, Var::y), x, y),
            at(v, x, y), at(lap(v), x, y), at(expr::diff(v, Var::x), x, y), at(expr::diff(v, Var::y), x, y)};
}

// |Δu|^2 - Δ(q) Δv with q = u^2 / w differentiated symbolically as a whole.
double symbolic_r(const Expr& u, const Expr& v, const Expr& w, double x, double y) {
    const double lu = at(lap(u), x, y);
    return lu * lu - at(lap(u * u / w), x, y) * at(lap(v), x, y);
}

double scaled(double a, double b) { return std::max({std::abs(a), std::abs(b), 1.0}); }

std::string random_trig(std::mt19937_64& rng, int modes) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::string s = "0";
    char buf[128];
    for (int k = 1; k <= modes; ++k) {
        for (int l = 1; l <= modes; ++l) {
            std::snprintf(buf, sizeof buf, " + (%.17g)*sin(%d*pi*x)*sin(%d*pi*y)", coef(rng), k, l);
            s += buf;
        }
    }
    return s;
}

// v = L^{-1} rho with a positive random source: discrete superharmonic and positive.
GridFunction superharmonic(const GridPtr& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> c(-1.0, 1.0);
    char buf[160];
    std::snprintf(buf, sizeof buf, "2.5 + (%.17g)*x + (%.17g)*y + 0.4*cos((%.17g)*pi*x*y)", c(rng), c(rng),
                  2.0 + c(rng));
    const GridFunction rho = sample(expr::parse(buf), g);
    const SparseOperator l = assemble_neg_laplacian(*g);
    SolveOptions opts;
    opts.tol = 1e-13;
    return from_unknowns(g, cg_solve(l, to_unknowns(rho), opts).x);
}

GridFunction negate(const GridFunction& v) { return combine(-1.0, v, 0.0, v); }

}  // namespace

TEST_CASE("pointwise linear forms agree with a symbolic oracle") {
    const Expr u = expr::parse(kU);
    const Expr v = expr::parse(kV);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> coord(0.05, 0.95);
    for (int k = 0; k < 20; ++k) {
        const double x = coord(rng);
        const double y = coord(rng);
        const PiconePoint p = exact_point(u, v, x, y);
        const double oracle = symbolic_r(u, v, v, x, y);
        const double l = picone_linear_l(p);
        const double r = picone_linear_r(p);
        CHECK(std::abs(l - oracle) <= 1e-10 * scaled(l, oracle));
        CHECK(std::abs(r - oracle) <= 1e-10 * scaled(r, oracle));
        CHECK(l >= -1e-12 * scaled(l, oracle));
    }
}

TEST_CASE("pointwise nonlinear forms agree with a symbolic oracle") {
    const Expr u = expr::parse(kU);
    const Expr v = expr::parse(kV);
    const Expr fv = v + expr::call(expr::Func::atan, v);
    const Nonlinearity f = Nonlinearity::parse("y+atan(y)", Var::y);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> coord(0.05, 0.95);
    double worst_single = 0.0;
    for (int k = 0; k < 20; ++k) {
        const double x = coord(rng);
        const double y = coord(rng);
        const PiconePoint p = exact_point(u, v, x, y);
        const FValues fx{f.value(p.v), f.d1(p.v), f.d2(p.v)};
        const double oracle = symbolic_r(u, v, fv, x, y);
        const double l = picone_nonlinear_l(p, fx);
        const double r = picone_nonlinear_r(p, fx);
        CHECK(std::abs(l - oracle) <= 1e-10 * scaled(l, oracle));
        CHECK(std::abs(r - oracle) <= 1e-10 * scaled(r, oracle));
        CHECK(l >= -1e-10 * scaled(l, oracle));
        const double single = picone_nonlinear_l(p, fx, CurvatureDenominator::single);
        worst_single = std::max(worst_single, std::abs(single - oracle) / scaled(single, oracle));
    }
    // The single-power denominator does not reproduce the identity once f'' is nonzero.
    CHECK(worst_single > 1e-6);
}

TEST_CASE("nonlinear forms reduce to the linear ones for f = id") {
    const Expr u = expr::parse("exp(x)*cos(y)");
    const Expr v = expr::parse(kV);
    const FValues id{0.0, 1.0, 0.0};
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> coord(0.1, 0.9);
    for (int k = 0; k < 20; ++k) {
        PiconePoint p = exact_point(u, v, coord(rng), coord(rng));
        FValues fx = id;
        fx.f = p.v;
        const double l = picone_linear_l(p);
        CHECK(std::abs(picone_nonlinear_l(p, fx) - l) <= 1e-12 * scaled(l, 0.0));
        CHECK(std::abs(picone_nonlinear_r(p, fx) - picone_linear_r(p)) <= 1e-12 * scaled(l, 0.0));
    }
}

TEST_CASE("grid identity for the reference pair") {
    const GridPtr g = build_domain(DomainSpec::unit_square(), 65);
    const GridFunction u = sample(expr::parse(kU), g);
    const GridFunction v = sample(expr::parse(kV), g);
    const PiconeReport rep = picone_linear(u, v);
    CHECK(rep.orientation == Orientation::positive);
    CHECK(rep.admissible_count == g->unknown_count());
    CHECK(rep.hypotheses_hold);
    CHECK(rep.nonnegativity_asserted);
    CHECK(rep.max_abs_identity_residual <= 1e-10 * rep.scale);
    CHECK(rep.min_l >= -1e-12 * rep.scale);
    REQUIRE(rep.equality.has_value());
    CHECK(rep.equality->max_deviation > 1e-3 * u.max_abs());
}

TEST_CASE("direct mode converges at second order") {
    double res[2];
    for (int level = 0; level < 2; ++level) {
        const GridPtr g = build_domain(DomainSpec::unit_square(), level == 0 ? 33 : 65);
        PiconeOptions opts;
        opts.mode = PiconeMode::direct;
        const PiconeReport rep = picone_linear(sample(expr::parse(kU), g), sample(expr::parse(kV), g), opts);
        CHECK(rep.reported_count == (g->nx() - 4) * (g->ny() - 4));
        res[level] = rep.max_abs_identity_residual;
    }
    const double ratio = res[0] / res[1];
    CHECK(ratio >= 3.4);
    CHECK(ratio <= 4.6);
}

TEST_CASE("proportional pairs give L = 0") {
    const GridPtr g = build_domain(DomainSpec::unit_square(), 65);
    const GridFunction v = sample(expr::parse(kV), g);
    PiconeOptions opts;
    opts.eps = 1e-6;
    const PiconeReport same = picone_linear(v, v, opts);
    CHECK(std::abs(same.min_l) <= 1e-12 * same.scale);
    CHECK(same.l.max_abs() <= 1e-12 * same.scale);

    const GridFunction u = combine(2.0, v, 0.0, v);
    const PiconeReport twice = picone_linear(u, v);
    CHECK(twice.l.max_abs() <= 1e-12 * twice.scale);
    CHECK(twice.integral_l <= 1e-8 * twice.scale);
    REQUIRE(twice.equality.has_value());
    CHECK(twice.equality->c == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(std::abs(twice.equality->d) <= 1e-14);
    CHECK(twice.equality->max_deviation <= 1e-10);
}

TEST_CASE("affine pairs need the matching shift in f") {
    const GridPtr g = build_domain(DomainSpec::unit_square(), 65);
    const GridFunction v = sample(expr::parse(kV), g);
    const GridFunction u = sample(expr::parse(std::string(kV) + " + 0.3"), g);

    // f(y) = y + 0.3 makes u / f(v) constant: the equality case.
    const PiconeReport shifted = picone_nonlinear(u, v, Nonlinearity::parse("y + 0.3", Var::y));
    CHECK(shifted.f_conditions_hold);
    CHECK(shifted.l.max_abs() <= 1e-10 * shifted.scale);
    CHECK(std::abs(shifted.integral_l) <= 1e-8 * shifted.scale);
    REQUIRE(shifted.equality.has_value());
    CHECK(shifted.equality->max_deviation <= 1e-10);

    // With f = id the pair is affine but not proportional, and L stays positive:
    // L = 0.09/v^2 ((Δv)^2 - 2 Δv |∇v|^2 / v) > 0.
    const PiconeReport plain = picone_nonlinear(u, v, Nonlinearity::identity(Var::y));
    CHECK(plain.min_l > 0.0);
    CHECK(plain.integral_l > 1.0);
    const double expected_center = 0.09 * std::pow(2.0 * std::numbers::pi * std::numbers::pi, 2);
    CHECK(plain.l(32, 32) == doctest::Approx(expected_center).epsilon(1e-2));
}

TEST_CASE("nonlinear report for f = id matches the linear one") {
    const GridPtr g = build_domain(DomainSpec::unit_square(), 41);
    const GridFunction u = sample(expr::parse(kU), g);
    const GridFunction v = sample(expr::parse(kV), g);
    for (PiconeMode mode : {PiconeMode::expanded, PiconeMode::direct}) {
        PiconeOptions opts;
        opts.mode = mode;
        const PiconeReport lin = picone_linear(u, v, opts);
        const PiconeReport non = picone_nonlinear(u, v, Nonlinearity::identity(Var::y), opts);
        CHECK(non.f_conditions_hold);
        CHECK(non.reported_count == lin.reported_count);
        for (std::size_t n = 0; n < g->size(); ++n) {
            CHECK(std::abs(non.l[n] - lin.l[n]) <= 1e-12 * lin.scale);
            CHECK(std::abs(non.r[n] - lin.r[n]) <= 1e-12 * lin.scale);
        }
        REQUIRE(non.alternate_denominator_residual.has_value());
        CHECK(*non.alternate_denominator_residual == doctest::Approx(non.max_abs_identity_residual));
    }
}

TEST_CASE("nonlinear identity and sign for f = y + atan(y)") {
    const GridPtr g = build_domain(DomainSpec::unit_square(), 65);
    const GridFunction u = sample(expr::parse(kU), g);
    const GridFunction v = sample(expr::parse(kV), g);
    const PiconeReport rep = picone_nonlinear(u, v, Nonlinearity::parse("y+atan(y)", Var::y));
    REQUIRE(rep.f_conditions.size() == 3);
    for (const auto& c : rep.f_conditions) CHECK(c.holds);
    CHECK(rep.f_conditions[0].lo > 0.0);
    CHECK(rep.f_conditions[0].hi >= 1.0);
    CHECK(rep.nonnegativity_asserted);
    CHECK(rep.max_abs_identity_residual <= 1e-10 * rep.scale);
    CHECK(rep.min_l >= -1e-10 * rep.scale);
    REQUIRE(rep.alternate_denominator_residual.has_value());
    CHECK(*rep.alternate_denominator_residual > 1e3 * rep.max_abs_identity_residual);

    const PiconeReport bad = picone_nonlinear(u, v, Nonlinearity::parse("y^3 + 1", Var::y));
    CHECK_FALSE(bad.f_conditions_hold);
    CHECK_FALSE(bad.nonnegativity_asserted);
    CHECK(bad.max_abs_identity_residual <= 1e-10 * bad.scale);
}

TEST_CASE("random admissible pairs: identity and nonnegativity") {
    const GridPtr g = build_domain(DomainSpec::unit_square(), 33);
    std::mt19937_64 rng(20260101);
    for (int trial = 0; trial < 20; ++trial) {
        const GridFunction v = superharmonic(g, rng);
        const GridFunction u = sample(expr::parse(random_trig(rng, 3)), g);
        const PiconeReport rep = picone_linear(u, v);
        CHECK(rep.hypotheses_hold);
        CHECK(rep.max_abs_identity_residual <= 1e-10 * rep.scale);
        CHECK(rep.min_l >= -1e-10 * rep.scale);

        const PiconeReport nl = picone_nonlinear(u, v, Nonlinearity::parse("y+atan(y)", Var::y));
        CHECK(nl.f_conditions_hold);
        CHECK(nl.max_abs_identity_residual <= 1e-10 * nl.scale);
        CHECK(nl.min_l >= -1e-10 * nl.scale);

        // Sign-flipped pair: v < 0 and -Δv < 0.
        const PiconeReport flip = picone_linear(u, negate(v));
        CHECK(flip.orientation == Orientation::negative);
        CHECK(flip.hypotheses_hold);
        CHECK(flip.max_abs_identity_residual <= 1e-10 * flip.scale);
        CHECK(flip.min_l >= -1e-10 * flip.scale);
    }
}

TEST_CASE("linear relation detection") {
    const GridPtr g = build_domain(DomainSpec::unit_square(), 33);
    const GridFunction v = sample(expr::parse(kV), g);
    const double eps = 1e-8;
    const LinearFit three = detect_linear_relation(combine(3.0, v, 0.0, v), v, eps);
    CHECK(three.c == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(std::abs(three.d) <= 1e-14);
    CHECK(three.max_deviation <= 1e-14);

    const GridFunction affine = sample(expr::parse(std::string("2*") + kV + " + 1"), g);
    const LinearFit two = detect_linear_relation(affine, v, eps);
    CHECK(two.c == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(two.d == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(two.max_deviation <= 1e-12);

    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const GridFunction a = sample(expr::parse(random_trig(rng, 3)), g);
        const GridFunction b = sample(expr::parse(random_trig(rng, 3)), g);
        CHECK(detect_linear_relation(a, b, 1e-8 * b.max_abs()).max_deviation >= 0.1 * a.max_abs());
    }

    const LinearFit flat = detect_linear_relation(v, sample(expr::parse("2"), g), eps);
    CHECK(flat.degenerate);
    CHECK(flat.c == 0.0);

    const GridPtr small = build_domain(DomainSpec::unit_square(), 5);
    CHECK_THROWS_AS((void)detect_linear_relation(sample(expr::parse("x"), small), sample(expr::parse("1"), small), eps),
                    PreconditionError);
}

TEST_CASE("admissibility errors") {
    const GridPtr g = build_domain(DomainSpec::unit_square(), 33);
    const GridFunction u = sample(expr::parse(kU), g);
    const GridFunction both = sample(expr::parse("sin(2*pi*x)*sin(pi*y)"), g);
    try {
        (void)picone_linear(u, both);
        FAIL("expected a precondition error");
    } catch (const PreconditionError& e) {
        CHECK(std::string(e.what()).find("no admissible nodes") != std::string::npos);
    }
    PiconeOptions bad;
    bad.eps = 0.0;
    CHECK_THROWS_AS((void)picone_linear(u, sample(expr::parse(kV), g), bad), Error);
    CHECK_THROWS_AS((void)picone_linear(u, GridFunction::zeros(g)), PreconditionError);

    // Not superharmonic: hypotheses fail and nonnegativity is not asserted.
    const GridFunction sub = sample(expr::parse("1 + x^2 + y^2"), g);
    const PiconeReport rep = picone_linear(u, sub);
    CHECK_FALSE(rep.hypotheses_hold);
    CHECK_FALSE(rep.nonnegativity_asserted);
    CHECK(rep.max_abs_identity_residual <= 1e-10 * rep.scale);
}

TEST_CASE("small affine deviation implies small integral of L") {
    const GridPtr g = build_domain(DomainSpec::unit_square(), 33);
    const GridFunction v = sample(expr::parse(kV), g);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> c(0.5, 3.0);
    for (int trial = 0; trial < 5; ++trial) {
        const double k = c(rng);
        const double d = 0.5 * c(rng);
        char fbuf[64];
        std::snprintf(fbuf, sizeof fbuf, "y + %.17g", d / k);
        const GridFunction u = combine(k, v, d, sample(expr::parse("1"), g));
        const PiconeReport rep = picone_nonlinear(u, v, Nonlinearity::parse(fbuf, Var::y));
        REQUIRE(rep.equality.has_value());
        CHECK(rep.equality->max_deviation <= 1e-8);
        CHECK(std::abs(rep.integral_l) <= 1e-8 * rep.scale);
    }
}
