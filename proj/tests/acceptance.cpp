// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [--only N] [--expect-fail N]...
// Exit 0 iff the set of failing criteria equals the --expect-fail set.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "biharm/cli.hpp"
#include "biharm/eigen.hpp"
#include "biharm/expr.hpp"
#include "biharm/grid.hpp"
#include "biharm/hardy.hpp"
#include "biharm/linalg.hpp"
#include "biharm/operators.hpp"
#include "biharm/picone.hpp"
#include "biharm/stability.hpp"

using namespace biharm;
using biharm::expr::Var;

namespace {

const double kPi4 = std::pow(std::numbers::pi, 4);

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4)));
};

void Outcome::require(bool ok, const char* fmt, ...) {
    char buf[256];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    if (!detail.empty()) detail += "; ";
    detail += buf;
    if (!ok) {
        detail += " [fails]";
        pass = false;
    }
}

GridPtr square(std::size_t n) { return build_domain(DomainSpec::unit_square(), n); }
GridPtr disk(std::size_t n) { return build_domain(DomainSpec::disk({0.5, 0.5}, 0.45), n); }
GridFunction field(const std::string& text, const GridPtr& g) { return sample(expr::parse(text), g); }

std::vector<WeightedEigenpair> pairs_of(const GridPtr& g, const char* a, std::size_t k, std::uint64_t seed = 3) {
    EigenOptions o;
    o.k = k;
    o.seed = seed;
    return solve_weighted(WeightedEigenProblem(g, field(a, g)), o);
}

// Random smooth sign-changing field: a short sine series with seeded coefficients.
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

// v = L^{-1} rho with a positive random source: positive and discretely superharmonic.
GridFunction superharmonic(const GridPtr& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> c(-1.0, 1.0);
    char buf[160];
    std::snprintf(buf, sizeof buf, "2.5 + (%.17g)*x + (%.17g)*y + 0.4*cos((%.17g)*pi*x*y)", c(rng), c(rng),
                  2.0 + c(rng));
    SolveOptions opts;
    opts.tol = 1e-13;
    return from_unknowns(g, cg_solve(assemble_neg_laplacian(*g), to_unknowns(field(buf, g)), opts).x);
}

GridFunction negate(const GridFunction& v) { return combine(-1.0, v, 0.0, v); }

const char* const kU = "x*(1-x)*y*(1-y)";
const char* const kV = "sin(pi*x)*sin(pi*y)";
const char* const kClamped = "(sin(pi*x)*sin(pi*y))^2";

MemsProblem manufactured(std::size_t n, const char* f1 = "s^3") {
    return manufacture(square(n), 1.0, expr::parse(kClamped), Nonlinearity::parse(f1, Var::s));
}

// ---------------------------------------------------------------------------------------------

Outcome navier_oracle() {
    Outcome o;
    const auto fine = pairs_of(square(65), "1", 2);
    const auto coarse = pairs_of(square(33), "1", 1);
    const double e1 = fine[0].eigenvalue / (4 * kPi4) - 1;
    const double e2 = fine[1].eigenvalue / (25 * kPi4) - 1;
    o.require(std::abs(e1) <= 1e-2, "|λ1/4π⁴-1| = %.3e <= 1e-2", std::abs(e1));
    o.require(std::abs(e2) <= 2e-2, "|λ2/25π⁴-1| = %.3e <= 2e-2", std::abs(e2));
    const double ratio = std::abs(coarse[0].eigenvalue - 4 * kPi4) / std::abs(fine[0].eigenvalue - 4 * kPi4);
    o.require(ratio >= 3.4 && ratio <= 4.6, "error ratio h=1/32:1/64 = %.4f in [3.4, 4.6]", ratio);
    return o;
}

Outcome picone_identity() {
    Outcome o;
    const GridPtr g = square(33);
    std::mt19937_64 rng(20260101);
    const Nonlinearity f = Nonlinearity::parse("y+atan(y)", Var::y);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const GridFunction v = superharmonic(g, rng);
        const GridFunction u = field(random_trig(rng, 3), g);
        for (const PiconeReport& r : {picone_linear(u, v), picone_nonlinear(u, v, f), picone_linear(u, negate(v))}) {
            worst = std::max(worst, r.max_abs_identity_residual / r.scale);
        }
    }
    o.require(worst <= 1e-10, "expanded max|L-R|/scale = %.3e <= 1e-10 over 20 pairs x 3 forms", worst);

    double res[2];
    const std::size_t ns[2] = {33, 65};
    for (int m = 0; m < 2; ++m) {
        const GridPtr gm = square(ns[m]);
        PiconeOptions opts;
        opts.mode = PiconeMode::direct;
        res[m] = picone_linear(field(kU, gm), field(kV, gm), opts).max_abs_identity_residual;
    }
    const double ratio = res[0] / res[1];
    o.require(ratio >= 3.4 && ratio <= 4.6, "direct residual ratio h=1/32:1/64 = %.4f in [3.4, 4.6]", ratio);
    return o;
}

Outcome picone_nonnegativity() {
    Outcome o;
    const GridPtr g = square(33);
    std::mt19937_64 rng(20260101);
    const Nonlinearity f = Nonlinearity::parse("y+atan(y)", Var::y);
    double worst = std::numeric_limits<double>::infinity();
    std::size_t asserted = 0;
    std::size_t tested = 0;
    std::size_t flipped = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const GridFunction v = superharmonic(g, rng);
        const GridFunction u = field(random_trig(rng, 3), g);
        for (const PiconeReport& r : {picone_linear(u, v), picone_nonlinear(u, v, f), picone_linear(u, negate(v))}) {
            ++tested;
            if (!r.nonnegativity_asserted) continue;
            ++asserted;
            if (r.orientation == Orientation::negative) ++flipped;
            worst = std::min(worst, r.min_l / r.scale);
        }
    }
    o.require(asserted == tested, "hypotheses and f-flags hold on %zu of %zu cases", asserted, tested);
    o.require(flipped == 20, "sign-flipped cases %zu", flipped);
    o.require(worst >= -1e-10, "min_L/scale = %.3e >= -1e-10", worst);
    return o;
}

Outcome equality_cases() {
    Outcome o;
    const GridPtr g = square(65);
    const GridFunction v = field(kV, g);

    const PiconeReport twice = picone_linear(combine(2.0, v, 0.0, v), v);
    o.require(std::abs(twice.integral_l) <= 1e-8 * twice.scale, "u=2v: |∫L|/scale = %.3e <= 1e-8",
              std::abs(twice.integral_l) / twice.scale);
    o.require(twice.equality && twice.equality->max_deviation <= 1e-10, "u=2v: deviation %.3e <= 1e-10",
              twice.equality ? twice.equality->max_deviation : -1.0);

    const PiconeReport shifted = picone_nonlinear(field(std::string(kV) + " + 0.3", g), v, Nonlinearity::identity(Var::y));
    o.require(std::abs(shifted.integral_l) <= 1e-8 * shifted.scale, "u=v+0.3, f=y: |∫L|/scale = %.3e <= 1e-8",
              std::abs(shifted.integral_l) / shifted.scale);
    o.require(shifted.equality && shifted.equality->max_deviation <= 1e-10, "u=v+0.3: deviation %.3e <= 1e-10",
              shifted.equality ? shifted.equality->max_deviation : -1.0);

    const GridPtr gc = square(33);
    std::mt19937_64 rng(77);
    double worst = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 20; ++trial) {
        const GridFunction a = field(random_trig(rng, 3), gc);
        const GridFunction b = field(random_trig(rng, 3), gc);
        worst = std::min(worst, detect_linear_relation(a, b, 1e-8 * b.max_abs()).max_deviation / a.max_abs());
    }
    o.require(worst >= 0.1, "20 non-affine pairs: min deviation/||u|| = %.3f >= 0.1", worst);
    return o;
}

Outcome qualitative_suite() {
    Outcome o;
    std::size_t cases = 0;
    std::size_t good = 0;
    for (const char* weight : {"1", "1 + x^2*y"}) {
        for (const GridPtr& g : {square(65), disk(65)}) {
            const QualitativeVerdict q = qualitative_verify(pairs_of(g, weight, 2));
            ++cases;
            if (q.one_sign && q.superharmonic && q.sign_change) ++good;
        }
    }
    o.require(good == cases, "one-sign, superharmonic and u2 sign change on %zu of %zu (domain, a) cases", good,
              cases);
    const QualitativeVerdict sq = qualitative_verify(pairs_of(square(65), "1", 2));
    o.require(sq.relative_gap >= 0.5, "relative gap on the a=1 square %.4f >= 0.5 (exact 5.25)", sq.relative_gap);
    return o;
}

Outcome monotonicity() {
    Outcome o;
    const expr::Expr one = expr::parse("1");
    // 0.1 is not a multiple of 1/128; the sub-square runs on the nearest nested lattice h = 1/130.
    const MonotonicityResult sub =
        domain_monotonicity(DomainSpec::unit_square(), DomainSpec::rectangle({0.1, 0.1}, {0.8, 0.8}), one, 1.0 / 130);
    const double sub_exact = 4 * kPi4 / std::pow(0.8, 4);
    o.require(std::abs(sub.lambda_inner / sub_exact - 1) <= 2e-2, "sub-square λ1 %.2f vs %.2f within 2%%",
              sub.lambda_inner, sub_exact);
    o.require(sub.strict, "sub-square strict above %.2f (margin %.4f)", sub.lambda_outer, sub.margin);

    const MonotonicityResult d =
        domain_monotonicity(DomainSpec::unit_square(), DomainSpec::disk({0.5, 0.5}, 0.45), one, 1.0 / 128);
    const double j01 = 2.404825557695773;
    const double disk_exact = std::pow(j01 / 0.45, 4);
    o.require(std::abs(d.lambda_inner / disk_exact - 1) <= 1e-1, "disk λ1 %.2f vs %.2f within 10%%", d.lambda_inner,
              disk_exact);
    o.require(d.strict && std::abs(d.margin - 10.0 / 128) <= 1e-15, "disk strict with margin 10h = %.4f",
              d.margin);
    return o;
}

Outcome hardy_rellich() {
    Outcome o;
    double worst_margin = std::numeric_limits<double>::infinity();
    double worst_sharp = 0.0;
    bool asserted = true;
    bool affine = true;
    for (const char* weight : {"1", "1 + x^2*y"}) {
        const GridPtr g = square(49);
        const GridFunction a = field(weight, g);
        const WeightedEigenpair first = pairs_of(g, weight, 1).front();
        HardyOptions opts;
        opts.bumps = 100;
        opts.seed = 21;
        opts.extra = {first.eigenfunction};
        const Nonlinearity id = Nonlinearity::identity(Var::y);
        const HardyReport r = hardy_rellich_check(first.eigenfunction, first.eigenvalue, a, id, opts);
        asserted = asserted && r.inequality_asserted && r.count == 101;
        worst_margin = std::min(worst_margin, r.min_margin / r.scale);
        worst_sharp = std::max(worst_sharp, std::abs(r.min_quotient / first.eigenvalue - 1));

        const HardyReport half = hardy_rellich_check(first.eigenfunction, first.eigenvalue / 2, a, id, opts);
        const std::vector<double> recomputed = margins_at(r, first.eigenvalue / 2);
        for (std::size_t n = 0; n < r.count; ++n) affine = affine && half.margins[n].margin == recomputed[n];
    }
    o.require(asserted, "supersolution and f-conditions hold; 100 bumps + u1 tested");
    o.require(worst_margin >= -1e-6, "min margin/scale %.3e >= -1e-6", worst_margin);
    o.require(worst_sharp <= 5e-2, "sharpness |min quotient/λ1 - 1| = %.3e <= 5%%", worst_sharp);
    o.require(affine, "margins at λ/2 equal the affine recomputation exactly");
    return o;
}

Outcome morse() {
    Outcome o;
    const GridPtr g = square(33);
    const GridFunction a = field("4*pi^4/(1 + (sin(pi*x)*sin(pi*y))^2)", g);
    const MorseResult r = morse_index(g, a, Nonlinearity::parse("y + y^3", Var::y));
    o.require(r.h_holds, "H-check G(y)/y >= G'(0) holds");
    o.require(r.index == 0 && !r.saturated && r.eigenvalues.front() > 0.0, "manufactured index %zu, μ1 = %.4f > 0",
              r.index, r.eigenvalues.front());

    std::vector<double> c = to_unknowns(a);
    for (double& x : c) x = -x;
    const SparseOperator op = add_diagonal(assemble_navier_biharmonic(*g), c);
    const std::vector<double> dense = dense_generalized_eigenvalues(op, std::vector<double>(op.n(), 1.0));
    double worst = 0.0;
    for (std::size_t m = 0; m < r.eigenvalues.size(); ++m) worst = std::max(worst, std::abs(r.eigenvalues[m] / dense[m] - 1));
    o.require(worst <= 1e-6, "vs dense oracle (n = %zu): max rel err %.3e <= 1e-6", op.n(), worst);

    const MorseResult shift = morse_index(g, field("1", g), Nonlinearity::parse("8*pi^4*y", Var::y));
    o.require(shift.index >= 1, "shift G'(0) = 8π⁴: index %zu >= 1", shift.index);
    return o;
}

Outcome stability() {
    Outcome o;
    const MemsProblem p = manufactured(33);
    StabilityOptions opts;
    opts.bumps = 100;
    opts.seed = 5;
    const StabilityReport r = stability_report(p, opts);
    o.require(r.max_form_disagreement <= 1e-8, "assembled vs quadrature form %.3e <= 1e-8", r.max_form_disagreement);

    const Bump bump{0.43, 0.56, 0.3};
    double res[2];
    const std::size_t ns[2] = {33, 65};
    for (int m = 0; m < 2; ++m) {
        const MemsProblem pm = manufactured(ns[m]);
        res[m] = proof_identity(pm, sample_bump(pm.grid(), bump)).residual;
    }
    const double ratio = res[0] / res[1];
    o.require(ratio >= 3.0 && ratio <= 5.0, "identity residual ratio %.4f in [3, 5]", ratio);

    const SparseOperator a = assemble_linearized(*p.grid(), p.delta(), linearized_potential(p));
    const double dense = dense_generalized_eigenvalues(a, std::vector<double>(a.n(), 1.0)).front();
    const double rel = std::abs(r.lambda1 / dense - 1);
    o.require(rel <= 1e-6, "λ1 %.6f vs dense (h = 1/32) rel %.3e <= 1e-6", r.lambda1, rel);

    StabilityOptions few = opts;
    few.bumps = 5;
    const double umin = p.u().min_interior();
    const double cubic = r.h1_margin;
    const double linear = stability_report(manufactured(33, "s"), few).h1_margin;
    o.require(std::abs(cubic / (2 * umin * umin) - 1) <= 1e-12 && cubic > 0.0,
              "H1 margin s³ = %.3e (2 min u² = %.3e)", cubic, 2 * umin * umin);
    o.require(linear == 0.0, "H1 margin s = %.1e", linear);

    cli::ExecuteOptions quiet;
    quiet.timestamp = false;
    const cli::RunResult run = cli::run(
        R"cfg({"command":"stability","domain":{"kind":"rectangle","extent":[1,1]},"n":33,)cfg"
        R"cfg("u":"(sin(pi*x)*sin(pi*y))^2","f1":"s^3","delta":1,"bumps":100,"seed":5})cfg",
        "", quiet);
    bool flagged = false;
    if (run.exit_code == cli::exit_ok) {
        const cli::Json report = cli::Json::parse(run.report);
        for (const cli::Json& c : report["checks"]) {
            if (c["name"] == "side_condition") flagged = c["pass"] == false && c["asserted"] == false;
        }
    }
    o.require(!r.side_condition_holds && r.side_condition_violations > 0 && flagged && run.exit_code == 0,
              "side condition min %.3f at %zu nodes reported; CLI exit %d", r.side_condition_min,
              r.side_condition_violations, run.exit_code);
    return o;
}

double central_difference(const expr::Expr& e, expr::Bindings b, Var v, double step) {
    const double x0 = b.value(v);
    b.set(v, x0 + step);
    const double hi = expr::eval(e, b);
    b.set(v, x0 - step);
    const double lo = expr::eval(e, b);
    return (hi - lo) / (2 * step);
}

Outcome determinism() {
    Outcome o;
    const std::vector<std::string> configs = {
        R"cfg({"command":"eig","domain":{"kind":"disk","center":[0.5,0.5],"radius":0.45},"n":33,"a":"1+x^2*y","seed":3})cfg",
        R"cfg({"command":"picone","domain":{"kind":"rectangle","extent":[1,1]},"n":33,"u":"x*(1-x)*y","v":"sin(pi*x)*sin(pi*y)","f":"y + log(1 + y)"})cfg",
        R"cfg({"command":"hardy","domain":{"kind":"rectangle","extent":[1,1]},"n":33,"v":"sin(pi*x)*sin(pi*y)","g":"1","lambda":100,"seed":8})cfg",
        R"cfg({"command":"stability","domain":{"kind":"rectangle","extent":[1,1]},"n":33,"u":"(sin(pi*x)*sin(pi*y))^2","f1":"s^3","delta":1,"seed":5})cfg",
        R"cfg({"command":"morse","domain":{"kind":"rectangle","extent":[1,1]},"n":33,"a":"4*pi^4/(1 + (sin(pi*x)*sin(pi*y))^2)","G":"y + y^3","seed":3})cfg",
        R"cfg({"command":"monotonicity","domain":{"kind":"rectangle","extent":[1,1]},"inner":{"kind":"disk","center":[0.5,0.5],"radius":0.45},"a":"1","h":0.03125,"seed":2})cfg",
    };
    cli::ExecuteOptions quiet;
    quiet.timestamp = false;
    std::size_t identical = 0;
    for (const std::string& text : configs) {
        const cli::RunResult first = cli::run(text, "", quiet);
        const cli::RunResult second = cli::run(text, "", quiet);
        if (first.exit_code == cli::exit_ok && !first.report.empty() && first.report == second.report) ++identical;
    }
    o.require(identical == configs.size(), "%zu of %zu commands byte-identical on rerun", identical, configs.size());

    const std::vector<std::string> sources = {
        "sin(pi*x)*cos(y) + x^3*y",
        "exp(-x^2-y^2)/(1+x^2)",
        "atan(x*y) + sqrt(1+x^2+y^2)",
        "log(2+sin(x)) * y^2",
        "(x^2+y^2)^1.5 - 3*x/(2+cos(y))",
    };
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> coord(-1.5, 1.5);
    std::size_t checked = 0;
    double worst = 0.0;
    for (const std::string& src : sources) {
        const expr::Expr e = expr::parse(src);
        const expr::Expr ex = expr::diff(e, Var::x);
        const expr::Expr ey = expr::diff(e, Var::y);
        for (int k = 0; k < 100; ++k) {
            expr::Bindings b;
            b.set(Var::x, coord(rng)).set(Var::y, coord(rng));
            for (auto [v, d] : {std::pair{Var::x, ex}, std::pair{Var::y, ey}}) {
                const double exact = expr::eval(d, b);
                const double fd = central_difference(e, b, v, 1e-5);
                worst = std::max(worst, std::abs(exact - fd) / std::max(1.0, std::abs(exact)));
                ++checked;
            }
        }
    }
    o.require(checked == 1000 && worst <= 1e-6, "diff vs central differences at %zu points: max rel %.3e <= 1e-6",
              checked, worst);
    return o;
}

struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    std::set<int> expected;
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--expect-fail") == 0 && i + 1 < argc) {
            expected.insert(std::atoi(argv[++i]));
        } else if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: %s [--only N] [--expect-fail N]...\n", argv[0]);
            return 2;
        }
    }

    const std::vector<Criterion> criteria = {
        {1, "Navier eigenvalue oracle", navier_oracle},
        {2, "Picone identity (expanded and direct)", picone_identity},
        {3, "Picone nonnegativity", picone_nonnegativity},
        {4, "Picone equality cases", equality_cases},
        {5, "first-eigenfunction qualitative suite", qualitative_suite},
        {6, "strict domain monotonicity", monotonicity},
        {7, "Hardy-Rellich", hardy_rellich},
        {8, "Morse index", morse},
        {9, "stability machinery", stability},
        {10, "determinism and symbolic derivatives", determinism},
    };

    std::set<int> failed;
    for (const Criterion& c : criteria) {
        if (only != 0 && c.id != only) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!out.pass) failed.insert(c.id);
        std::printf("%s %2d %s (%.1fs): %s\n", out.pass ? "PASS" : "FAIL", c.id, c.title, secs, out.detail.c_str());
        std::fflush(stdout);
    }

    if (only != 0) return failed.empty() ? 0 : 1;
    for (int id : expected) {
        if (!failed.count(id)) std::printf("note: criterion %d was expected to fail but passed\n", id);
    }
    for (int id : failed) {
        if (expected.count(id)) std::printf("note: criterion %d fails as documented in the README\n", id);
    }
    return failed == expected ? 0 : 1;
}
