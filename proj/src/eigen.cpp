#include "biharm/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "biharm/operators.hpp"

namespace biharm {

namespace {

std::string format(const char* fmt, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, fmt, a, b);
    return buf;
}

bool near_integer(double x) { return std::abs(x - std::round(x)) <= 1e-9 * std::max(1.0, std::abs(x)); }

// Lattice box [lo, hi] of a spec.
struct Box {
    double x0, y0, x1, y1;
};

Box box_of(const DomainSpec& s) {
    return {s.origin[0], s.origin[1], s.origin[0] + s.extent[0], s.origin[1] + s.extent[1]};
}

bool contains(const DomainSpec& outer, const DomainSpec& inner) {
    constexpr double slack = 1e-12;
    if (outer.kind == DomainKind::rectangle) {
        const Box o = box_of(outer);
        if (inner.kind == DomainKind::rectangle) {
            const Box i = box_of(inner);
            return i.x0 >= o.x0 - slack && i.y0 >= o.y0 - slack && i.x1 <= o.x1 + slack && i.y1 <= o.y1 + slack;
        }
        return inner.center[0] - inner.radius >= o.x0 - slack && inner.center[0] + inner.radius <= o.x1 + slack &&
               inner.center[1] - inner.radius >= o.y0 - slack && inner.center[1] + inner.radius <= o.y1 + slack;
    }
    const double ox = outer.center[0];
    const double oy = outer.center[1];
    if (inner.kind == DomainKind::disk) {
        return std::hypot(inner.center[0] - ox, inner.center[1] - oy) + inner.radius <= outer.radius + slack;
    }
    const Box i = box_of(inner);
    for (double x : {i.x0, i.x1}) {
        for (double y : {i.y0, i.y1}) {
            if (std::hypot(x - ox, y - oy) > outer.radius + slack) return false;
        }
    }
    return true;
}

double smallest_weighted(const GridPtr& grid, const expr::Expr& a, const EigenOptions& options) {
    EigenOptions one = options;
    one.k = 1;
    const WeightedEigenProblem problem(grid, sample(a, grid));
    return solve_weighted(problem, one).front().eigenvalue;
}

}  // namespace

WeightedEigenProblem::WeightedEigenProblem(GridPtr grid, GridFunction a)
    : grid_(std::move(grid)), a_(std::move(a)), l_(assemble_neg_laplacian(*grid_)), b_(to_unknowns(a_)) {
    if (&a_.grid() != grid_.get()) throw PreconditionError("weight lives on a different grid");
    for (double w : b_) {
        if (!(w >= 0.0)) throw PreconditionError("weight a must be nonnegative at interior nodes");
    }
    if (!(integrate(a_) > 0.0)) throw PreconditionError("weight a vanishes identically");
}

std::vector<WeightedEigenpair> solve_weighted(const WeightedEigenProblem& problem, const EigenOptions& options) {
    const SparseOperator& l = problem.neg_laplacian();
    const SolveOptions inner = options.inner;
    const LinearMap a = navier_map(l);
    // One correction pass: the two-solve error is amplified by cond(L) and would set the
    // floor of the eigen residual.
    const ShiftedSolve solve = [&l, &a, inner](std::span<const double> rhs) {
        std::vector<double> x = navier_solve(l, rhs, inner);
        std::vector<double> r(x.size());
        a.apply(x, r);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = rhs[i] - r[i];
        const std::vector<double> dx = navier_solve(l, r, inner);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += dx[i];
        return x;
    };
    const std::vector<EigenResult> raw = smallest_k_eigenpairs(a, problem.mass(), solve, 0.0, options);

    // <B w, w> = 1 in unknowns is h^2 sum a u^2 = 1 after dividing by h.
    const double h = problem.grid()->h();
    std::vector<WeightedEigenpair> out;
    out.reserve(raw.size());
    for (std::size_t n = 0; n < raw.size(); ++n) {
        std::vector<double> w = raw[n].eigenvector;
        double sign = 1.0;
        if (n == 0) {
            double sum = 0.0;
            for (double x : w) sum += x;
            if (sum < 0.0) sign = -1.0;
        }
        for (double& x : w) x *= sign / h;
        out.push_back({raw[n].eigenvalue, from_unknowns(problem.grid(), w), raw[n].residual,
                       raw[n].relative_residual, raw[n].iterations});
    }
    return out;
}

QualitativeVerdict qualitative_verify(const std::vector<WeightedEigenpair>& pairs,
                                      const QualitativeThresholds& thresholds) {
    if (pairs.size() < 2) throw PreconditionError("qualitative verification needs at least two eigenpairs");
    QualitativeVerdict v;
    v.thresholds = thresholds;

    const GridFunction& u1 = pairs[0].eigenfunction;
    v.u1_min = u1.min_interior();
    v.u1_max = u1.max_interior();
    v.one_sign = v.u1_min > -thresholds.one_sign * u1.max_abs();

    const GridFunction neg_lap = neg_laplacian_apply(u1);
    v.laplacian_scale = neg_lap.max_abs();
    v.min_neg_laplacian = neg_lap.min_interior();
    v.superharmonic = v.min_neg_laplacian > -thresholds.superharmonic * v.laplacian_scale;

    v.lambda1 = pairs[0].eigenvalue;
    v.lambda2 = pairs[1].eigenvalue;
    v.gap = v.lambda2 - v.lambda1;
    v.relative_gap = v.gap / std::abs(v.lambda1);

    const GridFunction& u2 = pairs[1].eigenfunction;
    v.u2_min = u2.min_interior();
    v.u2_max = u2.max_interior();
    const double floor = thresholds.sign_change * u2.max_abs();
    v.sign_change = v.u2_max > floor && v.u2_min < -floor;

    if (!v.one_sign) v.notes.push_back(format("u1 takes both signs: min %.6e, max %.6e", v.u1_min, v.u1_max));
    if (!v.superharmonic) {
        v.notes.push_back(format("-Δ_h u1 reaches %.6e against scale %.6e", v.min_neg_laplacian, v.laplacian_scale));
    }
    if (!v.sign_change) v.notes.push_back(format("u2 does not change sign: min %.6e, max %.6e", v.u2_min, v.u2_max));
    return v;
}

std::size_t nodes_for_spacing(const DomainSpec& spec, double h) {
    if (!(h > 0.0)) throw GeometryError("grid spacing must be positive");
    const double cells = spec.extent[0] / h;
    if (!near_integer(cells) || std::round(cells) < 2.0) {
        throw GeometryError(format("extent %.17g is not a whole number of cells of size %.17g", spec.extent[0], h));
    }
    return static_cast<std::size_t>(std::round(cells)) + 1;
}

MonotonicityResult domain_monotonicity(const DomainSpec& outer, const DomainSpec& inner, const expr::Expr& a,
                                       double h, const EigenOptions& options) {
    if (outer == inner) throw GeometryError("inner and outer domains coincide");
    if (!contains(outer, inner)) throw GeometryError("inner domain is not contained in the outer domain");
    if (inner.kind == DomainKind::rectangle) {
        for (int d = 0; d < 2; ++d) {
            if (!near_integer((inner.origin[d] - outer.origin[d]) / h)) {
                throw GeometryError("inner rectangle is not aligned with the outer lattice");
            }
        }
    }
    const GridPtr outer_grid = build_domain(outer, nodes_for_spacing(outer, h));
    const GridPtr inner_grid = build_domain(inner, nodes_for_spacing(inner, h));

    MonotonicityResult r;
    r.h = h;
    r.outer_unknowns = outer_grid->unknown_count();
    r.inner_unknowns = inner_grid->unknown_count();
    if (r.inner_unknowns >= r.outer_unknowns) {
        throw GeometryError("inner domain has no fewer unknowns than the outer domain at this resolution");
    }
    r.lambda_outer = smallest_weighted(outer_grid, a, options);
    r.lambda_inner = smallest_weighted(inner_grid, a, options);
    const bool masked = inner.kind == DomainKind::disk || outer.kind == DomainKind::disk;
    r.margin = (masked ? 10.0 : 2.0) * h;
    r.strict = r.lambda_inner > r.lambda_outer * (1.0 + r.margin);
    if (!r.strict) {
        r.notes.push_back(format("λ1 inner %.6e does not exceed λ1 outer %.6e by the margin", r.lambda_inner,
                                 r.lambda_outer));
    }
    return r;
}

MorseResult morse_index(const GridPtr& grid, const GridFunction& a, const Nonlinearity& g,
                        const MorseOptions& options) {
    MorseResult r;
    r.g_prime_zero = g.d1(0.0);

    std::vector<double> c = to_unknowns(a);
    double c_max = 0.0;
    for (double& x : c) {
        x *= -r.g_prime_zero;
        c_max = std::max(c_max, -x);
    }
    const SparseOperator op = add_diagonal(assemble_navier_biharmonic(*grid), c);
    const std::vector<double> ones(op.n(), 1.0);
    EigenOptions eo = options.eigen;
    eo.k = std::min(eo.k, op.n());
    if (!eo.shift) eo.shift = -c_max - 1.0;
    const std::vector<EigenResult> pairs = smallest_k_eigenpairs(op, ones, eo);

    for (const EigenResult& p : pairs) {
        r.eigenvalues.push_back(p.eigenvalue);
        r.scale = std::max(r.scale, std::abs(p.eigenvalue));
    }
    r.threshold = 1e-8 * r.scale;
    for (double lambda : r.eigenvalues) {
        if (lambda < -r.threshold) ++r.index;
    }
    r.saturated = !r.eigenvalues.empty() && r.index == r.eigenvalues.size();

    ConditionCheck& hc = r.h_check;
    hc.name = "G(y)/y >= G'(0)";
    hc.lo = 0.0;
    hc.hi = options.y_max;
    hc.worst_margin = INFINITY;
    const std::size_t samples = std::max<std::size_t>(options.samples, 2);
    for (std::size_t i = 1; i < samples; ++i) {
        const double y = options.y_max * static_cast<double>(i) / static_cast<double>(samples - 1);
        hc.worst_margin = std::min(hc.worst_margin, g.value(y) / y - r.g_prime_zero);
        ++hc.samples;
    }
    hc.holds = hc.worst_margin >= -options.tol;
    r.h_holds = hc.holds && r.g_prime_zero >= 0.0;
    return r;
}

}  // namespace biharm
