#include "biharm/picone.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "biharm/error.hpp"
#include "biharm/operators.hpp"

namespace biharm {

namespace {

double sq(double x) noexcept { return x * x; }

struct Fields {
    GridFunction lap_u;
    GridFunction lap_v;
    GradientField grad_u;
    GradientField grad_v;
};

Fields differentiate(const GridFunction& u, const GridFunction& v) {
    return {laplacian_apply(u), laplacian_apply(v), gradient(u), gradient(v)};
}

PiconePoint point_at(const GridFunction& u, const GridFunction& v, const Fields& d, std::size_t node) {
    return {u[node],           d.lap_u[node],     d.grad_u.dx[node], d.grad_u.dy[node],
            v[node],           d.lap_v[node],     d.grad_v.dx[node], d.grad_v.dy[node]};
}

// Admissible side of v and the set of admissible interior nodes.
struct Admissibility {
    Orientation orientation = Orientation::positive;
    std::vector<bool> mask;
    std::size_t count = 0;
};

Admissibility classify(const GridFunction& v, double eps) {
    const Grid& g = v.grid();
    bool above = true;  // v > -eps everywhere
    bool below = true;  // v < eps everywhere
    for (std::size_t node : g.interior_nodes()) {
        above = above && v[node] > -eps;
        below = below && v[node] < eps;
    }
    if (!above && !below) throw PreconditionError("no admissible nodes: v takes both signs beyond the floor");
    Admissibility a;
    a.orientation = above ? Orientation::positive : Orientation::negative;
    a.mask.assign(g.size(), false);
    for (std::size_t node : g.interior_nodes()) {
        const bool ok = a.orientation == Orientation::positive ? v[node] >= eps : v[node] <= -eps;
        if (ok) {
            a.mask[node] = true;
            ++a.count;
        }
    }
    if (a.count == 0) throw PreconditionError("no admissible nodes");
    return a;
}

double resolve_eps(const GridFunction& v, const PiconeOptions& options) {
    if (options.eps) {
        if (!(*options.eps > 0.0)) throw Error("picone: eps must be positive");
        return *options.eps;
    }
    const double e = 1e-8 * v.max_abs();
    if (!(e > 0.0)) throw PreconditionError("no admissible nodes: v vanishes identically");
    return e;
}

bool stencil_admissible(const Grid& g, const std::vector<bool>& mask, std::size_t node) {
    const std::size_t nx = g.nx();
    return mask[node - 1] && mask[node + 1] && mask[node - nx] && mask[node + nx];
}

// Δ_h of a nodal field at one interior node.
double nodal_laplacian(const Grid& g, const std::vector<double>& w, std::size_t node) {
    const std::size_t nx = g.nx();
    return (w[node - 1] + w[node + 1] + w[node - nx] + w[node + nx] - 4.0 * w[node]) / (g.h() * g.h());
}

using PointForm = std::function<double(const PiconePoint&, std::size_t)>;

PiconeReport evaluate(const GridFunction& u, const GridFunction& v, const PiconeOptions& options, double eps,
                      const PointForm& l_form, const PointForm& r_expanded, const std::vector<double>& quotient,
                      const PointForm* alternate_l) {
    if (u.grid_ptr() != v.grid_ptr()) throw Error("picone: u and v live on different grids");
    const GridPtr& gp = v.grid_ptr();
    const Grid& g = *gp;
    const Admissibility adm = classify(v, eps);
    const Fields d = differentiate(u, v);

    PiconeReport rep(GridFunction::zeros(gp), GridFunction::zeros(gp));
    rep.mode = options.mode;
    rep.orientation = adm.orientation;
    rep.eps = eps;
    rep.reported.assign(g.size(), false);
    rep.admissible_count = adm.count;
    auto lv = rep.l.mutable_values();
    auto rv = rep.r.mutable_values();
    const double sign = adm.orientation == Orientation::positive ? 1.0 : -1.0;

    double max_abs = 1.0;
    double residual = 0.0;
    double alt_residual = 0.0;
    double min_l = std::numeric_limits<double>::infinity();
    double min_l_hyp = std::numeric_limits<double>::infinity();
    double sum_l = 0.0;
    for (std::size_t node : g.interior_nodes()) {
        if (!adm.mask[node]) continue;
        if (options.mode == PiconeMode::direct && !stencil_admissible(g, adm.mask, node)) continue;
        const PiconePoint p = point_at(u, v, d, node);
        const double l = l_form(p, node);
        double r = 0.0;
        if (options.mode == PiconeMode::expanded) {
            r = r_expanded(p, node);
        } else {
            r = sq(p.lap_u) - nodal_laplacian(g, quotient, node) * p.lap_v;
        }
        rep.reported[node] = true;
        ++rep.reported_count;
        lv[node] = l;
        rv[node] = r;
        max_abs = std::max({max_abs, std::abs(l), std::abs(r)});
        residual = std::max(residual, std::abs(l - r));
        if (alternate_l) alt_residual = std::max(alt_residual, std::abs((*alternate_l)(p, node) - r));
        min_l = std::min(min_l, l);
        sum_l += l;
        const double neg_lap = -p.lap_v;
        if (sign * neg_lap >= eps) {
            ++rep.hypothesis_count;
            min_l_hyp = std::min(min_l_hyp, l);
        }
    }
    if (rep.reported_count == 0) throw PreconditionError("no admissible nodes with a complete stencil");
    rep.scale = max_abs;
    rep.max_abs_identity_residual = residual;
    rep.min_l = min_l;
    rep.min_l_hypothesis = rep.hypothesis_count > 0 ? min_l_hyp : 0.0;
    rep.integral_l = g.h() * g.h() * sum_l;
    rep.hypotheses_hold = rep.hypothesis_count == rep.reported_count;
    if (alternate_l) rep.alternate_denominator_residual = alt_residual;

    std::size_t fit_nodes = 0;
    for (std::size_t node : g.interior_nodes()) fit_nodes += std::abs(v[node]) >= eps ? 1 : 0;
    if (fit_nodes >= 10) rep.equality = detect_linear_relation(u, v, eps);

    if (adm.orientation == Orientation::negative) rep.notes.emplace_back("v is negative on the admissible set");
    if (options.mode == PiconeMode::direct) {
        rep.notes.emplace_back("direct mode: nodes whose 5-point stencil leaves the admissible set are excluded");
    }
    return rep;
}

// Sampling interval for the f-conditions: the range of v on the admissible set, widened
// by 10% and clipped to the admissible side of the floor.
std::pair<double, double> condition_interval(const GridFunction& v, const PiconeReport& rep) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    const Grid& g = v.grid();
    for (std::size_t node : g.interior_nodes()) {
        if (!rep.reported[node]) continue;
        lo = std::min(lo, v[node]);
        hi = std::max(hi, v[node]);
    }
    const double margin = 0.1 * (hi - lo);
    lo -= margin;
    hi += margin;
    if (rep.orientation == Orientation::positive) lo = std::max(lo, rep.eps);
    else hi = std::min(hi, -rep.eps);
    return {lo, hi};
}

}  // namespace

double picone_linear_l(const PiconePoint& p) noexcept {
    const double q = p.u / p.v;
    return sq(p.lap_u - q * p.lap_v) - 2.0 * p.lap_v / p.v * (sq(p.ux - q * p.vx) + sq(p.uy - q * p.vy));
}

double picone_linear_r(const PiconePoint& p) noexcept {
    const double gu2 = sq(p.ux) + sq(p.uy);
    const double gv2 = sq(p.vx) + sq(p.vy);
    const double guv = p.ux * p.vx + p.uy * p.vy;
    const double v2 = p.v * p.v;
    const double lap_q = 2.0 * gu2 / p.v + 2.0 * p.u * p.lap_u / p.v - 4.0 * p.u * guv / v2 +
                         2.0 * p.u * p.u * gv2 / (v2 * p.v) - p.u * p.u * p.lap_v / v2;
    return sq(p.lap_u) - lap_q * p.lap_v;
}

double picone_nonlinear_l(const PiconePoint& p, const FValues& f, CurvatureDenominator denominator) noexcept {
    const double lu2 = sq(p.lap_u);
    const double gv2 = sq(p.vx) + sq(p.vy);
    double grouped = 0.0;
    if (f.d1 > 0.0) {
        const double rt = std::sqrt(f.d1);
        grouped = sq(p.lap_u / rt - p.u / f.f * rt * p.lap_v);
    } else {
        grouped = lu2 / f.d1 - 2.0 * p.u * p.lap_u * p.lap_v / f.f + p.u * p.u * f.d1 * sq(p.lap_v) / sq(f.f);
    }
    const double q = p.u * f.d1 / f.f;
    const double grad = sq(p.ux - q * p.vx) + sq(p.uy - q * p.vy);
    const double curv_den = denominator == CurvatureDenominator::squared ? sq(f.f) : f.f;
    return lu2 - lu2 / f.d1 + grouped - 2.0 * p.lap_v / f.f * grad + p.u * p.u * f.d2 * gv2 * p.lap_v / curv_den;
}

double picone_nonlinear_r(const PiconePoint& p, const FValues& f) noexcept {
    const double gu2 = sq(p.ux) + sq(p.uy);
    const double gv2 = sq(p.vx) + sq(p.vy);
    const double guv = p.ux * p.vx + p.uy * p.vy;
    const double f2 = f.f * f.f;
    const double lap_q = 2.0 * gu2 / f.f + 2.0 * p.u * p.lap_u / f.f - 4.0 * p.u * f.d1 * guv / f2 -
                         p.u * p.u * (f.d2 * gv2 + f.d1 * p.lap_v) / f2 +
                         2.0 * p.u * p.u * f.d1 * f.d1 * gv2 / (f2 * f.f);
    return sq(p.lap_u) - lap_q * p.lap_v;
}

LinearFit detect_linear_relation(const GridFunction& u, const GridFunction& v, double eps) {
    if (!(eps > 0.0)) throw Error("detect_linear_relation: eps must be positive");
    const Grid& g = v.grid();
    std::vector<std::size_t> nodes;
    for (std::size_t node : g.interior_nodes()) {
        if (std::abs(v[node]) >= eps) nodes.push_back(node);
    }
    if (nodes.size() < 10) throw PreconditionError("detect_linear_relation: fewer than 10 admissible nodes");
    const auto count = static_cast<double>(nodes.size());
    double mu = 0.0;
    double mv = 0.0;
    double vmax = 0.0;
    for (std::size_t node : nodes) {
        mu += u[node];
        mv += v[node];
        vmax = std::max(vmax, std::abs(v[node]));
    }
    mu /= count;
    mv /= count;
    double svv = 0.0;
    double suv = 0.0;
    for (std::size_t node : nodes) {
        const double dv = v[node] - mv;
        svv += dv * dv;
        suv += dv * (u[node] - mu);
    }
    LinearFit fit;
    fit.nodes = nodes.size();
    if (svv <= sq(1e-14 * vmax) * count) {
        fit.degenerate = true;
        fit.c = 0.0;
        fit.d = mu;
    } else {
        fit.c = suv / svv;
        fit.d = mu - fit.c * mv;
    }
    for (std::size_t node : nodes) {
        fit.max_deviation = std::max(fit.max_deviation, std::abs(u[node] - (fit.c * v[node] + fit.d)));
    }
    return fit;
}

PiconeReport picone_linear(const GridFunction& u, const GridFunction& v, const PiconeOptions& options) {
    const double eps = resolve_eps(v, options);
    std::vector<double> quotient(v.grid().size(), 0.0);
    if (options.mode == PiconeMode::direct) {
        for (std::size_t n = 0; n < quotient.size(); ++n) {
            if (std::abs(v[n]) >= eps) quotient[n] = u[n] * u[n] / v[n];
        }
    }
    const PointForm l = [](const PiconePoint& p, std::size_t) { return picone_linear_l(p); };
    const PointForm r = [](const PiconePoint& p, std::size_t) { return picone_linear_r(p); };
    PiconeReport rep = evaluate(u, v, options, eps, l, r, quotient, nullptr);
    rep.nonnegativity_asserted = rep.hypotheses_hold;
    return rep;
}

PiconeReport picone_nonlinear(const GridFunction& u, const GridFunction& v, const Nonlinearity& f,
                              const PiconeOptions& options) {
    const double eps = resolve_eps(v, options);
    const Grid& g = v.grid();
    std::vector<FValues> fv(g.size());
    std::vector<double> quotient(g.size(), 0.0);
    for (std::size_t n = 0; n < g.size(); ++n) {
        if (std::abs(v[n]) < eps || g.node_class(n) == NodeClass::exterior) continue;
        const double y = v[n];
        fv[n] = {f.value(y), f.d1(y), f.d2(y)};
        if (options.mode == PiconeMode::direct) quotient[n] = u[n] * u[n] / fv[n].f;
    }
    const CurvatureDenominator other = options.denominator == CurvatureDenominator::squared
                                           ? CurvatureDenominator::single
                                           : CurvatureDenominator::squared;
    const PointForm l = [&](const PiconePoint& p, std::size_t n) {
        return picone_nonlinear_l(p, fv[n], options.denominator);
    };
    const PointForm alt = [&](const PiconePoint& p, std::size_t n) { return picone_nonlinear_l(p, fv[n], other); };
    const PointForm r = [&](const PiconePoint& p, std::size_t n) { return picone_nonlinear_r(p, fv[n]); };
    PiconeReport rep = evaluate(u, v, options, eps, l, r, quotient, &alt);
    rep.nonlinear = true;

    const auto [lo, hi] = condition_interval(v, rep);
    rep.f_conditions.push_back(f.check_positive(lo, hi, options.condition_samples));
    rep.f_conditions.push_back(f.check_slope_at_least_one(lo, hi, options.condition_samples));
    rep.f_conditions.push_back(f.check_concave(lo, hi, options.condition_samples));
    rep.f_conditions_hold = std::all_of(rep.f_conditions.begin(), rep.f_conditions.end(),
                                        [](const ConditionCheck& c) { return c.holds; });
    rep.nonnegativity_asserted = rep.hypotheses_hold && rep.f_conditions_hold;

    char buf[160];
    std::snprintf(buf, sizeof buf, "f-conditions sampled on the range of v: [%.6g, %.6g]", lo, hi);
    rep.notes.emplace_back(buf);
    rep.notes.emplace_back(options.denominator == CurvatureDenominator::squared
                               ? "curvature term uses f(v)^2, matching the expansion of the quotient Laplacian"
                               : "curvature term uses f(v); identity holds only where f'' vanishes");
    if (!rep.f_conditions_hold) rep.notes.emplace_back("f-conditions fail: nonnegativity of L is not asserted");
    return rep;
}

}  // namespace biharm
