#include "biharm/hardy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "biharm/operators.hpp"

namespace biharm {

namespace {

void check_inputs(const GridFunction& v, double lambda, const GridFunction& g) {
    if (&v.grid() != &g.grid()) throw PreconditionError("v and g live on different grids");
    if (!(lambda >= 0.0)) throw PreconditionError("λ must be nonnegative");
    for (std::size_t node : g.grid().interior_nodes()) {
        if (!(g[node] >= 0.0)) throw PreconditionError("weight g must be nonnegative");
    }
}

}  // namespace

SupersolutionCheck verify_supersolution(const GridFunction& v, double lambda, const GridFunction& g,
                                        const Nonlinearity& f) {
    check_inputs(v, lambda, g);
    const Grid& grid = v.grid();
    const GridFunction lv = neg_laplacian_apply(v);
    const GridFunction llv = neg_laplacian_apply(lv);

    SupersolutionCheck c;
    constexpr double inf = std::numeric_limits<double>::infinity();
    c.min_residual = inf;
    c.min_v = inf;
    c.min_neg_laplacian = inf;
    for (std::size_t node : grid.interior_nodes()) {
        if (!grid.deep_interior(node % grid.nx(), node / grid.nx())) continue;
        const double rhs = lambda * g[node] * f.value(v[node]);
        c.min_residual = std::min(c.min_residual, llv[node] - rhs);
        c.min_v = std::min(c.min_v, v[node]);
        c.min_neg_laplacian = std::min(c.min_neg_laplacian, lv[node]);
        c.scale = std::max({c.scale, std::abs(llv[node]), std::abs(rhs)});
        ++c.nodes;
    }
    if (c.nodes == 0) throw PreconditionError("no nodes at distance 2h from the boundary: domain too small");
    return c;
}

HardyMargin hardy_margin(const GridFunction& phi, double lambda, const GridFunction& g, std::string label) {
    const Grid& grid = phi.grid();
    const GridFunction lap = laplacian_apply(phi);
    double energy = 0.0;
    double mass = 0.0;
    for (std::size_t node : grid.interior_nodes()) {
        energy += lap[node] * lap[node];
        mass += g[node] * phi[node] * phi[node];
    }
    const double h2 = grid.h() * grid.h();
    HardyMargin m;
    m.label = std::move(label);
    m.laplacian_energy = h2 * energy;
    m.weighted_mass = h2 * mass;
    m.margin = m.laplacian_energy - lambda * m.weighted_mass;
    return m;
}

HardyReport hardy_rellich_check(const GridFunction& v, double lambda, const GridFunction& g, const Nonlinearity& f,
                                const HardyOptions& options) {
    HardyReport r;
    r.lambda = lambda;
    r.tolerance = options.tolerance;
    r.supersolution = verify_supersolution(v, lambda, g, f);
    const SupersolutionCheck& s = r.supersolution;
    r.supersolution_holds =
        s.min_residual >= -options.tolerance * s.scale && s.min_v > 0.0 && s.min_neg_laplacian > 0.0;

    const Grid& grid = v.grid();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t node : grid.interior_nodes()) {
        if (!grid.deep_interior(node % grid.nx(), node / grid.nx())) continue;
        lo = std::min(lo, v[node]);
        hi = std::max(hi, v[node]);
    }
    r.f_conditions.push_back(f.check_positive(lo, hi, options.condition_samples));
    r.f_conditions.push_back(f.check_slope_at_least_one(lo, hi, options.condition_samples));
    r.f_conditions.push_back(f.check_concave(lo, hi, options.condition_samples));
    r.f_conditions_hold = std::all_of(r.f_conditions.begin(), r.f_conditions.end(),
                                      [](const ConditionCheck& c) { return c.holds; });
    r.inequality_asserted = r.supersolution_holds && r.f_conditions_hold;

    const GridPtr& gp = v.grid_ptr();
    const std::vector<GridFunction> bumps = random_bump(gp, options.seed, options.bumps);
    char label[32];
    for (std::size_t n = 0; n < bumps.size(); ++n) {
        std::snprintf(label, sizeof label, "bump-%zu", n);
        r.margins.push_back(hardy_margin(bumps[n], lambda, g, label));
    }
    for (std::size_t n = 0; n < options.extra.size(); ++n) {
        if (&options.extra[n].grid() != &grid) throw PreconditionError("extra test function on a different grid");
        std::snprintf(label, sizeof label, "extra-%zu", n);
        r.margins.push_back(hardy_margin(options.extra[n], lambda, g, label));
    }
    r.count = r.margins.size();

    r.min_margin = std::numeric_limits<double>::infinity();
    r.min_quotient = std::numeric_limits<double>::infinity();
    for (const HardyMargin& m : r.margins) {
        r.scale = std::max(r.scale, m.laplacian_energy);
        r.min_margin = std::min(r.min_margin, m.margin);
        if (m.weighted_mass > 0.0) r.min_quotient = std::min(r.min_quotient, m.laplacian_energy / m.weighted_mass);
    }
    if (r.margins.empty()) r.min_margin = 0.0;
    r.margins_hold = r.min_margin >= -options.tolerance * r.scale;

    char buf[200];
    if (!r.supersolution_holds) {
        std::snprintf(buf, sizeof buf, "supersolution fails: min residual %.6e, min v %.6e, min -Δv %.6e",
                      s.min_residual, s.min_v, s.min_neg_laplacian);
        r.notes.emplace_back(buf);
    }
    if (!r.f_conditions_hold) r.notes.emplace_back("f violates the structural conditions on the range of v");
    if (!r.margins_hold) {
        std::snprintf(buf, sizeof buf, "negative margin %.6e against scale %.6e", r.min_margin, r.scale);
        r.notes.emplace_back(buf);
    }
    return r;
}

std::vector<double> margins_at(const HardyReport& report, double lambda) {
    std::vector<double> out;
    out.reserve(report.margins.size());
    for (const HardyMargin& m : report.margins) out.push_back(m.laplacian_energy - lambda * m.weighted_mass);
    return out;
}

}  // namespace biharm
