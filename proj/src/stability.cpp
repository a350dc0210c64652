#include "biharm/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "biharm/operators.hpp"

namespace biharm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

expr::Bindings point_of(const Grid& g, std::size_t node) {
    expr::Bindings b;
    b.set(expr::Var::x, g.x(node % g.nx())).set(expr::Var::y, g.y(node / g.nx()));
    return b;
}

double h2_sum_squares(const GridFunction& f) {
    double s = 0.0;
    for (std::size_t node : f.grid().interior_nodes()) s += f[node] * f[node];
    return f.grid().h() * f.grid().h() * s;
}

void check_clamped(const GridFunction& u) {
    const Grid& g = u.grid();
    const double scale = u.max_abs();
    const double h = g.h();
    const std::size_t nx = g.nx();
    const std::size_t ny = g.ny();
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            if (g.node_class(i, j) != NodeClass::boundary) continue;
            if (std::abs(u(i, j)) > 1e-10 * scale) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "u is not clamped-compatible: boundary value %.6e at (%.6g, %.6g)",
                              u(i, j), g.x(i), g.y(j));
                throw GeometryError(buf);
            }
        }
    }
    // One-sided normal difference from each edge into its first interior row.
    const double limit = 50.0 * h * scale;
    auto check = [&](std::size_t ib, std::size_t jb, std::size_t iq, std::size_t jq) {
        if (std::abs(u(iq, jq) - u(ib, jb)) / h > limit) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "u is not clamped-compatible: normal derivative %.6e at (%.6g, %.6g)",
                          (u(iq, jq) - u(ib, jb)) / h, g.x(ib), g.y(jb));
            throw GeometryError(buf);
        }
    };
    for (std::size_t i = 1; i + 1 < nx; ++i) {
        check(i, 0, i, 1);
        check(i, ny - 1, i, ny - 2);
    }
    for (std::size_t j = 1; j + 1 < ny; ++j) {
        check(0, j, 1, j);
        check(nx - 1, j, nx - 2, j);
    }
}

struct FormParts {
    double laplacian = 0.0;
    double gradient = 0.0;
    double weight = 0.0;     // ∫a v^2
    double potential = 0.0;  // ∫∂f1/∂s v^2
};

FormParts form_parts(const MemsProblem& p, const GridFunction& v) {
    const Grid& g = *p.grid();
    FormParts f;
    f.laplacian = h2_sum_squares(laplacian_apply(v));
    f.gradient = dirichlet_energy(v);
    double wa = 0.0;
    double wc = 0.0;
    for (std::size_t node : g.interior_nodes()) {
        const double v2 = v[node] * v[node];
        wa += p.a()[node] * v2;
        wc += p.df1_at(node, p.u()[node]) * v2;
    }
    f.weight = g.h() * g.h() * wa;
    f.potential = g.h() * g.h() * wc;
    return f;
}

double form_value(const MemsProblem& p, const FormParts& f) {
    return f.laplacian + p.delta() * f.gradient - f.weight + f.potential;
}

double form_scale(const MemsProblem& p, const FormParts& f) {
    return f.laplacian + p.delta() * f.gradient + std::abs(f.weight) + std::abs(f.potential);
}

}  // namespace

MemsProblem::MemsProblem(GridPtr grid, double delta, GridFunction a, Nonlinearity f1, GridFunction u,
                         bool manufactured, double eps)
    : grid_(std::move(grid)),
      delta_(delta),
      a_(std::move(a)),
      f1_(std::move(f1)),
      u_(std::move(u)),
      manufactured_(manufactured),
      eps_(eps),
      floor_(0.0) {
    if (grid_->kind() != DomainKind::rectangle) {
        throw UnsupportedDomainError("clamped problems are supported on rectangles only");
    }
    if (!(delta_ >= 0.0)) throw PreconditionError("δ must be nonnegative");
    if (!(eps_ > 0.0)) throw PreconditionError("division floor ε must be positive");
    if (&a_.grid() != grid_.get() || &u_.grid() != grid_.get()) {
        throw PreconditionError("a and u must live on the problem grid");
    }
    if (!(u_.min_interior() > 0.0)) throw PreconditionError("u must be positive at interior nodes");
    check_clamped(u_);
    floor_ = eps_ * u_.max_abs();
}

double MemsProblem::floored(std::size_t node) const noexcept { return std::max(u_[node], floor_); }

double MemsProblem::f1_at(std::size_t node, double s) const { return f1_.value(s, point_of(*grid_, node)); }

double MemsProblem::df1_at(std::size_t node, double s) const { return f1_.d1(s, point_of(*grid_, node)); }

MemsProblem manufacture(const GridPtr& grid, double delta, const expr::Expr& u_expr, const Nonlinearity& f1,
                        double eps) {
    const GridFunction u = sample(u_expr, grid);
    // Validates u before a is formed.
    const MemsProblem probe(grid, delta, GridFunction::zeros(grid), f1, u, false, eps);

    const GridFunction bih = clamped_biharmonic_apply(u);
    const GridFunction neg_lap = neg_laplacian_apply(u);
    std::vector<double> a(grid->size(), 0.0);
    for (std::size_t node : grid->interior_nodes()) {
        a[node] = (bih[node] + delta * neg_lap[node] + probe.f1_at(node, u[node])) / probe.floored(node);
    }
    const std::size_t nx = grid->nx();
    const std::size_t ny = grid->ny();
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            if (grid->node_class(i, j) != NodeClass::boundary) continue;
            const std::size_t ci = std::clamp<std::size_t>(i, 1, nx - 2);
            const std::size_t cj = std::clamp<std::size_t>(j, 1, ny - 2);
            a[grid->index(i, j)] = a[grid->index(ci, cj)];
        }
    }
    return MemsProblem(grid, delta, GridFunction(grid, std::move(a)), f1, u, true, eps);
}

StrongResidual strong_residual(const MemsProblem& p) {
    const GridFunction& u = p.u();
    const GridFunction bih = clamped_biharmonic_apply(u);
    const GridFunction neg_lap = neg_laplacian_apply(u);
    StrongResidual r;
    for (std::size_t node : p.grid()->interior_nodes()) {
        if (p.floored(node) != u[node]) {
            ++r.floored_nodes;
            continue;
        }
        const double t1 = bih[node];
        const double t2 = p.delta() * neg_lap[node];
        const double t3 = p.a()[node] * u[node];
        const double t4 = p.f1_at(node, u[node]);
        const double scale = std::max({std::abs(t1), std::abs(t2), std::abs(t3), std::abs(t4), 1.0});
        r.max_scaled = std::max(r.max_scaled, std::abs(t1 + t2 - t3 + t4) / scale);
    }
    return r;
}

double energy(const MemsProblem& p, const GridFunction& w) {
    const Grid& g = *p.grid();
    if (&w.grid() != &g) throw PreconditionError("w must live on the problem grid");
    const GridFunction bih = clamped_biharmonic_apply(w);
    double plate = 0.0;
    double weight = 0.0;
    double primitive = 0.0;
    for (std::size_t node : g.interior_nodes()) {
        plate += bih[node] * w[node];
        weight += p.a()[node] * w[node] * w[node];
        primitive += expr::antiderivative_value(p.f1().f(), point_of(g, node), p.f1().variable(), w[node]);
    }
    const double h2 = g.h() * g.h();
    return 0.5 * h2 * plate + 0.5 * p.delta() * dirichlet_energy(w) - 0.5 * h2 * weight + h2 * primitive;
}

GridFunction linearized_potential(const MemsProblem& p) {
    std::vector<double> c(p.grid()->size(), 0.0);
    for (std::size_t node : p.grid()->interior_nodes()) {
        c[node] = -p.a()[node] + p.df1_at(node, p.u()[node]);
    }
    return GridFunction(p.grid(), std::move(c));
}

double quadratic_form(const MemsProblem& p, const GridFunction& v) { return form_value(p, form_parts(p, v)); }

LinearizedEigen linearized_lambda1(const MemsProblem& p, const EigenOptions& options) {
    const GridFunction c = linearized_potential(p);
    const SparseOperator a = assemble_linearized(*p.grid(), p.delta(), c);
    const std::vector<double> ones(a.n(), 1.0);
    EigenOptions o = options;
    o.k = 1;
    if (!o.residual_scale) o.residual_scale = a.max_abs_row_sum();
    LinearizedEigen r;
    // min(c) - 1 is a safe shift but can sit ~1/u below λ1 near corners; bracket λ1 by inertia
    // and shift-invert at the lower end instead.
    r.shift = o.shift ? *o.shift : bracket_smallest_eigenvalue(a, ones).lo;
    const ShiftedFactorization factor(a, ones, r.shift);
    if (factor.negative_pivots() != 0) throw PreconditionError("linearized shift lies above λ1");
    const ShiftedSolve solve = [&factor](std::span<const double> rhs) { return factor.solve(rhs); };
    r.pair = smallest_k_eigenpairs(LinearMap(a), ones, solve, r.shift, o).front();
    r.rayleigh_quotient = rayleigh_quotient(LinearMap(a), ones, r.pair.eigenvector);
    return r;
}

std::vector<bool> test_function_mask(const MemsProblem& p) {
    const Grid& g = *p.grid();
    const double floor = p.eps() * p.u().max_abs();
    std::vector<bool> mask(g.size(), false);
    for (std::size_t node : g.interior_nodes()) {
        mask[node] = g.deep_interior(node % g.nx(), node / g.nx()) && p.u()[node] >= floor;
    }
    return mask;
}

ProofIdentity proof_identity(const MemsProblem& p, const GridFunction& v) {
    const Grid& g = *p.grid();
    if (&v.grid() != &g) throw PreconditionError("v must live on the problem grid");
    const std::vector<bool> mask = test_function_mask(p);
    for (std::size_t node = 0; node < g.size(); ++node) {
        if (v[node] != 0.0 && !mask[node]) {
            throw PreconditionError("test function support leaves the region u >= ε||u||_inf");
        }
    }
    const GridFunction& u = p.u();
    const GridFunction lap_v = laplacian_apply(v);
    const GridFunction lap_u = laplacian_apply(u);
    const GradientField gv = gradient(v);
    const GradientField gu = gradient(u);

    double lhs = 0.0;
    double rhs = 0.0;
    for (std::size_t node : g.interior_nodes()) {
        const double uf = p.floored(node);
        const double q = v[node] / uf;
        const double v2 = v[node] * v[node];
        lhs += lap_v[node] * lap_v[node] - p.a()[node] * v2 + p.f1_at(node, u[node]) / uf * v2;
        const double d = lap_v[node] - q * lap_u[node];
        const double ex = gv.dx[node] - q * gu.dx[node];
        const double ey = gv.dy[node] - q * gu.dy[node];
        rhs += d * d + (p.delta() - 2.0 * lap_u[node] / uf) * (ex * ex + ey * ey);
    }
    const double h2 = g.h() * g.h();
    ProofIdentity r;
    r.lhs = h2 * lhs + p.delta() * dirichlet_energy(v);
    r.rhs = h2 * rhs;
    r.residual = std::abs(r.lhs - r.rhs);
    return r;
}

StabilityReport stability_report(const MemsProblem& p, const StabilityOptions& options) {
    const Grid& g = *p.grid();
    const GridFunction& u = p.u();
    StabilityReport r;

    const LinearizedEigen eig = linearized_lambda1(p, options.eigen);
    r.lambda1 = eig.pair.eigenvalue;
    r.lambda1_rayleigh = eig.rayleigh_quotient;
    r.lambda1_residual = eig.pair.relative_residual;
    r.scale = std::max(1.0, std::abs(r.lambda1));
    r.stable = r.lambda1 >= -1e-8 * r.scale;

    r.h1_margin = kInf;
    for (std::size_t node : g.interior_nodes()) {
        const double s = u[node];
        r.h1_margin = std::min(r.h1_margin, p.df1_at(node, s) - p.f1_at(node, s) / s);
    }
    r.h1_holds = r.h1_margin >= -options.h1_tol;

    const GridFunction lap_u = laplacian_apply(u);
    r.side_condition_min = kInf;
    for (std::size_t node : g.interior_nodes()) {
        const double side = p.delta() * u[node] - 2.0 * lap_u[node];
        r.side_condition_min = std::min(r.side_condition_min, side);
        if (side < 0.0) ++r.side_condition_violations;
    }
    r.side_condition_holds = r.side_condition_violations == 0;
    r.theorem_applicable = r.h1_holds && r.side_condition_holds;

    const std::vector<bool> mask = test_function_mask(p);
    BumpOptions bo;
    bo.allowed = &mask;
    const SparseOperator a = assemble_linearized(g, p.delta(), linearized_potential(p));
    const double h2 = g.h() * g.h();
    r.min_bump_quotient = kInf;
    r.min_bump_form = kInf;
    for (const Bump& bump : random_bump_params(g, options.seed, options.bumps, bo)) {
        const GridFunction v = sample_bump(p.grid(), bump);
        const FormParts parts = form_parts(p, v);
        BumpForm b;
        b.quadrature = form_value(p, parts);
        const std::vector<double> w = to_unknowns(v);
        b.assembled = h2 * dot(a.apply(w), w);
        b.mass = h2_sum_squares(v);
        b.quotient = b.quadrature / b.mass;
        const ProofIdentity id = proof_identity(p, v);
        b.identity_residual = id.residual;

        r.min_bump_quotient = std::min(r.min_bump_quotient, b.quotient);
        r.min_bump_form = std::min(r.min_bump_form, b.quadrature);
        r.max_form_disagreement =
            std::max(r.max_form_disagreement, std::abs(b.quadrature - b.assembled) / form_scale(p, parts));
        r.max_identity_residual = std::max(r.max_identity_residual, id.residual);
        r.max_identity_relative =
            std::max(r.max_identity_relative, id.residual / std::max({std::abs(id.lhs), std::abs(id.rhs), 1e-300}));
        r.bumps.push_back(b);
    }
    if (r.bumps.empty()) {
        r.min_bump_quotient = 0.0;
        r.min_bump_form = 0.0;
    }
    if (p.manufactured()) r.strong = strong_residual(p);

    char buf[200];
    if (!r.h1_holds) {
        std::snprintf(buf, sizeof buf, "H1 fails: min of ∂f1/∂s - f1/s is %.6e", r.h1_margin);
        r.notes.emplace_back(buf);
    }
    if (!r.side_condition_holds) {
        std::snprintf(buf, sizeof buf, "side condition δu - 2Δu >= 0 fails at %zu nodes (min %.6e)",
                      r.side_condition_violations, r.side_condition_min);
        r.notes.emplace_back(buf);
    }
    if (!r.theorem_applicable) r.notes.emplace_back("stability hypotheses fail; λ1 is reported independently");
    if (r.theorem_applicable && !r.stable) r.notes.emplace_back("hypotheses hold but λ1 is negative");
    return r;
}

}  // namespace biharm
