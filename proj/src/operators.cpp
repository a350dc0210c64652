#include "biharm/operators.hpp"

#include <array>

#include "biharm/error.hpp"

namespace biharm {

namespace {

struct StencilTap {
    int di;
    int dj;
    double weight;
};

// 13-point Δ² stencil, scaled by 1/h^4.
constexpr std::array<StencilTap, 13> kBiharmonicStencil{{
    {0, 0, 20.0},
    {1, 0, -8.0}, {-1, 0, -8.0}, {0, 1, -8.0}, {0, -1, -8.0},
    {1, 1, 2.0}, {1, -1, 2.0}, {-1, 1, 2.0}, {-1, -1, 2.0},
    {2, 0, 1.0}, {-2, 0, 1.0}, {0, 2, 1.0}, {0, -2, 1.0},
}};

// Reflect a lattice index across the nearest edge: -1 -> 1, n -> n-2.
std::ptrdiff_t reflect(std::ptrdiff_t k, std::ptrdiff_t n) {
    if (k < 0) return -k;
    if (k >= n) return 2 * (n - 1) - k;
    return k;
}

void require_rectangle(const Grid& g) {
    if (g.kind() != DomainKind::rectangle) {
        throw UnsupportedDomainError("clamped biharmonic assembly supports rectangles only");
    }
}

}  // namespace

GridFunction gradient_x(const GridFunction& u) {
    const Grid& g = u.grid();
    std::vector<double> out(g.size(), 0.0);
    const double inv = 0.5 / g.h();
    for (std::size_t node : g.interior_nodes()) out[node] = (u[node + 1] - u[node - 1]) * inv;
    return GridFunction(u.grid_ptr(), std::move(out));
}

GridFunction gradient_y(const GridFunction& u) {
    const Grid& g = u.grid();
    std::vector<double> out(g.size(), 0.0);
    const double inv = 0.5 / g.h();
    const std::size_t nx = g.nx();
    for (std::size_t node : g.interior_nodes()) out[node] = (u[node + nx] - u[node - nx]) * inv;
    return GridFunction(u.grid_ptr(), std::move(out));
}

GradientField gradient(const GridFunction& u) { return {gradient_x(u), gradient_y(u)}; }

GridFunction neg_laplacian_apply(const GridFunction& u) {
    const Grid& g = u.grid();
    std::vector<double> out(g.size(), 0.0);
    const double inv = 1.0 / (g.h() * g.h());
    const std::size_t nx = g.nx();
    for (std::size_t node : g.interior_nodes()) {
        out[node] = (4.0 * u[node] - u[node - 1] - u[node + 1] - u[node - nx] - u[node + nx]) * inv;
    }
    return GridFunction(u.grid_ptr(), std::move(out), true);
}

GridFunction laplacian_apply(const GridFunction& u) {
    GridFunction out = neg_laplacian_apply(u);
    for (double& v : out.mutable_values()) v = -v;
    return out;
}

double dirichlet_energy(const GridFunction& u) {
    const Grid& g = u.grid();
    double sum = 0.0;
    auto edge = [&](std::size_t p, std::size_t q) {
        if (g.node_class(p) != NodeClass::interior && g.node_class(q) != NodeClass::interior) return;
        const double d = u[q] - u[p];
        sum += d * d;
    };
    for (std::size_t j = 0; j < g.ny(); ++j) {
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const std::size_t p = g.index(i, j);
            if (i + 1 < g.nx()) edge(p, p + 1);
            if (j + 1 < g.ny()) edge(p, p + g.nx());
        }
    }
    return sum;
}

SparseOperator assemble_neg_laplacian(const Grid& g) {
    const double inv = 1.0 / (g.h() * g.h());
    const std::size_t nx = g.nx();
    std::vector<Triplet> t;
    t.reserve(5 * g.unknown_count());
    for (std::size_t node : g.interior_nodes()) {
        const auto row = static_cast<std::size_t>(g.unknown_of(node));
        t.push_back({row, row, 4.0 * inv});
        for (std::size_t nb : {node - 1, node + 1, node - nx, node + nx}) {
            const std::ptrdiff_t col = g.unknown_of(nb);
            if (col >= 0) t.push_back({row, static_cast<std::size_t>(col), -inv});
        }
    }
    return SparseOperator::from_triplets(g.unknown_count(), std::move(t), true);
}

SparseOperator assemble_navier_biharmonic(const Grid& g) {
    const SparseOperator l = assemble_neg_laplacian(g);
    return multiply(l, l, true);
}

SparseOperator assemble_clamped_biharmonic(const Grid& g) {
    require_rectangle(g);
    const double h2 = g.h() * g.h();
    const double inv = 1.0 / (h2 * h2);
    const auto nx = static_cast<std::ptrdiff_t>(g.nx());
    const auto ny = static_cast<std::ptrdiff_t>(g.ny());
    std::vector<Triplet> t;
    t.reserve(13 * g.unknown_count());
    for (std::size_t node : g.interior_nodes()) {
        const auto row = static_cast<std::size_t>(g.unknown_of(node));
        const auto i = static_cast<std::ptrdiff_t>(node % g.nx());
        const auto j = static_cast<std::ptrdiff_t>(node / g.nx());
        for (const StencilTap& tap : kBiharmonicStencil) {
            const std::ptrdiff_t qi = reflect(i + tap.di, nx);
            const std::ptrdiff_t qj = reflect(j + tap.dj, ny);
            const std::ptrdiff_t col = g.unknown_of(g.index(static_cast<std::size_t>(qi), static_cast<std::size_t>(qj)));
            if (col >= 0) t.push_back({row, static_cast<std::size_t>(col), tap.weight * inv});
        }
    }
    return SparseOperator::from_triplets(g.unknown_count(), std::move(t), true);
}

SparseOperator assemble_linearized(const Grid& g, double delta, const GridFunction& c) {
    if (delta < 0.0) throw Error("assemble_linearized: delta must be nonnegative");
    SparseOperator a = assemble_clamped_biharmonic(g);
    if (delta != 0.0) a = add(1.0, a, delta, assemble_neg_laplacian(g));
    const std::vector<double> diag = to_unknowns(c);
    return add_diagonal(a, diag);
}

GridFunction clamped_biharmonic_apply(const GridFunction& u) {
    const Grid& g = u.grid();
    require_rectangle(g);
    const double h2 = g.h() * g.h();
    const double inv = 1.0 / (h2 * h2);
    const auto nx = static_cast<std::ptrdiff_t>(g.nx());
    const auto ny = static_cast<std::ptrdiff_t>(g.ny());
    std::vector<double> out(g.size(), 0.0);
    for (std::size_t node : g.interior_nodes()) {
        const auto i = static_cast<std::ptrdiff_t>(node % g.nx());
        const auto j = static_cast<std::ptrdiff_t>(node / g.nx());
        double sum = 0.0;
        for (const StencilTap& tap : kBiharmonicStencil) {
            const auto qi = static_cast<std::size_t>(reflect(i + tap.di, nx));
            const auto qj = static_cast<std::size_t>(reflect(j + tap.dj, ny));
            sum += tap.weight * u(qi, qj);
        }
        out[node] = sum * inv;
    }
    return GridFunction(u.grid_ptr(), std::move(out));
}

DiscreteOperatorSet assemble_all(const GridPtr& grid) {
    DiscreteOperatorSet set{grid, assemble_neg_laplacian(*grid), {}, std::nullopt};
    set.biharm_navier = multiply(set.neg_laplacian, set.neg_laplacian, true);
    if (grid->kind() == DomainKind::rectangle) set.biharm_clamped = assemble_clamped_biharmonic(*grid);
    return set;
}

LinearMap navier_map(const SparseOperator& neg_laplacian) {
    return LinearMap(neg_laplacian.n(), [&neg_laplacian](std::span<const double> in, std::span<double> out) {
        std::vector<double> tmp(in.size());
        neg_laplacian.apply(in, tmp);
        neg_laplacian.apply(tmp, out);
    });
}

std::vector<double> navier_solve(const SparseOperator& neg_laplacian, std::span<const double> b,
                                 const SolveOptions& options) {
    const LinearMap l(neg_laplacian);
    const std::vector<double> y = cg_solve(l, b, options).x;
    return cg_solve(l, y, options).x;
}

}  // namespace biharm
