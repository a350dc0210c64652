#pragma once

#include <optional>
#include <utility>

#include "biharm/grid.hpp"
#include "biharm/linalg.hpp"

namespace biharm {

struct GradientField {
    GridFunction dx;
    GridFunction dy;
};

/// Central differences at interior nodes; zero elsewhere.
[[nodiscard]] GridFunction gradient_x(const GridFunction& u);
[[nodiscard]] GridFunction gradient_y(const GridFunction& u);
[[nodiscard]] GradientField gradient(const GridFunction& u);

/// (4u(i,j) - u(i±1,j) - u(i,j±1)) / h^2 at interior nodes, using the stored boundary values
/// as Dirichlet data; zero at boundary and exterior nodes.
[[nodiscard]] GridFunction neg_laplacian_apply(const GridFunction& u);

/// Δ_h u = -neg_laplacian_apply(u).
[[nodiscard]] GridFunction laplacian_apply(const GridFunction& u);

/// sum over interior-touching lattice edges of h^2 ((u_q - u_p)/h)^2; equals h^2 <L w, w> for
/// zero-trace u, i.e. the quadrature of |∇u|^2 consistent with the 5-point matrix.
[[nodiscard]] double dirichlet_energy(const GridFunction& u);

/// 5-point Dirichlet -Δ on interior unknowns (boundary values eliminated as zero).
[[nodiscard]] SparseOperator assemble_neg_laplacian(const Grid& g);

/// Navier Δ² (u = Δu = 0 on ∂Ω): the exact product L·L of the Dirichlet -Δ.
[[nodiscard]] SparseOperator assemble_navier_biharmonic(const Grid& g);

/// Clamped Δ² (u = ∂u/∂ν = 0): 13-point stencil, ghost values eliminated by the reflection
/// u(-h) = u(h) across each edge. Rectangles only (UnsupportedDomainError otherwise).
[[nodiscard]] SparseOperator assemble_clamped_biharmonic(const Grid& g);

/// Clamped Δ² + δ(-Δ) + diag(c); `c` sampled at interior nodes.
[[nodiscard]] SparseOperator assemble_linearized(const Grid& g, double delta, const GridFunction& c);

/// Applies the clamped 13-point stencil to nodal values of u (ghosts by reflection); interior
/// nodes only. Equivalent to the assembled matrix on zero-trace u.
[[nodiscard]] GridFunction clamped_biharmonic_apply(const GridFunction& u);

struct DiscreteOperatorSet {
    GridPtr grid;
    SparseOperator neg_laplacian;
    SparseOperator biharm_navier;
    std::optional<SparseOperator> biharm_clamped;
};

[[nodiscard]] DiscreteOperatorSet assemble_all(const GridPtr& grid);

/// Applies L·L as two 5-point products (keeps rounding at the level of the Laplacian).
[[nodiscard]] LinearMap navier_map(const SparseOperator& neg_laplacian);

/// Solves L·L x = b by two CG solves with L.
[[nodiscard]] std::vector<double> navier_solve(const SparseOperator& neg_laplacian, std::span<const double> b,
                                               const SolveOptions& options = {});

}  // namespace biharm
