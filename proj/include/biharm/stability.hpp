#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "biharm/expr.hpp"
#include "biharm/grid.hpp"
#include "biharm/linalg.hpp"
#include "biharm/nonlinearity.hpp"

namespace biharm {

inline constexpr double kDefaultDivisionFloor = 1e-6;

/// Δ²u - δΔu = a u - f1(x, u) with u = ∂u/∂ν = 0 on the boundary of a rectangle.
/// f1 is a Nonlinearity in s; x and y are bound per node.
class MemsProblem {
public:
    /// Throws UnsupportedDomainError off rectangles, PreconditionError when δ < 0, the fields
    /// live on other grids, or min interior u <= 0, and GeometryError when u is not
    /// clamped-compatible (nonzero boundary values, or |∂u/∂ν| above 50·h·||u||_inf).
    MemsProblem(GridPtr grid, double delta, GridFunction a, Nonlinearity f1, GridFunction u,
                bool manufactured = false, double eps = kDefaultDivisionFloor);

    [[nodiscard]] const GridPtr& grid() const noexcept { return grid_; }
    [[nodiscard]] double delta() const noexcept { return delta_; }
    [[nodiscard]] const GridFunction& a() const noexcept { return a_; }
    [[nodiscard]] const Nonlinearity& f1() const noexcept { return f1_; }
    [[nodiscard]] const GridFunction& u() const noexcept { return u_; }
    [[nodiscard]] bool manufactured() const noexcept { return manufactured_; }
    [[nodiscard]] double eps() const noexcept { return eps_; }
    /// max(u, ε||u||_inf), used only inside quotients.
    [[nodiscard]] double floored(std::size_t node) const noexcept;
    [[nodiscard]] double f1_at(std::size_t node, double s) const;
    [[nodiscard]] double df1_at(std::size_t node, double s) const;

private:
    GridPtr grid_;
    double delta_;
    GridFunction a_;
    Nonlinearity f1_;
    GridFunction u_;
    bool manufactured_;
    double eps_;
    double floor_;
};

/// a := (Δ²_h u + δ(-Δ_h u) + f1(x, u)) / max(u, ε||u||_inf) at interior nodes (clamped
/// 13-point Δ²_h), copied from the nearest interior node onto the boundary ring.
[[nodiscard]] MemsProblem manufacture(const GridPtr& grid, double delta, const expr::Expr& u,
                                      const Nonlinearity& f1, double eps = kDefaultDivisionFloor);

struct StrongResidual {
    double max_scaled = 0.0;  // max |Δ²u - δΔu - au + f1| / max(|terms|, 1) over unfloored nodes
    std::size_t floored_nodes = 0;
};

[[nodiscard]] StrongResidual strong_residual(const MemsProblem& p);

/// ½∫|Δw|^2 + (δ/2)∫|∇w|^2 - ½∫a w^2 + ∫F1(x, w). The first two terms are the clamped and
/// 5-point quadratic forms h^2<Cw, w> and h^2<Lw, w>; F1 is integrated nodewise in s.
[[nodiscard]] double energy(const MemsProblem& p, const GridFunction& w);

/// c = -a + ∂f1/∂s(x, u) at interior nodes.
[[nodiscard]] GridFunction linearized_potential(const MemsProblem& p);

/// L_u(v, v) = ∫|Δ_h v|^2 + δ∫|∇v|^2 - ∫a v^2 + ∫∂f1/∂s v^2 by quadrature. Matches
/// h^2<A_lin w, w> for v supported on deep-interior nodes.
[[nodiscard]] double quadratic_form(const MemsProblem& p, const GridFunction& v);

struct LinearizedEigen {
    EigenResult pair;
    double rayleigh_quotient = 0.0;  // <A w, w>/<w, w> at the returned vector
    double shift = 0.0;
};

/// Smallest eigenpair of assemble_linearized(g, δ, c) with B = identity (the mass h^2 I
/// cancels from the quotient).
[[nodiscard]] LinearizedEigen linearized_lambda1(const MemsProblem& p, const EigenOptions& options = {});

/// Nodes where a test function may live: deep interior and u >= ε||u||_inf.
[[nodiscard]] std::vector<bool> test_function_mask(const MemsProblem& p);

struct ProofIdentity {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;  // |lhs - rhs|
};

/// LHS = ∫|Δ_h v|^2 + δ∫|∇v|^2 - ∫a v^2 + ∫(f1/u) v^2,
/// RHS = ∫(Δ_h v - (v/u)Δ_h u)^2 + ∫(δ - 2Δ_h u/u)|∇v - (v/u)∇u|^2.
/// Throws PreconditionError when v is nonzero outside test_function_mask.
[[nodiscard]] ProofIdentity proof_identity(const MemsProblem& p, const GridFunction& v);

struct BumpForm {
    double quadrature = 0.0;  // L_u(v, v)
    double assembled = 0.0;   // h^2 <A_lin w, w>
    double mass = 0.0;        // ∫v^2
    double quotient = 0.0;    // quadrature / mass
    double identity_residual = 0.0;
};

struct StabilityOptions {
    std::size_t bumps = 100;
    std::uint64_t seed = 0;
    EigenOptions eigen{};
    double h1_tol = kDefaultConditionTol;
};

struct StabilityReport {
    double lambda1 = 0.0;
    double lambda1_rayleigh = 0.0;
    double lambda1_residual = 0.0;
    double scale = 1.0;  // max(1, |λ1|)
    bool stable = false;  // λ1 >= -1e-8·scale

    double h1_margin = 0.0;  // min over interior nodes of ∂f1/∂s(x, u) - f1(x, u)/u
    bool h1_holds = false;
    double side_condition_min = 0.0;  // min interior δu - 2Δ_h u
    std::size_t side_condition_violations = 0;
    bool side_condition_holds = false;
    bool theorem_applicable = false;  // H1 and the side condition both hold

    std::vector<BumpForm> bumps;
    double min_bump_quotient = 0.0;
    double min_bump_form = 0.0;
    double max_form_disagreement = 0.0;  // max |quadrature - assembled| / max(|assembled|, 1e-300)
    double max_identity_residual = 0.0;
    double max_identity_relative = 0.0;  // residual / max(|lhs|, |rhs|)
    StrongResidual strong;
    std::vector<std::string> notes;
};

[[nodiscard]] StabilityReport stability_report(const MemsProblem& p, const StabilityOptions& options = {});

}  // namespace biharm
