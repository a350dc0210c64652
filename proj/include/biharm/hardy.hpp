#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "biharm/grid.hpp"
#include "biharm/nonlinearity.hpp"

namespace biharm {

/// Minima over deep-interior nodes (all four neighbours interior). Δ²_h v is the 5-point
/// -Δ_h applied twice to nodal values.
struct SupersolutionCheck {
    double min_residual = 0.0;       // min of Δ²_h v - λ g f(v)
    double min_v = 0.0;
    double min_neg_laplacian = 0.0;  // min of -Δ_h v
    double scale = 1.0;              // max(|Δ²_h v|, |λ g f(v)|, 1)
    std::size_t nodes = 0;
};

/// Throws PreconditionError for λ < 0, negative g, or a grid without deep-interior nodes.
[[nodiscard]] SupersolutionCheck verify_supersolution(const GridFunction& v, double lambda, const GridFunction& g,
                                                      const Nonlinearity& f);

struct HardyMargin {
    std::string label;
    double laplacian_energy = 0.0;  // ∫|Δ_h φ|^2
    double weighted_mass = 0.0;     // ∫ g φ^2
    double margin = 0.0;            // laplacian_energy - λ weighted_mass
};

struct HardyOptions {
    std::size_t bumps = 100;
    std::uint64_t seed = 0;
    double tolerance = 1e-6;  // relative, for the supersolution and margin checks
    std::size_t condition_samples = kDefaultConditionSamples;
    /// Extra test functions (zero trace), e.g. eigenfunctions; labelled "extra-<n>".
    std::vector<GridFunction> extra;
};

struct HardyReport {
    double lambda = 0.0;
    SupersolutionCheck supersolution;
    bool supersolution_holds = false;  // min_residual >= -tol·scale, min_v > 0, min -Δv > 0
    std::vector<ConditionCheck> f_conditions;  // on the range of v over deep-interior nodes
    bool f_conditions_hold = false;
    bool inequality_asserted = false;  // supersolution_holds and f_conditions_hold

    std::vector<HardyMargin> margins;
    std::size_t count = 0;
    double scale = 1.0;  // max(∫|Δ_h φ|^2, 1) over test functions
    double min_margin = 0.0;
    double min_quotient = 0.0;  // inf of ∫|Δ_h φ|^2 / ∫gφ^2 over tests with ∫gφ^2 > 0 (inf if none)
    bool margins_hold = false;  // min_margin >= -tol·scale
    double tolerance = 0.0;
    std::vector<std::string> notes;
};

/// ∫|Δ_h φ|^2 and ∫gφ^2 by grid quadrature.
[[nodiscard]] HardyMargin hardy_margin(const GridFunction& phi, double lambda, const GridFunction& g,
                                       std::string label = {});

[[nodiscard]] HardyReport hardy_rellich_check(const GridFunction& v, double lambda, const GridFunction& g,
                                              const Nonlinearity& f, const HardyOptions& options = {});

/// Margins of the same test functions at another λ (affine in λ with slope -∫gφ^2).
[[nodiscard]] std::vector<double> margins_at(const HardyReport& report, double lambda);

}  // namespace biharm
