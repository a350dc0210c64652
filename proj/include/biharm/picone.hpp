#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "biharm/grid.hpp"
#include "biharm/nonlinearity.hpp"

namespace biharm {

/// Pointwise inputs of the Picone forms: values, Laplacians and gradients of u and v.
struct PiconePoint {
    double u = 0.0;
    double lap_u = 0.0;
    double ux = 0.0;
    double uy = 0.0;
    double v = 0.0;
    double lap_v = 0.0;
    double vx = 0.0;
    double vy = 0.0;
};

/// f, f', f'' evaluated at v.
struct FValues {
    double f = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

/// Denominator of the curvature term u^2 f''(v) |∇v|^2 Δv / f(v)^p in the nonlinear L.
/// `squared` matches the expansion of Δ(u^2/f(v)); `single` is the variant with f(v).
enum class CurvatureDenominator { squared, single };

/// (Δu - (u/v)Δv)^2 - (2Δv/v) |∇u - (u/v)∇v|^2
[[nodiscard]] double picone_linear_l(const PiconePoint& p) noexcept;
/// |Δu|^2 - Δ(u^2/v) Δv with Δ(u^2/v) written out by the product rule.
[[nodiscard]] double picone_linear_r(const PiconePoint& p) noexcept;

[[nodiscard]] double picone_nonlinear_l(const PiconePoint& p, const FValues& f,
                                        CurvatureDenominator denominator = CurvatureDenominator::squared) noexcept;
/// |Δu|^2 - Δ(u^2/f(v)) Δv with Δ(u^2/f(v)) written out by the chain and product rules.
[[nodiscard]] double picone_nonlinear_r(const PiconePoint& p, const FValues& f) noexcept;

enum class PiconeMode { expanded, direct };

/// Sign of v on the admissible set: v >= ε, or v <= -ε (sign-flipped case).
enum class Orientation { positive, negative };

struct LinearFit {
    double c = 0.0;
    double d = 0.0;
    double max_deviation = 0.0;
    std::size_t nodes = 0;
    bool degenerate = false;  // v constant on the fitted nodes; only d was fitted
};

/// Least-squares u ≈ c v + d over interior nodes with |v| >= ε.
/// Throws PreconditionError with fewer than 10 such nodes.
[[nodiscard]] LinearFit detect_linear_relation(const GridFunction& u, const GridFunction& v, double eps);

struct PiconeOptions {
    PiconeMode mode = PiconeMode::expanded;
    std::optional<double> eps;  // default 1e-8 * ||v||_inf
    CurvatureDenominator denominator = CurvatureDenominator::squared;
    std::size_t condition_samples = kDefaultConditionSamples;
};

struct PiconeReport {
    PiconeReport(GridFunction l_field, GridFunction r_field)
        : l(std::move(l_field)), r(std::move(r_field)) {}

    PiconeMode mode = PiconeMode::expanded;
    bool nonlinear = false;
    Orientation orientation = Orientation::positive;
    double eps = 0.0;

    GridFunction l;
    GridFunction r;
    std::vector<bool> reported;  // nodes carrying L and R

    std::size_t admissible_count = 0;  // interior nodes with v on the admissible side of ±ε
    std::size_t reported_count = 0;    // admissible nodes used (direct mode drops stencil-incomplete ones)
    std::size_t hypothesis_count = 0;  // reported nodes where also -Δ_h v has the sign of v, magnitude >= ε
    bool hypotheses_hold = false;      // every reported node meets the hypothesis

    double scale = 1.0;  // max(|L|, |R|, 1) over reported nodes
    double max_abs_identity_residual = 0.0;
    double min_l = 0.0;             // over reported nodes
    double min_l_hypothesis = 0.0;  // over hypothesis nodes (0 when there are none)
    double integral_l = 0.0;        // h^2 sum of L over reported nodes

    std::vector<ConditionCheck> f_conditions;  // nonlinear mode only
    bool f_conditions_hold = true;
    bool nonnegativity_asserted = false;  // hypotheses_hold and f_conditions_hold

    /// Identity residual with the other curvature denominator (nonlinear mode only).
    std::optional<double> alternate_denominator_residual;
    std::optional<LinearFit> equality;
    std::vector<std::string> notes;
};

[[nodiscard]] PiconeReport picone_linear(const GridFunction& u, const GridFunction& v,
                                         const PiconeOptions& options = {});
[[nodiscard]] PiconeReport picone_nonlinear(const GridFunction& u, const GridFunction& v, const Nonlinearity& f,
                                            const PiconeOptions& options = {});

}  // namespace biharm
