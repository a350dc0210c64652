#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "biharm/expr.hpp"
#include "biharm/grid.hpp"
#include "biharm/linalg.hpp"
#include "biharm/nonlinearity.hpp"

namespace biharm {

/// Δ²u = λ a u with u = Δu = 0 on the boundary, discretised as L·L w = λ diag(a) w.
class WeightedEigenProblem {
public:
    /// Throws PreconditionError unless a >= 0 at interior nodes and ∫a > 0.
    WeightedEigenProblem(GridPtr grid, GridFunction a);

    [[nodiscard]] const GridPtr& grid() const noexcept { return grid_; }
    [[nodiscard]] const GridFunction& weight() const noexcept { return a_; }
    [[nodiscard]] const SparseOperator& neg_laplacian() const noexcept { return l_; }
    [[nodiscard]] const std::vector<double>& mass() const noexcept { return b_; }

private:
    GridPtr grid_;
    GridFunction a_;
    SparseOperator l_;
    std::vector<double> b_;
};

struct WeightedEigenpair {
    double eigenvalue = 0.0;
    GridFunction eigenfunction;  // zero trace, ∫ a u^2 = 1
    double residual = 0.0;
    double relative_residual = 0.0;
    std::size_t iterations = 0;
};

/// k smallest pairs. The first eigenfunction is signed so that its interior mean is positive.
[[nodiscard]] std::vector<WeightedEigenpair> solve_weighted(const WeightedEigenProblem& problem,
                                                            const EigenOptions& options = {});

struct QualitativeThresholds {
    double one_sign = 1e-8;       // relative to ||u1||_inf
    double superharmonic = 1e-8;  // relative to ||Δ_h u1||_inf
    double sign_change = 1e-6;    // relative to ||u2||_inf
};

struct QualitativeVerdict {
    QualitativeThresholds thresholds;
    bool one_sign = false;
    double u1_min = 0.0;
    double u1_max = 0.0;
    bool superharmonic = false;
    double min_neg_laplacian = 0.0;  // min over interior of -Δ_h u1
    double laplacian_scale = 0.0;    // ||Δ_h u1||_inf
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double gap = 0.0;
    double relative_gap = 0.0;
    bool sign_change = false;
    double u2_min = 0.0;
    double u2_max = 0.0;
    std::vector<std::string> notes;
};

/// Needs at least two pairs (PreconditionError otherwise). -Δ_h u1 is recomputed from the
/// supplied eigenfunction.
[[nodiscard]] QualitativeVerdict qualitative_verify(const std::vector<WeightedEigenpair>& pairs,
                                                    const QualitativeThresholds& thresholds = {});

struct MonotonicityResult {
    double h = 0.0;
    double lambda_outer = 0.0;
    double lambda_inner = 0.0;
    double margin = 0.0;  // relative margin: strict <=> λ_inner > λ_outer (1 + margin)
    bool strict = false;
    std::size_t outer_unknowns = 0;
    std::size_t inner_unknowns = 0;
    std::vector<std::string> notes;
};

/// Node count along x for spacing h; throws GeometryError unless extent/h is a whole number.
[[nodiscard]] std::size_t nodes_for_spacing(const DomainSpec& spec, double h);

/// Solves both problems at spacing h. Rectangle inner domains must sit on the outer lattice
/// (margin 2h); masked inner domains use margin 10h. Throws GeometryError when the inner
/// domain equals or is not contained in the outer one.
[[nodiscard]] MonotonicityResult domain_monotonicity(const DomainSpec& outer, const DomainSpec& inner,
                                                     const expr::Expr& a, double h, const EigenOptions& options = {});

struct MorseOptions {
    EigenOptions eigen = [] {
        EigenOptions o;
        o.k = 4;
        return o;
    }();
    double y_max = 1.0;  // H-check range (0, y_max]
    std::size_t samples = kDefaultConditionSamples;
    double tol = kDefaultConditionTol;
};

struct MorseResult {
    std::size_t index = 0;
    bool saturated = false;  // every computed eigenvalue was negative: the index may be larger
    std::vector<double> eigenvalues;
    double scale = 1.0;
    double threshold = 0.0;  // eigenvalues below -threshold count
    double g_prime_zero = 0.0;
    ConditionCheck h_check;  // G(y)/y - G'(0) >= 0 on (0, y_max]
    bool h_holds = false;    // h_check holds and G'(0) >= 0
};

/// Negative eigenvalues of the Navier operator Δ² - a G'(0) (B = identity).
[[nodiscard]] MorseResult morse_index(const GridPtr& grid, const GridFunction& a, const Nonlinearity& g,
                                      const MorseOptions& options = {});

}  // namespace biharm
