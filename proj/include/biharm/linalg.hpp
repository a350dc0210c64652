#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biharm/error.hpp"

namespace biharm {

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

/// Square CSR matrix. Column indices strictly increase within a row and no explicit zeros
/// are stored. When constructed with `symmetric = true` the matrix is compared against its
/// transpose and rejected unless they agree exactly.
class SparseOperator {
public:
    SparseOperator() = default;
    SparseOperator(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<std::size_t> cols,
                   std::vector<double> vals, bool symmetric);

    /// Duplicate entries are summed; entries that sum to zero are dropped.
    static SparseOperator from_triplets(std::size_t n, std::vector<Triplet> triplets, bool symmetric);
    static SparseOperator identity(std::size_t n);
    static SparseOperator diagonal(std::span<const double> d);

    [[nodiscard]] std::size_t n() const noexcept { return n_; }
    [[nodiscard]] std::size_t nnz() const noexcept { return vals_.size(); }
    [[nodiscard]] bool symmetric() const noexcept { return symmetric_; }
    [[nodiscard]] std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
    [[nodiscard]] std::span<const std::size_t> cols() const noexcept { return cols_; }
    [[nodiscard]] std::span<const double> vals() const noexcept { return vals_; }

    void apply(std::span<const double> in, std::span<double> out) const;
    [[nodiscard]] std::vector<double> apply(std::span<const double> in) const;

    [[nodiscard]] double at(std::size_t row, std::size_t col) const noexcept;
    [[nodiscard]] std::vector<double> diagonal_values() const;
    [[nodiscard]] std::size_t max_row_nnz() const noexcept;
    [[nodiscard]] double max_abs_row_sum() const noexcept;

    [[nodiscard]] SparseOperator transpose() const;

    bool operator==(const SparseOperator& other) const noexcept;

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> cols_;
    std::vector<double> vals_;
    bool symmetric_ = false;
};

[[nodiscard]] SparseOperator multiply(const SparseOperator& a, const SparseOperator& b, bool symmetric);
/// alpha*A + beta*B; symmetric when both inputs are.
[[nodiscard]] SparseOperator add(double alpha, const SparseOperator& a, double beta, const SparseOperator& b);
[[nodiscard]] SparseOperator add_diagonal(const SparseOperator& a, std::span<const double> d);

/// Matrix-free linear operator.
struct LinearMap {
    std::size_t n = 0;
    std::function<void(std::span<const double>, std::span<double>)> apply;

    LinearMap() = default;
    LinearMap(std::size_t size, std::function<void(std::span<const double>, std::span<double>)> fn)
        : n(size), apply(std::move(fn)) {}
    LinearMap(const SparseOperator& a);  // NOLINT: implicit view of a matrix (must outlive the map)
};

[[nodiscard]] double dot(std::span<const double> a, std::span<const double> b) noexcept;
[[nodiscard]] double norm2(std::span<const double> a) noexcept;

struct SolveOptions {
    double tol = 1e-10;        // on ||Ax - b|| / ||b||
    std::size_t maxiter = 0;   // 0 selects 50 n
};

struct SolveResult {
    std::vector<double> x;
    std::size_t iterations = 0;
    double relative_residual = 0.0;
};

/// Thrown by cg_solve when a search direction has non-positive curvature.
class IndefiniteOperatorError : public Error {
public:
    using Error::Error;
};

/// Conjugate gradients for SPD operators. Serial, fixed summation order.
[[nodiscard]] SolveResult cg_solve(const LinearMap& a, std::span<const double> b, const SolveOptions& options = {});
/// Conjugate residual for symmetric (possibly indefinite, nonsingular) operators.
[[nodiscard]] SolveResult cr_solve(const LinearMap& a, std::span<const double> b, const SolveOptions& options = {});

struct EigenOptions {
    std::size_t k = 1;
    double tol = 1e-8;          // on the relative residual, see EigenResult
    std::uint64_t seed = 0;
    std::size_t max_iterations = 5000;
    SolveOptions inner{};
    std::optional<double> shift;  // σ for (A - σB); defaults to 0
    /// Operator-norm scale for the convergence test: relative residual becomes
    /// residual / max(1, |λ|, scale). For λ far below ||A||, where round-off alone exceeds tol·|λ|.
    std::optional<double> residual_scale;
};

struct EigenResult {
    double eigenvalue = 0.0;
    std::vector<double> eigenvector;  // <B w, w> = 1
    double residual = 0.0;            // ||A w - λ B w|| / ||B w||
    double relative_residual = 0.0;   // residual / max(1, |λ|, residual_scale)
    std::size_t iterations = 0;
};

/// Solves (A - σB) x = rhs for the shift σ the caller committed to.
using ShiftedSolve = std::function<std::vector<double>(std::span<const double>)>;

/// k smallest eigenpairs of A w = λ B w (B diagonal, nonnegative) by shifted inverse power
/// iteration on a block of k + 2 vectors with Rayleigh-Ritz extraction. Converged pairs are
/// locked in ascending order and the remaining block is B-orthogonally deflated against them.
/// The shift must lie below the wanted part of the spectrum; when a Ritz value falls to or
/// below it the shift is lowered. (A - σB) is solved by CG, falling back to conjugate
/// residuals when CG meets negative curvature.
[[nodiscard]] std::vector<EigenResult> smallest_k_eigenpairs(const SparseOperator& a, std::span<const double> b_diag,
                                                             const EigenOptions& options);

/// Same iteration with a caller-supplied solver for the fixed shift σ (e.g. two Poisson
/// solves for a squared Laplacian). The shift is not adjusted.
[[nodiscard]] std::vector<EigenResult> smallest_k_eigenpairs(const LinearMap& a, std::span<const double> b_diag,
                                                             const ShiftedSolve& solve, double shift,
                                                             const EigenOptions& options);

/// Sparse LDLᵀ factorization of A - σB (B diagonal, fill-reducing ordering). By Sylvester's
/// law the number of negative pivots is the number of eigenvalues of Aw = λBw below σ when
/// B > 0. Throws Error when a zero pivot stops the factorization.
class ShiftedFactorization {
public:
    ShiftedFactorization(const SparseOperator& a, std::span<const double> b_diag, double sigma);
    ~ShiftedFactorization();
    ShiftedFactorization(ShiftedFactorization&&) noexcept;
    ShiftedFactorization& operator=(ShiftedFactorization&&) noexcept;

    [[nodiscard]] double shift() const noexcept { return sigma_; }
    [[nodiscard]] std::size_t negative_pivots() const noexcept { return negative_; }
    [[nodiscard]] std::vector<double> solve(std::span<const double> rhs) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    double sigma_ = 0.0;
    std::size_t negative_ = 0;
};

/// No eigenvalue of Aw = λBw lies below `lo` and at least one lies below `hi`.
struct EigenBracket {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t factorizations = 0;
};

/// Brackets the smallest eigenvalue by inertia counts, starting from the upper bound
/// min A_ii / B_ii, until hi - lo <= rel_width · max(1, |lo|, |hi|). Requires B > 0.
[[nodiscard]] EigenBracket bracket_smallest_eigenvalue(const SparseOperator& a, std::span<const double> b_diag,
                                                       double rel_width = 1e-4);

/// <A w, w> / <B w, w>. Throws PreconditionError when the B-norm vanishes.
[[nodiscard]] double rayleigh_quotient(const LinearMap& a, std::span<const double> b_diag, std::span<const double> w);

/// Version of the dense and sparse factorization backend, e.g. "eigen-3.4.0".
[[nodiscard]] std::string backend_version();

inline constexpr std::size_t kDenseOracleLimit = 2000;

/// All eigenvalues of A w = λ B w, ascending, from a dense symmetric eigensolve of
/// B^{-1/2} A B^{-1/2}. Requires n <= 2000 and B > 0. Test oracle only.
[[nodiscard]] std::vector<double> dense_generalized_eigenvalues(const SparseOperator& a,
                                                                std::span<const double> b_diag);

}  // namespace biharm
