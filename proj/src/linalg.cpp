#include "biharm/linalg.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>

namespace biharm {

// ---------------------------------------------------------------------------
// SparseOperator

SparseOperator::SparseOperator(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<std::size_t> cols,
                               std::vector<double> vals, bool symmetric)
    : n_(n), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), vals_(std::move(vals)), symmetric_(symmetric) {
    if (row_ptr_.size() != n_ + 1 || row_ptr_.front() != 0 || row_ptr_.back() != cols_.size() ||
        cols_.size() != vals_.size()) {
        throw Error("malformed CSR arrays");
    }
    for (std::size_t r = 0; r < n_; ++r) {
        if (row_ptr_[r] > row_ptr_[r + 1]) throw Error("CSR row offsets must be nondecreasing");
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
            if (cols_[k] >= n_) throw Error("CSR column index out of range");
            if (k > row_ptr_[r] && cols_[k] <= cols_[k - 1]) throw Error("CSR columns must strictly increase");
            if (vals_[k] == 0.0) throw Error("CSR stores an explicit zero");
        }
    }
    if (symmetric_ && !(transpose() == *this)) throw Error("matrix flagged symmetric differs from its transpose");
}

SparseOperator SparseOperator::from_triplets(std::size_t n, std::vector<Triplet> triplets, bool symmetric) {
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<std::size_t> row_ptr(n + 1, 0);
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    cols.reserve(triplets.size());
    vals.reserve(triplets.size());
    std::size_t k = 0;
    for (std::size_t r = 0; r < n; ++r) {
        while (k < triplets.size() && triplets[k].row == r) {
            const std::size_t c = triplets[k].col;
            double sum = 0.0;
            while (k < triplets.size() && triplets[k].row == r && triplets[k].col == c) sum += triplets[k++].value;
            if (sum != 0.0) {
                cols.push_back(c);
                vals.push_back(sum);
            }
        }
        row_ptr[r + 1] = cols.size();
    }
    if (k != triplets.size()) throw Error("triplet row index out of range");
    return SparseOperator(n, std::move(row_ptr), std::move(cols), std::move(vals), symmetric);
}

SparseOperator SparseOperator::identity(std::size_t n) {
    std::vector<double> ones(n, 1.0);
    return diagonal(ones);
}

SparseOperator SparseOperator::diagonal(std::span<const double> d) {
    std::vector<Triplet> t;
    t.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) t.push_back({i, i, d[i]});
    return from_triplets(d.size(), std::move(t), true);
}

void SparseOperator::apply(std::span<const double> in, std::span<double> out) const {
    for (std::size_t r = 0; r < n_; ++r) {
        double sum = 0.0;
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) sum += vals_[k] * in[cols_[k]];
        out[r] = sum;
    }
}

std::vector<double> SparseOperator::apply(std::span<const double> in) const {
    std::vector<double> out(n_);
    apply(in, out);
    return out;
}

double SparseOperator::at(std::size_t row, std::size_t col) const noexcept {
    const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row]);
    const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row + 1]);
    const auto it = std::lower_bound(first, last, col);
    if (it == last || *it != col) return 0.0;
    return vals_[static_cast<std::size_t>(it - cols_.begin())];
}

std::vector<double> SparseOperator::diagonal_values() const {
    std::vector<double> d(n_);
    for (std::size_t r = 0; r < n_; ++r) d[r] = at(r, r);
    return d;
}

std::size_t SparseOperator::max_row_nnz() const noexcept {
    std::size_t m = 0;
    for (std::size_t r = 0; r < n_; ++r) m = std::max(m, row_ptr_[r + 1] - row_ptr_[r]);
    return m;
}

double SparseOperator::max_abs_row_sum() const noexcept {
    double m = 0.0;
    for (std::size_t r = 0; r < n_; ++r) {
        double s = 0.0;
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += std::abs(vals_[k]);
        m = std::max(m, s);
    }
    return m;
}

SparseOperator SparseOperator::transpose() const {
    std::vector<std::size_t> counts(n_ + 1, 0);
    for (std::size_t c : cols_) ++counts[c + 1];
    for (std::size_t r = 0; r < n_; ++r) counts[r + 1] += counts[r];
    std::vector<std::size_t> row_ptr = counts;
    std::vector<std::size_t> cols(cols_.size());
    std::vector<double> vals(vals_.size());
    for (std::size_t r = 0; r < n_; ++r) {
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
            const std::size_t dst = counts[cols_[k]]++;
            cols[dst] = r;
            vals[dst] = vals_[k];
        }
    }
    return SparseOperator(n_, std::move(row_ptr), std::move(cols), std::move(vals), false);
}

bool SparseOperator::operator==(const SparseOperator& other) const noexcept {
    return n_ == other.n_ && row_ptr_ == other.row_ptr_ && cols_ == other.cols_ && vals_ == other.vals_;
}

SparseOperator multiply(const SparseOperator& a, const SparseOperator& b, bool symmetric) {
    if (a.n() != b.n()) throw Error("multiply: dimension mismatch");
    const std::size_t n = a.n();
    std::vector<std::size_t> row_ptr(n + 1, 0);
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    std::map<std::size_t, double> acc;
    const auto arp = a.row_ptr();
    const auto ac = a.cols();
    const auto av = a.vals();
    const auto brp = b.row_ptr();
    const auto bc = b.cols();
    const auto bv = b.vals();
    for (std::size_t r = 0; r < n; ++r) {
        acc.clear();
        for (std::size_t k = arp[r]; k < arp[r + 1]; ++k) {
            const std::size_t mid = ac[k];
            for (std::size_t q = brp[mid]; q < brp[mid + 1]; ++q) acc[bc[q]] += av[k] * bv[q];
        }
        for (const auto& [c, v] : acc) {
            if (v != 0.0) {
                cols.push_back(c);
                vals.push_back(v);
            }
        }
        row_ptr[r + 1] = cols.size();
    }
    return SparseOperator(n, std::move(row_ptr), std::move(cols), std::move(vals), symmetric);
}

SparseOperator add(double alpha, const SparseOperator& a, double beta, const SparseOperator& b) {
    if (a.n() != b.n()) throw Error("add: dimension mismatch");
    std::vector<Triplet> t;
    t.reserve(a.nnz() + b.nnz());
    for (std::size_t r = 0; r < a.n(); ++r) {
        for (std::size_t k = a.row_ptr()[r]; k < a.row_ptr()[r + 1]; ++k) t.push_back({r, a.cols()[k], alpha * a.vals()[k]});
        for (std::size_t k = b.row_ptr()[r]; k < b.row_ptr()[r + 1]; ++k) t.push_back({r, b.cols()[k], beta * b.vals()[k]});
    }
    return SparseOperator::from_triplets(a.n(), std::move(t), a.symmetric() && b.symmetric());
}

SparseOperator add_diagonal(const SparseOperator& a, std::span<const double> d) {
    return add(1.0, a, 1.0, SparseOperator::diagonal(d));
}

LinearMap::LinearMap(const SparseOperator& a)
    : n(a.n()), apply([&a](std::span<const double> in, std::span<double> out) { a.apply(in, out); }) {}

// ---------------------------------------------------------------------------
// Krylov solvers

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

namespace {

std::size_t resolve_maxiter(const SolveOptions& o, std::size_t n) { return o.maxiter > 0 ? o.maxiter : 50 * n; }

double true_relative_residual(const LinearMap& a, std::span<const double> x, std::span<const double> b, double bnorm) {
    std::vector<double> ax(a.n);
    a.apply(x, ax);
    for (std::size_t i = 0; i < ax.size(); ++i) ax[i] -= b[i];
    return norm2(ax) / bnorm;
}

}  // namespace

SolveResult cg_solve(const LinearMap& a, std::span<const double> b, const SolveOptions& options) {
    if (!(options.tol > 0.0)) throw Error("cg_solve: tolerance must be positive");
    const std::size_t n = a.n;
    SolveResult res;
    res.x.assign(n, 0.0);
    const double bnorm = norm2(b);
    if (bnorm == 0.0) return res;

    std::vector<double> r(b.begin(), b.end());
    std::vector<double> p = r;
    std::vector<double> ap(n);
    double rr = dot(r, r);
    const double target = options.tol * bnorm;
    const std::size_t maxiter = resolve_maxiter(options, n);

    for (;;) {
        while (res.iterations < maxiter) {
            if (std::sqrt(rr) <= target) break;
            a.apply(p, ap);
            const double pap = dot(p, ap);
            if (!(pap > 0.0)) throw IndefiniteOperatorError("cg_solve: operator is not positive definite");
            const double alpha = rr / pap;
            for (std::size_t i = 0; i < n; ++i) {
                res.x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            const double rr_new = dot(r, r);
            const double beta = rr_new / rr;
            rr = rr_new;
            for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
            ++res.iterations;
        }
        // Guard against drift of the recursive residual.
        res.relative_residual = true_relative_residual(a, res.x, b, bnorm);
        if (res.relative_residual <= options.tol) return res;
        if (res.iterations >= maxiter) {
            throw ConvergenceError("cg_solve: no convergence in " + std::to_string(maxiter) + " iterations",
                                   res.relative_residual);
        }
        std::vector<double> ax(n);
        a.apply(res.x, ax);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ax[i];
        p = r;
        rr = dot(r, r);
    }
}

SolveResult cr_solve(const LinearMap& a, std::span<const double> b, const SolveOptions& options) {
    if (!(options.tol > 0.0)) throw Error("cr_solve: tolerance must be positive");
    const std::size_t n = a.n;
    SolveResult res;
    res.x.assign(n, 0.0);
    const double bnorm = norm2(b);
    if (bnorm == 0.0) return res;

    std::vector<double> r(b.begin(), b.end());
    std::vector<double> p = r;
    std::vector<double> ar(n);
    a.apply(r, ar);
    std::vector<double> ap = ar;
    double rar = dot(r, ar);
    const double target = options.tol * bnorm;
    const std::size_t maxiter = resolve_maxiter(options, n);

    for (std::size_t it = 0; it < maxiter; ++it) {
        if (norm2(r) <= target) break;
        const double apap = dot(ap, ap);
        if (apap == 0.0 || rar == 0.0) break;
        const double alpha = rar / apap;
        for (std::size_t i = 0; i < n; ++i) {
            res.x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        a.apply(r, ar);
        const double rar_new = dot(r, ar);
        const double beta = rar_new / rar;
        rar = rar_new;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = r[i] + beta * p[i];
            ap[i] = ar[i] + beta * ap[i];
        }
        ++res.iterations;
    }
    res.relative_residual = true_relative_residual(a, res.x, b, bnorm);
    if (res.relative_residual > options.tol) {
        throw ConvergenceError("cr_solve: no convergence", res.relative_residual);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Inverse iteration

namespace {

double b_dot(std::span<const double> b, std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += b[i] * x[i] * y[i];
    return s;
}

void b_orthogonalize(std::span<const double> b, std::span<double> x, const std::vector<std::vector<double>>& basis) {
    // Classical Gram-Schmidt, applied twice.
    for (int pass = 0; pass < 2; ++pass) {
        for (const auto& e : basis) {
            const double c = b_dot(b, e, x);
            for (std::size_t i = 0; i < x.size(); ++i) x[i] -= c * e[i];
        }
    }
}

bool b_normalize(std::span<const double> b, std::span<double> x) {
    const double nb = b_dot(b, x, x);
    if (!(nb > 0.0)) return false;
    const double s = 1.0 / std::sqrt(nb);
    for (double& v : x) v *= s;
    return true;
}

struct ResidualState {
    double residual = 0.0;
    double relative_residual = 0.0;
};

ResidualState residual_of(std::span<const double> b, std::span<const double> w, std::span<const double> aw,
                          double lambda, double scale) {
    double rn = 0.0;
    double bn = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double bw = b[i] * w[i];
        const double r = aw[i] - lambda * bw;
        rn += r * r;
        bn += bw * bw;
    }
    ResidualState st;
    st.residual = std::sqrt(rn) / std::sqrt(bn);
    st.relative_residual = st.residual / std::max({1.0, std::abs(lambda), scale});
    return st;
}

std::vector<double> start_vector(std::size_t n, std::uint64_t seed, std::size_t index) {
    std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL * (index + 1));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> w(n);
    for (double& v : w) v = unit(rng);
    return w;
}

void validate(std::span<const double> b_diag, std::size_t n, const EigenOptions& options) {
    if (b_diag.size() != n) throw Error("eigensolver: B diagonal has the wrong size");
    if (options.k < 1 || options.k > n) throw Error("eigensolver: k must be in [1, n]");
    if (!(options.tol > 0.0)) throw Error("eigensolver: tolerance must be positive");
    bool any = false;
    for (double v : b_diag) {
        if (v < 0.0) throw PreconditionError("eigensolver: B must be nonnegative");
        any = any || v > 0.0;
    }
    if (!any) throw PreconditionError("eigensolver: B is identically zero");
}

// Extra block columns beyond k; they speed up convergence of clustered eigenvalues.
constexpr std::size_t kGuardVectors = 2;

// Block inverse iteration with Rayleigh-Ritz on the active block. Converged leading
// pairs are locked and the active block is kept B-orthogonal to them.
std::vector<EigenResult> iterate(const LinearMap& a, std::span<const double> b,
                                 const std::function<std::vector<double>(std::span<const double>, double)>& solve,
                                 const std::function<bool(double&, double)>& adjust_shift, double shift,
                                 const EigenOptions& options) {
    const std::size_t n = a.n;
    const double scale = options.residual_scale.value_or(0.0);
    const std::size_t block = std::min(n, options.k + kGuardVectors);
    std::size_t rank_limit = n;
    for (double v : b) rank_limit -= v > 0.0 ? 0 : 1;
    std::vector<EigenResult> found;
    std::vector<std::vector<double>> locked;
    std::vector<std::vector<double>> active;
    std::size_t fresh = 0;

    auto admit = [&](std::vector<double> x, std::vector<std::vector<double>>& into) {
        b_orthogonalize(b, x, locked);
        b_orthogonalize(b, x, into);
        if (!b_normalize(b, x)) return false;
        into.push_back(std::move(x));
        return true;
    };
    auto refill = [&](std::vector<std::vector<double>>& into, std::size_t want) {
        std::size_t attempts = 0;
        while (into.size() < want && attempts < 4 * want + 8) {
            ++attempts;
            if (admit(start_vector(n, options.seed, fresh++), into)) continue;
        }
    };
    const std::size_t target = std::min(block, rank_limit);
    refill(active, target);
    if (active.empty()) throw PreconditionError("eigensolver: B vanishes on the support of the iterate");

    std::vector<double> rhs(n);
    std::vector<double> last_residual(options.k, 0.0);
    std::size_t it = 0;
    while (found.size() < options.k) {
        if (it >= options.max_iterations) {
            throw ConvergenceError("inverse iteration: eigenpair " + std::to_string(found.size() + 1) +
                                       " did not converge",
                                   last_residual[found.size()]);
        }
        ++it;
        std::vector<std::vector<double>> next;
        for (const auto& w : active) {
            for (std::size_t i = 0; i < n; ++i) rhs[i] = b[i] * w[i];
            (void)admit(solve(rhs, shift), next);
        }
        refill(next, std::min(target - locked.size(), rank_limit - locked.size()));
        if (next.empty()) throw PreconditionError("eigensolver: B vanishes on the support of the iterate");

        // Rayleigh-Ritz on the B-orthonormal block.
        const std::size_t m = next.size();
        std::vector<std::vector<double>> an(m, std::vector<double>(n));
        for (std::size_t c = 0; c < m; ++c) a.apply(next[c], an[c]);
        Eigen::MatrixXd h(m, m);
        for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = r; c < m; ++c) {
                const double v = 0.5 * (dot(an[r], next[c]) + dot(an[c], next[r]));
                h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
                h(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = v;
            }
        }
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(h);
        if (ritz.info() != Eigen::Success) throw Error("eigensolver: Rayleigh-Ritz step failed");
        const Eigen::VectorXd theta = ritz.eigenvalues();
        const Eigen::MatrixXd q = ritz.eigenvectors();

        active.assign(m, std::vector<double>(n, 0.0));
        std::vector<std::vector<double>> aw(m, std::vector<double>(n, 0.0));
        for (std::size_t c = 0; c < m; ++c) {
            for (std::size_t r = 0; r < m; ++r) {
                const double coef = q(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
                for (std::size_t i = 0; i < n; ++i) {
                    active[c][i] += coef * next[r][i];
                    aw[c][i] += coef * an[r][i];
                }
            }
        }

        if (adjust_shift && adjust_shift(shift, theta(0))) continue;

        // Lock converged pairs from the front of the block, in order.
        std::size_t lock = 0;
        while (lock < m && found.size() + lock < options.k) {
            const double lambda = theta(static_cast<Eigen::Index>(lock));
            const ResidualState st = residual_of(b, active[lock], aw[lock], lambda, scale);
            last_residual[found.size() + lock] = st.relative_residual;
            if (st.relative_residual > options.tol) break;
            ++lock;
        }
        for (std::size_t c = 0; c < lock; ++c) {
            EigenResult r;
            r.eigenvalue = theta(static_cast<Eigen::Index>(c));
            r.eigenvector = active[c];
            const ResidualState st = residual_of(b, active[c], aw[c], r.eigenvalue, scale);
            r.residual = st.residual;
            r.relative_residual = st.relative_residual;
            r.iterations = it;
            locked.push_back(active[c]);
            found.push_back(std::move(r));
        }
        active.erase(active.begin(), active.begin() + static_cast<std::ptrdiff_t>(lock));
        if (found.size() < options.k && active.empty()) refill(active, 1);
        if (found.size() < options.k && active.empty()) {
            throw PreconditionError("eigensolver: B vanishes on the support of the iterate");
        }
    }
    std::stable_sort(found.begin(), found.end(),
                     [](const EigenResult& x, const EigenResult& y) { return x.eigenvalue < y.eigenvalue; });
    return found;
}

}  // namespace

std::vector<EigenResult> smallest_k_eigenpairs(const SparseOperator& a, std::span<const double> b_diag,
                                               const EigenOptions& options) {
    validate(b_diag, a.n(), options);
    const LinearMap amap(a);

    double current_shift = options.shift.value_or(0.0);
    std::vector<double> minus_b(b_diag.size());
    auto build = [&](double s) {
        for (std::size_t i = 0; i < b_diag.size(); ++i) minus_b[i] = -s * b_diag[i];
        return add_diagonal(a, minus_b);
    };
    SparseOperator shifted = build(current_shift);
    bool use_cr = false;

    auto solve = [&](std::span<const double> rhs, double s) {
        if (s != current_shift) {
            current_shift = s;
            shifted = build(s);
            use_cr = false;
        }
        const LinearMap m(shifted);
        if (!use_cr) {
            try {
                return cg_solve(m, rhs, options.inner).x;
            } catch (const IndefiniteOperatorError&) {
                use_cr = true;
            }
        }
        return cr_solve(m, rhs, options.inner).x;
    };
    auto adjust = [](double& s, double estimate) {
        if (estimate > s) return false;
        s = estimate - std::max(1.0, 0.5 * std::abs(estimate));
        return true;
    };
    return iterate(amap, b_diag, solve, adjust, current_shift, options);
}

std::vector<EigenResult> smallest_k_eigenpairs(const LinearMap& a, std::span<const double> b_diag,
                                               const ShiftedSolve& solve, double shift, const EigenOptions& options) {
    validate(b_diag, a.n, options);
    auto fixed = [&](std::span<const double> rhs, double) { return solve(rhs); };
    return iterate(a, b_diag, fixed, nullptr, shift, options);
}

struct ShiftedFactorization::Impl {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

ShiftedFactorization::ShiftedFactorization(const SparseOperator& a, std::span<const double> b_diag, double sigma)
    : impl_(std::make_unique<Impl>()), sigma_(sigma) {
    const std::size_t n = a.n();
    if (b_diag.size() != n) throw Error("factorization: B diagonal has the wrong size");
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(a.nnz() + n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = a.row_ptr()[r]; k < a.row_ptr()[r + 1]; ++k) {
            t.emplace_back(static_cast<int>(r), static_cast<int>(a.cols()[k]), a.vals()[k]);
        }
        t.emplace_back(static_cast<int>(r), static_cast<int>(r), -sigma * b_diag[r]);
    }
    Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    m.setFromTriplets(t.begin(), t.end());
    impl_->ldlt.compute(m);
    if (impl_->ldlt.info() != Eigen::Success) throw Error("factorization of A - σB failed (zero pivot)");
    const Eigen::VectorXd d = impl_->ldlt.vectorD();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (!(d[i] != 0.0) || !std::isfinite(d[i])) throw Error("factorization of A - σB failed (zero pivot)");
        if (d[i] < 0.0) ++negative_;
    }
}

ShiftedFactorization::~ShiftedFactorization() = default;
ShiftedFactorization::ShiftedFactorization(ShiftedFactorization&&) noexcept = default;
ShiftedFactorization& ShiftedFactorization::operator=(ShiftedFactorization&&) noexcept = default;

std::vector<double> ShiftedFactorization::solve(std::span<const double> rhs) const {
    const Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
    const Eigen::VectorXd x = impl_->ldlt.solve(b);
    return {x.data(), x.data() + x.size()};
}

EigenBracket bracket_smallest_eigenvalue(const SparseOperator& a, std::span<const double> b_diag, double rel_width) {
    if (b_diag.size() != a.n()) throw Error("bracket: B diagonal has the wrong size");
    if (!(rel_width > 0.0)) throw Error("bracket: width must be positive");
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.n(); ++i) {
        if (!(b_diag[i] > 0.0)) throw PreconditionError("bracket: B must be positive");
        hi = std::min(hi, a.at(i, i) / b_diag[i]);
    }
    EigenBracket br;
    // Zero pivots at an exact eigenvalue are stepped over by nudging the shift.
    auto below = [&](double sigma) {
        for (int attempt = 0;; ++attempt) {
            try {
                ++br.factorizations;
                return ShiftedFactorization(a, b_diag, sigma).negative_pivots();
            } catch (const Error&) {
                if (attempt == 8) throw;
                sigma -= 1e-9 * std::max(1.0, std::abs(sigma));
            }
        }
    };
    // e_i^T A e_i / B_ii >= λ1; widen slightly so at least one eigenvalue lies below.
    double step = 1e-12 * std::max(1.0, std::abs(hi));
    hi += step;
    while (below(hi) == 0) {
        step *= 4.0;
        hi += step;
    }
    double width = rel_width * std::max(1.0, std::abs(hi));
    double lo = hi - width;
    while (below(lo) > 0) {
        hi = lo;
        width *= 4.0;
        lo = hi - width;
    }
    while (hi - lo > rel_width * std::max({1.0, std::abs(lo), std::abs(hi)})) {
        const double mid = 0.5 * (lo + hi);
        if (below(mid) == 0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    br.lo = lo;
    br.hi = hi;
    return br;
}

double rayleigh_quotient(const LinearMap& a, std::span<const double> b_diag, std::span<const double> w) {
    const double bn = b_dot(b_diag, w, w);
    if (!(bn > 0.0)) throw PreconditionError("rayleigh_quotient: zero B-norm");
    std::vector<double> aw(w.size());
    a.apply(w, aw);
    return dot(aw, w) / bn;
}

std::vector<double> dense_generalized_eigenvalues(const SparseOperator& a, std::span<const double> b_diag) {
    const std::size_t n = a.n();
    if (n > kDenseOracleLimit) throw Error("dense oracle limited to n <= 2000");
    if (b_diag.size() != n) throw Error("dense oracle: B diagonal has the wrong size");
    Eigen::VectorXd s(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (!(b_diag[i] > 0.0)) throw PreconditionError("dense oracle requires B > 0");
        s[static_cast<Eigen::Index>(i)] = 1.0 / std::sqrt(b_diag[i]);
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = a.row_ptr()[r]; k < a.row_ptr()[r + 1]; ++k) {
            const auto i = static_cast<Eigen::Index>(r);
            const auto j = static_cast<Eigen::Index>(a.cols()[k]);
            m(i, j) = s[i] * a.vals()[k] * s[j];
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw Error("dense eigensolve failed");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = solver.eigenvalues()[static_cast<Eigen::Index>(i)];
    return out;
}

std::string backend_version() {
    return "eigen-" + std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
           std::to_string(EIGEN_MINOR_VERSION);
}

}  // namespace biharm
