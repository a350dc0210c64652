#include "biharm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <string>

#include "biharm/error.hpp"

namespace biharm {

namespace {

constexpr std::size_t kMinNodes = 5;

std::size_t commensurate_count(double length, double h, const char* axis) {
    const double cells = length / h;
    const double rounded = std::round(cells);
    if (std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells)) {
        throw GeometryError(std::string("extent along ") + axis + " is not a whole number of cells");
    }
    return static_cast<std::size_t>(rounded) + 1;
}

}  // namespace

bool Grid::deep_interior(std::size_t i, std::size_t j) const noexcept {
    if (!is_interior(i, j)) return false;
    return is_interior(i - 1, j) && is_interior(i + 1, j) && is_interior(i, j - 1) && is_interior(i, j + 1);
}

void Grid::finalize() {
    unknown_.assign(size(), -1);
    interior_.clear();
    for (std::size_t node = 0; node < size(); ++node) {
        if (classes_[node] == NodeClass::interior) {
            unknown_[node] = static_cast<std::ptrdiff_t>(interior_.size());
            interior_.push_back(node);
        }
    }
}

GridPtr build_domain(const DomainSpec& spec, std::size_t n) {
    if (n < kMinNodes) throw GeometryError("resolution must be at least 5 nodes per axis");
    if (!(spec.extent[0] > 0.0) || !(spec.extent[1] > 0.0)) throw GeometryError("extent must be positive");

    auto g = std::shared_ptr<Grid>(new Grid());
    g->spec_ = spec;
    g->h_ = spec.extent[0] / static_cast<double>(n - 1);
    g->nx_ = n;
    g->ny_ = commensurate_count(spec.extent[1], g->h_, "y");
    if (g->ny_ < kMinNodes) throw GeometryError("resolution must be at least 5 nodes per axis");
    g->classes_.assign(g->size(), NodeClass::interior);

    if (spec.kind == DomainKind::rectangle) {
        for (std::size_t j = 0; j < g->ny_; ++j) {
            for (std::size_t i = 0; i < g->nx_; ++i) {
                if (i == 0 || j == 0 || i + 1 == g->nx_ || j + 1 == g->ny_) {
                    g->classes_[g->index(i, j)] = NodeClass::boundary;
                }
            }
        }
    } else {
        const double r = spec.radius;
        if (!(r > 2.0 * g->h_)) throw GeometryError("disk radius must exceed 2h");
        const double x0 = spec.origin[0];
        const double y0 = spec.origin[1];
        const double x1 = x0 + spec.extent[0];
        const double y1 = y0 + spec.extent[1];
        if (!(spec.center[0] - r > x0 && spec.center[0] + r < x1 && spec.center[1] - r > y0 &&
              spec.center[1] + r < y1)) {
            throw GeometryError("disk must lie strictly inside its bounding rectangle");
        }
        for (std::size_t j = 0; j < g->ny_; ++j) {
            for (std::size_t i = 0; i < g->nx_; ++i) {
                const double dx = g->x(i) - spec.center[0];
                const double dy = g->y(j) - spec.center[1];
                g->classes_[g->index(i, j)] =
                    std::hypot(dx, dy) < r ? NodeClass::interior : NodeClass::exterior;
            }
        }
        for (std::size_t j = 0; j < g->ny_; ++j) {
            for (std::size_t i = 0; i < g->nx_; ++i) {
                if (g->classes_[g->index(i, j)] == NodeClass::interior) continue;
                const bool touches = (i > 0 && g->classes_[g->index(i - 1, j)] == NodeClass::interior) ||
                                     (i + 1 < g->nx_ && g->classes_[g->index(i + 1, j)] == NodeClass::interior) ||
                                     (j > 0 && g->classes_[g->index(i, j - 1)] == NodeClass::interior) ||
                                     (j + 1 < g->ny_ && g->classes_[g->index(i, j + 1)] == NodeClass::interior);
                if (touches) g->classes_[g->index(i, j)] = NodeClass::boundary;
            }
        }
    }
    g->finalize();
    if (g->unknown_count() == 0) throw GeometryError("domain has no interior nodes");
    return g;
}

GridFunction::GridFunction(GridPtr grid, std::vector<double> values, bool zero_trace)
    : grid_(std::move(grid)), values_(std::move(values)), zero_trace_(zero_trace) {
    if (!grid_) throw Error("grid function without a grid");
    if (values_.size() != grid_->size()) throw Error("grid function size does not match its grid");
    for (std::size_t node = 0; node < values_.size(); ++node) {
        if (grid_->node_class(node) == NodeClass::exterior) values_[node] = 0.0;
    }
}

GridFunction GridFunction::zeros(GridPtr grid) {
    const std::size_t n = grid->size();
    return GridFunction(std::move(grid), std::vector<double>(n, 0.0), true);
}

double GridFunction::max_abs() const noexcept {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

double GridFunction::min_interior() const noexcept {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t node : grid_->interior_nodes()) m = std::min(m, values_[node]);
    return m;
}

double GridFunction::max_interior() const noexcept {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t node : grid_->interior_nodes()) m = std::max(m, values_[node]);
    return m;
}

GridFunction combine(double alpha, const GridFunction& u, double beta, const GridFunction& v) {
    if (u.grid_ptr() != v.grid_ptr()) throw Error("combine: grid functions live on different grids");
    std::vector<double> out(u.values().size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = alpha * u[k] + beta * v[k];
    return GridFunction(u.grid_ptr(), std::move(out), u.zero_trace() && v.zero_trace());
}

GridFunction sample(const expr::Expr& e, const GridPtr& grid) {
    std::vector<double> values(grid->size(), 0.0);
    for (std::size_t j = 0; j < grid->ny(); ++j) {
        for (std::size_t i = 0; i < grid->nx(); ++i) {
            const std::size_t node = grid->index(i, j);
            if (grid->node_class(node) == NodeClass::exterior) continue;
            expr::Bindings p;
            p.set(expr::Var::x, grid->x(i)).set(expr::Var::y, grid->y(j));
            try {
                values[node] = expr::eval(e, p);
            } catch (const EvalError& err) {
                char where[96];
                std::snprintf(where, sizeof where, " at node (%.17g, %.17g)", grid->x(i), grid->y(j));
                throw EvalError(err.what() + std::string(where));
            }
        }
    }
    return GridFunction(grid, std::move(values));
}

double integrate(const GridFunction& u) {
    const Grid& g = u.grid();
    double sum = 0.0;
    for (std::size_t node : g.interior_nodes()) sum += u[node];
    return sum * g.h() * g.h();
}

std::vector<double> to_unknowns(const GridFunction& u) {
    const auto nodes = u.grid().interior_nodes();
    std::vector<double> w(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) w[k] = u[nodes[k]];
    return w;
}

GridFunction from_unknowns(const GridPtr& grid, std::span<const double> w, bool zero_trace) {
    const auto nodes = grid->interior_nodes();
    if (w.size() != nodes.size()) throw Error("unknown vector size does not match grid");
    std::vector<double> values(grid->size(), 0.0);
    for (std::size_t k = 0; k < nodes.size(); ++k) values[nodes[k]] = w[k];
    return GridFunction(grid, std::move(values), zero_trace);
}

namespace {

bool bump_fits(const Grid& g, const Bump& b, const std::vector<bool>* allowed) {
    const double h = g.h();
    const auto lo_i = static_cast<std::ptrdiff_t>(std::floor((b.cx - b.radius - g.spec().origin[0]) / h)) - 1;
    const auto hi_i = static_cast<std::ptrdiff_t>(std::ceil((b.cx + b.radius - g.spec().origin[0]) / h)) + 1;
    const auto lo_j = static_cast<std::ptrdiff_t>(std::floor((b.cy - b.radius - g.spec().origin[1]) / h)) - 1;
    const auto hi_j = static_cast<std::ptrdiff_t>(std::ceil((b.cy + b.radius - g.spec().origin[1]) / h)) + 1;
    if (lo_i < 0 || lo_j < 0 || hi_i >= static_cast<std::ptrdiff_t>(g.nx()) ||
        hi_j >= static_cast<std::ptrdiff_t>(g.ny())) {
        return false;
    }
    for (auto j = lo_j; j <= hi_j; ++j) {
        for (auto i = lo_i; i <= hi_i; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const auto uj = static_cast<std::size_t>(j);
            if (std::hypot(g.x(ui) - b.cx, g.y(uj) - b.cy) >= b.radius) continue;
            const std::size_t node = g.index(ui, uj);
            if (g.node_class(node) != NodeClass::interior) return false;
            if (allowed != nullptr && !(*allowed)[node]) return false;
        }
    }
    return true;
}

}  // namespace

std::vector<Bump> random_bump_params(const Grid& grid, std::uint64_t seed, std::size_t count,
                                     const BumpOptions& options) {
    const double h = grid.h();
    const double rmin = std::max(options.min_radius, 4.0 * h);
    const double rmax = options.max_radius > 0.0
                            ? options.max_radius
                            : 0.25 * std::min(grid.spec().extent[0], grid.spec().extent[1]);
    if (rmax < rmin) throw GeometryError("cannot fit a bump: domain too small for the minimum radius 4h");

    // Sample inside the region that actually holds interior nodes.
    double xlo = std::numeric_limits<double>::infinity();
    double xhi = -xlo;
    double ylo = xlo;
    double yhi = -xlo;
    for (std::size_t node : grid.interior_nodes()) {
        const std::size_t i = node % grid.nx();
        const std::size_t j = node / grid.nx();
        xlo = std::min(xlo, grid.x(i));
        xhi = std::max(xhi, grid.x(i));
        ylo = std::min(ylo, grid.y(j));
        yhi = std::max(yhi, grid.y(j));
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Bump> out;
    out.reserve(count);
    while (out.size() < count) {
        bool placed = false;
        for (std::size_t attempt = 0; attempt < options.max_attempts && !placed; ++attempt) {
            Bump b;
            b.radius = rmin + unit(rng) * (rmax - rmin);
            b.cx = xlo + unit(rng) * (xhi - xlo);
            b.cy = ylo + unit(rng) * (yhi - ylo);
            if (bump_fits(grid, b, options.allowed)) {
                out.push_back(b);
                placed = true;
            }
        }
        if (!placed) throw GeometryError("cannot fit a bump inside the admissible interior");
    }
    return out;
}

GridFunction sample_bump(const GridPtr& grid, const Bump& bump) {
    std::vector<double> values(grid->size(), 0.0);
    for (std::size_t node : grid->interior_nodes()) {
        const std::size_t i = node % grid->nx();
        const std::size_t j = node / grid->nx();
        const double r = std::hypot(grid->x(i) - bump.cx, grid->y(j) - bump.cy) / bump.radius;
        if (r < 1.0) values[node] = std::exp(-1.0 / (1.0 - r * r));
    }
    return GridFunction(grid, std::move(values), true);
}

std::vector<GridFunction> random_bump(const GridPtr& grid, std::uint64_t seed, std::size_t count,
                                      const BumpOptions& options) {
    std::vector<GridFunction> out;
    for (const Bump& b : random_bump_params(*grid, seed, count, options)) out.push_back(sample_bump(grid, b));
    return out;
}

void write_csv(const GridFunction& u, std::ostream& out) {
    const Grid& g = u.grid();
    out << "x,y,value\n";
    char line[128];
    for (std::size_t j = 0; j < g.ny(); ++j) {
        for (std::size_t i = 0; i < g.nx(); ++i) {
            if (g.node_class(i, j) == NodeClass::exterior) continue;
            std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", g.x(i), g.y(j), u(i, j));
            out << line;
        }
    }
}

}  // namespace biharm
