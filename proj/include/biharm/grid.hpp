#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "biharm/expr.hpp"

namespace biharm {

enum class NodeClass : std::uint8_t { interior, boundary, exterior };
enum class DomainKind : std::uint8_t { rectangle, disk };

/// Geometry of the domain. For a disk, `origin`/`extent` describe the bounding rectangle
/// that carries the lattice.
struct DomainSpec {
    DomainKind kind = DomainKind::rectangle;
    std::array<double, 2> origin{0.0, 0.0};
    std::array<double, 2> extent{1.0, 1.0};
    std::array<double, 2> center{0.5, 0.5};
    double radius = 0.0;

    static DomainSpec rectangle(std::array<double, 2> origin, std::array<double, 2> extent) {
        return DomainSpec{DomainKind::rectangle, origin, extent, {}, 0.0};
    }
    static DomainSpec unit_square() { return rectangle({0.0, 0.0}, {1.0, 1.0}); }
    static DomainSpec disk(std::array<double, 2> center, double radius,
                           std::array<double, 2> box_origin = {0.0, 0.0},
                           std::array<double, 2> box_extent = {1.0, 1.0}) {
        return DomainSpec{DomainKind::disk, box_origin, box_extent, center, radius};
    }

    bool operator==(const DomainSpec&) const = default;
};

/// Uniform lattice of square cells with a per-node classification.
///
/// Rectangles: edge nodes are boundary, everything else interior. Disks (staircase mask):
/// nodes strictly inside the radius are interior; non-interior nodes 4-adjacent to an interior
/// node are boundary; the rest are exterior.
class Grid {
public:
    [[nodiscard]] std::size_t nx() const noexcept { return nx_; }
    [[nodiscard]] std::size_t ny() const noexcept { return ny_; }
    [[nodiscard]] double h() const noexcept { return h_; }
    [[nodiscard]] const DomainSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] DomainKind kind() const noexcept { return spec_.kind; }

    [[nodiscard]] std::size_t size() const noexcept { return nx_ * ny_; }
    [[nodiscard]] std::size_t index(std::size_t i, std::size_t j) const noexcept { return j * nx_ + i; }
    [[nodiscard]] double x(std::size_t i) const noexcept { return spec_.origin[0] + static_cast<double>(i) * h_; }
    [[nodiscard]] double y(std::size_t j) const noexcept { return spec_.origin[1] + static_cast<double>(j) * h_; }

    [[nodiscard]] NodeClass node_class(std::size_t i, std::size_t j) const noexcept { return classes_[index(i, j)]; }
    [[nodiscard]] NodeClass node_class(std::size_t node) const noexcept { return classes_[node]; }
    [[nodiscard]] bool is_interior(std::size_t i, std::size_t j) const noexcept {
        return node_class(i, j) == NodeClass::interior;
    }

    /// Interior nodes in row-major order; position in this list is the unknown index.
    [[nodiscard]] std::span<const std::size_t> interior_nodes() const noexcept { return interior_; }
    [[nodiscard]] std::size_t unknown_count() const noexcept { return interior_.size(); }
    /// Unknown index of a node, or -1 when the node is not interior.
    [[nodiscard]] std::ptrdiff_t unknown_of(std::size_t node) const noexcept { return unknown_[node]; }

    /// True when all four axis neighbours of an interior node are interior as well.
    [[nodiscard]] bool deep_interior(std::size_t i, std::size_t j) const noexcept;

    friend std::shared_ptr<const Grid> build_domain(const DomainSpec& spec, std::size_t n);

private:
    Grid() = default;
    void finalize();

    DomainSpec spec_;
    std::size_t nx_ = 0;
    std::size_t ny_ = 0;
    double h_ = 0.0;
    std::vector<NodeClass> classes_;
    std::vector<std::size_t> interior_;
    std::vector<std::ptrdiff_t> unknown_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// `n` is the node count along x; y follows from the square-cell requirement.
/// Throws GeometryError for degenerate or incommensurate geometry.
[[nodiscard]] GridPtr build_domain(const DomainSpec& spec, std::size_t n);

/// Scalar field at grid nodes. Exterior nodes always carry 0.
class GridFunction {
public:
    GridFunction(GridPtr grid, std::vector<double> values, bool zero_trace = false);
    static GridFunction zeros(GridPtr grid);

    [[nodiscard]] const Grid& grid() const noexcept { return *grid_; }
    [[nodiscard]] const GridPtr& grid_ptr() const noexcept { return grid_; }

    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept { return values_[grid_->index(i, j)]; }
    [[nodiscard]] double operator[](std::size_t node) const noexcept { return values_[node]; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> mutable_values() noexcept { return values_; }

    [[nodiscard]] bool zero_trace() const noexcept { return zero_trace_; }
    void set_zero_trace(bool tag) noexcept { zero_trace_ = tag; }

    [[nodiscard]] double max_abs() const noexcept;
    [[nodiscard]] double min_interior() const noexcept;
    [[nodiscard]] double max_interior() const noexcept;

private:
    GridPtr grid_;
    std::vector<double> values_;
    bool zero_trace_ = false;
};

/// alpha*u + beta*v, nodewise.
[[nodiscard]] GridFunction combine(double alpha, const GridFunction& u, double beta, const GridFunction& v);

/// Evaluate `e` (free variables within {x, y}) at interior and boundary nodes.
[[nodiscard]] GridFunction sample(const expr::Expr& e, const GridPtr& grid);

/// h^2-weighted nodal sum over interior nodes.
[[nodiscard]] double integrate(const GridFunction& u);

/// Interior values as an unknown vector, and back (non-interior nodes set to 0).
[[nodiscard]] std::vector<double> to_unknowns(const GridFunction& u);
[[nodiscard]] GridFunction from_unknowns(const GridPtr& grid, std::span<const double> w, bool zero_trace = true);

/// Smooth compactly supported bump exp(-1/(1-r^2)), r = |p - c| / radius.
struct Bump {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;
};

struct BumpOptions {
    double min_radius = 0.0;  // 0 selects 4h
    double max_radius = 0.0;  // 0 selects a quarter of the smaller extent
    /// Optional per-node mask; bump support must stay on interior nodes where allowed is true.
    const std::vector<bool>* allowed = nullptr;
    std::size_t max_attempts = 20000;
};

[[nodiscard]] std::vector<Bump> random_bump_params(const Grid& grid, std::uint64_t seed, std::size_t count,
                                                   const BumpOptions& options = {});
[[nodiscard]] GridFunction sample_bump(const GridPtr& grid, const Bump& bump);
[[nodiscard]] std::vector<GridFunction> random_bump(const GridPtr& grid, std::uint64_t seed, std::size_t count,
                                                    const BumpOptions& options = {});

/// CSV with header `x,y,value`, one row per non-exterior node, 17 significant digits, LF endings.
void write_csv(const GridFunction& u, std::ostream& out);

}  // namespace biharm
