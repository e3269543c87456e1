#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace peridyn {

using Index3 = std::array<int, 3>;
using Point3 = std::array<double, 3>;

/// Uniform lattice over the box [lower, lower + count*h) in d dimensions.
///
/// Node i sits at lower + i*h (left-endpoint lattice) and carries the
/// quadrature weight h^d, so the weights sum to the box volume exactly.
/// Lattices of this form nest under refinement, which keeps x/eps on the
/// cell lattice for every eps in a sweep.
class MacroGrid {
public:
    MacroGrid() = default;
    MacroGrid(int dim, Point3 lower, Index3 counts, double spacing);

    /// Box [lower, upper] split into counts[k] cells per axis. All axes must
    /// share one spacing.
    static MacroGrid box(int dim, Point3 lower, Point3 upper, Index3 counts);

    int dim() const { return dim_; }
    int count(int axis) const { return counts_[axis]; }
    const Index3& counts() const { return counts_; }
    const Point3& lower() const { return lower_; }
    double upper(int axis) const { return lower_[axis] + counts_[axis] * h_; }
    double spacing() const { return h_; }
    double weight() const { return weight_; }
    double volume() const { return weight_ * static_cast<double>(nodes_); }
    std::size_t node_count() const { return nodes_; }
    std::size_t dof() const { return nodes_ * static_cast<std::size_t>(dim_); }

    Index3 multi_index(std::size_t node) const;
    std::size_t linear(const Index3& idx) const;
    bool contains(const Index3& idx) const;
    Point3 coord(std::size_t node) const;

    bool operator==(const MacroGrid& other) const;
    bool operator!=(const MacroGrid& other) const { return !(*this == other); }

private:
    int dim_ = 1;
    Point3 lower_{0.0, 0.0, 0.0};
    Index3 counts_{1, 1, 1};
    double h_ = 1.0;
    double weight_ = 1.0;
    std::size_t nodes_ = 1;
};

/// Periodic lattice on the unit cell Y = [-1/2, 1/2)^d with n nodes per axis.
/// Node j sits at -1/2 + j/n; for even n the cell center y = 0 is a node.
class CellGrid {
public:
    CellGrid() = default;
    CellGrid(int dim, int n);

    int dim() const { return dim_; }
    int resolution() const { return n_; }
    double spacing() const { return h_; }
    double weight() const { return weight_; }
    std::size_t node_count() const { return nodes_; }

    Index3 multi_index(std::size_t node) const;
    std::size_t linear(const Index3& idx) const;
    /// Linear index of idx after periodic wrap on every axis.
    std::size_t wrapped(const Index3& idx) const;
    Point3 coord(std::size_t node) const;

    bool operator==(const CellGrid& other) const { return dim_ == other.dim_ && n_ == other.n_; }
    bool operator!=(const CellGrid& other) const { return !(*this == other); }

private:
    int dim_ = 1;
    int n_ = 2;
    double h_ = 0.5;
    double weight_ = 0.5;
    std::size_t nodes_ = 2;
};

/// Nearest-image representative of y in [-1/2, 1/2)^d.
Point3 nearest_image(const Point3& y, int dim);

/// Parses eps = 1/n. Accepts values within 1e-9 (relative) of a unit fraction.
/// Throws invalid_argument naming `field` otherwise.
int inverse_scale(double eps, const char* field = "epsilon");

/// Index map x -> x/eps (mod 1) between a macro lattice and the cell lattice.
///
/// Valid only when eps = 1/n, n*h_x = k*h_y for a positive integer k, and
/// (n*lower + 1/2)/h_y is an integer on every axis. Macro offset m then maps
/// to cell offset m*k.
class ScaleMap {
public:
    ScaleMap(const MacroGrid& macro, const CellGrid& cell, int n);

    int n() const { return n_; }
    double eps() const { return 1.0 / n_; }
    /// Cell lattice steps per macro lattice step.
    int stride() const { return k_; }
    std::size_t cell_of(std::size_t macro_node) const { return cell_of_[macro_node]; }
    const std::vector<std::size_t>& table() const { return cell_of_; }
    const MacroGrid& macro() const { return macro_; }
    const CellGrid& cell() const { return cell_; }

private:
    MacroGrid macro_;
    CellGrid cell_;
    int n_;
    int k_;
    std::vector<std::size_t> cell_of_;
};

} // namespace peridyn
