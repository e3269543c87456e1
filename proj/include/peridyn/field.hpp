#pragma once

#include <Eigen/Core>
#include <vector>

#include "peridyn/grid.hpp"

namespace peridyn {

/// d components per macro node; entry (node, c) lives at node*d + c.
struct VectorField {
    MacroGrid grid;
    Eigen::VectorXd values;

    static VectorField zeros(const MacroGrid& g)
    {
        return {g, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.dof()))};
    }
    int dim() const { return grid.dim(); }
    double& at(std::size_t node, int c) { return values[static_cast<Eigen::Index>(node * grid.dim() + c)]; }
    double at(std::size_t node, int c) const { return values[static_cast<Eigen::Index>(node * grid.dim() + c)]; }
};

/// d components per (macro node, cell node) pair; layout ((i*Ncell)+j)*d + c.
struct ProductField {
    MacroGrid macro;
    CellGrid cell;
    Eigen::VectorXd values;

    static ProductField zeros(const MacroGrid& m, const CellGrid& c)
    {
        return {m, c, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.node_count() * c.node_count() * m.dim()))};
    }
    int dim() const { return macro.dim(); }
    Eigen::Index index(std::size_t i, std::size_t j, int c) const
    {
        return static_cast<Eigen::Index>((i * cell.node_count() + j) * macro.dim() + c);
    }
    double& at(std::size_t i, std::size_t j, int c) { return values[index(i, j, c)]; }
    double at(std::size_t i, std::size_t j, int c) const { return values[index(i, j, c)]; }
};

template <class F>
struct Trajectory {
    std::vector<double> times;
    std::vector<F> frames;
    /// Time derivatives at the same instants (may be empty).
    std::vector<F> rates;

    std::size_t size() const { return frames.size(); }
    const F& back() const { return frames.back(); }
};

using VectorTrajectory = Trajectory<VectorField>;
using ProductTrajectory = Trajectory<ProductField>;

/// y-average per macro node.
VectorField cell_average(const ProductField& U);
/// Broadcast a macro field to every cell node.
ProductField broadcast(const VectorField& u, const CellGrid& cell);

} // namespace peridyn
