#pragma once

#include <memory>
#include <optional>

#include "peridyn/expression.hpp"
#include "peridyn/field.hpp"
#include "peridyn/microstructure.hpp"
#include "peridyn/nonlocal_ops.hpp"
#include "peridyn/propagators.hpp"

namespace peridyn {

enum class Integrator { verlet, series };

struct ProblemSpec {
    Microstructure micro;
    MacroGrid macro;
    CellGrid cell;
    /// eps = 1/n; fine-scale solves only.
    std::optional<int> n;
    VectorExpression u0, v0, b;
    double T = 0.0;
    double dt = 0.0;
    int stride = 1;
    Integrator integrator = Integrator::verlet;
    SeriesOptions series;
    std::size_t assembly_cap = default_assembly_cap;

    std::shared_ptr<const CellCoefficients> coefficients() const;
    /// Same problem at another eps.
    ProblemSpec at_scale(int n) const;
};

/// f(x_i, y_{j(i)}) for every macro node, y on the cell lattice.
VectorField sample_rescaled(const VectorExpression& f, const ScaleMap& map, double t);
/// f(x_i, y_j) on the product grid.
ProductField sample_product(const VectorExpression& f, const MacroGrid& macro, const CellGrid& cell, double t);

/// rho(x/eps) u'' = (K_L + K_S^eps) u + b(x, x/eps, t).
VectorTrajectory solve_fine(const ProblemSpec& spec);

/// u'' = rho^{-1}(y) (B_L + B_S) u + rho^{-1}(y) b(x, y, t).
ProductTrajectory solve_twoscale(const ProblemSpec& spec);

/// u(x, x/eps, t) for every stored frame.
VectorTrajectory rescale(const ProductTrajectory& U, int n);
VectorField rescale(const ProductField& U, const ScaleMap& map);

} // namespace peridyn
