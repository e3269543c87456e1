#pragma once

#include <optional>
#include <string>
#include <vector>

#include "peridyn/grid.hpp"

namespace peridyn {

enum class Shape { ball, fiber, slab };
enum class Phase { inclusion, matrix };

Shape parse_shape(const std::string& name);
const char* shape_name(Shape s);

/// Inclusion centered at the origin of the unit cell (cell units).
/// fiber: cylinder along e1, radius measured in the transverse plane.
/// slab: |y1| < R.
struct CellGeometry {
    int dim = 1;
    Shape shape = Shape::ball;
    double radius = 0.25;

    /// Membership of an already-reduced point (no periodic wrap).
    bool inside_reduced(const Point3& y) const;
};

struct PhaseParams {
    double C_f = 0.0, C_m = 0.0, C_i = 0.0;
    double rho_f = 0.0, rho_m = 0.0;
    double delta = 0.0;
    double lambda = 0.0;
    double gamma = 0.0;
    std::optional<double> beta;
};

struct Validation {
    std::vector<std::string> violations;
    std::vector<std::string> warnings;
    bool ok() const { return violations.empty(); }
};

/// Coefficient tables on a cell grid. chi_f may be fractional (mollified).
struct CellCoefficients {
    CellGrid grid;
    std::vector<double> chi_f;
    std::vector<double> rho;
    std::vector<double> rho_inv;
    double C_f = 0.0, C_m = 0.0, C_i = 0.0;

    double alpha(std::size_t j, std::size_t jp) const
    {
        const double a = chi_f[j], b = chi_f[jp];
        return C_f * a * b + C_m * (1.0 - a) * (1.0 - b) + C_i * (a * (1.0 - b) + (1.0 - a) * b);
    }
    double mean_rho_inv() const;
    double max_rho_inv() const;
    /// max over node pairs of rho^{-1}(y) alpha(y, y').
    double alpha_bar() const;
};

class Microstructure {
public:
    Microstructure() = default;
    Microstructure(CellGeometry geometry, PhaseParams params);

    const CellGeometry& geometry() const { return geom_; }
    const PhaseParams& params() const { return params_; }
    int dim() const { return geom_.dim; }

    Phase indicator(const Point3& y) const;
    double chi_f(const Point3& y) const { return indicator(y) == Phase::inclusion ? 1.0 : 0.0; }
    double chi_m(const Point3& y) const { return 1.0 - chi_f(y); }
    double density(const Point3& y) const;
    double bond_strength(const Point3& y, const Point3& yh) const;
    /// bond_strength when the nearest-image distance |y - yh| < h, else 0.
    double bond_strength_cutoff(const Point3& y, const Point3& yh, double h) const;

    /// (theta_f, theta_m) by nodal quadrature on a cell grid of the given resolution.
    std::pair<double, double> volume_fractions(int resolution) const;

    Validation validate() const;

    /// Sharp coefficients sampled at cell nodes, or mollified ones when
    /// params().beta is set.
    CellCoefficients coefficients(const CellGrid& grid) const;
    CellCoefficients sharp_coefficients(const CellGrid& grid) const;
    /// Periodic convolution of the indicators with a normalized smooth bump of
    /// radius beta. Requires 0 < beta < delta.
    CellCoefficients mollify(double beta, const CellGrid& grid) const;

private:
    CellGeometry geom_;
    PhaseParams params_;
};

/// Nearest-image distance between two cell points.
double periodic_distance(const Point3& a, const Point3& b, int dim);

} // namespace peridyn
