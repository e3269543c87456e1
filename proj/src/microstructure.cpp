#include "peridyn/microstructure.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "peridyn/error.hpp"

namespace peridyn {

Shape parse_shape(const std::string& name)
{
    if (name == "ball")
        return Shape::ball;
    if (name == "fiber")
        return Shape::fiber;
    if (name == "slab")
        return Shape::slab;
    throw invalid_argument("unknown shape '" + name + "' (expected ball, fiber or slab)");
}

const char* shape_name(Shape s)
{
    switch (s) {
    case Shape::ball: return "ball";
    case Shape::fiber: return "fiber";
    case Shape::slab: return "slab";
    }
    return "?";
}

bool CellGeometry::inside_reduced(const Point3& y) const
{
    const double R = radius;
    switch (shape) {
    case Shape::ball: {
        double r2 = 0.0;
        for (int k = 0; k < dim; ++k)
            r2 += y[k] * y[k];
        return r2 < R * R;
    }
    case Shape::fiber: {
        double r2 = 0.0;
        for (int k = 1; k < dim; ++k)
            r2 += y[k] * y[k];
        return r2 < R * R;
    }
    case Shape::slab: return std::abs(y[0]) < R;
    }
    return false;
}

double CellCoefficients::mean_rho_inv() const
{
    double s = 0.0;
    for (double v : rho_inv)
        s += v;
    return s / static_cast<double>(rho_inv.size());
}

double CellCoefficients::max_rho_inv() const { return *std::max_element(rho_inv.begin(), rho_inv.end()); }

double CellCoefficients::alpha_bar() const
{
    // alpha(j, j') is bilinear in (chi_f[j], chi_f[j']), so for fixed j the
    // max over j' sits at the extreme chi values.
    const auto [lo, hi] = std::minmax_element(chi_f.begin(), chi_f.end());
    const std::size_t jl = static_cast<std::size_t>(lo - chi_f.begin());
    const std::size_t jh = static_cast<std::size_t>(hi - chi_f.begin());
    double best = 0.0;
    for (std::size_t j = 0; j < chi_f.size(); ++j)
        best = std::max(best, rho_inv[j] * std::max(alpha(j, jl), alpha(j, jh)));
    return best;
}

Microstructure::Microstructure(CellGeometry geometry, PhaseParams params) : geom_(geometry), params_(params)
{
    if (geom_.dim < 1 || geom_.dim > 3)
        throw invalid_argument("microstructure dimension must be 1, 2 or 3");
    if (geom_.shape == Shape::fiber && geom_.dim == 1)
        throw invalid_argument("fiber inclusion needs dimension >= 2");
    if (!(geom_.radius >= 0.0))
        throw invalid_argument("inclusion radius must be nonnegative");
    const auto& p = params_;
    if (!(p.rho_f > 0.0) || !(p.rho_m > 0.0))
        throw invalid_argument("densities rho_f and rho_m must be positive");
    if (!(p.delta > 0.0))
        throw invalid_argument("short-range horizon delta must be positive");
    if (!(p.gamma > 0.0))
        throw invalid_argument("long-range horizon gamma must be positive");
    if (!(p.lambda > 0.0))
        throw invalid_argument("long-range bond constant lambda must be positive");
    if (p.beta && !(*p.beta > 0.0 && *p.beta < p.delta))
        throw invalid_argument("mollification width beta must satisfy 0 < beta < delta");
}

Phase Microstructure::indicator(const Point3& y) const
{
    return geom_.inside_reduced(nearest_image(y, geom_.dim)) ? Phase::inclusion : Phase::matrix;
}

double Microstructure::density(const Point3& y) const
{
    return indicator(y) == Phase::inclusion ? params_.rho_f : params_.rho_m;
}

double Microstructure::bond_strength(const Point3& y, const Point3& yh) const
{
    const bool a = indicator(y) == Phase::inclusion;
    const bool b = indicator(yh) == Phase::inclusion;
    if (a && b)
        return params_.C_f;
    if (!a && !b)
        return params_.C_m;
    return params_.C_i;
}

double periodic_distance(const Point3& a, const Point3& b, int dim)
{
    Point3 d{0.0, 0.0, 0.0};
    for (int k = 0; k < dim; ++k)
        d[k] = a[k] - b[k];
    d = nearest_image(d, dim);
    double s = 0.0;
    for (int k = 0; k < dim; ++k)
        s += d[k] * d[k];
    return std::sqrt(s);
}

double Microstructure::bond_strength_cutoff(const Point3& y, const Point3& yh, double h) const
{
    if (!(h > 0.0))
        throw invalid_argument("bond cutoff horizon must be positive");
    if (periodic_distance(y, yh, geom_.dim) < h)
        return bond_strength(y, yh);
    return 0.0;
}

std::pair<double, double> Microstructure::volume_fractions(int resolution) const
{
    const CellGrid g(geom_.dim, resolution);
    std::size_t count = 0;
    for (std::size_t j = 0; j < g.node_count(); ++j)
        if (indicator(g.coord(j)) == Phase::inclusion)
            ++count;
    const double tf = static_cast<double>(count) / static_cast<double>(g.node_count());
    return {tf, 1.0 - tf};
}

Validation Microstructure::validate() const
{
    Validation v;
    const double R = geom_.radius;
    const double d = params_.delta;
    const char* s = shape_name(geom_.shape);
    if (R >= 0.5)
        v.violations.push_back(fmt::format("{} radius {} does not fit inside the unit cell", s, R));
    else if (R > 0.0 && 1.0 - 2.0 * R < 2.0 * d)
        v.violations.push_back(fmt::format(
            "{} radius {}: gap {} to the periodic copy is below 2*delta = {}", s, R, 1.0 - 2.0 * R, 2.0 * d));
    if (R > 0.0 && 2.0 * R < d && R < 0.5)
        v.violations.push_back(
            fmt::format("{} radius {}: inclusion width {} is below delta = {}", s, R, 2.0 * R, d));
    const auto& p = params_;
    if (!(p.C_f > p.C_i && p.C_i > p.C_m && p.C_m > 0.0))
        v.warnings.push_back(fmt::format(
            "bond constants C_f = {}, C_i = {}, C_m = {} do not follow C_f > C_i > C_m > 0", p.C_f, p.C_i, p.C_m));
    return v;
}

CellCoefficients Microstructure::sharp_coefficients(const CellGrid& grid) const
{
    if (grid.dim() != geom_.dim)
        throw invalid_argument("cell grid dimension does not match the microstructure");
    CellCoefficients c;
    c.grid = grid;
    c.C_f = params_.C_f;
    c.C_m = params_.C_m;
    c.C_i = params_.C_i;
    const std::size_t n = grid.node_count();
    c.chi_f.resize(n);
    for (std::size_t j = 0; j < n; ++j)
        c.chi_f[j] = chi_f(grid.coord(j));
    c.rho.resize(n);
    c.rho_inv.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        c.rho[j] = c.chi_f[j] * params_.rho_f + (1.0 - c.chi_f[j]) * params_.rho_m;
        c.rho_inv[j] = 1.0 / c.rho[j];
    }
    return c;
}

CellCoefficients Microstructure::coefficients(const CellGrid& grid) const
{
    if (params_.beta)
        return mollify(*params_.beta, grid);
    return sharp_coefficients(grid);
}

CellCoefficients Microstructure::mollify(double beta, const CellGrid& grid) const
{
    if (!(beta > 0.0) || !(beta < params_.delta))
        throw invalid_argument(fmt::format("mollification width {} must satisfy 0 < beta < delta = {}", beta,
                                           params_.delta));
    CellCoefficients c = sharp_coefficients(grid);
    const int d = grid.dim();
    const double hy = grid.spacing();
    const int reach = static_cast<int>(std::floor(beta / hy));

    struct Tap {
        Index3 off;
        double w;
    };
    std::vector<Tap> taps;
    double total = 0.0;
    Index3 m{0, 0, 0};
    const int lo1 = -reach, hi1 = reach;
    const int lo2 = d > 1 ? -reach : 0, hi2 = d > 1 ? reach : 0;
    const int lo3 = d > 2 ? -reach : 0, hi3 = d > 2 ? reach : 0;
    for (m[2] = lo3; m[2] <= hi3; ++m[2])
        for (m[1] = lo2; m[1] <= hi2; ++m[1])
            for (m[0] = lo1; m[0] <= hi1; ++m[0]) {
                double s2 = 0.0;
                for (int k = 0; k < d; ++k) {
                    const double s = m[k] * hy / beta;
                    s2 += s * s;
                }
                if (s2 >= 1.0)
                    continue;
                const double w = std::exp(-1.0 / (1.0 - s2));
                taps.push_back({m, w});
                total += w;
            }
    for (auto& t : taps)
        t.w /= total;

    const std::size_t n = grid.node_count();
    std::vector<double> smooth(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const Index3 idx = grid.multi_index(j);
        double s = 0.0;
        for (const auto& t : taps) {
            Index3 q{idx[0] + t.off[0], idx[1] + t.off[1], idx[2] + t.off[2]};
            s += t.w * c.chi_f[grid.wrapped(q)];
        }
        smooth[j] = s;
    }
    c.chi_f = std::move(smooth);
    for (std::size_t j = 0; j < n; ++j) {
        c.rho[j] = c.chi_f[j] * params_.rho_f + (1.0 - c.chi_f[j]) * params_.rho_m;
        c.rho_inv[j] = 1.0 / c.rho[j];
    }
    return c;
}

} // namespace peridyn
