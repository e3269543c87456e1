#include "peridyn/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "peridyn/error.hpp"

namespace peridyn {

namespace {

void check_dim(int dim)
{
    if (dim < 1 || dim > 3)
        throw invalid_argument("dimension must be 1, 2 or 3, got " + std::to_string(dim));
}

} // namespace

MacroGrid::MacroGrid(int dim, Point3 lower, Index3 counts, double spacing)
    : dim_(dim), lower_(lower), counts_(counts), h_(spacing)
{
    check_dim(dim);
    if (!(spacing > 0.0) || !std::isfinite(spacing))
        throw invalid_argument("macro grid spacing must be positive");
    nodes_ = 1;
    weight_ = 1.0;
    for (int k = 0; k < 3; ++k) {
        if (k >= dim) {
            counts_[k] = 1;
            lower_[k] = 0.0;
            continue;
        }
        if (counts_[k] < 2)
            throw invalid_argument("macro grid needs at least 2 nodes per axis");
        nodes_ *= static_cast<std::size_t>(counts_[k]);
        weight_ *= h_;
    }
}

MacroGrid MacroGrid::box(int dim, Point3 lower, Point3 upper, Index3 counts)
{
    check_dim(dim);
    if (counts[0] < 1)
        throw invalid_argument("macro grid count must be positive");
    const double h = (upper[0] - lower[0]) / counts[0];
    for (int k = 1; k < dim; ++k) {
        if (counts[k] < 1)
            throw invalid_argument("macro grid count must be positive");
        const double hk = (upper[k] - lower[k]) / counts[k];
        if (std::abs(hk - h) > 1e-12 * std::abs(h))
            throw invalid_argument("macro grid spacing must agree on every axis");
    }
    return MacroGrid(dim, lower, counts, h);
}

Index3 MacroGrid::multi_index(std::size_t node) const
{
    Index3 idx{0, 0, 0};
    for (int k = 0; k < dim_; ++k) {
        idx[k] = static_cast<int>(node % counts_[k]);
        node /= counts_[k];
    }
    return idx;
}

std::size_t MacroGrid::linear(const Index3& idx) const
{
    std::size_t lin = 0;
    for (int k = dim_ - 1; k >= 0; --k)
        lin = lin * counts_[k] + idx[k];
    return lin;
}

bool MacroGrid::contains(const Index3& idx) const
{
    for (int k = 0; k < dim_; ++k)
        if (idx[k] < 0 || idx[k] >= counts_[k])
            return false;
    return true;
}

Point3 MacroGrid::coord(std::size_t node) const
{
    const Index3 idx = multi_index(node);
    Point3 x{0.0, 0.0, 0.0};
    for (int k = 0; k < dim_; ++k)
        x[k] = lower_[k] + idx[k] * h_;
    return x;
}

bool MacroGrid::operator==(const MacroGrid& o) const
{
    return dim_ == o.dim_ && lower_ == o.lower_ && counts_ == o.counts_ && h_ == o.h_;
}

CellGrid::CellGrid(int dim, int n) : dim_(dim), n_(n)
{
    check_dim(dim);
    if (n < 2)
        throw invalid_argument("cell grid needs at least 2 nodes per axis");
    h_ = 1.0 / n;
    nodes_ = 1;
    weight_ = 1.0;
    for (int k = 0; k < dim; ++k) {
        nodes_ *= static_cast<std::size_t>(n);
        weight_ *= h_;
    }
}

Index3 CellGrid::multi_index(std::size_t node) const
{
    Index3 idx{0, 0, 0};
    for (int k = 0; k < dim_; ++k) {
        idx[k] = static_cast<int>(node % n_);
        node /= n_;
    }
    return idx;
}

std::size_t CellGrid::linear(const Index3& idx) const
{
    std::size_t lin = 0;
    for (int k = dim_ - 1; k >= 0; --k)
        lin = lin * n_ + idx[k];
    return lin;
}

std::size_t CellGrid::wrapped(const Index3& idx) const
{
    std::size_t lin = 0;
    for (int k = dim_ - 1; k >= 0; --k) {
        int m = idx[k] % n_;
        if (m < 0)
            m += n_;
        lin = lin * n_ + m;
    }
    return lin;
}

Point3 CellGrid::coord(std::size_t node) const
{
    const Index3 idx = multi_index(node);
    Point3 y{0.0, 0.0, 0.0};
    for (int k = 0; k < dim_; ++k)
        y[k] = -0.5 + idx[k] * h_;
    return y;
}

Point3 nearest_image(const Point3& y, int dim)
{
    Point3 r{0.0, 0.0, 0.0};
    for (int k = 0; k < dim; ++k) {
        r[k] = y[k] - std::floor(y[k] + 0.5);
    }
    return r;
}

int inverse_scale(double eps, const char* field)
{
    if (!(eps > 0.0) || !std::isfinite(eps))
        throw invalid_argument(std::string(field) + ": epsilon must be positive");
    const double inv = 1.0 / eps;
    const double n = std::round(inv);
    if (n < 1.0 || std::abs(inv - n) > 1e-9 * n)
        throw invalid_argument(std::string(field) + ": epsilon " + std::to_string(eps) +
                               " is not of the form 1/n");
    return static_cast<int>(n);
}

ScaleMap::ScaleMap(const MacroGrid& macro, const CellGrid& cell, int n)
    : macro_(macro), cell_(cell), n_(n), k_(0)
{
    if (macro.dim() != cell.dim())
        throw invalid_argument("macro and cell grids have different dimensions");
    if (n < 1)
        throw invalid_argument("epsilon must be 1/n with n >= 1");
    const int ny = cell.resolution();
    // n*h_x / h_y = n*h_x*ny
    const double kr = n * macro.spacing() * ny;
    const double kk = std::round(kr);
    if (kk < 1.0 || std::abs(kr - kk) > 1e-9 * kk)
        throw invalid_argument("epsilon = 1/" + std::to_string(n) +
                               " is not commensurate: n*h_x must be a multiple of the cell spacing");
    k_ = static_cast<int>(kk);

    Index3 offset{0, 0, 0};
    for (int a = 0; a < macro.dim(); ++a) {
        const double o = (n * macro.lower()[a] + 0.5) * ny;
        const double oi = std::round(o);
        if (std::abs(o - oi) > 1e-9 * std::max(1.0, std::abs(oi)))
            throw invalid_argument("epsilon = 1/" + std::to_string(n) +
                                   " is not commensurate: x/eps of the grid origin is off the cell lattice");
        offset[a] = static_cast<int>(static_cast<long long>(oi) % ny);
    }

    cell_of_.resize(macro.node_count());
    for (std::size_t i = 0; i < macro.node_count(); ++i) {
        const Index3 mi = macro.multi_index(i);
        Index3 ci{0, 0, 0};
        for (int a = 0; a < macro.dim(); ++a)
            ci[a] = static_cast<int>((offset[a] + static_cast<long long>(mi[a]) * k_) % ny);
        cell_of_[i] = cell.wrapped(ci);
    }
}

} // namespace peridyn
