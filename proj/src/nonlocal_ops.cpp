#include "peridyn/nonlocal_ops.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "peridyn/error.hpp"

namespace peridyn {

namespace {

double block_inf_norm(const Matrix3& w, int d)
{
    return w.topLeftCorner(d, d).cwiseAbs().rowwise().sum().maxCoeff();
}

// Linear macro neighbor of node i shifted by off, or -1 when outside Omega.
inline long long shifted(const MacroGrid& g, const Index3& mi, const Index3& off)
{
    Index3 q{mi[0] + off[0], mi[1] + off[1], mi[2] + off[2]};
    if (!g.contains(q))
        return -1;
    return static_cast<long long>(g.linear(q));
}

// out_i += W (u_j - u_i) for a d x d block.
inline void accumulate(const Matrix3& w, double scale, const double* uj, const double* ui, double* oi, int d)
{
    for (int a = 0; a < d; ++a) {
        double s = 0.0;
        for (int b = 0; b < d; ++b)
            s += w(a, b) * (uj[b] - ui[b]);
        oi[a] += scale * s;
    }
}

void emit_difference(std::vector<Eigen::Triplet<double>>& trips, std::size_t i, std::size_t j, const Matrix3& w,
                     double scale, int d)
{
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            const double v = scale * w(a, b);
            if (v == 0.0)
                continue;
            trips.emplace_back(static_cast<int>(i * d + a), static_cast<int>(j * d + b), v);
            trips.emplace_back(static_cast<int>(i * d + a), static_cast<int>(i * d + b), -v);
        }
}

SparseMatrix from_triplets(Eigen::Index n, std::vector<Eigen::Triplet<double>>& trips)
{
    SparseMatrix m(n, n);
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

} // namespace

std::vector<Tap> make_taps(int dim, double spacing, double radius, bool closed)
{
    std::vector<Tap> taps;
    if (!(spacing > 0.0) || !(radius > 0.0))
        return taps;
    const int reach = static_cast<int>(std::floor(radius / spacing * (1.0 + 1e-12)));
    const int r2 = dim > 1 ? reach : 0;
    const int r3 = dim > 2 ? reach : 0;
    const double vol = std::pow(spacing, dim);
    Index3 m{0, 0, 0};
    for (m[2] = -r3; m[2] <= r3; ++m[2])
        for (m[1] = -r2; m[1] <= r2; ++m[1])
            for (m[0] = -reach; m[0] <= reach; ++m[0]) {
                if (m[0] == 0 && m[1] == 0 && m[2] == 0)
                    continue;
                Eigen::Vector3d xi(m[0] * spacing, m[1] * spacing, m[2] * spacing);
                const double r = xi.norm();
                const bool in = closed ? r <= radius * (1.0 + 1e-12) : r < radius * (1.0 - 1e-12);
                if (!in)
                    continue;
                Tap t;
                t.off = m;
                t.w = xi * xi.transpose() / std::pow(r, dim) * vol;
                taps.push_back(t);
            }
    return taps;
}

// ---------------------------------------------------------------------------

LongRangeOperator::LongRangeOperator(const MacroGrid& grid, double lambda, double gamma)
    : grid_(grid), lambda_(lambda), gamma_(gamma)
{
    if (!(gamma > 0.0))
        throw invalid_argument("long-range horizon gamma must be positive");
    if (gamma / grid.spacing() < 2.0 * (1.0 - 1e-12))
        throw invalid_argument(fmt::format("gamma = {} is resolved by fewer than 2 macro nodes (h_x = {})", gamma,
                                           grid.spacing()));
    taps_ = make_taps(grid.dim(), grid.spacing(), gamma, true);
    const int d = grid.dim();
    moment_.assign(grid.node_count(), Matrix3::Zero());
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
        const Index3 mi = grid.multi_index(i);
        Matrix3 k = Matrix3::Zero();
        double rb = 0.0;
        for (const auto& t : taps_) {
            if (shifted(grid, mi, t.off) < 0)
                continue;
            k += t.w;
            rb += block_inf_norm(t.w, d);
        }
        moment_[i] = lambda * k;
        row_bound_ = std::max(row_bound_, 2.0 * lambda * rb);
    }
}

void LongRangeOperator::apply(const Eigen::VectorXd& u, Eigen::VectorXd& out) const
{
    const int d = grid_.dim();
    const auto n = static_cast<long long>(grid_.node_count());
    if (u.size() != static_cast<Eigen::Index>(n * d))
        throw invalid_argument("long-range operator: field size does not match the grid");
    out.setZero(u.size());
    const double* up = u.data();
    double* op = out.data();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
        const Index3 mi = grid_.multi_index(static_cast<std::size_t>(i));
        for (const auto& t : taps_) {
            const long long j = shifted(grid_, mi, t.off);
            if (j < 0)
                continue;
            accumulate(t.w, lambda_, up + j * d, up + i * d, op + i * d, d);
        }
    }
}

VectorField LongRangeOperator::apply(const VectorField& u) const
{
    if (u.grid != grid_)
        throw invalid_argument("long-range operator: field lives on a different grid");
    VectorField r{grid_, {}};
    apply(u.values, r.values);
    return r;
}

SparseMatrix LongRangeOperator::assemble() const
{
    const int d = grid_.dim();
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t i = 0; i < grid_.node_count(); ++i) {
        const Index3 mi = grid_.multi_index(i);
        for (const auto& t : taps_) {
            const long long j = shifted(grid_, mi, t.off);
            if (j >= 0)
                emit_difference(trips, i, static_cast<std::size_t>(j), t.w, lambda_, d);
        }
    }
    return from_triplets(static_cast<Eigen::Index>(grid_.dof()), trips);
}

// ---------------------------------------------------------------------------

ShortRangeOperator::ShortRangeOperator(const MacroGrid& grid, std::shared_ptr<const CellCoefficients> coeffs,
                                       double delta, int n)
    : grid_(grid), coeffs_(std::move(coeffs)), map_(grid, coeffs_->grid, n), delta_(delta)
{
    const double zs = map_.stride() * coeffs_->grid.spacing();
    if (delta / zs < 2.0 * (1.0 - 1e-12))
        throw invalid_argument(fmt::format(
            "eps*delta = {} is resolved by fewer than 2 macro nodes (h_x = {})", delta / n, grid.spacing()));
    taps_ = make_taps(grid.dim(), zs, delta, false);
    const int d = grid.dim();
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
        double rb = 0.0;
        visit_row(i, [&](std::size_t, const Matrix3& w, double a) { rb += a * block_inf_norm(w, d); });
        row_bound_ = std::max(row_bound_, 2.0 * rb);
    }
}

template <class Emit>
void ShortRangeOperator::visit_row(std::size_t i, Emit&& emit) const
{
    const CellGrid& cg = coeffs_->grid;
    const int k = map_.stride();
    const Index3 mi = grid_.multi_index(i);
    const std::size_t ji = map_.cell_of(i);
    const Index3 cj = cg.multi_index(ji);
    for (const auto& t : taps_) {
        const long long j = shifted(grid_, mi, t.off);
        if (j < 0)
            continue;
        const std::size_t jc =
            cg.wrapped({cj[0] + t.off[0] * k, cj[1] + t.off[1] * k, cj[2] + t.off[2] * k});
        emit(static_cast<std::size_t>(j), t.w, coeffs_->alpha(ji, jc));
    }
}

void ShortRangeOperator::apply(const Eigen::VectorXd& u, Eigen::VectorXd& out) const
{
    const int d = grid_.dim();
    const auto n = static_cast<long long>(grid_.node_count());
    if (u.size() != static_cast<Eigen::Index>(n * d))
        throw invalid_argument("short-range operator: field size does not match the grid");
    out.setZero(u.size());
    const double* up = u.data();
    double* op = out.data();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
        visit_row(static_cast<std::size_t>(i), [&](std::size_t j, const Matrix3& w, double a) {
            accumulate(w, a, up + j * d, up + i * d, op + i * d, d);
        });
    }
}

VectorField ShortRangeOperator::apply(const VectorField& u) const
{
    if (u.grid != grid_)
        throw invalid_argument("short-range operator: field lives on a different grid");
    VectorField r{grid_, {}};
    apply(u.values, r.values);
    return r;
}

SparseMatrix ShortRangeOperator::assemble() const
{
    const int d = grid_.dim();
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t i = 0; i < grid_.node_count(); ++i)
        visit_row(i, [&](std::size_t j, const Matrix3& w, double a) { emit_difference(trips, i, j, w, a, d); });
    return from_triplets(static_cast<Eigen::Index>(grid_.dof()), trips);
}

// ---------------------------------------------------------------------------

FineOperator::FineOperator(const MacroGrid& grid, const Microstructure& ms,
                           std::shared_ptr<const CellCoefficients> coeffs, int n)
    : coeffs_(coeffs), long_(grid, ms.params().lambda, ms.params().gamma),
      short_(grid, coeffs, ms.params().delta, n)
{
    if (ms.dim() != grid.dim())
        throw invalid_argument("microstructure and macro grid dimensions differ");
    const auto& map = short_.scale();
    const int d = grid.dim();
    rho_.resize(static_cast<Eigen::Index>(grid.dof()));
    rho_inv_.resize(rho_.size());
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
        const std::size_t j = map.cell_of(i);
        for (int c = 0; c < d; ++c) {
            rho_[static_cast<Eigen::Index>(i * d + c)] = coeffs_->rho[j];
            rho_inv_[static_cast<Eigen::Index>(i * d + c)] = coeffs_->rho_inv[j];
        }
    }
}

void FineOperator::apply_stiffness(const Eigen::VectorXd& u, Eigen::VectorXd& out) const
{
    Eigen::VectorXd s;
    long_.apply(u, out);
    short_.apply(u, s);
    out += s;
}

void FineOperator::apply(const Eigen::VectorXd& u, Eigen::VectorXd& out) const
{
    apply_stiffness(u, out);
    out.array() *= rho_inv_.array();
}

VectorField FineOperator::apply(const VectorField& u) const
{
    if (u.grid != long_.grid())
        throw invalid_argument("fine operator: field lives on a different grid");
    VectorField r{u.grid, {}};
    apply(u.values, r.values);
    return r;
}

SparseMatrix FineOperator::assemble_stiffness() const
{
    SparseMatrix m = long_.assemble();
    m += short_.assemble();
    m.makeCompressed();
    return m;
}

SparseMatrix FineOperator::assemble() const
{
    SparseMatrix m = assemble_stiffness();
    m = rho_inv_.asDiagonal() * m;
    m.makeCompressed();
    return m;
}

double FineOperator::norm_bound() const
{
    return rho_inv_.maxCoeff() * (long_.row_bound() + short_.row_bound());
}

OperatorHandle FineOperator::handle(std::size_t cap) const
{
    OperatorHandle h;
    h.size = rho_.size();
    h.apply = [this](const Eigen::VectorXd& x, Eigen::VectorXd& y) { apply(x, y); };
    h.label = fmt::format("A^eps (eps = 1/{})", scale().n());
    h.norm_bound = norm_bound();
    if (static_cast<std::size_t>(h.size) <= cap)
        h.matrix = assemble();
    return h;
}

// ---------------------------------------------------------------------------

CellOperator::CellOperator(std::shared_ptr<const CellCoefficients> coeffs, double delta)
    : coeffs_(std::move(coeffs)), delta_(delta)
{
    const CellGrid& g = coeffs_->grid;
    if (delta / g.spacing() < 2.0 * (1.0 - 1e-12))
        throw invalid_argument(
            fmt::format("delta = {} is resolved by fewer than 2 cell nodes (h_y = {})", delta, g.spacing()));
    taps_ = make_taps(g.dim(), g.spacing(), delta, false);
    const std::size_t m = g.node_count();
    const std::size_t nt = taps_.size();
    nb_.resize(m * nt);
    alpha_.resize(m * nt);
    const int d = g.dim();
    for (std::size_t j = 0; j < m; ++j) {
        const Index3 cj = g.multi_index(j);
        double rb = 0.0;
        for (std::size_t t = 0; t < nt; ++t) {
            const auto& off = taps_[t].off;
            const std::size_t jp = g.wrapped({cj[0] + off[0], cj[1] + off[1], cj[2] + off[2]});
            nb_[j * nt + t] = jp;
            alpha_[j * nt + t] = coeffs_->alpha(j, jp);
            rb += std::abs(alpha_[j * nt + t]) * block_inf_norm(taps_[t].w, d);
        }
        row_bound_ = std::max(row_bound_, 2.0 * rb);
    }
}

void CellOperator::apply_slice(const double* u, double* out) const
{
    const int d = grid().dim();
    const std::size_t m = grid().node_count();
    const std::size_t nt = taps_.size();
    for (std::size_t j = 0; j < m * d; ++j)
        out[j] = 0.0;
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t t = 0; t < nt; ++t) {
            const std::size_t jp = nb_[j * nt + t];
            accumulate(taps_[t].w, alpha_[j * nt + t], u + jp * d, u + j * d, out + j * d, d);
        }
}

void CellOperator::apply_at(const double* u, std::size_t j, double* out) const
{
    const int d = grid().dim();
    const std::size_t nt = taps_.size();
    for (int a = 0; a < d; ++a)
        out[a] = 0.0;
    for (std::size_t t = 0; t < nt; ++t) {
        const std::size_t jp = nb_[j * nt + t];
        accumulate(taps_[t].w, alpha_[j * nt + t], u + jp * d, u + j * d, out, d);
    }
}

ProductField CellOperator::apply(const ProductField& U) const
{
    if (U.cell != grid())
        throw invalid_argument("cell operator: field lives on a different cell grid");
    ProductField r = ProductField::zeros(U.macro, U.cell);
    const auto n = static_cast<long long>(U.macro.node_count());
    const std::size_t slice = grid().node_count() * grid().dim();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i)
        apply_slice(U.values.data() + i * slice, r.values.data() + i * slice);
    return r;
}

Eigen::MatrixXd CellOperator::dense_slice() const
{
    const int d = grid().dim();
    const std::size_t m = grid().node_count();
    const std::size_t nt = taps_.size();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m * d), static_cast<Eigen::Index>(m * d));
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t t = 0; t < nt; ++t) {
            const std::size_t jp = nb_[j * nt + t];
            const double a = alpha_[j * nt + t];
            for (int p = 0; p < d; ++p)
                for (int q = 0; q < d; ++q) {
                    const double v = a * taps_[t].w(p, q);
                    B(static_cast<Eigen::Index>(j * d + p), static_cast<Eigen::Index>(jp * d + q)) += v;
                    B(static_cast<Eigen::Index>(j * d + p), static_cast<Eigen::Index>(j * d + q)) -= v;
                }
        }
    return B;
}

// ---------------------------------------------------------------------------

void cell_average(const Eigen::VectorXd& U, std::size_t nmacro, std::size_t ncell, int dim, Eigen::VectorXd& out)
{
    out.setZero(static_cast<Eigen::Index>(nmacro * dim));
    const double inv = 1.0 / static_cast<double>(ncell);
    for (std::size_t i = 0; i < nmacro; ++i)
        for (int c = 0; c < dim; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < ncell; ++j)
                s += U[static_cast<Eigen::Index>((i * ncell + j) * dim + c)];
            out[static_cast<Eigen::Index>(i * dim + c)] = s * inv;
        }
}

VectorField cell_average(const ProductField& U)
{
    VectorField r{U.macro, {}};
    cell_average(U.values, U.macro.node_count(), U.cell.node_count(), U.dim(), r.values);
    return r;
}

ProductField broadcast(const VectorField& u, const CellGrid& cell)
{
    ProductField r = ProductField::zeros(u.grid, cell);
    const int d = u.dim();
    for (std::size_t i = 0; i < u.grid.node_count(); ++i)
        for (std::size_t j = 0; j < cell.node_count(); ++j)
            for (int c = 0; c < d; ++c)
                r.at(i, j, c) = u.at(i, c);
    return r;
}

TwoScaleOperator::TwoScaleOperator(const MacroGrid& macro, const Microstructure& ms,
                                   std::shared_ptr<const CellCoefficients> coeffs)
    : coeffs_(coeffs), long_(macro, ms.params().lambda, ms.params().gamma), cell_(coeffs, ms.params().delta)
{
    if (ms.dim() != macro.dim() || coeffs->grid.dim() != macro.dim())
        throw invalid_argument("two-scale operator: dimensions of grids and microstructure differ");
}

namespace {

void check_product(const ProductField& U, const MacroGrid& m, const CellGrid& c)
{
    if (U.macro != m || U.cell != c)
        throw invalid_argument("product field lives on different grids than the operator");
}

} // namespace

ProductField TwoScaleOperator::apply_B_L(const ProductField& U) const
{
    check_product(U, macro(), cell());
    const int d = macro().dim();
    const std::size_t n = macro().node_count(), m = cell().node_count();
    Eigen::VectorXd avg, kl;
    cell_average(U.values, n, m, d, avg);
    long_.apply(avg, kl);
    ProductField r = ProductField::zeros(macro(), cell());
    for (std::size_t i = 0; i < n; ++i) {
        const Matrix3& K = long_.moment(i);
        for (std::size_t j = 0; j < m; ++j)
            for (int a = 0; a < d; ++a) {
                double s = kl[static_cast<Eigen::Index>(i * d + a)];
                for (int b = 0; b < d; ++b)
                    s -= K(a, b) * (U.at(i, j, b) - avg[static_cast<Eigen::Index>(i * d + b)]);
                r.at(i, j, a) = s;
            }
    }
    return r;
}

ProductField TwoScaleOperator::apply_B_S(const ProductField& U) const
{
    check_product(U, macro(), cell());
    return cell_.apply(U);
}

void TwoScaleOperator::apply(const Eigen::VectorXd& u, Eigen::VectorXd& out) const
{
    const int d = macro().dim();
    const std::size_t n = macro().node_count(), m = cell().node_count();
    if (u.size() != static_cast<Eigen::Index>(size()))
        throw invalid_argument("two-scale operator: field size does not match the product grid");
    Eigen::VectorXd avg, kl;
    cell_average(u, n, m, d, avg);
    long_.apply(avg, kl);
    out.resize(u.size());
    const std::size_t slice = m * d;
    const auto& rinv = coeffs_->rho_inv;
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double* o = out.data() + i * slice;
        const double* ui = u.data() + i * slice;
        cell_.apply_slice(ui, o);
        const Matrix3& K = long_.moment(i);
        for (std::size_t j = 0; j < m; ++j)
            for (int a = 0; a < d; ++a) {
                double s = kl[static_cast<Eigen::Index>(i * d + a)];
                for (int b = 0; b < d; ++b)
                    s -= K(a, b) * (ui[j * d + b] - avg[static_cast<Eigen::Index>(i * d + b)]);
                o[j * d + a] = rinv[j] * (o[j * d + a] + s);
            }
    }
}

ProductField TwoScaleOperator::apply(const ProductField& U) const
{
    check_product(U, macro(), cell());
    ProductField r{U.macro, U.cell, {}};
    apply(U.values, r.values);
    return r;
}

void TwoScaleOperator::apply_C(const Eigen::VectorXd& r, Eigen::VectorXd& out) const
{
    const int d = macro().dim();
    const std::size_t n = macro().node_count(), m = cell().node_count();
    if (r.size() != static_cast<Eigen::Index>(size()))
        throw invalid_argument("C operator: field size does not match the product grid");
    out.resize(r.size());
    const std::size_t slice = m * d;
    const auto& rinv = coeffs_->rho_inv;
    const double inv = 1.0 / static_cast<double>(m);
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double* o = out.data() + i * slice;
        const double* ri = r.data() + i * slice;
        cell_.apply_slice(ri, o);
        double abar[3] = {0, 0, 0}, qbar[3] = {0, 0, 0};
        for (std::size_t j = 0; j < m; ++j)
            for (int a = 0; a < d; ++a) {
                o[j * d + a] *= rinv[j];
                abar[a] += o[j * d + a];
                qbar[a] += rinv[j] * ri[j * d + a];
            }
        for (int a = 0; a < d; ++a) {
            abar[a] *= inv;
            qbar[a] *= inv;
        }
        const Matrix3& K = long_.moment(i);
        for (std::size_t j = 0; j < m; ++j)
            for (int a = 0; a < d; ++a) {
                double s = o[j * d + a] - abar[a];
                for (int b = 0; b < d; ++b)
                    s -= K(a, b) * (rinv[j] * ri[j * d + b] - qbar[b]);
                o[j * d + a] = s;
            }
    }
}

ProductField TwoScaleOperator::apply_C(const ProductField& r) const
{
    check_product(r, macro(), cell());
    ProductField o{r.macro, r.cell, {}};
    apply_C(r.values, o.values);
    return o;
}

void TwoScaleOperator::apply_Kcal(const Eigen::VectorXd& r, Eigen::VectorXd& out) const
{
    const int d = macro().dim();
    const std::size_t n = macro().node_count(), m = cell().node_count();
    if (r.size() != static_cast<Eigen::Index>(size()))
        throw invalid_argument("memory coupling operator: field size does not match the product grid");
    out.setZero(static_cast<Eigen::Index>(n * d));
    const std::size_t slice = m * d;
    const auto& rinv = coeffs_->rho_inv;
    const double inv = 1.0 / static_cast<double>(m);
    std::vector<double> tmp(slice);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ri = r.data() + i * slice;
        cell_.apply_slice(ri, tmp.data());
        double abar[3] = {0, 0, 0}, qbar[3] = {0, 0, 0};
        for (std::size_t j = 0; j < m; ++j)
            for (int a = 0; a < d; ++a) {
                abar[a] += rinv[j] * tmp[j * d + a];
                qbar[a] += rinv[j] * ri[j * d + a];
            }
        const Matrix3& K = long_.moment(i);
        for (int a = 0; a < d; ++a) {
            double s = abar[a] * inv;
            for (int b = 0; b < d; ++b)
                s -= K(a, b) * qbar[b] * inv;
            out[static_cast<Eigen::Index>(i * d + a)] = s;
        }
    }
}

VectorField TwoScaleOperator::apply_Kcal(const ProductField& r) const
{
    check_product(r, macro(), cell());
    VectorField o{r.macro, {}};
    apply_Kcal(r.values, o.values);
    return o;
}

Eigen::MatrixXd TwoScaleOperator::C_block(const Matrix3& K) const
{
    const int d = macro().dim();
    const auto m = static_cast<Eigen::Index>(cell().node_count());
    const Eigen::Index sz = m * d;
    const Eigen::MatrixXd Bs = cell_.dense_slice();
    Eigen::VectorXd rinv(sz);
    for (Eigen::Index j = 0; j < m; ++j)
        for (int c = 0; c < d; ++c)
            rinv[j * d + c] = coeffs_->rho_inv[static_cast<std::size_t>(j)];
    // (I - P) with P the cell average acting per component
    Eigen::MatrixXd IP = Eigen::MatrixXd::Identity(sz, sz);
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index jp = 0; jp < m; ++jp)
            for (int c = 0; c < d; ++c)
                IP(j * d + c, jp * d + c) -= 1.0 / static_cast<double>(m);
    Eigen::MatrixXd Kx = Eigen::MatrixXd::Zero(sz, sz);
    for (Eigen::Index j = 0; j < m; ++j)
        Kx.block(j * d, j * d, d, d) = K.topLeftCorner(d, d);
    return IP * (rinv.asDiagonal() * Bs) - Kx * IP * rinv.asDiagonal();
}

Eigen::MatrixXd TwoScaleOperator::Kcal_block(const Matrix3& K) const
{
    const int d = macro().dim();
    const auto m = static_cast<Eigen::Index>(cell().node_count());
    const Eigen::Index sz = m * d;
    const Eigen::MatrixXd Bs = cell_.dense_slice();
    Eigen::VectorXd rinv(sz);
    for (Eigen::Index j = 0; j < m; ++j)
        for (int c = 0; c < d; ++c)
            rinv[j * d + c] = coeffs_->rho_inv[static_cast<std::size_t>(j)];
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, sz);
    for (Eigen::Index j = 0; j < m; ++j)
        for (int c = 0; c < d; ++c)
            A(c, j * d + c) = 1.0 / static_cast<double>(m);
    return A * (rinv.asDiagonal() * Bs) - K.topLeftCorner(d, d) * A * rinv.asDiagonal();
}

SparseMatrix TwoScaleOperator::assemble_stiffness() const
{
    const int d = macro().dim();
    const std::size_t n = macro().node_count(), m = cell().node_count();
    const Eigen::MatrixXd Bs = cell_.dense_slice();
    const double inv = 1.0 / static_cast<double>(m);
    std::vector<Eigen::Triplet<double>> trips;
    auto row = [&](std::size_t i, std::size_t j, int a) { return static_cast<int>((i * m + j) * d + a); };
    for (std::size_t i = 0; i < n; ++i) {
        const Index3 mi = macro().multi_index(i);
        const Matrix3& K = long_.moment(i);
        for (std::size_t j = 0; j < m; ++j)
            for (int a = 0; a < d; ++a) {
                const int r = row(i, j, a);
                // B_S
                for (std::size_t jp = 0; jp < m; ++jp)
                    for (int b = 0; b < d; ++b) {
                        const double v =
                            Bs(static_cast<Eigen::Index>(j * d + a), static_cast<Eigen::Index>(jp * d + b));
                        if (v != 0.0)
                            trips.emplace_back(r, row(i, jp, b), v);
                    }
                // K_L <u> + K <u>(i) - K u(i,j)
                for (const auto& t : long_.taps()) {
                    Index3 q{mi[0] + t.off[0], mi[1] + t.off[1], mi[2] + t.off[2]};
                    if (!macro().contains(q))
                        continue;
                    const std::size_t ip = macro().linear(q);
                    for (int b = 0; b < d; ++b) {
                        const double v = long_.lambda() * t.w(a, b) * inv;
                        if (v == 0.0)
                            continue;
                        for (std::size_t jp = 0; jp < m; ++jp)
                            trips.emplace_back(r, row(ip, jp, b), v);
                    }
                }
                for (int b = 0; b < d; ++b) {
                    if (K(a, b) == 0.0)
                        continue;
                    trips.emplace_back(r, row(i, j, b), -K(a, b));
                }
            }
    }
    return from_triplets(static_cast<Eigen::Index>(size()), trips);
}

SparseMatrix TwoScaleOperator::assemble() const
{
    const int d = macro().dim();
    const std::size_t n = macro().node_count(), m = cell().node_count();
    Eigen::VectorXd rinv(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (int c = 0; c < d; ++c)
                rinv[static_cast<Eigen::Index>((i * m + j) * d + c)] = coeffs_->rho_inv[j];
    SparseMatrix s = rinv.asDiagonal() * assemble_stiffness();
    s.makeCompressed();
    return s;
}

SparseMatrix TwoScaleOperator::assemble_C() const
{
    const int d = macro().dim();
    const std::size_t n = macro().node_count(), m = cell().node_count();
    const auto sz = static_cast<Eigen::Index>(m * d);
    std::vector<std::pair<Matrix3, Eigen::MatrixXd>> cache;
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t i = 0; i < n; ++i) {
        const Matrix3& K = long_.moment(i);
        const Eigen::MatrixXd* blk = nullptr;
        for (const auto& [k, b] : cache)
            if (k == K)
                blk = &b;
        if (!blk) {
            cache.emplace_back(K, C_block(K));
            blk = &cache.back().second;
        }
        const auto base = static_cast<int>(i * m * d);
        for (Eigen::Index p = 0; p < sz; ++p)
            for (Eigen::Index q = 0; q < sz; ++q)
                if ((*blk)(p, q) != 0.0)
                    trips.emplace_back(base + static_cast<int>(p), base + static_cast<int>(q), (*blk)(p, q));
    }
    return from_triplets(static_cast<Eigen::Index>(size()), trips);
}

double TwoScaleOperator::norm_bound() const
{
    double kmax = 0.0;
    const int d = macro().dim();
    for (std::size_t i = 0; i < macro().node_count(); ++i)
        kmax = std::max(kmax, block_inf_norm(long_.moment(i), d));
    return coeffs_->max_rho_inv() * (long_.row_bound() + 2.0 * kmax + cell_.row_bound());
}

double TwoScaleOperator::norm_bound_C() const
{
    double kmax = 0.0;
    const int d = macro().dim();
    for (std::size_t i = 0; i < macro().node_count(); ++i)
        kmax = std::max(kmax, block_inf_norm(long_.moment(i), d));
    return 2.0 * coeffs_->max_rho_inv() * (cell_.row_bound() + 2.0 * kmax);
}

OperatorHandle TwoScaleOperator::handle(std::size_t cap) const
{
    OperatorHandle h;
    h.size = static_cast<Eigen::Index>(size());
    h.apply = [this](const Eigen::VectorXd& x, Eigen::VectorXd& y) { apply(x, y); };
    h.label = "rho^-1 (B_L + B_S)";
    h.norm_bound = norm_bound();
    if (size() <= cap)
        h.matrix = assemble();
    return h;
}

OperatorHandle TwoScaleOperator::handle_C(std::size_t cap) const
{
    OperatorHandle h;
    h.size = static_cast<Eigen::Index>(size());
    h.apply = [this](const Eigen::VectorXd& x, Eigen::VectorXd& y) { apply_C(x, y); };
    h.label = "C";
    h.norm_bound = norm_bound_C();
    if (size() <= cap)
        h.matrix = assemble_C();
    return h;
}

// ---------------------------------------------------------------------------

Matrix3 matrix_K(int dim, double lambda, double gamma, double spacing)
{
    Matrix3 k = Matrix3::Zero();
    for (const auto& t : make_taps(dim, spacing, gamma, true))
        k += t.w;
    return lambda * k;
}

double sphere_area(int dim)
{
    switch (dim) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi;
    }
    throw invalid_argument("dimension must be 1, 2 or 3");
}

Matrix3 matrix_K_exact(int dim, double lambda, double gamma)
{
    Matrix3 k = Matrix3::Zero();
    const double v = lambda * sphere_area(dim) * gamma * gamma / (2.0 * dim);
    for (int a = 0; a < dim; ++a)
        k(a, a) = v;
    return k;
}

double BoundReadings::max() const { return std::max({isotropic, radial, wide}); }

namespace {

BoundReadings readings(double scale, double r, int dim)
{
    BoundReadings b;
    b.isotropic = scale * 2.0 * std::numbers::pi * r * r / 3.0;
    b.radial = scale * sphere_area(dim) * r * r / 2.0;
    b.wide = scale * 2.0 * std::numbers::pi * r * r;
    return b;
}

} // namespace

BoundReadings bound_M_S(const CellCoefficients& c, double delta, int dim)
{
    return readings(c.alpha_bar(), delta, dim);
}

BoundReadings bound_M_L(const CellCoefficients& c, double lambda, double gamma, int dim)
{
    return readings(c.max_rho_inv() * lambda, gamma, dim);
}

double op_norm_estimate(const OperatorHandle& op, double p, int max_iter, double tol)
{
    if (!op.matrix)
        throw unsupported_error("norm estimate for '" + op.label + "' needs an assembled matrix");
    const SparseMatrix& A = *op.matrix;
    if (p == 1.0) {
        Eigen::VectorXd col = Eigen::VectorXd::Zero(A.cols());
        for (Eigen::Index r = 0; r < A.outerSize(); ++r)
            for (SparseMatrix::InnerIterator it(A, r); it; ++it)
                col[it.col()] += std::abs(it.value());
        return col.size() ? col.maxCoeff() : 0.0;
    }
    if (std::isinf(p)) {
        double best = 0.0;
        for (Eigen::Index r = 0; r < A.outerSize(); ++r) {
            double s = 0.0;
            for (SparseMatrix::InnerIterator it(A, r); it; ++it)
                s += std::abs(it.value());
            best = std::max(best, s);
        }
        return best;
    }
    if (p != 2.0)
        throw invalid_argument(fmt::format("operator norm estimate supports p = 1, 2, inf; got {}", p));
    std::mt19937_64 rng(20240917ULL);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::VectorXd x(A.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x[i] = dist(rng);
    x.normalize();
    double sigma = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd y = A * x;
        const double s = y.norm();
        Eigen::VectorXd z = A.transpose() * y;
        const double zn = z.norm();
        if (zn == 0.0)
            return 0.0;
        x = z / zn;
        if (std::abs(s - sigma) <= tol * s) {
            sigma = s;
            break;
        }
        sigma = s;
    }
    return (A * x).norm();
}

} // namespace peridyn
