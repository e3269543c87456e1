#include "peridyn/analysis.hpp"

#include <chrono>
#include <cmath>
#include <future>

#include <fmt/format.h>

#include "peridyn/error.hpp"
#include "peridyn/homogenization.hpp"

namespace peridyn {

namespace {

double lp_flat(const Eigen::VectorXd& v, std::size_t nodes, int d, double weight, double p)
{
    if (!(p >= 1.0))
        throw invalid_argument(fmt::format("L^p norm needs p >= 1, got {}", p));
    if (std::isinf(p)) {
        double m = 0.0;
        for (std::size_t i = 0; i < nodes; ++i)
            m = std::max(m, v.segment(static_cast<Eigen::Index>(i * d), d).norm());
        return m;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < nodes; ++i)
        s += std::pow(v.segment(static_cast<Eigen::Index>(i * d), d).norm(), p);
    return std::pow(weight * s, 1.0 / p);
}

} // namespace

double lp_norm(const VectorField& f, double p)
{
    return lp_flat(f.values, f.grid.node_count(), f.dim(), f.grid.weight(), p);
}

double lp_norm(const ProductField& f, double p)
{
    return lp_flat(f.values, f.macro.node_count() * f.cell.node_count(), f.dim(), f.macro.weight() * f.cell.weight(),
                   p);
}

VectorTrajectory error_field(const VectorTrajectory& fine, const ProductTrajectory& U, int n)
{
    if (fine.frames.size() != U.frames.size())
        throw invalid_argument("error field: trajectories have different frame counts");
    for (std::size_t k = 0; k < fine.times.size(); ++k)
        if (std::abs(fine.times[k] - U.times[k]) > 1e-12 * std::max(1.0, std::abs(U.times[k])))
            throw invalid_argument("error field: trajectories have different time grids");
    VectorTrajectory e;
    if (fine.frames.empty())
        return e;
    const ScaleMap map(U.frames.front().macro, U.frames.front().cell, n);
    if (fine.frames.front().grid != map.macro())
        throw invalid_argument("error field: fine and two-scale macro grids differ");
    e.times = fine.times;
    for (std::size_t k = 0; k < fine.frames.size(); ++k) {
        VectorField r = rescale(U.frames[k], map);
        r.values = fine.frames[k].values - r.values;
        e.frames.push_back(std::move(r));
    }
    return e;
}

ForcingTerms forcing_terms(const ProductTrajectory& U, const Microstructure& ms,
                           std::shared_ptr<const CellCoefficients> coeffs, int n)
{
    ForcingTerms out;
    if (U.frames.empty())
        return out;
    const MacroGrid& macro = U.frames.front().macro;
    const CellGrid& cell = U.frames.front().cell;
    const auto& P = ms.params();
    const LongRangeOperator L(macro, P.lambda, P.gamma);
    const ShortRangeOperator S(macro, coeffs, P.delta, n);
    const CellOperator B(coeffs, P.delta);
    const ScaleMap& map = S.scale();
    const int k = map.stride();
    const int d = macro.dim();
    const std::size_t N = macro.node_count(), M = cell.node_count();

    for (VectorTrajectory* t : {&out.d_S1, &out.d_S2, &out.d_L, &out.d_Q, &out.total})
        t->times = U.times;

    for (const ProductField& F : U.frames) {
        if (F.macro != macro || F.cell != cell)
            throw invalid_argument("forcing terms: frames use different grids");
        Eigen::VectorXd avg;
        cell_average(F.values, N, M, d, avg);
        VectorField s1 = VectorField::zeros(macro), s2 = s1, dl = s1, dq = s1, tot = s1;
        const double* u = F.values.data();
        const std::size_t slice = M * d;
#pragma omp parallel for schedule(static)
        for (long long ii = 0; ii < static_cast<long long>(N); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            const Index3 mi = macro.multi_index(i);
            const std::size_t ji = map.cell_of(i);
            const Index3 cj = cell.multi_index(ji);
            double coarse[3] = {0, 0, 0}, bs[3] = {0, 0, 0};
            for (const auto& t : L.taps()) {
                const Index3 q{mi[0] + t.off[0], mi[1] + t.off[1], mi[2] + t.off[2]};
                if (!macro.contains(q))
                    continue;
                const std::size_t ip = macro.linear(q);
                const std::size_t jp = map.cell_of(ip);
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b)
                        dl.at(i, a) += L.lambda() * t.w(a, b) *
                                       (u[ip * slice + jp * d + b] - avg[static_cast<Eigen::Index>(ip * d + b)]);
            }
            for (const auto& t : S.taps()) {
                const std::size_t jc =
                    cell.wrapped({cj[0] + t.off[0] * k, cj[1] + t.off[1] * k, cj[2] + t.off[2] * k});
                const double al = coeffs->alpha(ji, jc);
                const Index3 q{mi[0] + t.off[0], mi[1] + t.off[1], mi[2] + t.off[2]};
                const bool inside = macro.contains(q);
                const std::size_t ip = inside ? macro.linear(q) : 0;
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) {
                        const double w = al * t.w(a, b);
                        const double local = u[i * slice + jc * d + b] - u[i * slice + ji * d + b];
                        coarse[a] += w * local;
                        if (inside)
                            s1.at(i, a) += w * (u[ip * slice + jc * d + b] - u[i * slice + jc * d + b]);
                        else
                            s2.at(i, a) -= w * local;
                    }
            }
            // k = 1: both sums run over the same lattice, d_Q is zero by definition
            if (k > 1)
                B.apply_at(u + i * slice, ji, bs);
            const double rinv = coeffs->rho_inv[ji];
            for (int a = 0; a < d; ++a) {
                dq.at(i, a) = k > 1 ? coarse[a] - bs[a] : 0.0;
                tot.at(i, a) = rinv * (s1.at(i, a) + s2.at(i, a) + dl.at(i, a) + dq.at(i, a));
            }
        }
        out.d_S1.frames.push_back(std::move(s1));
        out.d_S2.frames.push_back(std::move(s2));
        out.d_L.frames.push_back(std::move(dl));
        out.d_Q.frames.push_back(std::move(dq));
        out.total.frames.push_back(std::move(tot));
    }
    return out;
}

namespace {

double uniform_step(const std::vector<double>& times)
{
    if (times.size() < 2)
        return 0.0;
    const double dt = times[1] - times[0];
    for (std::size_t k = 1; k < times.size(); ++k)
        if (std::abs(times[k] - times[k - 1] - dt) > 1e-9 * dt)
            throw invalid_argument("trajectory times must be uniformly spaced");
    if (std::abs(times[0]) > 1e-12)
        throw invalid_argument("trajectory must start at t = 0");
    return dt;
}

} // namespace

VectorTrajectory error_from_forcing(const VectorTrajectory& d, const OperatorHandle& A, const SeriesOptions& opt_in)
{
    VectorTrajectory e;
    if (d.frames.empty())
        return e;
    if (!A.matrix)
        throw unsupported_error("error reconstruction needs the assembled fine operator");
    const double dt = uniform_step(d.times);
    SeriesOptions opt = opt_in;
    opt.duhamel_intervals = opt.step_intervals;
    e.times = d.times;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(A.size), v = u;
    e.frames.push_back({d.frames[0].grid, u});
    for (std::size_t k = 0; k + 1 < d.frames.size(); ++k) {
        const Eigen::VectorXd& a = d.frames[k].values;
        const Eigen::VectorXd& b = d.frames[k + 1].values;
        Forcing g = [&a, &b, dt](double s, Eigen::VectorXd& out) { out = a + (s / dt) * (b - a); };
        State st = propagate_series(A, u, v, g, dt, opt);
        u = std::move(st.u);
        v = std::move(st.v);
        e.frames.push_back({d.frames[k + 1].grid, u});
    }
    return e;
}

std::vector<double> error_bound(const std::vector<double>& times, const std::vector<double>& g, double M)
{
    if (times.size() != g.size())
        throw invalid_argument("error bound: sample count mismatch");
    if (!(M >= 0.0))
        throw invalid_argument("error bound: M must be nonnegative");
    const double sq = std::sqrt(M);
    auto kern = [sq](double s) { return sq > 0.0 ? std::sinh(sq * s) / sq : s; };
    std::vector<double> B(times.size(), 0.0);
    for (std::size_t k = 1; k < times.size(); ++k) {
        double s = 0.0;
        for (std::size_t m = 0; m < k; ++m) {
            const double h = times[m + 1] - times[m];
            s += 0.5 * h * (kern(times[k] - times[m]) * g[m] + kern(times[k] - times[m + 1]) * g[m + 1]);
        }
        B[k] = s;
    }
    return B;
}

std::vector<double> error_bound(const VectorTrajectory& d, double M, double p)
{
    std::vector<double> g;
    for (const auto& f : d.frames)
        g.push_back(lp_norm(f, p));
    return error_bound(d.times, g, M);
}

double twoscale_pairing(const VectorField& v, const VectorExpression& psi, const CellGrid& cell, int n)
{
    const ScaleMap map(v.grid, cell, n);
    if (psi.dim() != v.dim())
        throw invalid_argument("pairing: test function has the wrong component count");
    EvalPoint p;
    double s = 0.0;
    for (std::size_t i = 0; i < v.grid.node_count(); ++i) {
        p.x = v.grid.coord(i);
        p.y = cell.coord(map.cell_of(i));
        for (int c = 0; c < v.dim(); ++c)
            s += v.at(i, c) * psi.component(c).eval(p);
    }
    return v.grid.weight() * s;
}

double pairing_limit(const ProductField& v, const VectorExpression& psi)
{
    if (psi.dim() != v.dim())
        throw invalid_argument("pairing: test function has the wrong component count");
    EvalPoint p;
    double s = 0.0;
    for (std::size_t i = 0; i < v.macro.node_count(); ++i) {
        p.x = v.macro.coord(i);
        for (std::size_t j = 0; j < v.cell.node_count(); ++j) {
            p.y = v.cell.coord(j);
            for (int c = 0; c < v.dim(); ++c)
                s += v.at(i, j, c) * psi.component(c).eval(p);
        }
    }
    return v.macro.weight() * v.cell.weight() * s;
}

namespace {

double magnitude_p(const VectorExpression& psi, const EvalPoint& p, double pw)
{
    double s = 0.0;
    for (int c = 0; c < psi.dim(); ++c) {
        const double v = psi.component(c).eval(p);
        s += v * v;
    }
    return std::pow(std::sqrt(s), pw);
}

} // namespace

double rescaled_norm_pp(const VectorExpression& psi, const MacroGrid& macro, const CellGrid& cell, int n, double pw)
{
    const ScaleMap map(macro, cell, n);
    EvalPoint p;
    double s = 0.0;
    for (std::size_t i = 0; i < macro.node_count(); ++i) {
        p.x = macro.coord(i);
        p.y = cell.coord(map.cell_of(i));
        s += magnitude_p(psi, p, pw);
    }
    return macro.weight() * s;
}

double product_norm_pp(const VectorExpression& psi, const MacroGrid& macro, const CellGrid& cell, double pw)
{
    EvalPoint p;
    double s = 0.0;
    for (std::size_t i = 0; i < macro.node_count(); ++i) {
        p.x = macro.coord(i);
        for (std::size_t j = 0; j < cell.node_count(); ++j) {
            p.y = cell.coord(j);
            s += magnitude_p(psi, p, pw);
        }
    }
    return macro.weight() * cell.weight() * s;
}

Eigen::VectorXd window_average(const VectorField& f, const Box& V)
{
    const int d = f.dim();
    Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
    std::size_t count = 0;
    for (std::size_t i = 0; i < f.grid.node_count(); ++i) {
        const Point3 x = f.grid.coord(i);
        bool in = true;
        for (int a = 0; a < d; ++a)
            in = in && x[a] >= V.lower[a] - 1e-12 && x[a] <= V.upper[a] + 1e-12;
        if (!in)
            continue;
        s += f.values.segment(static_cast<Eigen::Index>(i * d), d);
        ++count;
    }
    if (count == 0)
        throw invalid_argument("window average: the window contains no grid nodes");
    return s / static_cast<double>(count);
}

double energy(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const OperatorHandle& K, const Eigen::VectorXd& rho,
              double weight)
{
    const Eigen::VectorXd ku = K(u);
    return 0.5 * weight * (rho.cwiseProduct(v).dot(v) - u.dot(ku));
}

std::size_t frame_at(const std::vector<double>& times, double t)
{
    for (std::size_t k = 0; k < times.size(); ++k)
        if (std::abs(times[k] - t) <= 1e-9 * std::max(1.0, std::abs(t)))
            return k;
    throw invalid_argument(fmt::format("no stored frame at t = {}", t));
}

ConvergenceReport convergence_study(const ProblemSpec& base, const std::vector<int>& ns, double p, const Box& window,
                                    const std::vector<double>& sample_times)
{
    if (!(p > 1.5))
        throw invalid_argument(fmt::format("convergence study needs p > 3/2, got {}", p));
    if (ns.empty())
        throw invalid_argument("convergence study needs at least one eps");
    for (std::size_t k = 1; k < ns.size(); ++k)
        if (ns[k] <= ns[k - 1])
            throw invalid_argument("convergence study: eps values must be strictly decreasing");

    using clock = std::chrono::steady_clock;
    ConvergenceReport rep;
    rep.p = p;
    rep.sample_times = sample_times;
    rep.window = window;

    const auto t0 = clock::now();
    const ProductTrajectory U = solve_twoscale(base);
    rep.twoscale_seconds = std::chrono::duration<double>(clock::now() - t0).count();

    std::vector<std::size_t> sample_frames;
    for (double t : sample_times)
        sample_frames.push_back(frame_at(U.times, t));
    ProductTrajectory Us;
    for (std::size_t k : sample_frames) {
        Us.times.push_back(U.times[k]);
        Us.frames.push_back(U.frames[k]);
    }
    const MacroMicro last = split(U.frames.back());
    const Eigen::VectorXd avg_H = window_average(last.uH, window);
    const auto coeffs = base.coefficients();

    auto run = [&](int n) {
        ConvergenceRow row;
        row.n = n;
        row.eps = 1.0 / n;
        const auto s0 = clock::now();
        try {
            const ProblemSpec spec = base.at_scale(n);
            const VectorTrajectory fine = solve_fine(spec);
            const VectorTrajectory e = error_field(fine, U, n);
            row.error_T = lp_norm(e.frames.back(), p);
            const ForcingTerms ft = forcing_terms(Us, base.micro, coeffs, n);
            for (const auto& f : ft.total.frames)
                row.forcing.push_back(lp_norm(f, p));
            row.window_gap = (window_average(fine.frames.back(), window) - avg_H).norm();
            const ScaleMap map(base.macro, base.cell, n);
            row.corrector_avg = window_average(rescale(last.r, map), window).norm();
            row.ok = true;
        } catch (const std::exception& ex) {
            row.ok = false;
            row.error = ex.what();
        }
        row.seconds = std::chrono::duration<double>(clock::now() - s0).count();
        return row;
    };

    std::vector<std::future<ConvergenceRow>> jobs;
    for (int n : ns)
        jobs.push_back(std::async(std::launch::async, run, n));
    for (auto& j : jobs)
        rep.rows.push_back(j.get());
    return rep;
}

} // namespace peridyn
