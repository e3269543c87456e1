#include "peridyn/homogenization.hpp"

#include <fmt/format.h>

#include "peridyn/error.hpp"

namespace peridyn {

MacroMicro split(const ProductField& U)
{
    MacroMicro s{cell_average(U), U};
    const int d = U.dim();
    for (std::size_t i = 0; i < U.macro.node_count(); ++i)
        for (std::size_t j = 0; j < U.cell.node_count(); ++j)
            for (int c = 0; c < d; ++c)
                s.r.at(i, j, c) -= s.uH.at(i, c);
    return s;
}

ProductField reassemble(const MacroMicro& s)
{
    ProductField U = s.r;
    const int d = U.dim();
    for (std::size_t i = 0; i < U.macro.node_count(); ++i)
        for (std::size_t j = 0; j < U.cell.node_count(); ++j)
            for (int c = 0; c < d; ++c)
                U.at(i, j, c) += s.uH.at(i, c);
    return U;
}

ProductTrajectory CoupledTrajectory::reconstruct() const
{
    ProductTrajectory tr;
    tr.times = times;
    for (std::size_t k = 0; k < uH.size(); ++k)
        tr.frames.push_back(reassemble({uH[k], r[k]}));
    for (std::size_t k = 0; k < vH.size(); ++k)
        tr.rates.push_back(reassemble({vH[k], vr[k]}));
    return tr;
}

namespace {

// rho^{-1} b split into its cell average and fluctuation.
struct ForceSplit {
    const ProblemSpec& spec;
    const CellCoefficients& c;

    void operator()(double t, Eigen::VectorXd& avg, Eigen::VectorXd& fluct) const
    {
        const int d = spec.macro.dim();
        const std::size_t n = spec.macro.node_count(), m = spec.cell.node_count();
        ProductField b = sample_product(spec.b, spec.macro, spec.cell, t);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                for (int a = 0; a < d; ++a)
                    b.at(i, j, a) *= c.rho_inv[j];
        cell_average(b.values, n, m, d, avg);
        fluct = b.values;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                for (int a = 0; a < d; ++a)
                    fluct[b.index(i, j, a)] -= avg[static_cast<Eigen::Index>(i * d + a)];
    }
};

std::vector<double> fluctuation_of_rho_inv(const CellCoefficients& c)
{
    const double mean = c.mean_rho_inv();
    std::vector<double> phi(c.rho_inv.size());
    for (std::size_t j = 0; j < phi.size(); ++j)
        phi[j] = c.rho_inv[j] - mean;
    return phi;
}

void check_budget(double dt, double norm, const char* what)
{
    const double budget = verlet_budget(norm);
    if (!(dt <= budget))
        throw invalid_argument(fmt::format("time step {} exceeds the stability budget {} of the {}", dt, budget, what));
}

} // namespace

CoupledTrajectory solve_coupled(const ProblemSpec& spec)
{
    auto coeffs = spec.coefficients();
    TwoScaleOperator op(spec.macro, spec.micro, coeffs);
    // The stacked system is a linear change of variables of the two-scale one.
    check_budget(spec.dt, op.norm_bound(), "coupled macro/corrector system");

    const int d = spec.macro.dim();
    const std::size_t n = spec.macro.node_count(), m = spec.cell.node_count();
    const auto nh = static_cast<Eigen::Index>(n * d);
    const auto nr = static_cast<Eigen::Index>(n * m * d);
    const double mean = coeffs->mean_rho_inv();
    const std::vector<double> phi = fluctuation_of_rho_inv(*coeffs);
    const bool forced = !spec.b.is_zero();
    const ForceSplit fs{spec, *coeffs};

    auto pack = [&](const ProductField& U) {
        const MacroMicro s = split(U);
        Eigen::VectorXd z(nh + nr);
        z << s.uH.values, s.r.values;
        return z;
    };
    const Eigen::VectorXd z0 = pack(sample_product(spec.u0, spec.macro, spec.cell, 0.0));
    const Eigen::VectorXd w0 = pack(sample_product(spec.v0, spec.macro, spec.cell, 0.0));

    Eigen::VectorXd kl, kr, cr, bavg, bfl;
    Acceleration acc = [&](const Eigen::VectorXd& z, double t, std::size_t, Eigen::VectorXd& a) {
        const Eigen::VectorXd uh = z.head(nh);
        const Eigen::VectorXd r = z.tail(nr);
        op.long_range().apply(uh, kl);
        op.apply_Kcal(r, kr);
        op.apply_C(r, cr);
        a.resize(nh + nr);
        a.head(nh) = mean * kl + kr;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                for (int c = 0; c < d; ++c) {
                    const auto k = static_cast<Eigen::Index>((i * m + j) * d + c);
                    a[nh + k] = phi[j] * kl[static_cast<Eigen::Index>(i * d + c)] + cr[k];
                }
        if (forced) {
            fs(t, bavg, bfl);
            a.head(nh) += bavg;
            a.tail(nr) += bfl;
        }
    };
    const StateTrajectory st = march_verlet(acc, z0, w0, spec.dt, spec.T, spec.stride);

    CoupledTrajectory tr;
    tr.times = st.times;
    for (std::size_t k = 0; k < st.u.size(); ++k) {
        tr.uH.push_back({spec.macro, st.u[k].head(nh)});
        tr.vH.push_back({spec.macro, st.v[k].head(nh)});
        tr.r.push_back({spec.macro, spec.cell, st.u[k].tail(nr)});
        tr.vr.push_back({spec.macro, spec.cell, st.v[k].tail(nr)});
    }
    return tr;
}

// ---------------------------------------------------------------------------

MemoryKernel::MemoryKernel(const TwoScaleOperator& op, double dt, std::size_t steps, const SeriesOptions& opt,
                           std::size_t cap)
    : d_(op.macro().dim()), nmacro_(op.macro().node_count()), dt_(dt), steps_(steps),
      mean_rho_inv_(op.coefficients().mean_rho_inv())
{
    const std::size_t m = op.cell().node_count();
    const auto sz = static_cast<Eigen::Index>(m * d_);
    if (static_cast<std::size_t>(sz) > cap)
        throw unsupported_error("memory kernel: the cell block of C exceeds the assembly cap");
    const std::vector<double> phi = fluctuation_of_rho_inv(op.coefficients());

    std::vector<Matrix3> keys;
    group_of_.resize(nmacro_);
    for (std::size_t i = 0; i < nmacro_; ++i) {
        const Matrix3& K = op.long_range().moment(i);
        std::size_t g = 0;
        while (g < keys.size() && keys[g] != K)
            ++g;
        if (g == keys.size())
            keys.push_back(K);
        group_of_[i] = g;
    }

    table_.resize(keys.size());
    for (std::size_t g = 0; g < keys.size(); ++g) {
        const Eigen::MatrixXd C = op.C_block(keys[g]);
        const Eigen::MatrixXd Kc = op.Kcal_block(keys[g]);
        OperatorHandle h;
        h.size = sz;
        h.matrix = C.sparseView();
        h.apply = [&h](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = (*h.matrix) * x; };
        h.label = "C cell block";
        h.norm_bound = C.cwiseAbs().rowwise().sum().maxCoeff();

        auto& tab = table_[g];
        tab.assign(steps + 1, Eigen::MatrixXd::Zero(d_, d_));
        for (int c = 0; c < d_; ++c) {
            Eigen::VectorXd X = Eigen::VectorXd::Zero(sz), V(sz);
            for (std::size_t j = 0; j < m; ++j)
                for (int a = 0; a < d_; ++a)
                    V[static_cast<Eigen::Index>(j * d_ + a)] = a == c ? phi[j] : 0.0;
            for (std::size_t k = 1; k <= steps; ++k) {
                State s = propagate_series(h, X, V, {}, dt, opt);
                X = std::move(s.u);
                V = std::move(s.v);
                tab[k].col(c) = Kc * X;
            }
        }
    }
}

Eigen::Ref<const Eigen::MatrixXd> MemoryKernel::gamma(std::size_t i, std::size_t m) const
{
    return table_[group_of_[i]][m];
}

void MemoryKernel::convolve(const std::vector<Eigen::VectorXd>& f, std::size_t n, Eigen::VectorXd& out) const
{
    if (n > steps_)
        throw invalid_argument(fmt::format("memory history overflow: step {} beyond the tabulated {}", n, steps_));
    if (f.size() < n)
        throw invalid_argument("memory history is shorter than the requested step");
    out.setZero(static_cast<Eigen::Index>(nmacro_ * d_));
    if (n == 0)
        return;
    for (std::size_t i = 0; i < nmacro_; ++i) {
        const auto& tab = table_[group_of_[i]];
        Eigen::VectorXd s = Eigen::VectorXd::Zero(d_);
        for (std::size_t k = 0; k <= n && k < f.size(); ++k) {
            const double w = (k == 0 || k == n) ? 0.5 : 1.0;
            s.noalias() += w * tab[n - k] * f[k].segment(static_cast<Eigen::Index>(i * d_), d_);
        }
        out.segment(static_cast<Eigen::Index>(i * d_), d_) = dt_ * s;
    }
}

VectorField constitutive_force(const TwoScaleOperator& op, const MemoryKernel& kernel,
                               const std::vector<VectorField>& uH_history)
{
    if (uH_history.empty())
        throw invalid_argument("constitutive force needs a nonempty u^H history");
    std::vector<Eigen::VectorXd> f(uH_history.size());
    for (std::size_t k = 0; k < uH_history.size(); ++k)
        op.long_range().apply(uH_history[k].values, f[k]);
    const std::size_t n = uH_history.size() - 1;
    Eigen::VectorXd mem;
    kernel.convolve(f, n, mem);
    return {uH_history.back().grid, f[n] + mem / kernel.mean_rho_inv()};
}

MemoryTrajectory solve_memory(const ProblemSpec& spec)
{
    auto coeffs = spec.coefficients();
    TwoScaleOperator op(spec.macro, spec.micro, coeffs);
    const std::size_t steps = step_count(spec.dt, spec.T);
    const int d = spec.macro.dim();
    const std::size_t n = spec.macro.node_count();
    const auto nh = static_cast<Eigen::Index>(n * d);
    const double mean = coeffs->mean_rho_inv();
    check_budget(spec.dt, mean * op.long_range().row_bound(), "macro equation");

    const MemoryKernel kernel(op, spec.dt, steps, spec.series, spec.assembly_cap);

    // Kcal w(t_m) on the whole time grid.
    const ProductField u0 = sample_product(spec.u0, spec.macro, spec.cell, 0.0);
    const ProductField v0 = sample_product(spec.v0, spec.macro, spec.cell, 0.0);
    const MacroMicro s0 = split(u0), s1 = split(v0);
    const bool forced = !spec.b.is_zero();
    const ForceSplit fs{spec, *coeffs};
    std::vector<Eigen::VectorXd> kw(steps + 1, Eigen::VectorXd::Zero(nh));
    if (forced || spec.u0.depends_on_y() || spec.v0.depends_on_y()) {
        const OperatorHandle C = op.handle_C(spec.assembly_cap);
        Forcing g;
        if (forced)
            g = [&fs](double t, Eigen::VectorXd& out) {
                Eigen::VectorXd avg;
                fs(t, avg, out);
            };
        SeriesOptions opt = spec.series;
        opt.duhamel_intervals = opt.step_intervals;
        Eigen::VectorXd w = s0.r.values, wd = s1.r.values;
        op.apply_Kcal(w, kw[0]);
        for (std::size_t k = 0; k < steps; ++k) {
            const double t0 = static_cast<double>(k) * spec.dt;
            Forcing gs;
            if (g)
                gs = [&g, t0](double s, Eigen::VectorXd& out) { g(t0 + s, out); };
            State st = propagate_series_matrix_free(C, w, wd, gs, spec.dt, opt);
            w = std::move(st.u);
            wd = std::move(st.v);
            op.apply_Kcal(w, kw[k + 1]);
        }
    }

    std::vector<Eigen::VectorXd> hist;
    std::vector<Eigen::VectorXd> mem(steps + 1);
    Eigen::VectorXd bavg, bfl;
    Acceleration acc = [&](const Eigen::VectorXd& u, double t, std::size_t k, Eigen::VectorXd& a) {
        if (k > steps)
            throw invalid_argument("memory solve: history buffer exhausted beyond the final time");
        if (hist.size() != k)
            throw invalid_argument("memory solve: steps must be visited in order");
        Eigen::VectorXd kl;
        op.long_range().apply(u, kl);
        hist.push_back(kl);
        kernel.convolve(hist, k, mem[k]);
        a = mean * kl + mem[k] + kw[k];
        if (forced) {
            fs(t, bavg, bfl);
            a += bavg;
        }
    };
    const StateTrajectory st = march_verlet(acc, s0.uH.values, s1.uH.values, spec.dt, spec.T, spec.stride);

    MemoryTrajectory tr;
    tr.times = st.times;
    for (std::size_t k = 0; k < st.u.size(); ++k) {
        const auto step = static_cast<std::size_t>(std::llround(st.times[k] / spec.dt));
        tr.uH.push_back({spec.macro, st.u[k]});
        tr.vH.push_back({spec.macro, st.v[k]});
        tr.force.push_back({spec.macro, hist[step] + mem[step] / mean});
        tr.w_term.push_back({spec.macro, kw[step]});
    }
    return tr;
}

} // namespace peridyn
