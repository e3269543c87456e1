#include "peridyn/propagators.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "peridyn/error.hpp"

namespace peridyn {

int series_terms(double x, double tol, int max_terms)
{
    if (x == 0.0)
        return 1;
    // Tail from index m of sum x^n/(2n)! is below x^m/(2m)! / (1 - q),
    // q = x / ((2m+1)(2m+2)), once q < 1. The odd series is dominated termwise.
    double term = 1.0; // x^m / (2m)!
    for (int m = 1; m <= max_terms + 1; ++m) {
        term *= x / ((2.0 * m - 1.0) * (2.0 * m));
        const double q = x / ((2.0 * m + 1.0) * (2.0 * m + 2.0));
        if (q < 1.0 && term / (1.0 - q) <= tol)
            return m; // terms n = 0..m-1 kept
    }
    throw step_too_large(
        fmt::format("operator series needs more than {} terms for ||L|| t^2 = {}; reduce the step", max_terms, x));
}

void duhamel_rule(double t, int intervals, DuhamelRule rule, std::vector<double>& tau, std::vector<double>& w)
{
    if (intervals < 1)
        throw invalid_argument("Duhamel quadrature needs at least one interval");
    const int n = intervals;
    const double h = t / n;
    tau.resize(static_cast<std::size_t>(n + 1));
    w.assign(static_cast<std::size_t>(n + 1), 0.0);
    for (int i = 0; i <= n; ++i)
        tau[static_cast<std::size_t>(i)] = i * h;
    if (rule == DuhamelRule::trapezoid || n == 1) {
        for (int i = 0; i <= n; ++i)
            w[static_cast<std::size_t>(i)] = (i == 0 || i == n) ? h / 2 : h;
        return;
    }
    // Composite Simpson; an odd interval count ends with a 3/8 panel.
    const int simpson_end = (n % 2 == 0) ? n : n - 3;
    for (int i = 0; i < simpson_end; i += 2) {
        w[static_cast<std::size_t>(i)] += h / 3;
        w[static_cast<std::size_t>(i + 1)] += 4 * h / 3;
        w[static_cast<std::size_t>(i + 2)] += h / 3;
    }
    if (simpson_end != n) {
        const int i = simpson_end;
        w[static_cast<std::size_t>(i)] += 3 * h / 8;
        w[static_cast<std::size_t>(i + 1)] += 9 * h / 8;
        w[static_cast<std::size_t>(i + 2)] += 9 * h / 8;
        w[static_cast<std::size_t>(i + 3)] += 3 * h / 8;
    }
}

namespace {

struct Matvec {
    const OperatorHandle& L;
    void operator()(const Eigen::VectorXd& x, Eigen::VectorXd& y) const
    {
        if (L.matrix)
            y.noalias() = (*L.matrix) * x;
        else
            L.apply(x, y);
    }
};

} // namespace

State propagate_series(const OperatorHandle& L, const Eigen::VectorXd& u0, const Eigen::VectorXd& v0,
                       const Forcing& g, double t, const SeriesOptions& opt)
{
    if (!L.matrix)
        throw unsupported_error("series propagation of '" + L.label + "' needs an assembled operator");
    return propagate_series_matrix_free(L, u0, v0, g, t, opt);
}

State propagate_series_matrix_free(const OperatorHandle& L, const Eigen::VectorXd& u0, const Eigen::VectorXd& v0,
                                   const Forcing& g, double t, const SeriesOptions& opt)
{
    if (u0.size() != L.size || v0.size() != L.size)
        throw invalid_argument("series propagation: state size does not match the operator");
    const double x = L.norm_bound * t * t;
    const int N = series_terms(x, opt.tail_tol, opt.max_terms);
    const Matvec mv{L};
    const Eigen::Index n = L.size;

    // c_k = t^{2k}/(2k)!, s_k = t^{2k+1}/(2k+1)!
    std::vector<double> c(static_cast<std::size_t>(N + 1)), s(static_cast<std::size_t>(N + 1));
    c[0] = 1.0;
    s[0] = t;
    for (int k = 1; k <= N; ++k) {
        c[static_cast<std::size_t>(k)] = s[static_cast<std::size_t>(k - 1)] * t / (2.0 * k);
        s[static_cast<std::size_t>(k)] = c[static_cast<std::size_t>(k)] * t / (2.0 * k + 1.0);
    }

    // Duhamel moments: G_k = sum_q w_q (t - tau_q)^{2k+1}/(2k+1)! g_q, H_k the even analogue.
    std::vector<Eigen::VectorXd> G, H;
    if (g) {
        std::vector<double> tau, w;
        duhamel_rule(t, opt.duhamel_intervals, opt.rule, tau, w);
        G.assign(static_cast<std::size_t>(N), Eigen::VectorXd::Zero(n));
        H.assign(static_cast<std::size_t>(N), Eigen::VectorXd::Zero(n));
        Eigen::VectorXd gq(n);
        for (std::size_t q = 0; q < tau.size(); ++q) {
            gq.setZero();
            g(tau[q], gq);
            const double r = t - tau[q];
            double ce = 1.0, so = r;
            for (int k = 0; k < N; ++k) {
                if (k > 0) {
                    ce = so * r / (2.0 * k);
                    so = ce * r / (2.0 * k + 1.0);
                }
                G[static_cast<std::size_t>(k)].noalias() += (w[q] * so) * gq;
                H[static_cast<std::size_t>(k)].noalias() += (w[q] * ce) * gq;
            }
        }
    }

    // u = sum_{k<N} L^k (c_k u0 + s_k v0 + G_k)
    // v = sum_{k<N} L^k (s_{k-1} u0 + c_k v0 + H_k), s_{-1} = 0; the u0 part
    // of v runs one power further (k = N) to match L * (odd series).
    Eigen::VectorXd au = Eigen::VectorXd::Zero(n), av = Eigen::VectorXd::Zero(n), tmp(n);
    av = s[static_cast<std::size_t>(N - 1)] * u0;
    for (int k = N - 1; k >= 0; --k) {
        const auto ku = static_cast<std::size_t>(k);
        if (k < N - 1) {
            mv(au, tmp);
            au = tmp;
        }
        au += c[ku] * u0 + s[ku] * v0;
        mv(av, tmp);
        av = tmp;
        av += c[ku] * v0;
        if (k > 0)
            av += s[ku - 1] * u0;
        if (g) {
            au += G[ku];
            av += H[ku];
        }
    }
    return {au, av};
}

std::size_t step_count(double dt, double T)
{
    if (!(dt > 0.0))
        throw invalid_argument("time step must be positive");
    if (!(T >= 0.0))
        throw invalid_argument("final time must be nonnegative");
    const double r = T / dt;
    const double n = std::round(r);
    if (std::abs(r - n) > 1e-9 * std::max(1.0, n))
        throw invalid_argument(fmt::format("final time {} is not a whole number of steps of {}", T, dt));
    return static_cast<std::size_t>(n);
}

StateTrajectory propagate_series_steps(const OperatorHandle& L, const Eigen::VectorXd& u0,
                                       const Eigen::VectorXd& v0, const Forcing& g, double dt, double T,
                                       int stride, SeriesOptions opt)
{
    if (stride < 1)
        throw invalid_argument("stride must be positive");
    const std::size_t steps = step_count(dt, T);
    StateTrajectory tr;
    tr.times.push_back(0.0);
    tr.u.push_back(u0);
    tr.v.push_back(v0);
    State st{u0, v0};
    opt.duhamel_intervals = opt.step_intervals;
    for (std::size_t k = 0; k < steps; ++k) {
        const double t0 = static_cast<double>(k) * dt;
        Forcing gs;
        if (g)
            gs = [&g, t0](double s, Eigen::VectorXd& out) { g(t0 + s, out); };
        st = propagate_series(L, st.u, st.v, gs, dt, opt);
        if ((k + 1) % static_cast<std::size_t>(stride) == 0 || k + 1 == steps) {
            tr.times.push_back(static_cast<double>(k + 1) * dt);
            tr.u.push_back(st.u);
            tr.v.push_back(st.v);
        }
    }
    return tr;
}

StateTrajectory march_verlet(const Acceleration& accel, const Eigen::VectorXd& u0, const Eigen::VectorXd& v0,
                             double dt, double T, int stride)
{
    if (stride < 1)
        throw invalid_argument("stride must be positive");
    const std::size_t steps = step_count(dt, T);
    StateTrajectory tr;
    tr.times.push_back(0.0);
    tr.u.push_back(u0);
    tr.v.push_back(v0);
    Eigen::VectorXd u = u0, v = v0, a(u0.size()), a_next(u0.size());
    accel(u, 0.0, 0, a);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t1 = static_cast<double>(k + 1) * dt;
        v += (0.5 * dt) * a;
        u += dt * v;
        accel(u, t1, k + 1, a_next);
        v += (0.5 * dt) * a_next;
        std::swap(a, a_next);
        if ((k + 1) % static_cast<std::size_t>(stride) == 0 || k + 1 == steps) {
            tr.times.push_back(t1);
            tr.u.push_back(u);
            tr.v.push_back(v);
        }
    }
    return tr;
}

double verlet_budget(double norm)
{
    if (norm <= 0.0)
        return std::numeric_limits<double>::infinity();
    return 0.5 * 2.0 / std::sqrt(norm);
}

StateTrajectory propagate_verlet(const OperatorHandle& L, const Eigen::VectorXd& u0, const Eigen::VectorXd& v0,
                                 const Forcing& g, double dt, double T, int stride)
{
    if (u0.size() != L.size || v0.size() != L.size)
        throw invalid_argument("verlet: state size does not match the operator");
    const double budget = verlet_budget(L.norm_bound);
    if (!(dt <= budget))
        throw invalid_argument(
            fmt::format("time step {} exceeds the stability budget {} for '{}'", dt, budget, L.label));
    const Matvec mv{L};
    Eigen::VectorXd gb(L.size);
    Acceleration acc = [&](const Eigen::VectorXd& u, double t, std::size_t, Eigen::VectorXd& a) {
        mv(u, a);
        if (g) {
            gb.setZero();
            g(t, gb);
            a += gb;
        }
    };
    return march_verlet(acc, u0, v0, dt, T, stride);
}

} // namespace peridyn
