// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "peridyn/analysis.hpp"
#include "peridyn/config.hpp"
#include "peridyn/homogenization.hpp"
#include "peridyn/run.hpp"

using namespace peridyn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using clock_type = std::chrono::steady_clock;

int failures = 0;

void report(int id, const char* name, double limit_s, const std::function<Outcome()>& body)
{
    const auto t0 = clock_type::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(clock_type::now() - t0).count();
    const bool in_time = s < limit_s;
    const bool ok = o.pass && in_time;
    if (!ok)
        ++failures;
    std::cout << fmt::format("{} {:>2} {:<34} {} [{:.2f} s / {:.0f} s{}]", ok ? "PASS" : "FAIL", id, name, o.detail, s,
                             limit_s, in_time ? "" : ", over budget")
              << std::endl;
}

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

std::shared_ptr<const CellCoefficients> coeffs_of(const Microstructure& ms, const CellGrid& c)
{
    return std::make_shared<const CellCoefficients>(ms.coefficients(c));
}

PhaseParams hetero_params(double delta)
{
    PhaseParams p;
    p.C_f = 10;
    p.C_i = 3;
    p.C_m = 1;
    p.rho_f = 2;
    p.rho_m = 1;
    p.delta = delta;
    p.lambda = 1;
    p.gamma = 0.25;
    return p;
}

ProblemSpec problem_1d(const Microstructure& ms, int N, int ncell, const std::string& u0, const std::string& v0,
                       const std::string& b, double T, double dt, int stride)
{
    ProblemSpec s;
    s.micro = ms;
    s.macro = MacroGrid::box(1, {0, 0, 0}, {1, 0, 0}, {N, 1, 1});
    s.cell = CellGrid(1, ncell);
    s.u0 = VectorExpression::parse(u0, 1);
    s.v0 = VectorExpression::parse(v0, 1);
    s.b = VectorExpression::parse(b, 1);
    s.T = T;
    s.dt = dt;
    s.stride = stride;
    return s;
}

std::string join(const std::vector<double>& v, const char* fmtstr = "{:.3e}")
{
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k)
        s += (k ? ", " : "") + fmt::format(fmt::runtime(fmtstr), v[k]);
    return s;
}

bool strictly_decreasing(const std::vector<double>& v)
{
    for (std::size_t k = 1; k < v.size(); ++k)
        if (!(v[k] < v[k - 1]))
            return false;
    return true;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------

Outcome nullity()
{
    double worst = 0.0;
    auto check = [&](const MacroGrid& g, const Microstructure& ms, const CellGrid& c, int n) {
        const auto co = coeffs_of(ms, c);
        const auto& p = ms.params();
        const int d = g.dim();
        Eigen::VectorXd u(static_cast<Eigen::Index>(g.dof()));
        for (Eigen::Index k = 0; k < u.size(); ++k)
            u[k] = 0.3 + 1.7 * static_cast<double>(k % d);
        Eigen::VectorXd out(u.size());
        LongRangeOperator(g, p.lambda, p.gamma).apply(u, out);
        worst = std::max(worst, max_abs(out));
        ShortRangeOperator(g, co, p.delta, n).apply(u, out);
        worst = std::max(worst, max_abs(out));
        FineOperator(g, ms, co, n).apply(u, out);
        worst = std::max(worst, max_abs(out));
        std::vector<double> slice(c.node_count() * d), bs(slice.size());
        for (std::size_t k = 0; k < slice.size(); ++k)
            slice[k] = 0.3 + 1.7 * static_cast<double>(k % d);
        CellOperator(co, p.delta).apply_slice(slice.data(), bs.data());
        for (double v : bs)
            worst = std::max(worst, std::abs(v));
    };
    check(MacroGrid::box(1, {0, 0, 0}, {1, 0, 0}, {64, 1, 1}), Microstructure({1, Shape::ball, 0.25}, hetero_params(0.1)),
          CellGrid(1, 32), 2);
    PhaseParams p3 = hetero_params(0.125);
    p3.gamma = 0.05;
    check(MacroGrid::box(3, {0, 0, 0}, {0.125, 0.125, 0.125}, {8, 8, 8}), Microstructure({3, Shape::ball, 0.25}, p3),
          CellGrid(3, 16), 4);
    return {worst == 0.0, fmt::format("max |op(const)| = {:g} (1D 64 nodes, 3D 8^3 nodes)", worst)};
}

Outcome symmetry_sign()
{
    const Microstructure ms({1, Shape::ball, 0.25}, hetero_params(0.2));
    const MacroGrid g = MacroGrid::box(1, {0, 0, 0}, {1, 0, 0}, {32, 1, 1});
    const FineOperator A(g, ms, coeffs_of(ms, CellGrid(1, 16)), 2);
    const Eigen::MatrixXd K(A.assemble_stiffness());
    const double asym = (K - K.transpose()).cwiseAbs().maxCoeff();
    const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (K + K.transpose())).eigenvalues().maxCoeff();
    return {asym <= 1e-12 && top <= 1e-10, fmt::format("asymmetry {:.2e}, max eigenvalue {:.3e}", asym, top)};
}

Outcome uniform_bound(const RunConfig& std_cfg)
{
    const ProblemSpec& s = std_cfg.problem;
    const auto co = s.coefficients();
    const auto& p = s.micro.params();
    const auto MS = bound_M_S(*co, p.delta, 1);
    const auto ML = bound_M_L(*co, p.lambda, p.gamma, 1);
    const double bound = MS.max() + ML.max();
    std::vector<double> norms;
    for (int n : {2, 4, 8}) {
        const FineOperator A(s.macro, s.micro, co, n);
        norms.push_back(op_norm_estimate(A.handle(), 2));
    }
    bool ok = true;
    for (double v : norms)
        ok = ok && v < bound;
    return {ok, fmt::format("||A^eps||_2 = [{}] < {:.4f} (M_S {:.4f} + M_L {:.4f})", join(norms, "{:.4f}"), bound,
                            MS.max(), ML.max())};
}

Outcome propagator_cross()
{
    const Microstructure ms({1, Shape::ball, 0.25}, hetero_params(0.2));
    ProblemSpec s = problem_1d(ms, 32, 16, "sin(pi*x1)*(1+0.5*cos(2*pi*y1))", "0", "0", 1.0, 1e-3, 1);
    s.n = 2;
    auto gap = [&](double dt) {
        ProblemSpec a = s;
        a.dt = dt;
        a.stride = static_cast<int>(std::lround(0.01 / dt));
        const auto v = solve_fine(a);
        a.integrator = Integrator::series;
        const auto r = solve_fine(a);
        double g = 0;
        for (std::size_t k = 0; k < v.frames.size(); ++k)
            g = std::max(g, max_abs(v.frames[k].values - r.frames[k].values));
        return g;
    };
    const double g1 = gap(1e-3), g2 = gap(5e-4);
    const double ratio = g1 / g2;
    return {g1 <= 1e-4 && ratio >= 3.5 && ratio <= 4.5,
            fmt::format("gap(dt=1e-3) = {:.3e}, gap(dt=5e-4) = {:.3e}, ratio {:.3f}", g1, g2, ratio)};
}

Outcome homogeneous_collapse()
{
    PhaseParams p = hetero_params(0.2);
    p.C_f = p.C_i = p.C_m = 2.0;
    p.rho_f = p.rho_m = 1.5;
    const Microstructure ms({1, Shape::ball, 0.25}, p);
    ProblemSpec s = problem_1d(ms, 64, 32, "sin(pi*x1)", "0", "0", 1.0, 1e-3, 50);
    std::vector<std::pair<std::string, VectorTrajectory>> sols;
    for (int n : {2, 4}) {
        ProblemSpec f = s;
        f.n = n;
        sols.emplace_back(fmt::format("fine(1/{})", n), solve_fine(f));
    }
    sols.emplace_back("twoscale", rescale(solve_twoscale(s), 2));
    sols.emplace_back("coupled", rescale(solve_coupled(s).reconstruct(), 2));
    const MemoryTrajectory M = solve_memory(s);
    sols.emplace_back("memory", VectorTrajectory{M.times, M.uH, {}});
    double worst = 0;
    std::string worst_pair, others;
    double rest = 0;
    for (std::size_t a = 0; a < sols.size(); ++a)
        for (std::size_t b = a + 1; b < sols.size(); ++b) {
            double g = 0;
            for (std::size_t k = 0; k < sols[a].second.frames.size(); ++k)
                g = std::max(g, max_abs(sols[a].second.frames[k].values - sols[b].second.frames[k].values));
            if (g > worst) {
                worst = g;
                worst_pair = sols[a].first + " vs " + sols[b].first;
            }
            if (a >= 2)
                rest = std::max(rest, g);
        }
    return {worst <= 1e-8, fmt::format("worst pair {} = {:.3e}; twoscale/coupled/memory max gap {:.3e}", worst_pair,
                                       worst, rest)};
}

Outcome error_identity_bound()
{
    const Microstructure ms({1, Shape::ball, 0.25}, hetero_params(0.2));
    ProblemSpec s = problem_1d(ms, 32, 16, "sin(pi*x1)*(1+0.5*cos(2*pi*y1))", "0", "0", 1.0, 0.01, 1);
    s.n = 2;
    s.integrator = Integrator::series;
    const auto co = s.coefficients();
    const auto U = solve_twoscale(s);
    const auto e = error_field(solve_fine(s), U, 2);
    const auto d = forcing_terms(U, ms, co, 2);
    const FineOperator A(s.macro, ms, co, 2);
    const auto er = error_from_forcing(d.total, A.handle());
    double gap = 0;
    for (std::size_t k = 0; k < e.frames.size(); ++k)
        gap = std::max(gap, max_abs(e.frames[k].values - er.frames[k].values));
    const auto& p = ms.params();
    const double M = bound_M_S(*co, p.delta, 1).max() + bound_M_L(*co, p.lambda, p.gamma, 1).max();
    const auto B = error_bound(d.total, M, 2.0);
    double worst_ratio = 0;
    bool below = true;
    for (std::size_t k = 0; k < e.frames.size(); ++k) {
        const double en = lp_norm(e.frames[k], 2.0);
        if (en > 1.05 * B[k])
            below = false;
        if (B[k] > 0)
            worst_ratio = std::max(worst_ratio, en / B[k]);
    }
    return {gap <= 1e-6 && below,
            fmt::format("identity gap {:.3e}; max ||e||/bound {:.3f} (M = {:.4f})", gap, worst_ratio, M)};
}

Outcome coupled_memory()
{
    const Microstructure ms({1, Shape::ball, 0.25}, hetero_params(0.2));
    const ProblemSpec s = problem_1d(ms, 16, 16, "sin(pi*x1)*(1+0.5*cos(2*pi*y1))", "0.2*x1*cos(2*pi*y1)",
                                     "x1*(1+sin(2*pi*y1))*cos(t)", 1.0, 1e-3, 10);
    const auto C = solve_coupled(s);
    const auto M = solve_memory(s);
    double gap = 0;
    for (std::size_t k = 0; k < C.uH.size(); ++k)
        gap = std::max(gap, lp_norm(VectorField{s.macro, C.uH[k].values - M.uH[k].values}, 2.0));
    return {gap <= 1e-8 && C.uH.size() == M.uH.size(), fmt::format("max_t ||uH_coupled - uH_memory||_2 = {:.3e}", gap)};
}

Outcome pairing()
{
    const MacroGrid g = MacroGrid::box(1, {0, 0, 0}, {1, 0, 0}, {1 << 16, 1, 1});
    const CellGrid c(1, 1 << 16);
    VectorField one = VectorField::zeros(g);
    one.values.setOnes();
    const auto cosy = VectorExpression::parse("cos(2*pi*y1)", 1);
    double worst = 0;
    for (int n : {2, 4, 8})
        worst = std::max(worst, std::abs(twoscale_pairing(one, cosy, c, n)));
    const auto psi = VectorExpression::parse("(1 + x1)*cos(2*pi*y1)", 1);
    const double lim = product_norm_pp(psi, g, CellGrid(1, 64), 2.0);
    std::vector<double> gaps;
    for (int n : {2, 4, 8})
        gaps.push_back(std::abs(rescaled_norm_pp(psi, g, c, n, 2.0) - lim));
    return {worst == 0.0 && strictly_decreasing(gaps),
            fmt::format("max |<1, cos(2 pi y)>_eps| = {:.3e}; norm-identity gaps [{}]", worst, join(gaps))};
}

Outcome determinism(const std::string& config_dir)
{
    const RunConfig c = parse_config((fs::path(config_dir) / "twoscale_small.ini").string());
    const fs::path base = fs::temp_directory_path() / "peridyn_acceptance";
    fs::remove_all(base);
    std::ostringstream err;
    if (run(c, (base / "a").string(), err) != 0 || run(c, (base / "b").string(), err) != 0)
        return {false, "run failed: " + err.str()};
    std::size_t files = 0, bytes = 0;
    bool same = true;
    for (const auto& ent : fs::directory_iterator(base / "a")) {
        if (ent.path().extension() != ".csv")
            continue;
        const std::string x = slurp(ent.path()), y = slurp(base / "b" / ent.path().filename());
        same = same && x == y && !x.empty();
        ++files;
        bytes += x.size();
    }
    fs::remove_all(base);
    return {same && files > 0, fmt::format("{} CSV file(s), {} bytes, identical: {}", files, bytes, same)};
}

} // namespace

int main(int argc, char** argv)
{
    const std::string config_dir = argc > 1 ? argv[1] : PERIDYN_CONFIG_DIR;
    const RunConfig std_cfg = parse_config((fs::path(config_dir) / "standard.ini").string());

    report(1, "rigid-translation nullity", 1, nullity);
    report(2, "operator symmetry and sign", 5, symmetry_sign);
    report(3, "eps-uniform boundedness", 10, [&] { return uniform_bound(std_cfg); });
    report(4, "propagator cross-validation", 30, propagator_cross);
    report(5, "homogeneous-medium collapse", 60, homogeneous_collapse);

    // 6, 7 and 10 share one sweep on the standard case
    ConvergenceReport rep;
    double sweep_s = 0;
    std::string sweep_error;
    {
        const auto t0 = clock_type::now();
        try {
            rep = convergence_study(std_cfg.problem, std_cfg.ns, std_cfg.p, std_cfg.window, std_cfg.sample_times);
        } catch (const std::exception& e) {
            sweep_error = e.what();
        }
        sweep_s = std::chrono::duration<double>(clock_type::now() - t0).count();
    }
    auto rows_ok = [&]() {
        if (!sweep_error.empty())
            throw std::runtime_error(sweep_error);
        for (const auto& r : rep.rows)
            if (!r.ok)
                throw std::runtime_error(fmt::format("eps = 1/{} failed: {}", r.n, r.error));
    };
    const double shared = 300 - sweep_s;
    report(6, "strong approximation trend", shared, [&]() -> Outcome {
        rows_ok();
        std::vector<double> e, ratios;
        for (const auto& r : rep.rows)
            e.push_back(r.error_T);
        bool ok = strictly_decreasing(e);
        for (std::size_t k = 1; k < e.size(); ++k) {
            ratios.push_back(e[k] / e[k - 1]);
            ok = ok && ratios.back() <= 0.9;
        }
        return {ok, fmt::format("||e(T)||_2 = [{}], ratios [{}] (sweep {:.1f} s)", join(e), join(ratios, "{:.3f}"),
                                sweep_s)};
    });
    report(7, "forcing decay", shared, [&]() -> Outcome {
        rows_ok();
        bool ok = true;
        std::string s;
        for (std::size_t k = 0; k < rep.sample_times.size(); ++k) {
            std::vector<double> col;
            for (const auto& r : rep.rows)
                col.push_back(r.forcing[k]);
            ok = ok && strictly_decreasing(col);
            s += fmt::format("{}t={}: [{}]", k ? "; " : "", rep.sample_times[k], join(col));
        }
        return {ok, "||d(t)||_2 " + s};
    });
    report(8, "error identity and bound", 60, error_identity_bound);
    report(9, "coupled/memory equivalence", 120, coupled_memory);
    report(10, "weak-convergence window check", shared, [&]() -> Outcome {
        rows_ok();
        std::vector<double> g;
        for (const auto& r : rep.rows)
            g.push_back(r.window_gap);
        return {strictly_decreasing(g), fmt::format("|avg_V u^eps(T) - avg_V u^H(T)| = [{}]", join(g))};
    });
    report(11, "two-scale pairing diagnostics", 10, pairing);
    report(12, "determinism", 60, [&] { return determinism(config_dir); });

    std::cout << fmt::format("{} of 12 criteria passed", 12 - failures) << std::endl;
    return failures == 0 ? 0 : 1;
}
