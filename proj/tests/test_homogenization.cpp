#include <doctest.h>

#include <cmath>
#include <numbers>

#include "peridyn/analysis.hpp"
#include "peridyn/homogenization.hpp"
#include "support.hpp"

using namespace peridyn;

namespace {

ProblemSpec hetero(int N, int ncell, double T, double dt)
{
    const auto ms = testing::ball_1d(testing::coarse_params());
    return testing::problem_1d(ms, N, ncell, "sin(pi*x1)*(1+0.5*cos(2*pi*y1))", "0.2*x1*cos(2*pi*y1)",
                               "x1*(1 + sin(2*pi*y1))*cos(t)", T, dt, 10);
}

} // namespace

TEST_CASE("split and reassemble")
{
    const MacroGrid g = MacroGrid::box(1, {0, 0, 0}, {1, 0, 0}, {16, 1, 1});
    const CellGrid c(1, 8);
    VectorField a = VectorField::zeros(g);
    a.values = testing::random_vector(16, 3);
    const auto s0 = split(broadcast(a, c));
    CHECK(s0.r.values.cwiseAbs().maxCoeff() <= 1e-15);

    ProductField U = broadcast(a, c);
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 8; ++j)
            U.at(i, j, 0) += 0.7 * std::cos(2 * std::numbers::pi * c.coord(j)[0]);
    const auto s1 = split(U);
    CHECK((s1.uH.values - a.values).cwiseAbs().maxCoeff() <= 1e-15);
    for (std::size_t j = 0; j < 8; ++j)
        CHECK(s1.r.at(3, j, 0) == doctest::Approx(0.7 * std::cos(2 * std::numbers::pi * c.coord(j)[0])).epsilon(1e-14));

    ProductField R = ProductField::zeros(g, c);
    R.values = testing::random_vector(R.values.size(), 12);
    const auto s2 = split(R);
    CHECK(cell_average(s2.r).values.cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((reassemble(s2).values - R.values).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("coupled system reproduces the two-scale solve")
{
    const ProblemSpec s = hetero(16, 16, 0.5, 1e-3);
    const auto U = solve_twoscale(s);
    const auto C = solve_coupled(s);
    const auto R = C.reconstruct();
    REQUIRE(R.frames.size() == U.frames.size());
    for (std::size_t k = 0; k < U.frames.size(); ++k) {
        CHECK((R.frames[k].values - U.frames[k].values).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(cell_average(C.r[k]).values.cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("homogeneous medium: corrector stays zero and memory vanishes")
{
    const auto ms = testing::ball_1d(testing::homogeneous_params());
    const ProblemSpec s = testing::problem_1d(ms, 16, 16, "sin(pi*x1)", "x1", "cos(t)*x1", 0.5, 0.01, 5);
    const auto C = solve_coupled(s);
    for (const auto& r : C.r)
        CHECK(r.values.cwiseAbs().maxCoeff() <= 1e-14);

    const auto M = solve_memory(s);
    const TwoScaleOperator op(s.macro, ms, s.coefficients());
    for (std::size_t k = 0; k < M.times.size(); ++k) {
        const auto KLu = op.long_range().apply(M.uH[k]);
        CHECK((M.force[k].values - KLu.values).cwiseAbs().maxCoeff() <= 1e-13);
        CHECK(M.w_term[k].values.cwiseAbs().maxCoeff() <= 1e-13);
        CHECK((M.uH[k].values - C.uH[k].values).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("memory solve: initial force and agreement with the coupled system")
{
    const ProblemSpec s = hetero(8, 16, 0.4, 2e-3);
    const auto M = solve_memory(s);
    const TwoScaleOperator op(s.macro, s.micro, s.coefficients());
    const auto KLu0 = op.long_range().apply(M.uH[0]);
    CHECK((M.force[0].values - KLu0.values).cwiseAbs().maxCoeff() <= 1e-15);

    const auto C = solve_coupled(s);
    REQUIRE(C.uH.size() == M.uH.size());
    double gap = 0;
    for (std::size_t k = 0; k < M.uH.size(); ++k)
        gap = std::max(gap, lp_norm(VectorField{s.macro, M.uH[k].values - C.uH[k].values}, 2.0));
    CHECK(gap <= 1e-8);
}

TEST_CASE("memory kernel: empty history and trapezoid weights")
{
    const ProblemSpec s = hetero(8, 16, 0.1, 1e-2);
    const TwoScaleOperator op(s.macro, s.micro, s.coefficients());
    const MemoryKernel K(op, 1e-2, 10, s.series);
    CHECK(K.gamma(0, 0).cwiseAbs().maxCoeff() == 0.0);
    std::vector<Eigen::VectorXd> f(3, Eigen::VectorXd::Ones(8));
    Eigen::VectorXd out;
    K.convolve(f, 0, out);
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
    K.convolve(f, 2, out);
    // n = 2: dt (Gamma(2dt)/2 + Gamma(dt) + Gamma(0)/2)
    const double expect = 1e-2 * (0.5 * K.gamma(3, 2)(0, 0) + K.gamma(3, 1)(0, 0));
    CHECK(out[3] == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("constitutive force: history form and residual consistency")
{
    ProblemSpec s = hetero(8, 16, 0.2, 1e-2);
    s.stride = 1;
    const auto M = solve_memory(s);
    const auto co = s.coefficients();
    const TwoScaleOperator op(s.macro, s.micro, co);
    const MemoryKernel K(op, s.dt, M.times.size() - 1, s.series);

    const auto f0 = constitutive_force(op, K, {M.uH[0]});
    CHECK((f0.values - op.long_range().apply(M.uH[0]).values).cwiseAbs().maxCoeff() == 0.0);

    const double mean = co->mean_rho_inv();
    for (std::size_t n = 1; n + 1 < M.times.size(); ++n) {
        const std::vector<VectorField> hist(M.uH.begin(), M.uH.begin() + static_cast<long>(n) + 1);
        const auto f = constitutive_force(op, K, hist);
        CHECK((f.values - M.force[n].values).cwiseAbs().maxCoeff() <= 1e-13);

        // <rho^-1>^-1 u'' - <rho^-1>^-1 (Kcal w + <rho^-1 b>) = f^H, with u'' the
        // central difference that the Stoermer-Verlet positions satisfy exactly
        const Eigen::VectorXd udd =
            (M.uH[n + 1].values - 2 * M.uH[n].values + M.uH[n - 1].values) / (s.dt * s.dt);
        ProductField b = sample_product(s.b, s.macro, s.cell, M.times[n]);
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 16; ++j)
                b.at(i, j, 0) *= co->rho_inv[j];
        const Eigen::VectorXd rb = cell_average(b).values;
        const Eigen::VectorXd fr = (udd - M.w_term[n].values - rb) / mean;
        CHECK((fr - M.force[n].values).cwiseAbs().maxCoeff() <= 1e-8);
    }
}
