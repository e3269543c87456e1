#pragma once

#include <random>
#include <string>

#include "peridyn/solvers.hpp"

namespace testing {

inline peridyn::PhaseParams standard_params()
{
    peridyn::PhaseParams p;
    p.C_f = 10;
    p.C_i = 3;
    p.C_m = 1;
    p.rho_f = 2;
    p.rho_m = 1;
    p.delta = 0.1;
    p.lambda = 1;
    p.gamma = 0.25;
    return p;
}

/// Wider short-range horizon for coarse test grids.
inline peridyn::PhaseParams coarse_params()
{
    peridyn::PhaseParams p = standard_params();
    p.delta = 0.2;
    return p;
}

inline peridyn::PhaseParams homogeneous_params(double c = 2.0, double rho = 1.5)
{
    peridyn::PhaseParams p = coarse_params();
    p.C_f = p.C_i = p.C_m = c;
    p.rho_f = p.rho_m = rho;
    return p;
}

inline peridyn::Microstructure ball_1d(const peridyn::PhaseParams& p, double R = 0.25)
{
    return peridyn::Microstructure({1, peridyn::Shape::ball, R}, p);
}

/// 1D problem on [0, 1] with N macro nodes and ncell cell nodes.
inline peridyn::ProblemSpec problem_1d(const peridyn::Microstructure& ms, int N, int ncell, const std::string& u0,
                                       const std::string& v0, const std::string& b, double T, double dt,
                                       int stride = 1)
{
    peridyn::ProblemSpec s;
    s.micro = ms;
    s.macro = peridyn::MacroGrid::box(1, {0, 0, 0}, {1, 0, 0}, {N, 1, 1});
    s.cell = peridyn::CellGrid(1, ncell);
    s.u0 = peridyn::VectorExpression::parse(u0, 1);
    s.v0 = peridyn::VectorExpression::parse(v0, 1);
    s.b = peridyn::VectorExpression::parse(b, 1);
    s.T = T;
    s.dt = dt;
    s.stride = stride;
    return s;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v[i] = dist(rng);
    return v;
}

} // namespace testing
