#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "peridyn/nonlocal_ops.hpp"

namespace peridyn {

/// g(t) written into the output vector. An empty function means g = 0.
using Forcing = std::function<void(double t, Eigen::VectorXd& g)>;

enum class DuhamelRule { simpson, trapezoid };

struct SeriesOptions {
    int max_terms = 200;
    double tail_tol = 1e-12;
    /// Quadrature intervals for the Duhamel integral over [0, t].
    int duhamel_intervals = 128;
    /// Intervals per step when the series is applied step by step.
    int step_intervals = 4;
    DuhamelRule rule = DuhamelRule::simpson;
};

struct State {
    Eigen::VectorXd u, v;
};

struct StateTrajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> u, v;
};

/// Smallest N such that the even/odd operator series truncated after N
/// terms has relative tail below tol, given x = ||L|| t^2.
/// Throws step_too_large when N would exceed max_terms.
int series_terms(double x, double tol, int max_terms);

/// Quadrature nodes/weights on [0, t] (t may be negative).
void duhamel_rule(double t, int intervals, DuhamelRule rule, std::vector<double>& tau, std::vector<double>& w);

/// u(t) = cosh(t sqrt L) u0 + sinh(t sqrt L)/sqrt L v0 + int_0^t sinh((t - s) sqrt L)/sqrt L g(s) ds,
/// v(t) its time derivative; operator functions are the power series in L.
/// Every term is accumulated with a Horner recursion in L.
State propagate_series(const OperatorHandle& L, const Eigen::VectorXd& u0, const Eigen::VectorXd& v0,
                       const Forcing& g, double t, const SeriesOptions& opt = {});

/// Same series evaluated through L.apply when no matrix is attached.
State propagate_series_matrix_free(const OperatorHandle& L, const Eigen::VectorXd& u0, const Eigen::VectorXd& v0,
                                   const Forcing& g, double t, const SeriesOptions& opt = {});

/// Repeated series steps of size dt; frames every `stride` steps plus t = T.
StateTrajectory propagate_series_steps(const OperatorHandle& L, const Eigen::VectorXd& u0,
                                       const Eigen::VectorXd& v0, const Forcing& g, double dt, double T,
                                       int stride = 1, SeriesOptions opt = {});

/// Acceleration a(u, t) for generic second-order marches.
using Acceleration = std::function<void(const Eigen::VectorXd& u, double t, std::size_t step, Eigen::VectorXd& a)>;

/// Kick-drift-kick velocity Verlet without any stability check.
StateTrajectory march_verlet(const Acceleration& accel, const Eigen::VectorXd& u0, const Eigen::VectorXd& v0,
                             double dt, double T, int stride = 1);

/// Stability budget: 0.5 * 2 / sqrt(norm).
double verlet_budget(double norm);

/// Velocity Verlet for u'' = L u + g(t); dt must be within verlet_budget(L.norm_bound).
StateTrajectory propagate_verlet(const OperatorHandle& L, const Eigen::VectorXd& u0, const Eigen::VectorXd& v0,
                                 const Forcing& g, double dt, double T, int stride = 1);

/// Number of steps for [0, T] at step dt (T/dt rounded; must be integral within 1e-9).
std::size_t step_count(double dt, double T);

} // namespace peridyn
