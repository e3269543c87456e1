#pragma once

#include <optional>
#include <string>
#include <vector>

#include "peridyn/expression.hpp"
#include "peridyn/field.hpp"
#include "peridyn/nonlocal_ops.hpp"
#include "peridyn/solvers.hpp"

namespace peridyn {

/// (sum_i w |f_i|^p)^{1/p} with the Euclidean magnitude per node; p = inf gives the max.
double lp_norm(const VectorField& f, double p);
double lp_norm(const ProductField& f, double p);

/// e(t) = u^eps(t) - u(x, x/eps, t) frame by frame.
VectorTrajectory error_field(const VectorTrajectory& fine, const ProductTrajectory& twoscale, int n);

/// Split of the residual that drives the error equation.
///   d_S1: short-range bonds with the macro argument shifted by eps z,
///   d_S2: short-range bonds that leave Omega,
///   d_L:  long-range mismatch between the rescaled field and its cell average,
///   d_Q:  difference between the cell operator on the eps-lattice of z and on
///         the cell lattice; identically zero when n h_x equals the cell spacing.
/// total = rho_eps^{-1} (d_S1 + d_S2 + d_L + d_Q) equals the exact discrete residual.
struct ForcingTerms {
    VectorTrajectory d_S1, d_S2, d_L, d_Q, total;
};

ForcingTerms forcing_terms(const ProductTrajectory& U, const Microstructure& ms,
                           std::shared_ptr<const CellCoefficients> coeffs, int n);

/// e(t_k) = int_0^{t_k} sum (t_k - tau)^{2n+1}/(2n+1)! A^n d(tau) dtau, with d
/// interpolated linearly between stored frames (uniform spacing required).
VectorTrajectory error_from_forcing(const VectorTrajectory& d, const OperatorHandle& A,
                                    const SeriesOptions& opt = {});

/// B(t_k) = int_0^{t_k} sinh(sqrt(M)(t_k - tau))/sqrt(M) g(tau) dtau by the trapezoid rule,
/// g sampled at `times`.
std::vector<double> error_bound(const std::vector<double>& times, const std::vector<double>& dnorm, double M);
std::vector<double> error_bound(const VectorTrajectory& d, double M, double p = 2.0);

/// int_Omega v(x) . psi(x, x/eps) dx on the macro lattice.
double twoscale_pairing(const VectorField& v, const VectorExpression& psi, const CellGrid& cell, int n);
/// int_Omega int_Y v(x, y) . psi(x, y) dy dx on the product lattice.
double pairing_limit(const ProductField& v, const VectorExpression& psi);
/// ||psi(x, x/eps)||_p^p and the product-lattice limit int int |psi|^p.
double rescaled_norm_pp(const VectorExpression& psi, const MacroGrid& macro, const CellGrid& cell, int n, double p);
double product_norm_pp(const VectorExpression& psi, const MacroGrid& macro, const CellGrid& cell, double p);

struct Box {
    Point3 lower{0, 0, 0};
    Point3 upper{0, 0, 0};
};

/// Mean over the nodes inside V (closed box, 1e-12 slack).
Eigen::VectorXd window_average(const VectorField& f, const Box& V);

/// 1/2 <rho v, v> - 1/2 <u, K u> with quadrature weight w.
double energy(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const OperatorHandle& stiffness,
              const Eigen::VectorXd& rho, double weight);

struct ConvergenceRow {
    double eps = 0.0;
    int n = 0;
    bool ok = false;
    std::string error;
    double error_T = 0.0;
    std::vector<double> forcing; // ||d(t_k)||_p at the sample times
    double window_gap = 0.0;     // |avg_V u^eps(T) - avg_V u^H(T)|
    double corrector_avg = 0.0;  // |avg_V r(x, x/eps, T)|
    double seconds = 0.0;
};

struct ConvergenceReport {
    double p = 2.0;
    std::vector<double> sample_times;
    Box window;
    std::vector<ConvergenceRow> rows;
    double twoscale_seconds = 0.0;
};

/// One two-scale solve plus one fine solve per eps (run concurrently).
/// eps must be strictly decreasing; p must exceed 3/2.
ConvergenceReport convergence_study(const ProblemSpec& base, const std::vector<int>& ns, double p, const Box& window,
                                    const std::vector<double>& sample_times);

/// Index of the stored frame at time t (within 1e-9), or throws.
std::size_t frame_at(const std::vector<double>& times, double t);

} // namespace peridyn
