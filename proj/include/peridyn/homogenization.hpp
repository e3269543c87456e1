#pragma once

#include <vector>

#include "peridyn/field.hpp"
#include "peridyn/nonlocal_ops.hpp"
#include "peridyn/solvers.hpp"

namespace peridyn {

struct MacroMicro {
    VectorField uH;
    ProductField r;
};

/// u^H = cell average, r = U - u^H.
MacroMicro split(const ProductField& U);
ProductField reassemble(const MacroMicro& s);

struct CoupledTrajectory {
    std::vector<double> times;
    std::vector<VectorField> uH, vH;
    std::vector<ProductField> r, vr;

    /// u^H + r per frame.
    ProductTrajectory reconstruct() const;
};

/// Macro/corrector system marched with velocity Verlet on the stacked state.
CoupledTrajectory solve_coupled(const ProblemSpec& spec);

/// Memory kernel of the eliminated corrector:
///   Gamma_x(s) = Kcal S_C(s) (phi e_c), S_C(s) = sum s^{2n+1}/(2n+1)! C^n,
/// tabulated at s = m dt for every distinct moment matrix K(x).
class MemoryKernel {
public:
    MemoryKernel(const TwoScaleOperator& op, double dt, std::size_t steps, const SeriesOptions& opt,
                 std::size_t cap = default_assembly_cap);

    double dt() const { return dt_; }
    std::size_t steps() const { return steps_; }
    double mean_rho_inv() const { return mean_rho_inv_; }
    /// d x d kernel for macro node i at lag m.
    Eigen::Ref<const Eigen::MatrixXd> gamma(std::size_t i, std::size_t m) const;

    /// Trapezoid approximation of int_0^{t_n} Gamma(t_n - tau) f(tau) dtau
    /// from the samples f_0..f_n (flat N*d vectors on the macro grid).
    void convolve(const std::vector<Eigen::VectorXd>& f, std::size_t n, Eigen::VectorXd& out) const;

private:
    int d_;
    std::size_t nmacro_;
    double dt_;
    std::size_t steps_;
    double mean_rho_inv_;
    std::vector<std::size_t> group_of_;
    std::vector<std::vector<Eigen::MatrixXd>> table_; // group -> lag -> d x d
};

struct MemoryTrajectory {
    std::vector<double> times;
    std::vector<VectorField> uH, vH;
    /// K_L u^H + <rho^{-1}>^{-1} (memory term) at the stored times.
    std::vector<VectorField> force;
    /// Kcal w(t) at the stored times.
    std::vector<VectorField> w_term;
};

/// Eliminated macro equation with the history-dependent memory term.
MemoryTrajectory solve_memory(const ProblemSpec& spec);

/// f^H(t_n) = K_L u^H(t_n) + <rho^{-1}>^{-1} int_0^{t_n} Gamma(t_n - tau) K_L u^H(tau) dtau
/// from a u^H history sampled every dt starting at t = 0.
VectorField constitutive_force(const TwoScaleOperator& op, const MemoryKernel& kernel,
                               const std::vector<VectorField>& uH_history);

} // namespace peridyn
