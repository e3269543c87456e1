#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "peridyn/field.hpp"
#include "peridyn/grid.hpp"
#include "peridyn/microstructure.hpp"

namespace peridyn {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Matrix3 = Eigen::Matrix3d;

/// Unknown count above which operators refuse to assemble.
inline constexpr std::size_t default_assembly_cap = 20000;

/// Kernel xi (x) xi / |xi|^d for xi = off * spacing, times the cell volume spacing^d.
struct Tap {
    Index3 off{0, 0, 0};
    Matrix3 w = Matrix3::Zero();
};

/// Lattice offsets m != 0 with |m*spacing| <= radius (closed) or < radius (open).
/// Comparisons carry a 1e-12 relative tolerance so lattice points sitting on
/// the horizon are classified consistently.
std::vector<Tap> make_taps(int dim, double spacing, double radius, bool closed);

/// A linear map on flat coefficient vectors.
struct OperatorHandle {
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> apply;
    std::optional<SparseMatrix> matrix;
    std::string label;
    Eigen::Index size = 0;
    /// Cheap upper bound on the induced 2-norm (row/column-sum bound).
    double norm_bound = 0.0;

    Eigen::VectorXd operator()(const Eigen::VectorXd& x) const
    {
        Eigen::VectorXd y(size);
        apply(x, y);
        return y;
    }
};

/// Long-range operator: sum over |xi| <= gamma, xi on the macro lattice, of
/// lambda W(xi) (u(x + xi) - u(x)), with neighbors outside Omega dropped.
class LongRangeOperator {
public:
    LongRangeOperator(const MacroGrid& grid, double lambda, double gamma);

    const MacroGrid& grid() const { return grid_; }
    const std::vector<Tap>& taps() const { return taps_; }
    double lambda() const { return lambda_; }
    double gamma() const { return gamma_; }

    void apply(const Eigen::VectorXd& u, Eigen::VectorXd& out) const;
    VectorField apply(const VectorField& u) const;
    /// lambda * sum of W over the in-domain horizon of node i.
    const Matrix3& moment(std::size_t i) const { return moment_[i]; }
    SparseMatrix assemble() const;
    double row_bound() const { return row_bound_; }

private:
    MacroGrid grid_;
    double lambda_, gamma_;
    std::vector<Tap> taps_;
    std::vector<Matrix3> moment_;
    double row_bound_ = 0.0;
};

/// Rescaled short-range operator at eps = 1/n, evaluated over z in H_delta(0)
/// on the lattice z = m * (n h_x); neighbor x + eps z = x + m h_x.
class ShortRangeOperator {
public:
    ShortRangeOperator(const MacroGrid& grid, std::shared_ptr<const CellCoefficients> coeffs, double delta, int n);

    const ScaleMap& scale() const { return map_; }
    void apply(const Eigen::VectorXd& u, Eigen::VectorXd& out) const;
    VectorField apply(const VectorField& u) const;
    SparseMatrix assemble() const;
    double row_bound() const { return row_bound_; }
    const std::vector<Tap>& taps() const { return taps_; }

private:
    MacroGrid grid_;
    std::shared_ptr<const CellCoefficients> coeffs_;
    ScaleMap map_;
    double delta_;
    std::vector<Tap> taps_;
    double row_bound_ = 0.0;
    template <class Emit>
    void visit_row(std::size_t i, Emit&& emit) const;
};

/// A^eps = rho_eps^{-1} (K_L + K_S^eps).
class FineOperator {
public:
    FineOperator(const MacroGrid& grid, const Microstructure& ms, std::shared_ptr<const CellCoefficients> coeffs,
                 int n);

    const LongRangeOperator& long_range() const { return long_; }
    const ShortRangeOperator& short_range() const { return short_; }
    const ScaleMap& scale() const { return short_.scale(); }
    /// rho(x/eps) per macro node.
    const Eigen::VectorXd& rho() const { return rho_; }
    const CellCoefficients& coefficients() const { return *coeffs_; }

    /// (K_L + K_S^eps) u, without the density.
    void apply_stiffness(const Eigen::VectorXd& u, Eigen::VectorXd& out) const;
    void apply(const Eigen::VectorXd& u, Eigen::VectorXd& out) const;
    VectorField apply(const VectorField& u) const;
    SparseMatrix assemble_stiffness() const;
    SparseMatrix assemble() const;
    /// Handle for A^eps; assembles when dof <= cap.
    OperatorHandle handle(std::size_t cap = default_assembly_cap) const;
    double norm_bound() const;

private:
    std::shared_ptr<const CellCoefficients> coeffs_;
    LongRangeOperator long_;
    ShortRangeOperator short_;
    Eigen::VectorXd rho_, rho_inv_;
};

/// B_S: short-range cell operator acting on y with x as a parameter.
class CellOperator {
public:
    CellOperator(std::shared_ptr<const CellCoefficients> coeffs, double delta);

    const CellGrid& grid() const { return coeffs_->grid; }
    /// One y-slice: size Ncell*d.
    void apply_slice(const double* u, double* out) const;
    /// Row j of the slice result only (d values).
    void apply_at(const double* u, std::size_t j, double* out) const;
    ProductField apply(const ProductField& U) const;
    Eigen::MatrixXd dense_slice() const;
    double row_bound() const { return row_bound_; }
    const std::vector<Tap>& taps() const { return taps_; }

private:
    std::shared_ptr<const CellCoefficients> coeffs_;
    double delta_;
    std::vector<Tap> taps_;
    std::vector<std::size_t> nb_;   // Ncell x taps neighbor table
    std::vector<double> alpha_;     // matching bond strengths
    double row_bound_ = 0.0;
};

/// Operators on the product space Omega x Y.
class TwoScaleOperator {
public:
    TwoScaleOperator(const MacroGrid& macro, const Microstructure& ms, std::shared_ptr<const CellCoefficients> coeffs);

    const MacroGrid& macro() const { return long_.grid(); }
    const CellGrid& cell() const { return coeffs_->grid; }
    const LongRangeOperator& long_range() const { return long_; }
    const CellOperator& cell_operator() const { return cell_; }
    const CellCoefficients& coefficients() const { return *coeffs_; }
    std::size_t size() const { return macro().node_count() * cell().node_count() * macro().dim(); }

    ProductField apply_B_L(const ProductField& U) const;
    ProductField apply_B_S(const ProductField& U) const;
    /// rho^{-1}(y) (B_L + B_S).
    void apply(const Eigen::VectorXd& u, Eigen::VectorXd& out) const;
    ProductField apply(const ProductField& U) const;

    /// C r = rho^{-1} B_S r - <rho^{-1} B_S r> - K(x) (rho^{-1} r - <rho^{-1} r>).
    void apply_C(const Eigen::VectorXd& r, Eigen::VectorXd& out) const;
    ProductField apply_C(const ProductField& r) const;
    /// r -> <rho^{-1} B_S r> - K(x) <rho^{-1} r>.
    VectorField apply_Kcal(const ProductField& r) const;
    void apply_Kcal(const Eigen::VectorXd& r, Eigen::VectorXd& out) const;

    /// Dense per-node blocks for a given moment matrix K.
    Eigen::MatrixXd C_block(const Matrix3& K) const;
    Eigen::MatrixXd Kcal_block(const Matrix3& K) const;

    SparseMatrix assemble() const;
    SparseMatrix assemble_C() const;
    SparseMatrix assemble_stiffness() const; // B_L + B_S, no density
    OperatorHandle handle(std::size_t cap = default_assembly_cap) const;
    OperatorHandle handle_C(std::size_t cap = default_assembly_cap) const;
    double norm_bound() const;
    double norm_bound_C() const;

private:
    std::shared_ptr<const CellCoefficients> coeffs_;
    LongRangeOperator long_;
    CellOperator cell_;
};

/// Flat-vector y-average: size N*Ncell*d -> N*d.
void cell_average(const Eigen::VectorXd& U, std::size_t nmacro, std::size_t ncell, int dim, Eigen::VectorXd& out);

/// lambda * sum of W over the full lattice ball |xi| <= gamma (no truncation).
Matrix3 matrix_K(int dim, double lambda, double gamma, double spacing);
/// Closed form lambda |S^{d-1}| gamma^2 / (2d) * I.
Matrix3 matrix_K_exact(int dim, double lambda, double gamma);

/// Surface measure of the unit sphere in R^d (2, 2pi, 4pi).
double sphere_area(int dim);

/// Candidate values for the norm bounds.
/// isotropic: 2 pi r^2 / 3, the d = 3 closed form with the 1/3 of the isotropic average.
/// radial:    |S^{d-1}| r^2 / 2, the integral of |z|^{1-d} over the ball.
/// wide:      2 pi r^2, the isotropic form without the 1/3.
struct BoundReadings {
    double isotropic = 0.0;
    double radial = 0.0;
    double wide = 0.0;
    double max() const;
};

BoundReadings bound_M_S(const CellCoefficients& c, double delta, int dim);
BoundReadings bound_M_L(const CellCoefficients& c, double lambda, double gamma, int dim);

/// p = 2: power iteration on A^T A; p = 1: max column sum; p = inf: max row sum.
/// Needs the assembled matrix.
double op_norm_estimate(const OperatorHandle& op, double p, int max_iter = 5000, double tol = 1e-12);

} // namespace peridyn
