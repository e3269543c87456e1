#include "peridyn/solvers.hpp"

#include "peridyn/error.hpp"

namespace peridyn {

std::shared_ptr<const CellCoefficients> ProblemSpec::coefficients() const
{
    return std::make_shared<const CellCoefficients>(micro.coefficients(cell));
}

ProblemSpec ProblemSpec::at_scale(int nn) const
{
    ProblemSpec s = *this;
    s.n = nn;
    return s;
}

VectorField sample_rescaled(const VectorExpression& f, const ScaleMap& map, double t)
{
    const MacroGrid& g = map.macro();
    const int d = g.dim();
    VectorField r = VectorField::zeros(g);
    EvalPoint p;
    p.t = t;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        p.x = g.coord(i);
        p.y = map.cell().coord(map.cell_of(i));
        for (int c = 0; c < d; ++c)
            r.at(i, c) = f.component(c).eval(p);
    }
    return r;
}

ProductField sample_product(const VectorExpression& f, const MacroGrid& macro, const CellGrid& cell, double t)
{
    const int d = macro.dim();
    ProductField r = ProductField::zeros(macro, cell);
    EvalPoint p;
    p.t = t;
    for (std::size_t i = 0; i < macro.node_count(); ++i) {
        p.x = macro.coord(i);
        for (std::size_t j = 0; j < cell.node_count(); ++j) {
            p.y = cell.coord(j);
            for (int c = 0; c < d; ++c)
                r.at(i, j, c) = f.component(c).eval(p);
        }
    }
    return r;
}

namespace {

void check_spec(const ProblemSpec& s)
{
    if (s.macro.dim() != s.micro.dim() || s.cell.dim() != s.micro.dim())
        throw invalid_argument("problem: grid and microstructure dimensions differ");
    const int d = s.macro.dim();
    if (s.u0.dim() != d || s.v0.dim() != d || s.b.dim() != d)
        throw invalid_argument("problem: data expressions must have d components");
    if (!(s.dt > 0.0))
        throw invalid_argument("problem: dt must be positive");
    step_count(s.dt, s.T);
}

template <class F>
void fill(Trajectory<F>& out, const StateTrajectory& st, const F& proto)
{
    out.times = st.times;
    out.frames.reserve(st.u.size());
    out.rates.reserve(st.v.size());
    for (std::size_t k = 0; k < st.u.size(); ++k) {
        F f = proto;
        f.values = st.u[k];
        out.frames.push_back(std::move(f));
        F g = proto;
        g.values = st.v[k];
        out.rates.push_back(std::move(g));
    }
}

StateTrajectory integrate(const ProblemSpec& s, const OperatorHandle& L, const Eigen::VectorXd& u0,
                          const Eigen::VectorXd& v0, const Forcing& g)
{
    if (s.integrator == Integrator::series)
        return propagate_series_steps(L, u0, v0, g, s.dt, s.T, s.stride, s.series);
    return propagate_verlet(L, u0, v0, g, s.dt, s.T, s.stride);
}

} // namespace

VectorTrajectory solve_fine(const ProblemSpec& spec)
{
    check_spec(spec);
    if (!spec.n)
        throw invalid_argument("fine-scale solve needs eps");
    auto coeffs = spec.coefficients();
    FineOperator A(spec.macro, spec.micro, coeffs, *spec.n);
    const ScaleMap& map = A.scale();
    const std::size_t cap = spec.integrator == Integrator::series ? spec.assembly_cap : 0;
    if (spec.integrator == Integrator::series && spec.macro.dof() > cap)
        throw unsupported_error("series integrator needs an assembled operator; problem exceeds the assembly cap");
    const OperatorHandle L = A.handle(cap);

    const VectorField u0 = sample_rescaled(spec.u0, map, 0.0);
    const VectorField v0 = sample_rescaled(spec.v0, map, 0.0);
    Forcing g;
    if (!spec.b.is_zero()) {
        Eigen::VectorXd rinv = A.rho().cwiseInverse();
        g = [&spec, &map, rinv](double t, Eigen::VectorXd& out) {
            out = sample_rescaled(spec.b, map, t).values.cwiseProduct(rinv);
        };
    }
    VectorTrajectory tr;
    fill(tr, integrate(spec, L, u0.values, v0.values, g), VectorField{spec.macro, {}});
    return tr;
}

ProductTrajectory solve_twoscale(const ProblemSpec& spec)
{
    check_spec(spec);
    auto coeffs = spec.coefficients();
    TwoScaleOperator op(spec.macro, spec.micro, coeffs);
    const std::size_t cap = spec.integrator == Integrator::series ? spec.assembly_cap : 0;
    if (spec.integrator == Integrator::series && op.size() > cap)
        throw unsupported_error("series integrator needs an assembled operator; problem exceeds the assembly cap");
    const OperatorHandle L = op.handle(cap);

    const ProductField u0 = sample_product(spec.u0, spec.macro, spec.cell, 0.0);
    const ProductField v0 = sample_product(spec.v0, spec.macro, spec.cell, 0.0);
    Forcing g;
    if (!spec.b.is_zero()) {
        const int d = spec.macro.dim();
        const std::size_t m = spec.cell.node_count();
        Eigen::VectorXd rinv(u0.values.size());
        for (Eigen::Index k = 0; k < rinv.size(); ++k)
            rinv[k] = coeffs->rho_inv[static_cast<std::size_t>(k / d) % m];
        g = [&spec, rinv](double t, Eigen::VectorXd& out) {
            out = sample_product(spec.b, spec.macro, spec.cell, t).values.cwiseProduct(rinv);
        };
    }
    ProductTrajectory tr;
    fill(tr, integrate(spec, L, u0.values, v0.values, g), ProductField{spec.macro, spec.cell, {}});
    return tr;
}

VectorField rescale(const ProductField& U, const ScaleMap& map)
{
    if (U.macro != map.macro() || U.cell != map.cell())
        throw invalid_argument("rescale: field and scale map use different grids");
    const int d = U.dim();
    VectorField r = VectorField::zeros(U.macro);
    for (std::size_t i = 0; i < U.macro.node_count(); ++i)
        for (int c = 0; c < d; ++c)
            r.at(i, c) = U.at(i, map.cell_of(i), c);
    return r;
}

VectorTrajectory rescale(const ProductTrajectory& U, int n)
{
    VectorTrajectory r;
    if (U.frames.empty())
        return r;
    const ScaleMap map(U.frames.front().macro, U.frames.front().cell, n);
    r.times = U.times;
    for (const auto& f : U.frames)
        r.frames.push_back(rescale(f, map));
    for (const auto& f : U.rates)
        r.rates.push_back(rescale(f, map));
    return r;
}

} // namespace peridyn
