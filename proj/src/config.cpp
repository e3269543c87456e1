#include "peridyn/config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace peridyn {

namespace pt = boost::property_tree;

Mode parse_mode(const std::string& s)
{
    if (s == "fine")
        return Mode::fine;
    if (s == "twoscale")
        return Mode::twoscale;
    if (s == "homog-coupled")
        return Mode::homog_coupled;
    if (s == "homog-memory")
        return Mode::homog_memory;
    if (s == "convergence")
        return Mode::convergence;
    throw invalid_argument("unknown mode '" + s +
                           "' (expected one of fine, twoscale, homog-coupled, homog-memory, convergence)");
}

const char* mode_name(Mode m)
{
    switch (m) {
    case Mode::fine: return "fine";
    case Mode::twoscale: return "twoscale";
    case Mode::homog_coupled: return "homog-coupled";
    case Mode::homog_memory: return "homog-memory";
    case Mode::convergence: return "convergence";
    }
    return "?";
}

namespace {

std::string join(const std::vector<std::string>& v)
{
    std::string s = "invalid configuration:";
    for (const auto& e : v)
        s += "\n  " + e;
    return s;
}

} // namespace

ConfigError::ConfigError(std::vector<std::string> errors) : invalid_argument(join(errors)), errors_(std::move(errors))
{
}

int parse_eps(const std::string& text, const std::string& field)
{
    std::string t = boost::algorithm::trim_copy(text);
    double eps = 0.0;
    try {
        const auto slash = t.find('/');
        std::size_t used = 0;
        if (slash != std::string::npos) {
            const std::string a = boost::algorithm::trim_copy(t.substr(0, slash));
            const std::string b = boost::algorithm::trim_copy(t.substr(slash + 1));
            const double num = std::stod(a, &used);
            if (used != a.size())
                throw std::invalid_argument(a);
            const double den = std::stod(b, &used);
            if (used != b.size())
                throw std::invalid_argument(b);
            eps = num / den;
        } else {
            eps = std::stod(t, &used);
            if (used != t.size())
                throw std::invalid_argument(t);
        }
    } catch (const std::logic_error&) {
        throw invalid_argument(field + ": cannot read '" + text + "' as a number or fraction");
    }
    return inverse_scale(eps, field.c_str());
}

namespace {

class Reader {
public:
    explicit Reader(const pt::ptree& tree) : tree_(tree) {}

    std::vector<std::string> errors;

    bool has_section(const std::string& s) const { return tree_.get_child_optional(s).has_value(); }

    std::optional<std::string> raw(const std::string& path, bool required)
    {
        auto v = tree_.get_optional<std::string>(pt::ptree::path_type(path, '.'));
        if (!v) {
            if (required)
                errors.push_back(path + ": missing required key");
            return std::nullopt;
        }
        return boost::algorithm::trim_copy(*v);
    }

    std::optional<double> number(const std::string& path, bool required = true)
    {
        auto s = raw(path, required);
        if (!s)
            return std::nullopt;
        try {
            std::size_t used = 0;
            const double v = std::stod(*s, &used);
            if (used != s->size())
                throw std::invalid_argument(*s);
            return v;
        } catch (const std::logic_error&) {
            errors.push_back(path + ": '" + *s + "' is not a number");
            return std::nullopt;
        }
    }

    std::optional<std::vector<double>> numbers(const std::string& path, bool required = true)
    {
        auto s = raw(path, required);
        if (!s)
            return std::nullopt;
        std::vector<std::string> parts;
        boost::algorithm::split(parts, *s, boost::is_any_of(", "), boost::token_compress_on);
        std::vector<double> out;
        for (auto& p : parts) {
            if (p.empty())
                continue;
            try {
                std::size_t used = 0;
                out.push_back(std::stod(p, &used));
                if (used != p.size())
                    throw std::invalid_argument(p);
            } catch (const std::logic_error&) {
                errors.push_back(path + ": '" + p + "' is not a number");
                return std::nullopt;
            }
        }
        return out;
    }

private:
    const pt::ptree& tree_;
};

} // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin,
                            const std::optional<std::string>& mode_override)
{
    RunConfig cfg;
    cfg.source = text;
    cfg.origin = origin;

    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError({fmt::format("{}: line {}: {}", origin, e.line(), e.message())});
    }
    Reader r(tree);
    auto& errors = r.errors;

    for (const char* s : {"run", "microstructure", "grid", "problem"})
        if (!r.has_section(s))
            errors.push_back(std::string(s) + ": missing section");

    // [run]
    std::optional<std::string> mode_s = mode_override ? mode_override : r.raw("run.mode", true);
    bool mode_ok = false;
    if (mode_s) {
        try {
            cfg.mode = parse_mode(*mode_s);
            mode_ok = true;
        } catch (const invalid_argument& e) {
            errors.push_back(std::string("run.mode: ") + e.what());
        }
    }
    if (auto v = r.raw("run.integrator", false)) {
        if (*v == "verlet")
            cfg.problem.integrator = Integrator::verlet;
        else if (*v == "series")
            cfg.problem.integrator = Integrator::series;
        else
            errors.push_back("run.integrator: unknown integrator '" + *v + "' (expected verlet or series)");
    }
    if (auto v = r.raw("run.out", false))
        cfg.out_dir = *v;

    // [microstructure]
    CellGeometry geom;
    PhaseParams par;
    bool micro_ok = true;
    if (auto v = r.raw("microstructure.shape", true)) {
        try {
            geom.shape = parse_shape(*v);
        } catch (const invalid_argument& e) {
            errors.push_back(std::string("microstructure.shape: ") + e.what());
            micro_ok = false;
        }
    } else {
        micro_ok = false;
    }
    auto need = [&](const char* key, double& dst) {
        if (auto v = r.number(std::string("microstructure.") + key))
            dst = *v;
        else
            micro_ok = false;
    };
    need("radius", geom.radius);
    need("C_f", par.C_f);
    need("C_m", par.C_m);
    need("C_i", par.C_i);
    need("rho_f", par.rho_f);
    need("rho_m", par.rho_m);
    need("delta", par.delta);
    need("lambda", par.lambda);
    need("gamma", par.gamma);
    if (auto v = r.number("microstructure.beta", false))
        par.beta = *v;

    // [grid]
    int dim = 0;
    bool grid_ok = true;
    if (auto v = r.number("grid.dim")) {
        dim = static_cast<int>(*v);
        if (dim < 1 || dim > 3 || dim != *v) {
            errors.push_back("grid.dim: must be 1, 2 or 3");
            grid_ok = false;
        }
    } else {
        grid_ok = false;
    }
    geom.dim = dim;
    auto lower = r.numbers("grid.lower");
    auto upper = r.numbers("grid.upper");
    auto nodes = r.numbers("grid.nodes");
    auto cell = r.number("grid.cell");
    if (!lower || !upper || !nodes || !cell)
        grid_ok = false;
    if (grid_ok) {
        if (lower->size() != static_cast<std::size_t>(dim) || upper->size() != static_cast<std::size_t>(dim) ||
            nodes->size() != static_cast<std::size_t>(dim)) {
            errors.push_back(fmt::format("grid: lower, upper and nodes need {} entries each", dim));
            grid_ok = false;
        }
    }
    if (grid_ok) {
        try {
            Point3 lo{0, 0, 0}, hi{0, 0, 0};
            Index3 cnt{1, 1, 1};
            for (int a = 0; a < dim; ++a) {
                lo[a] = (*lower)[a];
                hi[a] = (*upper)[a];
                cnt[a] = static_cast<int>((*nodes)[a]);
                if (!(hi[a] > lo[a]))
                    throw invalid_argument("upper must exceed lower on every axis");
            }
            cfg.problem.macro = MacroGrid::box(dim, lo, hi, cnt);
        } catch (const invalid_argument& e) {
            errors.push_back(std::string("grid.nodes: ") + e.what());
            grid_ok = false;
        }
        try {
            cfg.problem.cell = CellGrid(dim, static_cast<int>(*cell));
        } catch (const invalid_argument& e) {
            errors.push_back(std::string("grid.cell: ") + e.what());
            grid_ok = false;
        }
    }

    if (micro_ok && grid_ok) {
        try {
            cfg.problem.micro = Microstructure(geom, par);
            const Validation val = cfg.problem.micro.validate();
            for (const auto& v : val.violations)
                errors.push_back("microstructure: " + v);
            for (const auto& w : val.warnings)
                cfg.warnings.push_back("microstructure: " + w);
        } catch (const invalid_argument& e) {
            errors.push_back(std::string("microstructure: ") + e.what());
            micro_ok = false;
        }
    }
    if (micro_ok && grid_ok) {
        if (par.gamma / cfg.problem.macro.spacing() < 2.0 * (1.0 - 1e-12))
            errors.push_back(fmt::format("microstructure.gamma: {} is resolved by fewer than 2 macro nodes", par.gamma));
        if (par.delta / cfg.problem.cell.spacing() < 2.0 * (1.0 - 1e-12))
            errors.push_back(fmt::format("microstructure.delta: {} is resolved by fewer than 2 cell nodes", par.delta));
    }

    // [problem]
    auto expr = [&](const char* key, VectorExpression& dst) {
        auto v = r.raw(std::string("problem.") + key, true);
        if (!v || dim < 1 || dim > 3)
            return;
        try {
            dst = VectorExpression::parse(*v, dim);
        } catch (const invalid_argument& e) {
            errors.push_back(std::string("problem.") + key + ": " + e.what());
        }
    };
    expr("u0", cfg.problem.u0);
    expr("v0", cfg.problem.v0);
    expr("b", cfg.problem.b);
    auto T = r.number("problem.T");
    auto dt = r.number("problem.dt");
    if (T)
        cfg.problem.T = *T;
    if (dt)
        cfg.problem.dt = *dt;
    if (T && dt) {
        try {
            step_count(*dt, *T);
        } catch (const invalid_argument& e) {
            errors.push_back(std::string("problem.dt: ") + e.what());
        }
    }
    if (auto v = r.number("problem.stride", false)) {
        if (*v < 1 || *v != static_cast<int>(*v))
            errors.push_back("problem.stride: must be a positive integer");
        else
            cfg.problem.stride = static_cast<int>(*v);
    }

    // [series]
    if (auto v = r.number("series.max_terms", false))
        cfg.problem.series.max_terms = static_cast<int>(*v);
    if (auto v = r.number("series.tail_tol", false))
        cfg.problem.series.tail_tol = *v;
    if (auto v = r.number("series.duhamel_intervals", false))
        cfg.problem.series.duhamel_intervals = static_cast<int>(*v);
    if (auto v = r.number("series.step_intervals", false))
        cfg.problem.series.step_intervals = static_cast<int>(*v);
    if (auto v = r.number("series.assembly_cap", false))
        cfg.problem.assembly_cap = static_cast<std::size_t>(*v);

    auto commensurate = [&](int n, const std::string& field) {
        if (!grid_ok)
            return;
        try {
            const ScaleMap map(cfg.problem.macro, cfg.problem.cell, n);
            if (micro_ok && par.delta / (map.stride() * cfg.problem.cell.spacing()) < 2.0 * (1.0 - 1e-12))
                errors.push_back(
                    fmt::format("{}: eps*delta is resolved by fewer than 2 macro nodes at eps = 1/{}", field, n));
        } catch (const invalid_argument& e) {
            errors.push_back(field + ": " + e.what());
        }
    };

    if (mode_ok && cfg.mode == Mode::fine) {
        if (auto v = r.raw("fine.eps", true)) {
            try {
                const int n = parse_eps(*v, "fine.eps");
                cfg.problem.n = n;
                commensurate(n, "fine.eps");
            } catch (const invalid_argument& e) {
                errors.push_back(e.what());
            }
        }
    }
    if (mode_ok && cfg.mode == Mode::convergence) {
        if (auto v = r.raw("convergence.epsilons", true)) {
            std::vector<std::string> parts;
            boost::algorithm::split(parts, *v, boost::is_any_of(", "), boost::token_compress_on);
            for (const auto& p : parts) {
                if (p.empty())
                    continue;
                try {
                    const int n = parse_eps(p, "convergence.epsilons");
                    cfg.ns.push_back(n);
                    commensurate(n, "convergence.epsilons");
                } catch (const invalid_argument& e) {
                    errors.push_back(e.what());
                }
            }
            for (std::size_t k = 1; k < cfg.ns.size(); ++k)
                if (cfg.ns[k] <= cfg.ns[k - 1])
                    errors.push_back("convergence.epsilons: values must be strictly decreasing");
        }
        if (auto v = r.number("convergence.p", false)) {
            cfg.p = *v;
            if (!(*v > 1.5))
                errors.push_back("convergence.p: must exceed 3/2");
        }
        if (grid_ok) {
            for (int a = 0; a < dim; ++a) {
                cfg.window.lower[a] = cfg.problem.macro.lower()[a];
                cfg.window.upper[a] = cfg.problem.macro.upper(a);
            }
        }
        auto wl = r.numbers("convergence.window_lower", false);
        auto wu = r.numbers("convergence.window_upper", false);
        if (wl && wu && dim >= 1) {
            if (wl->size() != static_cast<std::size_t>(dim) || wu->size() != static_cast<std::size_t>(dim))
                errors.push_back(fmt::format("convergence.window: lower/upper need {} entries", dim));
            else
                for (int a = 0; a < dim; ++a) {
                    cfg.window.lower[a] = (*wl)[a];
                    cfg.window.upper[a] = (*wu)[a];
                }
        } else if (wl || wu) {
            errors.push_back("convergence.window: give both window_lower and window_upper");
        }
        if (auto v = r.numbers("convergence.sample_times", false))
            cfg.sample_times = *v;
        else if (T)
            cfg.sample_times = {*T};
        if (T && dt && *dt > 0.0) {
            const double step = *dt * cfg.problem.stride;
            for (double t : cfg.sample_times) {
                const double k = t / step;
                if (t < 0.0 || t > *T * (1.0 + 1e-12) ||
                    (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k) && std::abs(t - *T) > 1e-12))
                    errors.push_back(fmt::format("convergence.sample_times: t = {} is not a stored time", t));
            }
        }
    }

    if (!errors.empty())
        throw ConfigError(std::move(errors));
    return cfg;
}

RunConfig parse_config(const std::string& path, const std::optional<std::string>& mode_override)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError({path + ": cannot open config file"});
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path, mode_override);
}

} // namespace peridyn
