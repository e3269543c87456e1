#include "peridyn/run.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/os.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "peridyn/homogenization.hpp"

namespace peridyn {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(const std::string& bytes)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
    std::string s;
    for (unsigned int i = 0; i < len; ++i)
        s += fmt::format("{:02x}", md[i]);
    return s;
}

DerivedConstants derived_constants(const RunConfig& cfg)
{
    const ProblemSpec& p = cfg.problem;
    DerivedConstants dc;
    // quadrature resolution for the volume fractions, about 2M nodes at most
    static constexpr int fraction_res[] = {0, 4096, 1024, 128};
    std::tie(dc.theta_f, dc.theta_m) = p.micro.volume_fractions(fraction_res[p.cell.dim()]);
    const auto coeffs = p.coefficients();
    const int d = p.macro.dim();
    const auto& par = p.micro.params();
    dc.M_S = bound_M_S(*coeffs, par.delta, d);
    dc.M_L = bound_M_L(*coeffs, par.lambda, par.gamma, d);
    dc.K_lattice = matrix_K(d, par.lambda, par.gamma, p.macro.spacing());
    dc.K_exact = matrix_K_exact(d, par.lambda, par.gamma);
    dc.alpha_bar = coeffs->alpha_bar();
    dc.max_rho_inv = coeffs->max_rho_inv();
    return dc;
}

namespace {

json readings_json(const BoundReadings& b)
{
    return {{"isotropic_2pi_over_3", b.isotropic}, {"radial_sphere_area_over_2", b.radial}, {"wide_2pi", b.wide}};
}

json matrix_json(const Matrix3& m, int d)
{
    json a = json::array();
    for (int i = 0; i < d; ++i) {
        json row = json::array();
        for (int j = 0; j < d; ++j)
            row.push_back(m(i, j));
        a.push_back(row);
    }
    return a;
}

std::string iso_now()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& path, const std::string& s)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << s;
}

std::string coord_header(const char* prefix, int d)
{
    std::string s;
    for (int a = 0; a < d; ++a)
        s += fmt::format(",{}{}", prefix, a + 1);
    return s;
}

} // namespace

void print_constants(const RunConfig& cfg, std::ostream& os)
{
    const DerivedConstants dc = derived_constants(cfg);
    const int d = cfg.problem.macro.dim();
    os << fmt::format("theta_f = {:.10g}\ntheta_m = {:.10g}\n", dc.theta_f, dc.theta_m);
    os << fmt::format("alpha_bar = {:.10g}\nmax rho^-1 = {:.10g}\n", dc.alpha_bar, dc.max_rho_inv);
    os << fmt::format("M_S: 2pi/3 form = {:.10g}, |S^(d-1)|/2 form = {:.10g}, 2pi form = {:.10g}\n", dc.M_S.isotropic,
                      dc.M_S.radial, dc.M_S.wide);
    os << fmt::format("M_L: 2pi/3 form = {:.10g}, |S^(d-1)|/2 form = {:.10g}, 2pi form = {:.10g}\n", dc.M_L.isotropic,
                      dc.M_L.radial, dc.M_L.wide);
    os << "K (lattice, macro spacing):\n";
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j)
            os << fmt::format("{}{:.10g}", j ? " " : "  ", dc.K_lattice(i, j));
        os << "\n";
    }
    os << "K (closed form):\n";
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j)
            os << fmt::format("{}{:.10g}", j ? " " : "  ", dc.K_exact(i, j));
        os << "\n";
    }
}

void write_vector_csv(const std::string& path, const VectorTrajectory& tr, const char* field)
{
    auto out = fmt::output_file(path);
    if (tr.frames.empty()) {
        out.print("t\n");
        return;
    }
    const MacroGrid& g = tr.frames.front().grid;
    const int d = g.dim();
    out.print("t{}{}\n", coord_header("x", d), coord_header(field, d));
    for (std::size_t k = 0; k < tr.frames.size(); ++k) {
        const VectorField& f = tr.frames[k];
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            const Point3 x = g.coord(i);
            out.print("{:.17g}", tr.times[k]);
            for (int a = 0; a < d; ++a)
                out.print(",{:.17g}", x[a]);
            for (int a = 0; a < d; ++a)
                out.print(",{:.17g}", f.at(i, a));
            out.print("\n");
        }
    }
}

void write_product_csv(const std::string& path, const ProductTrajectory& tr, const char* field)
{
    auto out = fmt::output_file(path);
    if (tr.frames.empty()) {
        out.print("t\n");
        return;
    }
    const MacroGrid& g = tr.frames.front().macro;
    const CellGrid& c = tr.frames.front().cell;
    const int d = g.dim();
    out.print("t{}{}{}\n", coord_header("x", d), coord_header("y", d), coord_header(field, d));
    for (std::size_t k = 0; k < tr.frames.size(); ++k) {
        const ProductField& f = tr.frames[k];
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            const Point3 x = g.coord(i);
            for (std::size_t j = 0; j < c.node_count(); ++j) {
                const Point3 y = c.coord(j);
                out.print("{:.17g}", tr.times[k]);
                for (int a = 0; a < d; ++a)
                    out.print(",{:.17g}", x[a]);
                for (int a = 0; a < d; ++a)
                    out.print(",{:.17g}", y[a]);
                for (int a = 0; a < d; ++a)
                    out.print(",{:.17g}", f.at(i, j, a));
                out.print("\n");
            }
        }
    }
}

void write_report_csv(const std::string& path, const ConvergenceReport& rep)
{
    auto out = fmt::output_file(path);
    out.print("eps,n,status,error_T");
    for (double t : rep.sample_times)
        out.print(",forcing_t{:.17g}", t);
    out.print(",window_gap,corrector_avg\n");
    for (const auto& r : rep.rows) {
        out.print("{:.17g},{},{}", r.eps, r.n, r.ok ? "ok" : "failed");
        if (!r.ok) {
            out.print(",");
            for (std::size_t k = 0; k < rep.sample_times.size(); ++k)
                out.print(",");
            out.print(",,\n");
            continue;
        }
        out.print(",{:.17g}", r.error_T);
        for (double f : r.forcing)
            out.print(",{:.17g}", f);
        out.print(",{:.17g},{:.17g}\n", r.window_gap, r.corrector_avg);
    }
}

int run(const RunConfig& cfg, const std::string& out_dir, std::ostream& err)
{
    using clock = std::chrono::steady_clock;
    const fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        err << "cannot create output directory " << dir << ": " << ec.message() << "\n";
        return 2;
    }
    const ProblemSpec& p = cfg.problem;
    const int d = p.macro.dim();
    const auto& par = p.micro.params();

    json man;
    man["tool"] = "peridyn";
    man["version"] = PERIDYN_VERSION;
    man["config"] = {{"path", cfg.origin}, {"sha256", sha256_hex(cfg.source)}};
    man["mode"] = mode_name(cfg.mode);
    man["integrator"] = p.integrator == Integrator::series ? "series" : "verlet";
    json micro = {{"shape", shape_name(p.micro.geometry().shape)},
                  {"radius", p.micro.geometry().radius},
                  {"C_f", par.C_f},
                  {"C_m", par.C_m},
                  {"C_i", par.C_i},
                  {"rho_f", par.rho_f},
                  {"rho_m", par.rho_m},
                  {"delta", par.delta},
                  {"lambda", par.lambda},
                  {"gamma", par.gamma}};
    if (par.beta)
        micro["beta"] = *par.beta;
    man["parameters"]["microstructure"] = micro;
    json counts = json::array(), lower = json::array();
    for (int a = 0; a < d; ++a) {
        counts.push_back(p.macro.count(a));
        lower.push_back(p.macro.lower()[a]);
    }
    man["parameters"]["grid"] = {{"dim", d},
                                 {"lower", lower},
                                 {"nodes", counts},
                                 {"h_x", p.macro.spacing()},
                                 {"cell", p.cell.resolution()},
                                 {"h_y", p.cell.spacing()}};
    man["parameters"]["problem"] = {{"u0", p.u0.text()}, {"v0", p.v0.text()}, {"b", p.b.text()},
                                    {"T", p.T},          {"dt", p.dt},         {"stride", p.stride}};
    if (p.n)
        man["parameters"]["eps"] = {{"n", *p.n}, {"value", 1.0 / *p.n}};
    if (cfg.mode == Mode::convergence) {
        man["parameters"]["convergence"] = {{"n", cfg.ns}, {"p", cfg.p}, {"sample_times", cfg.sample_times}};
    }
    try {
        const DerivedConstants dc = derived_constants(cfg);
        man["derived"] = {{"theta_f", dc.theta_f},
                          {"theta_m", dc.theta_m},
                          {"alpha_bar", dc.alpha_bar},
                          {"M_S", readings_json(dc.M_S)},
                          {"M_L", readings_json(dc.M_L)},
                          {"K_lattice", matrix_json(dc.K_lattice, d)},
                          {"K_exact", matrix_json(dc.K_exact, d)}};
    } catch (const std::exception& e) {
        man["derived"] = {{"error", e.what()}};
    }
    man["warnings"] = cfg.warnings;
    man["start"] = iso_now();
    man["status"] = "running";
    man["outputs"] = json::array();
    const fs::path mpath = dir / "manifest.json";
    write_text(mpath, man.dump(2) + "\n");

    const auto t0 = clock::now();
    int status = 0;
    json outputs = json::array();
    auto emit = [&](const std::string& name) { outputs.push_back(name); };
    try {
        switch (cfg.mode) {
        case Mode::fine: {
            const VectorTrajectory tr = solve_fine(p);
            write_vector_csv((dir / "fine.csv").string(), tr);
            emit("fine.csv");
            break;
        }
        case Mode::twoscale: {
            const ProductTrajectory tr = solve_twoscale(p);
            write_product_csv((dir / "twoscale.csv").string(), tr);
            emit("twoscale.csv");
            break;
        }
        case Mode::homog_coupled: {
            const CoupledTrajectory tr = solve_coupled(p);
            VectorTrajectory uh{tr.times, tr.uH, {}};
            ProductTrajectory r{tr.times, tr.r, {}};
            write_vector_csv((dir / "uH.csv").string(), uh);
            emit("uH.csv");
            write_product_csv((dir / "r.csv").string(), r, "r");
            emit("r.csv");
            break;
        }
        case Mode::homog_memory: {
            const MemoryTrajectory tr = solve_memory(p);
            write_vector_csv((dir / "uH.csv").string(), {tr.times, tr.uH, {}});
            emit("uH.csv");
            write_vector_csv((dir / "fH.csv").string(), {tr.times, tr.force, {}}, "f");
            emit("fH.csv");
            break;
        }
        case Mode::convergence: {
            const ConvergenceReport rep = convergence_study(p, cfg.ns, cfg.p, cfg.window, cfg.sample_times);
            write_report_csv((dir / "report.csv").string(), rep);
            emit("report.csv");
            json rows = json::array();
            bool partial = false;
            for (const auto& r : rep.rows) {
                json row = {{"n", r.n}, {"ok", r.ok}, {"seconds", r.seconds}};
                if (!r.ok) {
                    row["error"] = r.error;
                    partial = true;
                }
                rows.push_back(row);
            }
            man["convergence"] = {{"twoscale_seconds", rep.twoscale_seconds}, {"rows", rows}};
            man["partial"] = partial;
            if (partial) {
                err << "convergence: some eps runs failed; see manifest.json\n";
                status = 3;
            }
            break;
        }
        }
        man["status"] = status == 0 ? "ok" : "partial";
    } catch (const std::exception& e) {
        err << mode_name(cfg.mode) << " run failed: " << e.what() << "\n";
        man["status"] = "failed";
        man["error"] = e.what();
        man["partial"] = !outputs.empty();
        status = 1;
    }
    man["outputs"] = outputs;
    man["wall_seconds"] = std::chrono::duration<double>(clock::now() - t0).count();
    man["end"] = iso_now();
    write_text(mpath, man.dump(2) + "\n");
    return status;
}

} // namespace peridyn
