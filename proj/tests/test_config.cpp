#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "peridyn/config.hpp"
#include "peridyn/run.hpp"

using namespace peridyn;
namespace fs = std::filesystem;

namespace {

const char* fine_cfg = R"([run]
mode = fine

[microstructure]
shape = ball
radius = 0.25
C_f = 10
C_i = 3
C_m = 1
rho_f = 2
rho_m = 1
delta = 0.2
lambda = 1
gamma = 0.25

[grid]
dim = 1
lower = 0
upper = 1
nodes = 32
cell = 16

[problem]
u0 = %U0%
v0 = 0
b = 0
T = 0.2
dt = 0.01
stride = 5

[fine]
eps = %EPS%
)";

std::string make(const std::string& u0, const std::string& eps)
{
    std::string s = fine_cfg;
    s.replace(s.find("%U0%"), 4, u0);
    s.replace(s.find("%EPS%"), 5, eps);
    return s;
}

std::vector<std::string> errors_of(const std::string& text, std::optional<std::string> mode = std::nullopt)
{
    try {
        parse_config_text(text, "<test>", mode);
    } catch (const ConfigError& e) {
        return e.errors();
    }
    return {};
}

bool mentions(const std::vector<std::string>& errs, const std::string& what)
{
    for (const auto& e : errs)
        if (e.find(what) != std::string::npos)
            return true;
    return false;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("peridyn_test_" + name);
    fs::remove_all(p);
    return p;
}

} // namespace

TEST_CASE("minimal fine config parses with defaults")
{
    const RunConfig c = parse_config_text(make("sin(pi*x1)", "1/2"));
    CHECK(c.mode == Mode::fine);
    CHECK(c.problem.n == 2);
    CHECK(c.problem.integrator == Integrator::verlet);
    CHECK(c.problem.series.max_terms == 200);
    CHECK(c.out_dir == "out");
    CHECK(c.problem.macro.node_count() == 32);
    CHECK(parse_eps("0.125", "x") == 8);
    CHECK(parse_eps("1/4", "x") == 4);
}

TEST_CASE("config errors are collected and path-qualified")
{
    CHECK(mentions(errors_of(make("sin(pi*x1)", "0.3")), "fine.eps"));
    CHECK(mentions(errors_of(make("sin(pi*x1)", "1/2"), std::string("bogus")), "run.mode"));

    std::string bad = make("sin(pi*x1", "1/2");
    bad.replace(bad.find("C_f = 10"), 8, "C_f = ten");
    bad.replace(bad.find("lambda = 1\n"), 11, "");
    const auto errs = errors_of(bad);
    CHECK(errs.size() >= 3);
    CHECK(mentions(errs, "problem.u0"));
    CHECK(mentions(errs, "microstructure.C_f"));
    CHECK(mentions(errs, "microstructure.lambda"));

    std::string nogrid = make("0", "1/2");
    nogrid.replace(nogrid.find("[grid]"), 6, "[grids]");
    CHECK(mentions(errors_of(nogrid), "grid: missing section"));

    // 1/3: 3 h_x is not a whole number of cell steps
    CHECK(mentions(errors_of(make("0", "1/3")), "fine.eps"));
}

TEST_CASE("fine run with zero data writes an all-zero trajectory")
{
    const RunConfig c = parse_config_text(make("0", "1/2"));
    const fs::path dir = scratch("zero");
    std::ostringstream err;
    REQUIRE(run(c, dir.string(), err) == 0);
    std::ifstream in(dir / "fine.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,x1,u1");
    int rows = 0;
    while (std::getline(in, line)) {
        CHECK(line.substr(line.rfind(',') + 1) == "0");
        ++rows;
    }
    CHECK(rows == 32 * 5);
    const auto man = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(man["status"] == "ok");
    CHECK(man["config"]["sha256"].get<std::string>().size() == 64);
    CHECK(man["derived"]["M_S"]["wide_2pi"].get<double>() > 0);
}

TEST_CASE("reruns are byte-identical")
{
    const RunConfig c = parse_config_text(make("sin(pi*x1)*(1+0.5*cos(2*pi*y1))", "1/2"));
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    std::ostringstream err;
    REQUIRE(run(c, a.string(), err) == 0);
    REQUIRE(run(c, b.string(), err) == 0);
    CHECK(slurp(a / "fine.csv") == slurp(b / "fine.csv"));
    CHECK_FALSE(slurp(a / "fine.csv").empty());
}

TEST_CASE("solver failures are reported with mode context")
{
    std::string text = make("sin(pi*x1)", "1/2");
    text.replace(text.find("mode = fine"), 11, "mode = fine\nintegrator = series");
    text += "\n[series]\nassembly_cap = 4\n";
    const RunConfig c = parse_config_text(text);
    const fs::path dir = scratch("fail");
    std::ostringstream err;
    CHECK(run(c, dir.string(), err) != 0);
    CHECK(err.str().find("fine") != std::string::npos);
    const auto man = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(man["status"] == "failed");
}

TEST_CASE("sha256")
{
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
