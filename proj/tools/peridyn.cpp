#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "peridyn/config.hpp"
#include "peridyn/parallel.hpp"
#include "peridyn/run.hpp"

namespace {

constexpr const char* env_help = R"(Environment:
  PERIDYN_OUT_DIR   output directory when --out is not given (overrides [run] out)
  PERIDYN_THREADS   number of OpenMP threads for operator application

Exit status: 0 success, 1 run failed, 2 invalid config or usage, 3 partial
convergence sweep (some eps runs failed; see manifest.json).)";

int report_config_error(const peridyn::ConfigError& e)
{
    std::cerr << "invalid config:\n";
    for (const auto& m : e.errors())
        std::cerr << "  " << m << "\n";
    return 2;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multiscale peridynamics simulator"};
    app.footer(env_help);
    app.set_version_flag("--version", PERIDYN_VERSION);
    app.require_subcommand(1);

    std::string config, out, mode;

    auto* run = app.add_subcommand("run", "Run the configured mode and write CSV + manifest.json");
    run->add_option("--config", config, "INI config file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "Output directory");
    run->add_option("--mode", mode, "Override [run] mode")
        ->check(CLI::IsMember({"fine", "twoscale", "homog-coupled", "homog-memory", "convergence"}));

    auto* validate = app.add_subcommand("validate", "Parse and check a config; list every problem found");
    validate->add_option("--config", config, "INI config file")->required()->check(CLI::ExistingFile);

    auto* constants = app.add_subcommand("constants", "Print theta_f, M_S, M_L and K for a config");
    constants->add_option("--config", config, "INI config file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    peridyn::threads_from_env();
    try {
        const std::optional<std::string> mode_override = mode.empty() ? std::nullopt : std::optional(mode);
        const peridyn::RunConfig cfg = peridyn::parse_config(config, mode_override);
        for (const auto& w : cfg.warnings)
            std::cerr << "warning: " << w << "\n";

        if (*validate) {
            std::cout << "ok: " << config << " (" << peridyn::mode_name(cfg.mode) << ")\n";
            return 0;
        }
        if (*constants) {
            peridyn::print_constants(cfg, std::cout);
            return 0;
        }
        std::string dir = cfg.out_dir;
        if (const char* env = std::getenv("PERIDYN_OUT_DIR"); env && *env)
            dir = env;
        if (!out.empty())
            dir = out;
        return peridyn::run(cfg, dir, std::cerr);
    } catch (const peridyn::ConfigError& e) {
        return report_config_error(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
