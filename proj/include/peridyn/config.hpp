#pragma once

#include <optional>
#include <string>
#include <vector>

#include "peridyn/analysis.hpp"
#include "peridyn/error.hpp"
#include "peridyn/solvers.hpp"

namespace peridyn {

enum class Mode { fine, twoscale, homog_coupled, homog_memory, convergence };

Mode parse_mode(const std::string& s);
const char* mode_name(Mode m);

struct RunConfig {
    Mode mode = Mode::fine;
    std::string out_dir = "out";
    ProblemSpec problem;
    // convergence mode
    std::vector<int> ns;
    double p = 2.0;
    Box window;
    std::vector<double> sample_times;

    std::string source;     // raw config text
    std::string origin;     // file path or label
    std::vector<std::string> warnings;
};

/// Every problem found while parsing, each prefixed with section.key.
class ConfigError : public invalid_argument {
public:
    explicit ConfigError(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

RunConfig parse_config_text(const std::string& text, const std::string& origin = "<string>",
                            const std::optional<std::string>& mode_override = std::nullopt);
RunConfig parse_config(const std::string& path, const std::optional<std::string>& mode_override = std::nullopt);

/// "1/8" or "0.125" -> 8. Throws invalid_argument naming `field`.
int parse_eps(const std::string& text, const std::string& field);

} // namespace peridyn
