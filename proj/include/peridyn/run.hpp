#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "peridyn/config.hpp"

namespace peridyn {

/// Derived constants reported by `constants` and stored in the manifest.
struct DerivedConstants {
    double theta_f = 0.0, theta_m = 0.0;
    BoundReadings M_S, M_L;
    Matrix3 K_lattice = Matrix3::Zero();
    Matrix3 K_exact = Matrix3::Zero();
    double alpha_bar = 0.0;
    double max_rho_inv = 0.0;
};

DerivedConstants derived_constants(const RunConfig& cfg);
void print_constants(const RunConfig& cfg, std::ostream& os);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

/// Dispatches the configured mode and writes CSV + manifest.json into the
/// output directory. Returns the process exit status; diagnostics go to err.
int run(const RunConfig& cfg, const std::string& out_dir, std::ostream& err);

/// CSV writers; floats use 17 significant digits.
void write_vector_csv(const std::string& path, const VectorTrajectory& tr, const char* field = "u");
void write_product_csv(const std::string& path, const ProductTrajectory& tr, const char* field = "u");
void write_report_csv(const std::string& path, const ConvergenceReport& rep);

} // namespace peridyn
