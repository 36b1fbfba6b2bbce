#pragma once

// feedersim command-line front end. Kept as a library so the commands can be
// driven in-process by tests.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "feedersim/control.hpp"
#include "feedersim/profile.hpp"

namespace feedersim::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,      // bad arguments or configuration
    kExitFlagged = 2,    // a scenario failed or has flagged steps
    kExitIo = 3,
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mirrors the run configuration file. Relative paths are resolved against
/// the configuration file's directory by load_run_config().
struct RunConfig {
    std::string feeder;
    std::string profile_dir;
    std::vector<double> penetrations;
    std::vector<double> si_fractions;  // zipped with curves
    std::vector<CurveChoice> curves;
    int days = 1;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    unsigned jobs = 0;  // 0: min(scenarios, logical CPUs)
    std::optional<Timestamp> snapshot_time;
    bool write_records = true;

    bool operator==(const RunConfig&) const = default;
};

/// Throws ConfigError on malformed text, unknown curve names or type errors.
RunConfig parse_run_config(std::string_view text);
std::string serialize_run_config(const RunConfig& config);
/// Reads, parses and resolves relative paths. Throws IoError / ConfigError.
RunConfig load_run_config(const std::filesystem::path& path);
/// Throws ConfigError unless paths exist, lists are nonempty and consistent
/// and days >= 1.
void validate_run_config(const RunConfig& config);

/// Built-in matrix: 12 penetrations from 0 to 200 % crossed with
/// {0 % none, 50 % a, 100 % a, 100 % b}.
RunConfig preset_matrix_config(const std::filesystem::path& output_dir, int days, std::uint64_t seed);

/// Entry point; returns an ExitCode.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace feedersim::cli
