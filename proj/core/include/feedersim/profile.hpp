#pragma once

// Time-series profiles (load shape, per-system PV shapes) and their
// `timestamp,value` text files.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace feedersim {

/// File-system failure (missing file, unwritable directory).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Seconds since 1970-01-01T00:00:00, read as naive local standard time.
using Timestamp = std::int64_t;

/// "YYYY-MM-DDTHH:MM:SS". Throws std::invalid_argument on malformed input.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

struct TimeSeriesProfile {
    Timestamp start = 0;
    int step = 30;  // seconds
    std::vector<double> values;

    Timestamp time_at(std::size_t i) const { return start + static_cast<Timestamp>(i) * step; }
    bool operator==(const TimeSeriesProfile&) const = default;
};

/// One shared load shape (peak exactly 1) and one shape per PV system
/// (fraction of the system's DC rating), all on the same time grid.
struct ProfileSet {
    TimeSeriesProfile load;
    std::vector<TimeSeriesProfile> pv;

    bool operator==(const ProfileSet&) const = default;
};

/// Throws std::invalid_argument when step <= 0, a value is negative or
/// non-finite, or `require_unit_peak` is set and max(values) != 1.
void validate_profile(const TimeSeriesProfile& profile, bool require_unit_peak);

std::string serialize_profile(const TimeSeriesProfile& profile);
/// Parses `timestamp,value` text; the cadence must be uniform.
TimeSeriesProfile parse_profile(std::string_view text);

/// File names inside a profile directory.
std::string load_profile_name();
std::string pv_profile_name(std::size_t index);

/// Reads load.csv and pv_000.csv ... for `pv_count` systems.
ProfileSet read_profile_directory(const std::filesystem::path& dir, std::size_t pv_count);
void write_profile_directory(const std::filesystem::path& dir, const ProfileSet& profiles);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace feedersim
