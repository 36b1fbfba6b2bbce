#pragma once

// Text serialization of scenario reports, per-figure plot data, and
// per-scenario timestep record files. All output is LF-terminated with a
// fixed header row.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feedersim/metrics.hpp"

namespace feedersim {

/// One row per report, in the order given.
std::string report_csv(std::span<const MetricsReport> reports);
std::string report_json(std::span<const MetricsReport> reports);

/// Wide tables keyed by penetration with one column per (si_fraction, curve)
/// pair, in first-appearance order. Missing cells are written as NA.
std::string plot_max_voltage(std::span<const MetricsReport> reports);
std::string plot_min_voltage(std::span<const MetricsReport> reports);
/// Normalized taps plus the absolute no-SI taps/day as a second series.
std::string plot_tap_operations(std::span<const MetricsReport> reports);
std::string plot_line_losses(std::span<const MetricsReport> reports);
std::string plot_variability(std::span<const MetricsReport> reports);

struct ProfilePoint {
    std::string bus;
    double distance_km = 0.0;
    double voltage = 0.0;
};

/// Bus voltages against distance, sorted by distance then bus id.
std::vector<ProfilePoint> voltage_profile(const Feeder& feeder, std::span<const double> voltages);

struct ProfileSeries {
    std::string label;
    std::optional<double> pv_penetration;  // NA when unknown
    Timestamp timestamp = 0;
    std::vector<ProfilePoint> points;
};

/// Long-form table: label,penetration,timestamp,bus,distance_km,voltage.
std::string plot_voltage_profile(std::span<const ProfileSeries> series);

/// Columns: timestamp, inst_penetration, line_loss, flags, tap_<k>..., v_<bus>...
std::string records_csv_header(const Feeder& feeder);
std::string records_csv_row(const TimestepRecord& record);

struct RecordSnapshot {
    std::vector<std::string> buses;
    std::vector<double> voltages;
};

/// Voltages of the row whose timestamp equals `t` exactly. Throws
/// std::out_of_range when no row matches and std::invalid_argument on a
/// malformed file.
RecordSnapshot read_record_snapshot(std::string_view records_csv, Timestamp t);

/// Voltage profile from a snapshot, using the feeder for distances. Buses
/// missing from the feeder raise std::invalid_argument.
std::vector<ProfilePoint> voltage_profile(const Feeder& feeder, const RecordSnapshot& snapshot);

/// Plain numeric formatting used by every text output.
std::string format_number(double value);

}  // namespace feedersim
