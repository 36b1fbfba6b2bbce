#pragma once

// Post-processing of timestep records: voltage extremes, tap operations,
// line losses, ANSI band violations and the voltage variability score.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "feedersim/scenario.hpp"

namespace feedersim {

struct VoltageExtremes {
    double max = 0.0;
    double min = 0.0;
};

VoltageExtremes voltage_extremes(std::span<const TimestepRecord> records);

/// Sum over regulators of |tap(t) - tap(t-1)|, divided by the period.
double tap_operations_per_day(std::span<const TimestepRecord> records, double period_days);

/// Ramp values V~(t) = mean(V[t, t+dt)) - mean(V[t-dt, t)), defined for the
/// sample indices where both windows fit.
struct RampSeries {
    int delta_t = 0;                    // seconds
    std::size_t first_index = 0;        // sample index of values[0]
    std::vector<Timestamp> timestamps;  // empty when built without a time axis
    std::vector<double> values;
};

/// `step` is the sample spacing in seconds. Throws std::invalid_argument if
/// delta_t is not a positive multiple of step or needs more than the span.
RampSeries ramp_series(std::span<const double> voltages, int step, int delta_t, Timestamp start = 0);

/// 100 * max over V0 of V0 * P(|ramp| > V0) for one pooled sample of ramp
/// magnitudes. The supremum over V0 is approached just below an observed
/// magnitude, so only those need evaluating. Throws on an empty pool.
double variability_score_of_pool(std::vector<double> magnitudes);

inline constexpr int kDefaultRampWindows[] = {30, 60, 300, 900};

/// Pools |V~| over all buses and timestamps for each window; returns the
/// largest per-window score.
double variability_score(std::span<const TimestepRecord> records, int step,
                         std::span<const int> delta_ts = kDefaultRampWindows);

struct AnsiViolations {
    std::int64_t steps = 0;        // (bus, step) pairs outside the band
    double worst_excursion = 0.0;  // largest distance outside the band, p.u.
};

AnsiViolations ansi_violations(std::span<const TimestepRecord> records, double lower = 0.95, double upper = 1.05);

/// Sum of per-step line losses (p.u. x steps).
double total_line_loss(std::span<const TimestepRecord> records);

struct MetricsReport {
    ScenarioConfig scenario;
    std::uint64_t feeder_fingerprint = 0;
    double max_voltage = 0.0;
    double min_voltage = 0.0;
    double tap_ops_per_day = 0.0;
    double total_line_loss = 0.0;
    double variability_score = 0.0;
    std::int64_t ansi_violation_steps = 0;
    double worst_ansi_excursion = 0.0;
    std::int64_t flagged_steps = 0;
    // Relative to the no-smart-inverter case; nullopt when the baseline is 0.
    std::optional<double> normalized_taps;
    std::optional<double> normalized_losses;
    std::optional<double> normalized_vs;
};

/// FNV-1a hash of the serialized feeder; identifies the feeder a report
/// belongs to.
std::uint64_t feeder_fingerprint(const Feeder& feeder);

MetricsReport summarize(std::span<const TimestepRecord> records, const ScenarioConfig& scenario, int days, int step,
                        std::uint64_t fingerprint);

/// Fills the normalized fields of `report` from `baseline`. Throws
/// std::invalid_argument when the two reports come from different feeders
/// or penetrations.
MetricsReport normalize(MetricsReport report, const MetricsReport& baseline);

}  // namespace feedersim
