#include "feedersim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace feedersim {

namespace {

void require_records(std::span<const TimestepRecord> records, const char* what) {
    if (records.empty()) throw std::invalid_argument(std::string(what) + ": no records");
}

std::optional<double> ratio(double value, double baseline) {
    if (baseline == 0.0) return std::nullopt;
    return value / baseline;
}

}  // namespace

VoltageExtremes voltage_extremes(std::span<const TimestepRecord> records) {
    require_records(records, "voltage_extremes");
    VoltageExtremes e{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (const auto& r : records) {
        for (double v : r.voltage) {
            e.max = std::max(e.max, v);
            e.min = std::min(e.min, v);
        }
    }
    if (e.max < e.min) throw std::invalid_argument("voltage_extremes: records hold no voltages");
    return e;
}

double tap_operations_per_day(std::span<const TimestepRecord> records, double period_days) {
    if (!(period_days > 0.0)) throw std::invalid_argument("tap_operations_per_day: period must be positive");
    std::int64_t ops = 0;
    for (std::size_t t = 1; t < records.size(); ++t) {
        const auto& now = records[t].taps;
        const auto& before = records[t - 1].taps;
        if (now.size() != before.size()) throw std::invalid_argument("tap_operations_per_day: regulator count changed");
        for (std::size_t r = 0; r < now.size(); ++r) ops += std::abs(now[r] - before[r]);
    }
    return static_cast<double>(ops) / period_days;
}

RampSeries ramp_series(std::span<const double> voltages, int step, int delta_t, Timestamp start) {
    if (step <= 0) throw std::invalid_argument("ramp_series: step must be positive");
    if (delta_t <= 0 || delta_t % step != 0) {
        throw std::invalid_argument("ramp_series: window " + std::to_string(delta_t) +
                                    " s is not a positive multiple of the " + std::to_string(step) + " s step");
    }
    const std::size_t n = static_cast<std::size_t>(delta_t / step);
    const std::size_t total = voltages.size();
    if (2 * n > total) {
        throw std::invalid_argument("ramp_series: window " + std::to_string(delta_t) + " s exceeds the record span");
    }
    std::vector<long double> prefix(total + 1, 0.0L);
    for (std::size_t i = 0; i < total; ++i) prefix[i + 1] = prefix[i] + voltages[i];

    RampSeries out;
    out.delta_t = delta_t;
    out.first_index = n;
    const std::size_t count = total - 2 * n + 1;
    out.values.resize(count);
    out.timestamps.resize(count);
    const long double width = static_cast<long double>(n);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t t = n + k;
        const long double after = (prefix[t + n] - prefix[t]) / width;
        const long double before = (prefix[t] - prefix[t - n]) / width;
        out.values[k] = static_cast<double>(after - before);
        out.timestamps[k] = start + static_cast<Timestamp>(t) * step;
    }
    return out;
}

double variability_score_of_pool(std::vector<double> magnitudes) {
    if (magnitudes.empty()) throw std::invalid_argument("variability_score: empty ramp pool");
    for (double& m : magnitudes) m = std::abs(m);
    std::sort(magnitudes.begin(), magnitudes.end());
    const double total = static_cast<double>(magnitudes.size());
    double best = 0.0;
    for (std::size_t i = 0; i < magnitudes.size();) {
        const double u = magnitudes[i];
        // Every sample from i on is >= u, i.e. exceeds any V0 just below u.
        best = std::max(best, u * (static_cast<double>(magnitudes.size() - i) / total));
        while (i < magnitudes.size() && magnitudes[i] == u) ++i;
    }
    return 100.0 * best;
}

double variability_score(std::span<const TimestepRecord> records, int step, std::span<const int> delta_ts) {
    require_records(records, "variability_score");
    const std::size_t buses = records.front().voltage.size();
    std::vector<double> series(records.size());
    double best = 0.0;
    bool any = false;
    for (int dt : delta_ts) {
        if (dt <= 0 || dt % step != 0) {
            throw std::invalid_argument("variability_score: window " + std::to_string(dt) +
                                        " s is not a multiple of the record step");
        }
        if (2 * static_cast<std::size_t>(dt / step) > records.size()) continue;
        std::vector<double> pool;
        pool.reserve(buses * records.size());
        for (std::size_t b = 0; b < buses; ++b) {
            for (std::size_t t = 0; t < records.size(); ++t) series[t] = records[t].voltage[b];
            const RampSeries ramps = ramp_series(series, step, dt);
            for (double v : ramps.values) pool.push_back(std::abs(v));
        }
        if (pool.empty()) continue;
        best = std::max(best, variability_score_of_pool(std::move(pool)));
        any = true;
    }
    if (!any) throw std::invalid_argument("variability_score: empty ramp pool");
    return best;
}

AnsiViolations ansi_violations(std::span<const TimestepRecord> records, double lower, double upper) {
    require_records(records, "ansi_violations");
    AnsiViolations out;
    for (const auto& r : records) {
        for (double v : r.voltage) {
            const double excursion = std::max(v - upper, lower - v);
            if (excursion > 0.0) {
                ++out.steps;
                out.worst_excursion = std::max(out.worst_excursion, excursion);
            }
        }
    }
    return out;
}

double total_line_loss(std::span<const TimestepRecord> records) {
    double total = 0.0;
    for (const auto& r : records) total += r.line_loss;
    return total;
}

std::uint64_t feeder_fingerprint(const Feeder& feeder) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : serialize_feeder(feeder)) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

MetricsReport summarize(std::span<const TimestepRecord> records, const ScenarioConfig& scenario, int days, int step,
                        std::uint64_t fingerprint) {
    require_records(records, "summarize");
    MetricsReport m;
    m.scenario = scenario;
    m.feeder_fingerprint = fingerprint;
    const VoltageExtremes e = voltage_extremes(records);
    m.max_voltage = e.max;
    m.min_voltage = e.min;
    m.tap_ops_per_day = tap_operations_per_day(records, days);
    m.total_line_loss = total_line_loss(records);
    m.variability_score = variability_score(records, step);
    const AnsiViolations a = ansi_violations(records);
    m.ansi_violation_steps = a.steps;
    m.worst_ansi_excursion = a.worst_excursion;
    m.flagged_steps = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.flags != 0; });
    return m;
}

MetricsReport normalize(MetricsReport report, const MetricsReport& baseline) {
    if (report.feeder_fingerprint != baseline.feeder_fingerprint) {
        throw std::invalid_argument("normalize: report and baseline come from different feeders");
    }
    if (report.scenario.pv_penetration != baseline.scenario.pv_penetration) {
        throw std::invalid_argument("normalize: report and baseline have different PV penetrations");
    }
    if (baseline.scenario.si_fraction != 0.0) {
        throw std::invalid_argument("normalize: baseline must be the no-smart-inverter case");
    }
    report.normalized_taps = ratio(report.tap_ops_per_day, baseline.tap_ops_per_day);
    report.normalized_losses = ratio(report.total_line_loss, baseline.total_line_loss);
    report.normalized_vs = ratio(report.variability_score, baseline.variability_score);
    return report;
}

}  // namespace feedersim
