#include "feedersim/report.hpp"

#include <algorithm>
#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <map>
#include <optional>
#include <stdexcept>

#include "json.hpp"

namespace feedersim {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : "NA"; }

std::string fingerprint_hex(std::uint64_t fp) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, fp);
    return buf;
}

// Penetrations and (si_fraction, curve) columns in first-appearance order.
struct WideLayout {
    std::vector<double> penetrations;
    std::vector<std::pair<double, CurveChoice>> columns;
    std::map<std::pair<std::size_t, std::size_t>, const MetricsReport*> cells;
};

WideLayout wide_layout(std::span<const MetricsReport> reports) {
    WideLayout layout;
    for (const auto& r : reports) {
        auto pit = std::find(layout.penetrations.begin(), layout.penetrations.end(), r.scenario.pv_penetration);
        if (pit == layout.penetrations.end()) pit = layout.penetrations.insert(pit, r.scenario.pv_penetration);
        const std::pair<double, CurveChoice> key{r.scenario.si_fraction, r.scenario.curve};
        auto cit = std::find(layout.columns.begin(), layout.columns.end(), key);
        if (cit == layout.columns.end()) cit = layout.columns.insert(cit, key);
        layout.cells[{static_cast<std::size_t>(pit - layout.penetrations.begin()),
                      static_cast<std::size_t>(cit - layout.columns.begin())}] = &r;
    }
    return layout;
}

const MetricsReport* find_baseline(const WideLayout& layout, std::size_t p) {
    for (std::size_t c = 0; c < layout.columns.size(); ++c) {
        if (layout.columns[c].first != 0.0) continue;
        auto it = layout.cells.find({p, c});
        if (it != layout.cells.end()) return it->second;
    }
    return nullptr;
}

template <class Cell>
std::string wide_table(std::span<const MetricsReport> reports, Cell cell, bool with_baseline_taps = false) {
    const WideLayout layout = wide_layout(reports);
    std::string out = "penetration";
    for (const auto& [f, curve] : layout.columns) out += "," + si_label(f, curve);
    if (with_baseline_taps) out += ",baseline_taps_per_day";
    out += '\n';
    for (std::size_t p = 0; p < layout.penetrations.size(); ++p) {
        out += format_number(layout.penetrations[p]);
        for (std::size_t c = 0; c < layout.columns.size(); ++c) {
            auto it = layout.cells.find({p, c});
            out += ',';
            out += it == layout.cells.end() ? std::string("NA") : cell(*it->second);
        }
        if (with_baseline_taps) {
            const MetricsReport* base = find_baseline(layout, p);
            out += ',';
            out += base ? format_number(base->tap_ops_per_day) : std::string("NA");
        }
        out += '\n';
    }
    return out;
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> parts;
    std::size_t begin = 0;
    while (true) {
        const std::size_t end = line.find(sep, begin);
        parts.emplace_back(line.substr(begin, end == std::string_view::npos ? std::string_view::npos : end - begin));
        if (end == std::string_view::npos) break;
        begin = end + 1;
    }
    return parts;
}

}  // namespace

std::string format_number(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", value == 0.0 ? 0.0 : value);
    return buf;
}

std::string report_csv(std::span<const MetricsReport> reports) {
    std::string out =
        "penetration,si_fraction,curve,max_v,min_v,taps_per_day,losses,vs,norm_taps,norm_losses,norm_vs,ansi_steps,"
        "flagged_steps\n";
    for (const auto& r : reports) {
        out += format_number(r.scenario.pv_penetration) + ',' + format_number(r.scenario.si_fraction) + ',' +
               std::string(to_string(r.scenario.curve)) + ',' + format_number(r.max_voltage) + ',' +
               format_number(r.min_voltage) + ',' + format_number(r.tap_ops_per_day) + ',' +
               format_number(r.total_line_loss) + ',' + format_number(r.variability_score) + ',' +
               format_optional(r.normalized_taps) + ',' + format_optional(r.normalized_losses) + ',' +
               format_optional(r.normalized_vs) + ',' + std::to_string(r.ansi_violation_steps) + ',' +
               std::to_string(r.flagged_steps) + '\n';
    }
    return out;
}

std::string report_json(std::span<const MetricsReport> reports) {
    ordered_json rows = ordered_json::array();
    auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
    for (const auto& r : reports) {
        ordered_json row;
        row["penetration"] = r.scenario.pv_penetration;
        row["si_fraction"] = r.scenario.si_fraction;
        row["curve"] = std::string(to_string(r.scenario.curve));
        row["seed"] = r.scenario.rng_seed;
        row["feeder_fingerprint"] = fingerprint_hex(r.feeder_fingerprint);
        row["max_v"] = r.max_voltage;
        row["min_v"] = r.min_voltage;
        row["taps_per_day"] = r.tap_ops_per_day;
        row["losses"] = r.total_line_loss;
        row["vs"] = r.variability_score;
        row["norm_taps"] = opt(r.normalized_taps);
        row["norm_losses"] = opt(r.normalized_losses);
        row["norm_vs"] = opt(r.normalized_vs);
        row["ansi_steps"] = r.ansi_violation_steps;
        row["worst_ansi_excursion"] = r.worst_ansi_excursion;
        row["flagged_steps"] = r.flagged_steps;
        rows.push_back(std::move(row));
    }
    ordered_json doc;
    doc["scenarios"] = std::move(rows);
    return doc.dump(2) + '\n';
}

std::string plot_max_voltage(std::span<const MetricsReport> reports) {
    return wide_table(reports, [](const MetricsReport& r) { return format_number(r.max_voltage); });
}

std::string plot_min_voltage(std::span<const MetricsReport> reports) {
    return wide_table(reports, [](const MetricsReport& r) { return format_number(r.min_voltage); });
}

std::string plot_tap_operations(std::span<const MetricsReport> reports) {
    return wide_table(
        reports, [](const MetricsReport& r) { return format_optional(r.normalized_taps); }, true);
}

std::string plot_line_losses(std::span<const MetricsReport> reports) {
    return wide_table(reports, [](const MetricsReport& r) { return format_optional(r.normalized_losses); });
}

std::string plot_variability(std::span<const MetricsReport> reports) {
    return wide_table(reports, [](const MetricsReport& r) { return format_optional(r.normalized_vs); });
}

std::vector<ProfilePoint> voltage_profile(const Feeder& feeder, std::span<const double> voltages) {
    if (voltages.size() != feeder.buses.size()) {
        throw std::invalid_argument("voltage_profile: voltage count does not match the feeder bus count");
    }
    std::vector<ProfilePoint> points;
    points.reserve(voltages.size());
    for (std::size_t i = 0; i < voltages.size(); ++i) {
        points.push_back({feeder.buses[i].id, feeder.buses[i].distance_from_substation, voltages[i]});
    }
    std::sort(points.begin(), points.end(), [](const ProfilePoint& a, const ProfilePoint& b) {
        return a.distance_km != b.distance_km ? a.distance_km < b.distance_km : a.bus < b.bus;
    });
    return points;
}

std::vector<ProfilePoint> voltage_profile(const Feeder& feeder, const RecordSnapshot& snapshot) {
    std::map<std::string, double, std::less<>> distance;
    for (const auto& b : feeder.buses) distance.emplace(b.id, b.distance_from_substation);
    std::vector<ProfilePoint> points;
    points.reserve(snapshot.buses.size());
    for (std::size_t i = 0; i < snapshot.buses.size(); ++i) {
        auto it = distance.find(snapshot.buses[i]);
        if (it == distance.end()) {
            throw std::invalid_argument("voltage_profile: bus '" + snapshot.buses[i] + "' is not in the feeder");
        }
        points.push_back({snapshot.buses[i], it->second, snapshot.voltages[i]});
    }
    std::sort(points.begin(), points.end(), [](const ProfilePoint& a, const ProfilePoint& b) {
        return a.distance_km != b.distance_km ? a.distance_km < b.distance_km : a.bus < b.bus;
    });
    return points;
}

std::string plot_voltage_profile(std::span<const ProfileSeries> series) {
    std::string out = "label,penetration,timestamp,bus,distance_km,voltage\n";
    for (const auto& s : series) {
        const std::string prefix = s.label + ',' + format_optional(s.pv_penetration) + ',' + format_timestamp(s.timestamp);
        for (const auto& p : s.points) {
            out += prefix + ',' + p.bus + ',' + format_number(p.distance_km) + ',' + format_number(p.voltage) + '\n';
        }
    }
    return out;
}

std::string records_csv_header(const Feeder& feeder) {
    std::string out = "timestamp,inst_penetration,line_loss,flags";
    for (std::size_t k = 0; k < feeder.regulators.size(); ++k) out += ",tap_" + std::to_string(k);
    for (const auto& b : feeder.buses) out += ",v_" + b.id;
    out += '\n';
    return out;
}

std::string records_csv_row(const TimestepRecord& record) {
    std::string out = format_timestamp(record.timestamp);
    char buf[32];
    std::snprintf(buf, sizeof buf, ",%.6f", record.instantaneous_penetration);
    out += buf;
    std::snprintf(buf, sizeof buf, ",%.6e", record.line_loss);
    out += buf;
    out += ',' + std::to_string(record.flags);
    for (int tap : record.taps) out += ',' + std::to_string(tap);
    for (double v : record.voltage) {
        std::snprintf(buf, sizeof buf, ",%.8f", v);
        out += buf;
    }
    out += '\n';
    return out;
}

RecordSnapshot read_record_snapshot(std::string_view text, Timestamp t) {
    const std::size_t header_end = text.find('\n');
    if (header_end == std::string_view::npos) throw std::invalid_argument("record file: missing header row");
    const std::vector<std::string> header = split(text.substr(0, header_end), ',');
    if (header.empty() || header.front() != "timestamp") {
        throw std::invalid_argument("record file: header must start with 'timestamp'");
    }
    RecordSnapshot snap;
    std::vector<std::size_t> columns;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c].rfind("v_", 0) == 0) {
            snap.buses.push_back(header[c].substr(2));
            columns.push_back(c);
        }
    }
    if (columns.empty()) throw std::invalid_argument("record file: no voltage columns");

    std::optional<Timestamp> first;
    std::optional<Timestamp> last;
    std::size_t pos = header_end + 1;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        const std::size_t comma = line.find(',');
        const Timestamp row_time = parse_timestamp(line.substr(0, comma));
        if (!first) first = row_time;
        last = row_time;
        if (row_time != t) continue;
        const std::vector<std::string> cells = split(line, ',');
        if (cells.size() != header.size()) throw std::invalid_argument("record file: row width differs from header");
        for (std::size_t c : columns) {
            double v = 0.0;
            const std::string& cell = cells[c];
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size()) {
                throw std::invalid_argument("record file: malformed voltage '" + cell + "'");
            }
            snap.voltages.push_back(v);
        }
        return snap;
    }
    std::string span = first ? " (records cover " + format_timestamp(*first) + " to " + format_timestamp(*last) + ")"
                             : " (record file has no rows)";
    throw std::out_of_range("no record at " + format_timestamp(t) + span);
}

}  // namespace feedersim
