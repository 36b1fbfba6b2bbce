#include "feedersim/profile.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace feedersim {

namespace {

int parse_int(std::string_view text, std::size_t pos, std::size_t len) {
    int value = 0;
    auto sub = text.substr(pos, len);
    auto [ptr, ec] = std::from_chars(sub.data(), sub.data() + sub.size(), value);
    if (ec != std::errc{} || ptr != sub.data() + sub.size()) {
        throw std::invalid_argument("malformed timestamp '" + std::string(text) + "'");
    }
    return value;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    text = trim(text);
    if (text.size() != 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
        text[13] != ':' || text[16] != ':') {
        throw std::invalid_argument("malformed timestamp '" + std::string(text) + "' (expected YYYY-MM-DDTHH:MM:SS)");
    }
    const year_month_day ymd{year{parse_int(text, 0, 4)}, month{static_cast<unsigned>(parse_int(text, 5, 2))},
                             day{static_cast<unsigned>(parse_int(text, 8, 2))}};
    const int hh = parse_int(text, 11, 2);
    const int mm = parse_int(text, 14, 2);
    const int ss = parse_int(text, 17, 2);
    if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59) {
        throw std::invalid_argument("invalid timestamp '" + std::string(text) + "'");
    }
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<Timestamp>(days) * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    Timestamp days = t / 86400;
    Timestamp secs = t % 86400;
    if (secs < 0) {
        secs += 86400;
        --days;
    }
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(secs / 3600),
                  static_cast<int>(secs / 60 % 60), static_cast<int>(secs % 60));
    return buf;
}

void validate_profile(const TimeSeriesProfile& p, bool require_unit_peak) {
    if (p.step <= 0) throw std::invalid_argument("profile step must be positive");
    if (p.values.empty()) throw std::invalid_argument("profile is empty");
    for (double v : p.values) {
        if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("profile values must be finite and nonnegative");
    }
    if (require_unit_peak && *std::max_element(p.values.begin(), p.values.end()) != 1.0) {
        throw std::invalid_argument("load shape peak must be exactly 1.0");
    }
}

std::string serialize_profile(const TimeSeriesProfile& p) {
    std::string out = "timestamp,value\n";
    out.reserve(out.size() + p.values.size() * 30);
    char buf[64];
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        int len = std::snprintf(buf, sizeof buf, ",%.6f\n", p.values[i]);
        out += format_timestamp(p.time_at(i));
        out.append(buf, static_cast<std::size_t>(len));
    }
    return out;
}

TimeSeriesProfile parse_profile(std::string_view text) {
    TimeSeriesProfile p;
    std::vector<Timestamp> times;
    std::size_t line_no = 0;
    bool header = false;
    while (!text.empty()) {
        std::size_t eol = text.find('\n');
        std::string_view line = trim(text.substr(0, eol));
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        ++line_no;
        if (line.empty()) continue;
        if (!header) {
            if (line != "timestamp,value") {
                throw std::invalid_argument("profile line 1: expected header 'timestamp,value'");
            }
            header = true;
            continue;
        }
        std::size_t comma = line.find(',');
        if (comma == std::string_view::npos) {
            throw std::invalid_argument("profile line " + std::to_string(line_no) + ": expected two fields");
        }
        times.push_back(parse_timestamp(line.substr(0, comma)));
        std::string_view field = trim(line.substr(comma + 1));
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc{} || ptr != field.data() + field.size()) {
            throw std::invalid_argument("profile line " + std::to_string(line_no) + ": bad value '" +
                                        std::string(field) + "'");
        }
        p.values.push_back(v);
    }
    if (!header) throw std::invalid_argument("profile has no header");
    if (times.empty()) throw std::invalid_argument("profile has no samples");
    p.start = times.front();
    if (times.size() > 1) {
        Timestamp step = times[1] - times[0];
        if (step <= 0) throw std::invalid_argument("profile timestamps must increase");
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (times[i] - times[i - 1] != step) {
                throw std::invalid_argument("profile cadence is not uniform at sample " + std::to_string(i));
            }
        }
        p.step = static_cast<int>(step);
    }
    validate_profile(p, false);
    return p;
}

std::string load_profile_name() { return "load.csv"; }

std::string pv_profile_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "pv_%03zu.csv", index);
    return buf;
}

ProfileSet read_profile_directory(const std::filesystem::path& dir, std::size_t pv_count) {
    ProfileSet set;
    set.load = parse_profile(read_text_file(dir / load_profile_name()));
    validate_profile(set.load, true);
    set.pv.reserve(pv_count);
    for (std::size_t k = 0; k < pv_count; ++k) set.pv.push_back(parse_profile(read_text_file(dir / pv_profile_name(k))));
    return set;
}

void write_profile_directory(const std::filesystem::path& dir, const ProfileSet& profiles) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    write_text_file(dir / load_profile_name(), serialize_profile(profiles.load));
    for (std::size_t k = 0; k < profiles.pv.size(); ++k) {
        write_text_file(dir / pv_profile_name(k), serialize_profile(profiles.pv[k]));
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace feedersim
