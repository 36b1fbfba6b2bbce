#include "feedersim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace feedersim {

namespace {

constexpr double kRatedKw = 500.0;  // "large" PV threshold
constexpr double kAcDcRatio = 1.05;

std::string numbered(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%03d", prefix, i);
    return buf;
}

double quantize(double v) { return std::round(v * 1e6) / 1e6; }

double gauss(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z);
}

void check_params(const SyntheticParams& p) {
    if (p.bus_count < 6) throw std::invalid_argument("synthetic feeder needs at least 6 buses");
    if (!(p.length_km >= 1.0)) throw std::invalid_argument("synthetic feeder length must be at least 1 km");
    if (!(p.peak_load_kw > 0.0)) throw std::invalid_argument("peak load must be positive");
    if (p.pv_count < 0) throw std::invalid_argument("PV count must be nonnegative");
    if (!(p.base_power_kva > 0.0) || !(p.base_voltage_kv > 0.0)) {
        throw std::invalid_argument("base power and voltage must be positive");
    }
    if (!(p.trunk_r_ohm_per_km > 0.0) || !(p.lateral_r_ohm_per_km > 0.0) || p.trunk_x_ohm_per_km < 0.0 ||
        p.lateral_x_ohm_per_km < 0.0) {
        throw std::invalid_argument("conductor impedances must be positive");
    }
    if (p.days < 1) throw std::invalid_argument("profile length must be at least one day");
    if (p.step_seconds <= 0 || 86400 % p.step_seconds != 0) {
        throw std::invalid_argument("profile step must divide one day");
    }
}

// Winter clear-sky output as a fraction of DC rating.
double clear_sky(double hour) {
    constexpr double sunrise = 6.9;
    constexpr double sunset = 16.8;
    if (hour <= sunrise || hour >= sunset) return 0.0;
    const double s = std::sin(std::numbers::pi * (hour - sunrise) / (sunset - sunrise));
    return 0.82 * std::pow(s, 1.2);
}

// Diurnal winter load with morning and evening peaks.
double diurnal_load(double hour) {
    return 0.45 + 0.30 * gauss(hour, 7.5, 1.5) + 0.52 * gauss(hour, 18.7, 2.0) + 0.08 * gauss(hour, 12.5, 3.0) +
           0.52 * gauss(hour, 18.7 - 24.0, 2.0);
}

TimeSeriesProfile make_load_shape(const SyntheticParams& p, std::mt19937_64& rng) {
    const std::size_t per_day = static_cast<std::size_t>(86400 / p.step_seconds);
    const std::size_t steps = per_day * static_cast<std::size_t>(p.days);
    std::uniform_real_distribution<double> day_scale(0.90, 1.05);
    std::normal_distribution<double> shock(0.0, 0.002);

    std::vector<double> scale(static_cast<std::size_t>(p.days) + 1);
    for (double& s : scale) s = day_scale(rng);

    TimeSeriesProfile out{p.start, p.step_seconds, std::vector<double>(steps)};
    double noise = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        const std::size_t d = t / per_day;
        const double frac = static_cast<double>(t % per_day) / static_cast<double>(per_day);
        const double day = scale[d] + (scale[d + 1] - scale[d]) * frac;
        noise = 0.995 * noise + shock(rng);
        out.values[t] = diurnal_load(24.0 * frac) * day * (1.0 + noise);
    }
    const double peak = *std::max_element(out.values.begin(), out.values.end());
    for (double& v : out.values) v = quantize(v / peak);
    return out;
}

// Feeder-wide clear-sky index for one day, long enough to be read with a
// per-system lag of up to `max_lag` steps.
std::vector<double> cloud_field(std::size_t length, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> field(length, 1.0);
    const double kind = u(rng);
    if (kind < 0.45) {
        return field;  // clear
    }
    if (kind < 0.85) {
        // Broken clouds: alternating clear and shaded spells.
        std::exponential_distribution<double> clear_spell(1.0 / 14.0);
        std::exponential_distribution<double> shade_spell(1.0 / 8.0);
        std::size_t t = 0;
        bool shaded = u(rng) < 0.5;
        while (t < length) {
            const auto len = 1 + static_cast<std::size_t>(shaded ? shade_spell(rng) : clear_spell(rng));
            const double level = shaded ? 0.25 + 0.3 * u(rng) : 1.0;
            for (std::size_t k = 0; k < len && t < length; ++k, ++t) field[t] = level;
            shaded = !shaded;
        }
        std::vector<double> smooth(length);
        for (std::size_t i = 0; i < length; ++i) {
            const std::size_t lo = i == 0 ? 0 : i - 1;
            const std::size_t hi = std::min(length - 1, i + 1);
            double acc = 0.0;
            for (std::size_t k = lo; k <= hi; ++k) acc += field[k];
            smooth[i] = acc / static_cast<double>(hi - lo + 1);
        }
        return smooth;
    }
    // Overcast.
    std::normal_distribution<double> shock(0.0, 0.01);
    double x = 0.0;
    for (double& f : field) {
        x = 0.99 * x + shock(rng);
        f = std::clamp(0.3 + x, 0.1, 0.6);
    }
    return field;
}

std::vector<TimeSeriesProfile> make_pv_shapes(const SyntheticParams& p, const Feeder& feeder, std::mt19937_64& rng) {
    const std::size_t per_day = static_cast<std::size_t>(86400 / p.step_seconds);
    const std::size_t steps = per_day * static_cast<std::size_t>(p.days);
    const std::size_t npv = feeder.pv_systems.size();

    std::unordered_map<std::string, double> distance;
    for (const auto& b : feeder.buses) distance[b.id] = b.distance_from_substation;

    std::uniform_int_distribution<int> jitter(0, 10);
    std::vector<int> offset(npv);
    for (auto& o : offset) o = jitter(rng);
    std::normal_distribution<double> flicker(0.0, 0.01);
    std::uniform_real_distribution<double> wind(4.0, 12.0);

    std::vector<TimeSeriesProfile> out(npv, TimeSeriesProfile{p.start, p.step_seconds, std::vector<double>(steps)});
    for (int d = 0; d < p.days; ++d) {
        const double steps_per_km = 1000.0 / wind(rng) / p.step_seconds;
        const auto max_lag = static_cast<std::size_t>(std::ceil(p.length_km * steps_per_km)) + 16;
        const std::vector<double> field = cloud_field(per_day + max_lag, rng);
        for (std::size_t k = 0; k < npv; ++k) {
            const PvSystem& pv = feeder.pv_systems[k];
            const bool large = pv.dc_rating > kRatedKw;
            const auto lag = static_cast<std::size_t>(std::lround(distance[pv.bus] * steps_per_km)) +
                             static_cast<std::size_t>(offset[k]);
            for (std::size_t s = 0; s < per_day; ++s) {
                const std::size_t t = static_cast<std::size_t>(d) * per_day + s;
                const double env = clear_sky(24.0 * static_cast<double>(s) / static_cast<double>(per_day));
                double k_index;
                const std::size_t at = s + max_lag - lag;
                if (large) {
                    // Large arrays average the field over their footprint.
                    double acc = 0.0;
                    int cnt = 0;
                    for (std::size_t w = at >= 2 ? at - 2 : 0; w <= std::min(at + 2, field.size() - 1); ++w, ++cnt) {
                        acc += field[w];
                    }
                    k_index = acc / cnt;
                } else {
                    k_index = field[at];
                }
                const double noise = 1.0 + flicker(rng);
                out[k].values[t] = env > 0.0 ? quantize(std::max(0.0, env * k_index * noise)) : 0.0;
            }
        }
    }
    return out;
}

}  // namespace

Feeder generate_feeder_topology(const SyntheticParams& p) {
    check_params(p);
    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    Feeder f;
    f.base_power_kva = p.base_power_kva;
    const double z_base = p.base_voltage_kv * p.base_voltage_kv / (p.base_power_kva / 1000.0);
    auto add_bus = [&](std::string id, double km) { f.buses.push_back(Bus{std::move(id), km, p.base_voltage_kv}); };
    auto add_line = [&](const std::string& from, const std::string& to, double km, double r, double x) {
        f.segments.push_back(LineSegment{from, to, r * km / z_base, x * km / z_base});
    };

    constexpr double kYard = 0.01;  // substation bus bar, km
    add_bus("sub", 0.0);
    add_bus("sub_reg", kYard);
    f.regulators.push_back(Regulator{"sub", "sub_reg", p.substation_setpoint, 0.0167, 0.00625, -16, 16});

    const int trunk_count = std::max(2, p.bus_count * 35 / 100);
    const int mid = std::max(1, trunk_count / 2);
    std::vector<std::string> trunk;
    std::vector<double> trunk_km;
    std::string upstream = "sub_reg";
    double upstream_km = kYard;
    for (int j = 1; j <= trunk_count; ++j) {
        const double km = j == trunk_count ? p.length_km : kYard + (p.length_km - kYard) * j / trunk_count;
        std::string id = numbered("t", j);
        add_bus(id, km);
        add_line(upstream, id, km - upstream_km, p.trunk_r_ohm_per_km, p.trunk_x_ohm_per_km);
        trunk.push_back(id);
        trunk_km.push_back(km);
        upstream = id;
        upstream_km = km;
        if (j == mid) {
            add_bus("mid_reg", km);
            f.regulators.push_back(Regulator{id, "mid_reg", p.mid_setpoint, 0.0167, 0.00625, -16, 16});
            upstream = "mid_reg";
        }
    }

    // Laterals hang off trunk buses that leave room before the feeder end.
    int remaining = p.bus_count - 3 - trunk_count;
    std::vector<std::size_t> anchors;
    for (std::size_t j = 0; j < trunk.size(); ++j) {
        if (trunk_km[j] < p.length_km - 0.8) anchors.push_back(j);
    }
    if (remaining > 0 && anchors.empty()) throw std::invalid_argument("feeder too short for laterals");
    std::uniform_int_distribution<std::size_t> pick(0, anchors.empty() ? 0 : anchors.size() - 1);
    std::uniform_int_distribution<int> chain(1, 4);
    int lateral_id = 0;
    while (remaining > 0) {
        const std::size_t j = anchors[pick(rng)];
        std::string from = trunk[j];
        double km = trunk_km[j];
        const int len = std::min(remaining, chain(rng));
        for (int k = 0; k < len; ++k) {
            const double step = 0.15 + 0.25 * u(rng);
            if (km + step > p.length_km - 0.05) break;
            std::string id = numbered("l", ++lateral_id);
            add_bus(id, km + step);
            add_line(from, id, step, p.lateral_r_ohm_per_km, p.lateral_x_ohm_per_km);
            from = id;
            km += step;
            --remaining;
        }
    }

    // Loads on every bus outside the substation and regulator outputs.
    std::vector<std::string> load_buses;
    for (const auto& b : f.buses) {
        if (b.id != "sub" && b.id != "sub_reg" && b.id != "mid_reg") load_buses.push_back(b.id);
    }
    std::lognormal_distribution<double> spread(0.0, 0.5);
    std::uniform_real_distribution<double> pf(0.92, 0.97);
    std::vector<double> weight(load_buses.size());
    double weight_sum = 0.0;
    for (double& w : weight) weight_sum += (w = spread(rng));
    for (std::size_t i = 0; i < load_buses.size(); ++i) {
        f.loads.push_back(Load{load_buses[i], p.peak_load_kw * weight[i] / weight_sum, pf(rng)});
    }

    // PV sized so that installed kVA equals peak load.
    if (p.pv_count > 0) {
        const int large = std::min(2, p.pv_count);
        const int small = p.pv_count - large;
        const double total_dc = p.peak_load_kw / kAcDcRatio;
        double large_dc = p.large_pv_kw;
        double small_total = total_dc - large * large_dc;
        if (small == 0) {
            large_dc = total_dc / large;
            small_total = 0.0;
        }
        if (small > 0 && !(small_total > 0.0)) {
            throw std::invalid_argument("large PV systems exceed the PV capacity implied by the peak load");
        }

        // Large systems sit on the trunk at ~45 % and ~85 % of the length.
        const double spots[2] = {0.45, 0.85};
        std::vector<PvSystem> pvs;
        for (int k = 0; k < large; ++k) {
            const double target = spots[k] * p.length_km;
            std::size_t best = 0;
            for (std::size_t j = 1; j < trunk.size(); ++j) {
                if (std::abs(trunk_km[j] - target) < std::abs(trunk_km[best] - target)) best = j;
            }
            pvs.push_back(PvSystem{trunk[best], large_dc, kAcDcRatio, false});
        }
        std::vector<std::string> sites = load_buses;
        std::shuffle(sites.begin(), sites.end(), rng);
        std::vector<double> size(static_cast<std::size_t>(small));
        double size_sum = 0.0;
        std::lognormal_distribution<double> rooftop(0.0, 0.6);
        for (double& s : size) size_sum += (s = rooftop(rng));
        for (int k = 0; k < small; ++k) {
            const double dc = small_total * size[static_cast<std::size_t>(k)] / size_sum;
            pvs.push_back(PvSystem{sites[static_cast<std::size_t>(k) % sites.size()], dc, kAcDcRatio, false});
        }
        if (small > 0) {
            for (int k = 0; k < large; ++k) {
                if (!(pvs[static_cast<std::size_t>(k)].dc_rating > kRatedKw)) {
                    throw std::invalid_argument("large PV systems must exceed 500 kW DC");
                }
            }
            for (std::size_t k = static_cast<std::size_t>(large); k < pvs.size(); ++k) {
                if (pvs[k].dc_rating > kRatedKw) {
                    throw std::invalid_argument("peak load too high: rooftop PV systems exceed 500 kW DC");
                }
            }
        }
        std::unordered_map<std::string, double> km;
        for (const auto& b : f.buses) km[b.id] = b.distance_from_substation;
        std::stable_sort(pvs.begin(), pvs.end(), [&](const PvSystem& a, const PvSystem& b) {
            return km[a.bus] < km[b.bus];
        });
        f.pv_systems = std::move(pvs);
    }

    validate_feeder(f);
    return f;
}

SyntheticFeeder generate_synthetic_feeder(const SyntheticParams& p) {
    SyntheticFeeder out;
    out.feeder = generate_feeder_topology(p);
    std::mt19937_64 rng(p.seed ^ 0x9E3779B97F4A7C15ull);
    out.profiles.load = make_load_shape(p, rng);
    out.profiles.pv = make_pv_shapes(p, out.feeder, rng);
    return out;
}

}  // namespace feedersim
