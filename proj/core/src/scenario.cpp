#include "feedersim/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace feedersim {

namespace {

double total_kva(const Feeder& f) {
    double total = 0.0;
    for (const auto& pv : f.pv_systems) total += pv.kva_rating();
    return total;
}

void check_scenario(const ScenarioConfig& s) {
    if (!(s.pv_penetration >= 0.0) || !std::isfinite(s.pv_penetration)) {
        throw std::invalid_argument("PV penetration must be a nonnegative number");
    }
    if (!(s.si_fraction >= 0.0 && s.si_fraction <= 100.0)) {
        throw std::invalid_argument("SI fraction must lie in [0, 100]");
    }
}

}  // namespace

std::string si_label(double si_fraction, CurveChoice curve) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "si%g_%s", si_fraction, std::string(to_string(curve)).c_str());
    return buf;
}

double pv_penetration(const Feeder& feeder) {
    const double peak = peak_load_kw(feeder);
    if (!(peak > 0.0)) throw std::invalid_argument("pv_penetration: feeder peak load is zero");
    return 100.0 * total_kva(feeder) / peak;
}

double smart_inverter_fraction(const Feeder& feeder) {
    const double total = total_kva(feeder);
    if (!(total > 0.0)) return 0.0;
    double smart = 0.0;
    for (const auto& pv : feeder.pv_systems) {
        if (pv.has_smart_inverter) smart += pv.kva_rating();
    }
    return 100.0 * smart / total;
}

Feeder scale_to_penetration(const Feeder& feeder, double target) {
    if (!(target >= 0.0) || !std::isfinite(target)) {
        throw std::invalid_argument("scale_to_penetration: target must be nonnegative");
    }
    Feeder out = feeder;
    if (target == 0.0) {
        for (auto& pv : out.pv_systems) pv.dc_rating = 0.0;
        return out;
    }
    const double current = pv_penetration(feeder);
    if (!(current > 0.0)) {
        throw std::invalid_argument("scale_to_penetration: feeder has no PV capacity to scale");
    }
    const double factor = target / current;
    for (auto& pv : out.pv_systems) pv.dc_rating *= factor;
    return out;
}

Feeder assign_smart_inverters(const Feeder& feeder, double f, std::uint64_t seed) {
    if (!(f >= 0.0 && f <= 100.0)) throw std::invalid_argument("assign_smart_inverters: fraction outside [0, 100]");
    Feeder out = feeder;
    for (auto& pv : out.pv_systems) pv.has_smart_inverter = f >= 100.0;
    if (f <= 0.0 || f >= 100.0 || out.pv_systems.empty()) return out;

    const double total = total_kva(out);
    const double low = f - 0.5;
    const double high = f + 1.0;
    constexpr double slack = 1e-12;
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> perm(out.pv_systems.size());
    constexpr int kMaxRestarts = 10000;
    for (int attempt = 0; attempt <= kMaxRestarts; ++attempt) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        double flagged = 0.0;
        std::size_t taken = 0;
        bool overshoot = false;
        for (std::size_t k : perm) {
            flagged += out.pv_systems[k].kva_rating();
            ++taken;
            const double pct = total > 0.0 ? 100.0 * flagged / total : 100.0;
            if (pct > high + slack) {
                overshoot = true;
                break;
            }
            if (pct >= low - slack) break;
        }
        if (overshoot) continue;
        for (std::size_t i = 0; i < taken; ++i) out.pv_systems[perm[i]].has_smart_inverter = true;
        return out;
    }
    const auto largest = static_cast<std::size_t>(std::distance(
        out.pv_systems.begin(), std::max_element(out.pv_systems.begin(), out.pv_systems.end(),
                                                 [](const PvSystem& a, const PvSystem& b) {
                                                     return a.kva_rating() < b.kva_rating();
                                                 })));
    throw AssignmentError("no smart-inverter assignment within [" + std::to_string(low) + ", " + std::to_string(high) +
                              "] % after " + std::to_string(kMaxRestarts) + " restarts; PV system " +
                              std::to_string(largest) + " at bus '" + out.pv_systems[largest].bus +
                              "' is larger than the window",
                          largest);
}

std::size_t step_count(const ProfileSet& profiles, int days) {
    if (days < 1) throw std::invalid_argument("simulation period must be at least one day");
    const int step = profiles.load.step;
    if (step <= 0 || 86400 % step != 0) throw std::invalid_argument("profile step must divide one day");
    return static_cast<std::size_t>(days) * static_cast<std::size_t>(86400 / step);
}

void check_profiles(const Feeder& feeder, const ProfileSet& profiles, int days) {
    const std::size_t steps = step_count(profiles, days);
    if (profiles.pv.size() != feeder.pv_systems.size()) {
        throw std::invalid_argument("profile set has " + std::to_string(profiles.pv.size()) + " PV shapes for " +
                                    std::to_string(feeder.pv_systems.size()) + " PV systems");
    }
    validate_profile(profiles.load, true);
    if (profiles.load.values.size() < steps) {
        throw std::invalid_argument("load profile too short for " + std::to_string(days) + " day(s)");
    }
    for (std::size_t k = 0; k < profiles.pv.size(); ++k) {
        const auto& p = profiles.pv[k];
        if (p.step != profiles.load.step || p.start != profiles.load.start) {
            throw std::invalid_argument("PV profile " + std::to_string(k) + " is not aligned with the load profile");
        }
        if (p.values.size() < steps) {
            throw std::invalid_argument("PV profile " + std::to_string(k) + " too short for " + std::to_string(days) +
                                        " day(s)");
        }
    }
}

std::vector<TimestepRecord> run_scenario(const Feeder& feeder, const ProfileSet& profiles,
                                         const ScenarioConfig& scenario, int days, const RunOptions& options) {
    check_scenario(scenario);
    check_profiles(feeder, profiles, days);
    const std::size_t steps = step_count(profiles, days);

    // Assignment precedes scaling so the smart-inverter set does not depend
    // on the penetration level.
    const Feeder assigned = assign_smart_inverters(feeder, scenario.si_fraction, scenario.rng_seed);
    const Feeder scaled = scale_to_penetration(assigned, scenario.pv_penetration);
    const FeederTree tree = validate_radial(scaled);

    const std::size_t n = scaled.buses.size();
    const std::size_t npv = scaled.pv_systems.size();
    const double base = scaled.base_power_kva;
    std::vector<double> peak_p(n, 0.0);
    std::vector<double> peak_q(n, 0.0);
    for (const Load& l : scaled.loads) {
        const std::size_t i = tree.bus_index(l.bus);
        const double p = l.peak_active_power / base;
        peak_p[i] += p;
        peak_q[i] += p * std::tan(std::acos(l.power_factor));
    }
    std::vector<double> dc(npv);
    std::vector<double> rating(npv);
    for (std::size_t k = 0; k < npv; ++k) {
        dc[k] = scaled.pv_systems[k].dc_rating / base;
        rating[k] = scaled.pv_systems[k].kva_rating() / base;
    }

    ControlInputs inputs;
    inputs.curve = curve_for(scenario.curve);
    std::vector<double> load_p(n);
    std::vector<double> load_q(n);
    std::vector<double> pv_p(npv);
    inputs.load_p = load_p;
    inputs.load_q = load_q;
    inputs.pv_p = pv_p;

    std::vector<RegulatorState> regs(scaled.regulators.size());
    std::vector<TimestepRecord> records;
    records.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const double shape = profiles.load.values[t];
        double total_load = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            load_p[i] = peak_p[i] * shape;
            load_q[i] = peak_q[i] * shape;
            total_load += load_p[i];
        }
        double total_pv = 0.0;
        for (std::size_t k = 0; k < npv; ++k) {
            pv_p[k] = std::min(dc[k] * profiles.pv[k].values[t], rating[k]);
            total_pv += pv_p[k];
        }

        TimestepRecord rec;
        rec.timestamp = profiles.load.time_at(t);
        rec.pv_power = total_pv;
        rec.load_power = total_load;
        rec.instantaneous_penetration = 100.0 * total_pv / total_load;
        try {
            ControlResult result = control_loop(scaled, tree, inputs, regs, options.control);
            regs = result.regulators;
            rec.voltage.resize(n);
            for (std::size_t i = 0; i < n; ++i) rec.voltage[i] = std::abs(result.state.voltage[i]);
            rec.line_loss = result.state.total_line_loss;
            rec.source_power = result.state.source_power.real();
            rec.flags = result.flags;
            rec.control_iterations = result.inner_iterations;
            if (options.record_inverters) {
                rec.pv_active_power.resize(npv);
                rec.pv_reactive_power.resize(npv);
                for (std::size_t k = 0; k < npv; ++k) {
                    rec.pv_active_power[k] = result.inverters[k].active_power;
                    rec.pv_reactive_power[k] = result.inverters[k].reactive_power;
                }
            }
        } catch (const PowerFlowError&) {
            // Keep the run going; hold the last known voltages.
            rec.flags = kPowerFlowFailure;
            rec.voltage = records.empty() ? std::vector<double>(n, options.control.source_voltage)
                                          : records.back().voltage;
            if (options.record_inverters) {
                rec.pv_active_power = pv_p;
                rec.pv_reactive_power.assign(npv, 0.0);
            }
        }
        rec.taps.resize(regs.size());
        for (std::size_t r = 0; r < regs.size(); ++r) rec.taps[r] = regs[r].tap;
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<ScenarioConfig> sweep_scenarios(std::span<const double> penetrations, std::span<const double> si_fractions,
                                            std::span<const CurveChoice> curves, std::uint64_t seed) {
    if (penetrations.empty() || si_fractions.empty()) throw std::invalid_argument("sweep lists must be nonempty");
    if (si_fractions.size() != curves.size()) {
        throw std::invalid_argument("si_fractions and curves must have the same length");
    }
    std::vector<ScenarioConfig> out;
    out.reserve(penetrations.size() * si_fractions.size());
    for (double pen : penetrations) {
        for (std::size_t j = 0; j < si_fractions.size(); ++j) {
            ScenarioConfig s{pen, si_fractions[j], curves[j], seed};
            check_scenario(s);
            out.push_back(s);
        }
    }
    return out;
}

void run_sweep(const Feeder& feeder, const ProfileSet& profiles, std::span<const ScenarioConfig> scenarios, int days,
               unsigned jobs, const ScenarioConsumer& consume, const RunOptions& options) {
    if (scenarios.empty()) throw std::invalid_argument("run_sweep: no scenarios");
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(scenarios.size()));

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < scenarios.size(); i = next.fetch_add(1)) {
            SweepResult result;
            result.scenario = scenarios[i];
            try {
                result.records = run_scenario(feeder, profiles, scenarios[i], days, options);
            } catch (const std::exception& e) {
                result.error = e.what();
            }
            consume(i, std::move(result));
        }
    };
    if (jobs == 1) {
        worker();
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(jobs);
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
}

std::vector<SweepResult> run_sweep(const Feeder& feeder, const ProfileSet& profiles,
                                   std::span<const double> penetrations, std::span<const double> si_fractions,
                                   std::span<const CurveChoice> curves, int days, std::uint64_t seed, unsigned jobs,
                                   const RunOptions& options) {
    const auto scenarios = sweep_scenarios(penetrations, si_fractions, curves, seed);
    std::vector<SweepResult> results(scenarios.size());
    std::mutex mu;
    run_sweep(feeder, profiles, scenarios, days, jobs,
              [&](std::size_t i, SweepResult&& r) {
                  std::lock_guard lock(mu);
                  results[i] = std::move(r);
              },
              options);
    return results;
}

}  // namespace feedersim
