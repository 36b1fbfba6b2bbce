#pragma once

// Quasi-steady-state time series: penetration scaling, smart-inverter
// assignment, and the per-scenario / sweep drivers.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "feedersim/control.hpp"
#include "feedersim/netmodel.hpp"
#include "feedersim/profile.hpp"

namespace feedersim {

struct ScenarioConfig {
    double pv_penetration = 0.0;  // percent of peak load
    double si_fraction = 0.0;     // percent of installed PV kVA
    CurveChoice curve = CurveChoice::None;
    std::uint64_t rng_seed = 0;

    bool operator==(const ScenarioConfig&) const = default;
};

/// Short label such as "si50_a" used in file names and plot columns.
std::string si_label(double si_fraction, CurveChoice curve);

struct TimestepRecord {
    Timestamp timestamp = 0;
    std::vector<double> voltage;  // |V| per bus, p.u.
    std::vector<int> taps;        // per regulator
    double line_loss = 0.0;       // p.u.
    double pv_power = 0.0;        // total PV active output, p.u.
    double load_power = 0.0;      // total load active power, p.u.
    double source_power = 0.0;    // active power delivered by the substation, p.u.
    double instantaneous_penetration = 0.0;  // percent
    std::uint32_t flags = kControlOk;
    int control_iterations = 0;
    // Filled only when RunOptions::record_inverters is set.
    std::vector<double> pv_active_power;
    std::vector<double> pv_reactive_power;
};

/// 100 * installed PV kVA / coincident peak load kW.
double pv_penetration(const Feeder& feeder);

/// Installed kVA share (percent) of PV systems flagged as smart inverters.
double smart_inverter_fraction(const Feeder& feeder);

/// Multiplies every dc_rating by one factor so that pv_penetration hits
/// `target`. Throws std::invalid_argument when target > 0 and the feeder
/// has no PV capacity.
Feeder scale_to_penetration(const Feeder& feeder, double target);

class AssignmentError : public std::runtime_error {
public:
    AssignmentError(std::string message, std::size_t blocking_system)
        : std::runtime_error(std::move(message)), blocking_system_(blocking_system) {}
    std::size_t blocking_system() const noexcept { return blocking_system_; }

private:
    std::size_t blocking_system_;
};

/// Flags PV systems as smart inverters by drawing them in seeded random
/// order until the flagged kVA reaches (f - 0.5) % of the total; a draw
/// that overshoots (f + 1) % restarts with the next permutation.
Feeder assign_smart_inverters(const Feeder& feeder, double si_fraction, std::uint64_t seed);

struct RunOptions {
    ControlOptions control{};
    bool record_inverters = false;
};

/// Number of steps covered by `days` at the profile cadence.
std::size_t step_count(const ProfileSet& profiles, int days);

/// Throws std::invalid_argument unless the profile set matches the feeder's
/// PV count, shares one time grid and covers `days`.
void check_profiles(const Feeder& feeder, const ProfileSet& profiles, int days);

std::vector<TimestepRecord> run_scenario(const Feeder& feeder, const ProfileSet& profiles,
                                         const ScenarioConfig& scenario, int days, const RunOptions& options = {});

struct SweepResult {
    ScenarioConfig scenario;
    std::vector<TimestepRecord> records;
    std::string error;  // non-empty when the scenario could not run
};

/// Scenario list in execution/report order: penetration-major, then the
/// (si_fraction, curve) pairs in the order given. The two lists are zipped.
std::vector<ScenarioConfig> sweep_scenarios(std::span<const double> penetrations, std::span<const double> si_fractions,
                                            std::span<const CurveChoice> curves, std::uint64_t seed);

/// Called once per finished scenario, possibly from worker threads; each
/// index is delivered exactly once.
using ScenarioConsumer = std::function<void(std::size_t index, SweepResult&& result)>;

void run_sweep(const Feeder& feeder, const ProfileSet& profiles, std::span<const ScenarioConfig> scenarios, int days,
               unsigned jobs, const ScenarioConsumer& consume, const RunOptions& options = {});

std::vector<SweepResult> run_sweep(const Feeder& feeder, const ProfileSet& profiles,
                                   std::span<const double> penetrations, std::span<const double> si_fractions,
                                   std::span<const CurveChoice> curves, int days, std::uint64_t seed,
                                   unsigned jobs = 1, const RunOptions& options = {});

}  // namespace feedersim
