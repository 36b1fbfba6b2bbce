#pragma once

// Synthetic long rural feeder with a mid-feeder regulator, ~100 rooftop PV
// systems plus two large ones, and matching 30 s load/PV shapes.

#include <cstdint>

#include "feedersim/netmodel.hpp"
#include "feedersim/profile.hpp"

namespace feedersim {

struct SyntheticParams {
    int bus_count = 120;
    double length_km = 11.7;
    double peak_load_kw = 4000.0;
    int pv_count = 107;
    std::uint64_t seed = 20141210;

    // Electrical data. Impedances in ohm/km on a base_voltage_kv system.
    double base_power_kva = 1000.0;
    double base_voltage_kv = 12.47;
    double trunk_r_ohm_per_km = 0.50;
    double trunk_x_ohm_per_km = 0.27;
    double lateral_r_ohm_per_km = 0.75;
    double lateral_x_ohm_per_km = 0.38;
    double large_pv_kw = 600.0;  // DC rating of each of the two large systems
    double substation_setpoint = 0.99;
    double mid_setpoint = 0.99;

    // Profiles.
    int days = 7;
    int step_seconds = 30;
    Timestamp start = 1418169600;  // 2014-12-10T00:00:00
};

struct SyntheticFeeder {
    Feeder feeder;  // PV sized for 100 % penetration
    ProfileSet profiles;
};

/// Throws std::invalid_argument for infeasible parameter combinations.
SyntheticFeeder generate_synthetic_feeder(const SyntheticParams& params);

/// Topology only (no profiles); same result as generate_synthetic_feeder().feeder.
Feeder generate_feeder_topology(const SyntheticParams& params);

}  // namespace feedersim
