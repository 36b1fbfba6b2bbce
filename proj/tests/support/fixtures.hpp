#pragma once

// Small hand-built feeders shared by the unit and acceptance tests.

#include <string>
#include <vector>

#include "feedersim/netmodel.hpp"

namespace fixtures {

/// Substation "sub" feeding bus "b2" (1 km) through r + jx p.u.; optional
/// load at b2 given in kW on a 1000 kVA base.
inline feedersim::Feeder two_bus(double r, double x, double load_kw = 100.0, double pf = 1.0) {
    feedersim::Feeder f;
    f.base_power_kva = 1000.0;
    f.buses = {{"sub", 0.0, 12.47}, {"b2", 1.0, 12.47}};
    f.segments = {{"sub", "b2", r, x}};
    f.loads = {{"b2", load_kw, pf}};
    return f;
}

/// sub -> reg (ideal regulator) -> b1 -> ... -> b<n> chain with equal
/// segments and a load of `load_kw` at every chain bus.
inline feedersim::Feeder regulated_chain(int n, double r, double x, double load_kw) {
    feedersim::Feeder f;
    f.base_power_kva = 1000.0;
    f.buses = {{"sub", 0.0, 12.47}, {"reg", 0.01, 12.47}};
    feedersim::Regulator reg;
    reg.from_bus = "sub";
    reg.to_bus = "reg";
    f.regulators = {reg};
    std::string prev = "reg";
    for (int i = 1; i <= n; ++i) {
        const std::string id = "b" + std::to_string(i);
        f.buses.push_back({id, 0.01 + i, 12.47});
        f.segments.push_back({prev, id, r, x});
        f.loads.push_back({id, load_kw, 0.95});
        prev = id;
    }
    return f;
}

inline const char* kTwoBusJson = R"({
  "base_power_kva": 1000,
  "buses": [
    {"id": "sub", "distance_from_substation": 0, "base_voltage": 12.47},
    {"id": "b2", "distance_from_substation": 1.5, "base_voltage": 12.47}
  ],
  "segments": [{"from_bus": "sub", "to_bus": "b2", "resistance": 0.05, "reactance": 0.02}],
  "loads": [{"bus": "b2", "peak_active_power": 100, "power_factor": 0.95}],
  "pv_systems": [],
  "regulators": []
})";

}  // namespace fixtures
