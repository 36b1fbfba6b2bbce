#pragma once

// Radial feeder description: buses, line segments, loads, PV systems and
// tap-changing regulators, plus parsing/serialization of the feeder file
// and structural validation (radiality, distances, value ranges).

#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace feedersim {

struct Bus {
    std::string id;
    double distance_from_substation = 0.0;  // km
    double base_voltage = 0.0;              // kV line-to-line

    bool operator==(const Bus&) const = default;
};

// Series impedance in per-unit on the feeder base.
struct LineSegment {
    std::string from_bus;
    std::string to_bus;
    double resistance = 0.0;
    double reactance = 0.0;

    bool operator==(const LineSegment&) const = default;
};

struct Load {
    std::string bus;
    double peak_active_power = 0.0;  // kW
    double power_factor = 1.0;       // lagging, in (0, 1]

    bool operator==(const Load&) const = default;
};

struct PvSystem {
    std::string bus;
    double dc_rating = 0.0;  // kW
    double ac_dc_ratio = 1.05;
    bool has_smart_inverter = false;  // scenario property, never read from file

    /// Inverter apparent-power rating in kVA.
    double kva_rating() const { return ac_dc_ratio * dc_rating; }

    bool operator==(const PvSystem&) const = default;
};

/// Ideal in-line autotransformer with a discrete tap. Ratio is
/// 1 + tap * tap_step; the controlled node is to_bus.
struct Regulator {
    std::string from_bus;
    std::string to_bus;
    double setpoint = 0.99;
    double bandwidth = 0.0167;
    double tap_step = 0.00625;
    int tap_min = -16;
    int tap_max = 16;

    double ratio(int tap) const { return 1.0 + tap * tap_step; }

    bool operator==(const Regulator&) const = default;
};

struct Feeder {
    std::vector<Bus> buses;
    std::vector<LineSegment> segments;
    std::vector<Load> loads;
    std::vector<PvSystem> pv_systems;
    std::vector<Regulator> regulators;
    double base_power_kva = 0.0;

    bool operator==(const Feeder&) const = default;
};

class FeederError : public std::runtime_error {
public:
    enum class Kind {
        Syntax,
        MissingField,
        InvalidValue,
        DuplicateBus,
        DanglingReference,
        Cycle,
        Disconnected,
        NoSubstation,
        DistanceInconsistency,
        RegulatorPlacement,
    };

    FeederError(Kind kind, std::string message, std::vector<std::string> buses = {});

    Kind kind() const noexcept { return kind_; }
    /// Bus ids implicated in the error (dangling id, cycle members, ...).
    const std::vector<std::string>& buses() const noexcept { return buses_; }

private:
    Kind kind_;
    std::vector<std::string> buses_;
};

enum class BranchKind { Segment, Regulator };

struct BranchRef {
    BranchKind kind = BranchKind::Segment;
    std::size_t index = 0;  // into Feeder::segments or Feeder::regulators
};

/// Rooted-tree view of a radial feeder. Bus indices refer to Feeder::buses.
struct FeederTree {
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    std::size_t root = npos;
    std::vector<std::size_t> parent;       // npos for the root
    std::vector<BranchRef> parent_branch;  // meaningless for the root
    std::vector<std::size_t> depth;
    std::vector<std::size_t> order;  // breadth-first from the root
    std::vector<std::vector<std::size_t>> children;
    std::unordered_map<std::string, std::size_t> index;

    std::size_t bus_index(std::string_view id) const;
    /// Parent bus id, empty for the substation.
    std::string parent_of(std::string_view id) const;
};

/// Parses and fully validates a feeder file (JSON document).
Feeder parse_feeder(std::string_view text);

/// Serializes to the feeder file format; has_smart_inverter is not written.
std::string serialize_feeder(const Feeder& feeder);

/// Checks every value-range and structural invariant. Throws FeederError.
/// `allow_zero_pv` admits dc_rating == 0, as produced by scaling to 0 %.
void validate_feeder(const Feeder& feeder, bool allow_zero_pv = false);

/// Builds the rooted tree. Throws FeederError on dangling references,
/// cycles (with the cycle's bus set) or disconnected buses.
FeederTree validate_radial(const Feeder& feeder);

/// Bus distances keyed by id, checked to be nondecreasing from the root.
std::map<std::string, double> bus_distances(const Feeder& feeder);

/// Sum of load peaks in kW (the loads share one shape, so this is the
/// coincident feeder peak).
double peak_load_kw(const Feeder& feeder);

}  // namespace feedersim
