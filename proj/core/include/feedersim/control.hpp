#pragma once

// Smart-inverter Volt/VAr droop, regulator tap logic, and the per-timestep
// fixed-point loop coupling both to the power flow.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "feedersim/netmodel.hpp"
#include "feedersim/powerflow.hpp"

namespace feedersim {

/// Piecewise-linear Volt/VAr curve through (v1,+1) (v2,0) (v3,0) (v4,-1).
/// Output is the fraction of available reactive power; positive is
/// capacitive injection.
struct VvcCurve {
    double v1 = 0.95;
    double v2 = 0.98;
    double v3 = 1.02;
    double v4 = 1.05;

    /// Deadband curve: no reactive support between 0.98 and 1.02 p.u.
    static constexpr VvcCurve curve_a() { return {0.95, 0.98, 1.02, 1.05}; }
    /// Linear curve without deadband.
    static constexpr VvcCurve curve_b() { return {0.95, 1.00, 1.00, 1.05}; }

    bool valid() const { return v1 < v2 && v2 <= v3 && v3 < v4; }
    bool operator==(const VvcCurve&) const = default;
};

enum class CurveChoice { None, A, B };

std::optional<VvcCurve> curve_for(CurveChoice choice);
std::string_view to_string(CurveChoice choice);
/// Accepts "none", "a", "b" (case-insensitive). Throws std::invalid_argument.
CurveChoice parse_curve_choice(std::string_view text);

/// Reactive headroom sqrt(max(0, s^2 - p^2)); p above s is treated as
/// clipped to s. Throws std::invalid_argument on negative p or nonpositive s.
double available_q(double p, double s);

double evaluate_curve(const VvcCurve& curve, double v);

struct InverterState {
    double active_power = 0.0;    // p.u. of system base
    double reactive_power = 0.0;  // p.u., capacitive positive
    double kva_rating = 0.0;      // p.u.
};

struct RegulatorState {
    int tap = 0;
    std::int64_t operations_count = 0;

    bool operator==(const RegulatorState&) const = default;
};

struct RegulatorStep {
    RegulatorState state;
    bool moved = false;
};

/// One band check: at most one tap step toward the band.
RegulatorStep regulator_step(const Regulator& reg, RegulatorState state, double controlled_voltage);

struct ControlOptions {
    double damping = 0.5;
    double q_tolerance = 1e-4;
    double v_tolerance = 1e-5;
    int max_inner_iterations = 50;
    int max_regulator_rounds = 10;
    double source_voltage = 1.0;
    SolveOptions solver{};
};

enum ControlFlag : std::uint32_t {
    kControlOk = 0,
    kVvcOscillation = 1u << 0,     // inner iteration cap reached
    kRegulatorHunting = 1u << 1,   // regulator round cap reached
    kPowerFlowFailure = 1u << 2,   // set by the time-series engine
};

struct ControlResult {
    SolveState state;
    std::vector<InverterState> inverters;  // per PV system
    std::vector<RegulatorState> regulators;
    std::uint32_t flags = kControlOk;
    int inner_iterations = 0;  // power-flow solves, summed over rounds
    int regulator_rounds = 0;
    /// Reactive set-points of the last two inner iterates when kVvcOscillation is set.
    std::vector<double> previous_q;
    std::vector<double> last_q;
};

/// Inputs for one timestep. Loads are per bus, PV output per PV system,
/// everything in p.u. of the feeder base. PV output must already be
/// clipped to the inverter rating.
struct ControlInputs {
    std::span<const double> load_p;
    std::span<const double> load_q;
    std::span<const double> pv_p;
    std::optional<VvcCurve> curve;  // nullopt disables Volt/VAr even on smart inverters
};

ControlResult control_loop(const Feeder& feeder, const FeederTree& tree, const ControlInputs& inputs,
                           std::span<const RegulatorState> regulators, const ControlOptions& options = {});

/// Regulators ordered substation first, then by depth from the root.
std::vector<std::size_t> regulator_order(const Feeder& feeder, const FeederTree& tree);

}  // namespace feedersim
