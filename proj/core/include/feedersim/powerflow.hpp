#pragma once

// Backward/forward sweep power flow for radial feeders with ideal
// tap-changing regulators.

#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "feedersim/netmodel.hpp"

namespace feedersim {

using Complex = std::complex<double>;

/// Net complex power injected at each bus, per-unit on the feeder base.
/// Real part: generation positive. Imaginary part: capacitive injection positive.
struct InjectionSet {
    std::vector<Complex> power;

    static InjectionSet zeros(std::size_t buses) { return {std::vector<Complex>(buses)}; }
};

struct SolveState {
    std::vector<Complex> voltage;          // per bus, p.u.
    std::vector<Complex> segment_current;  // per segment, p.u., flowing away from the substation
    std::vector<Complex> regulator_current;  // per regulator, measured on the to_bus side
    std::vector<int> taps;                 // per regulator
    Complex source_power;                  // delivered by the substation source into the feeder
    double total_line_loss = 0.0;          // sum of |I|^2 R, p.u.
    int iterations = 0;
    bool converged = false;

    double magnitude(std::size_t bus) const { return std::abs(voltage[bus]); }
};

struct SolveOptions {
    double tolerance = 1e-8;  // max change of any |V| between sweeps
    int max_iterations = 100;
    double collapse_voltage = 0.5;
};

class PowerFlowError : public std::runtime_error {
public:
    enum class Kind { NonConvergence, VoltageCollapse, InvalidInput };

    PowerFlowError(Kind kind, std::string message, double last_mismatch = 0.0)
        : std::runtime_error(std::move(message)), kind_(kind), last_mismatch_(last_mismatch) {}

    Kind kind() const noexcept { return kind_; }
    double last_mismatch() const noexcept { return last_mismatch_; }

private:
    Kind kind_;
    double last_mismatch_;
};

/// Solves the feeder from a flat start with the root held at source_voltage.
SolveState solve(const Feeder& feeder, const FeederTree& tree, const InjectionSet& injections,
                 std::span<const int> taps, double source_voltage, const SolveOptions& options = {});

/// Sum over segments of |I|^2 R. Rejects unconverged states.
double line_losses(const SolveState& state, const Feeder& feeder);

/// Largest per-bus complex power mismatch of a state, with segment currents
/// recomputed from the bus voltages through the branch impedances. Buses
/// fed through a regulator are checked jointly with the regulator's
/// from_bus, since an ideal transformer fixes no current by itself.
double power_balance_mismatch(const Feeder& feeder, const FeederTree& tree, const InjectionSet& injections,
                              const SolveState& state);

}  // namespace feedersim
