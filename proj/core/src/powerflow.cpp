#include "feedersim/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace feedersim {

namespace {

struct BranchData {
    std::vector<Complex> impedance;  // parent segment impedance, per bus
    std::vector<double> ratio;       // regulator ratio, 1 for segments
    std::vector<char> regulated;     // parent branch is a regulator
};

BranchData branch_data(const Feeder& feeder, const FeederTree& tree, std::span<const int> taps) {
    const std::size_t n = feeder.buses.size();
    BranchData d{std::vector<Complex>(n), std::vector<double>(n, 1.0), std::vector<char>(n, 0)};
    for (std::size_t u = 0; u < n; ++u) {
        if (u == tree.root) continue;
        const BranchRef& ref = tree.parent_branch[u];
        if (ref.kind == BranchKind::Segment) {
            const LineSegment& s = feeder.segments[ref.index];
            d.impedance[u] = Complex(s.resistance, s.reactance);
        } else {
            d.ratio[u] = feeder.regulators[ref.index].ratio(taps[ref.index]);
            d.regulated[u] = 1;
        }
    }
    return d;
}

// Current drawn from the bus by its net load (minus generation).
inline Complex drawn_current(Complex injection, Complex voltage) { return std::conj(-injection / voltage); }

// Fills `current[u]` with the current entering bus u through its parent
// branch, measured on the u side.
void backward_sweep(const FeederTree& tree, const BranchData& d, std::span<const Complex> injection,
                    std::span<const Complex> voltage, std::vector<Complex>& downstream, std::vector<Complex>& current) {
    std::fill(downstream.begin(), downstream.end(), Complex{});
    for (auto it = tree.order.rbegin(); it != tree.order.rend(); ++it) {
        const std::size_t u = *it;
        current[u] = drawn_current(injection[u], voltage[u]) + downstream[u];
        if (u != tree.root) downstream[tree.parent[u]] += d.regulated[u] ? d.ratio[u] * current[u] : current[u];
    }
}

}  // namespace

SolveState solve(const Feeder& feeder, const FeederTree& tree, const InjectionSet& injections, std::span<const int> taps,
                 double source_voltage, const SolveOptions& options) {
    const std::size_t n = feeder.buses.size();
    if (injections.power.size() != n) {
        throw PowerFlowError(PowerFlowError::Kind::InvalidInput, "injection set size does not match bus count");
    }
    if (taps.size() != feeder.regulators.size()) {
        throw PowerFlowError(PowerFlowError::Kind::InvalidInput, "tap vector size does not match regulator count");
    }
    for (std::size_t i = 0; i < taps.size(); ++i) {
        const Regulator& r = feeder.regulators[i];
        if (taps[i] < r.tap_min || taps[i] > r.tap_max) {
            throw PowerFlowError(PowerFlowError::Kind::InvalidInput, "tap out of range on regulator " + r.from_bus +
                                                                         "->" + r.to_bus);
        }
    }
    for (const Complex& s : injections.power) {
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
            throw PowerFlowError(PowerFlowError::Kind::InvalidInput, "non-finite injection");
        }
    }
    if (!(source_voltage > 0.0) || !std::isfinite(source_voltage)) {
        throw PowerFlowError(PowerFlowError::Kind::InvalidInput, "source voltage must be positive");
    }

    const BranchData d = branch_data(feeder, tree, taps);
    std::vector<Complex> voltage(n, Complex(source_voltage, 0.0));
    std::vector<Complex> current(n);
    std::vector<Complex> downstream(n);

    SolveState state;
    double change = 0.0;
    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        backward_sweep(tree, d, injections.power, voltage, downstream, current);
        change = 0.0;
        for (std::size_t k = 1; k < tree.order.size(); ++k) {
            const std::size_t u = tree.order[k];
            const Complex upstream = voltage[tree.parent[u]];
            const Complex updated = d.regulated[u] ? d.ratio[u] * upstream : upstream - d.impedance[u] * current[u];
            const double magnitude = std::abs(updated);
            if (!(magnitude >= options.collapse_voltage)) {
                throw PowerFlowError(PowerFlowError::Kind::VoltageCollapse,
                                     "voltage collapse at bus '" + feeder.buses[u].id + "' (|V| = " +
                                         std::to_string(magnitude) + " p.u.)",
                                     change);
            }
            change = std::max(change, std::abs(magnitude - std::abs(voltage[u])));
            voltage[u] = updated;
        }
        state.iterations = iter;
        if (change < options.tolerance) {
            state.converged = true;
            break;
        }
    }
    if (!state.converged) {
        throw PowerFlowError(PowerFlowError::Kind::NonConvergence,
                             "power flow did not converge in " + std::to_string(options.max_iterations) +
                                 " iterations (last |dV| = " + std::to_string(change) + ")",
                             change);
    }

    // Currents consistent with the final voltages.
    backward_sweep(tree, d, injections.power, voltage, downstream, current);

    state.segment_current.assign(feeder.segments.size(), Complex{});
    state.regulator_current.assign(feeder.regulators.size(), Complex{});
    for (std::size_t u = 0; u < n; ++u) {
        if (u == tree.root) continue;
        const BranchRef& ref = tree.parent_branch[u];
        if (ref.kind == BranchKind::Segment) {
            state.segment_current[ref.index] = current[u];
        } else {
            state.regulator_current[ref.index] = current[u];
        }
    }
    state.voltage = std::move(voltage);
    state.taps.assign(taps.begin(), taps.end());
    state.source_power = state.voltage[tree.root] * std::conj(current[tree.root]);
    state.total_line_loss = line_losses(state, feeder);
    return state;
}

double line_losses(const SolveState& state, const Feeder& feeder) {
    if (!state.converged) throw std::invalid_argument("line_losses: state did not converge");
    if (state.segment_current.size() != feeder.segments.size()) {
        throw std::invalid_argument("line_losses: state does not belong to this feeder");
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < feeder.segments.size(); ++i) {
        loss += std::norm(state.segment_current[i]) * feeder.segments[i].resistance;
    }
    return loss;
}

double power_balance_mismatch(const Feeder& feeder, const FeederTree& tree, const InjectionSet& injections,
                              const SolveState& state) {
    const std::size_t n = feeder.buses.size();
    const BranchData d = branch_data(feeder, tree, state.taps);
    const auto& v = state.voltage;

    // Current entering each bus through its parent branch, from voltages
    // where the branch has impedance and from KCL at the regulated side.
    std::vector<Complex> inflow(n);
    std::vector<Complex> outflow(n);
    for (auto it = tree.order.rbegin(); it != tree.order.rend(); ++it) {
        const std::size_t u = *it;
        if (u == tree.root) continue;
        if (d.regulated[u]) {
            inflow[u] = outflow[u] + drawn_current(injections.power[u], v[u]);
            outflow[tree.parent[u]] += d.ratio[u] * inflow[u];
        } else {
            inflow[u] = (v[tree.parent[u]] - v[u]) / d.impedance[u];
            outflow[tree.parent[u]] += inflow[u];
        }
    }
    double worst = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
        if (u == tree.root || d.regulated[u]) continue;
        const Complex injected = v[u] * std::conj(outflow[u] - inflow[u]);
        worst = std::max(worst, std::abs(injected - injections.power[u]));
    }
    return worst;
}

}  // namespace feedersim
