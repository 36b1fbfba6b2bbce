#include "feedersim/control.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace feedersim {

std::optional<VvcCurve> curve_for(CurveChoice choice) {
    switch (choice) {
        case CurveChoice::A:
            return VvcCurve::curve_a();
        case CurveChoice::B:
            return VvcCurve::curve_b();
        case CurveChoice::None:
            break;
    }
    return std::nullopt;
}

std::string_view to_string(CurveChoice choice) {
    switch (choice) {
        case CurveChoice::A:
            return "a";
        case CurveChoice::B:
            return "b";
        case CurveChoice::None:
            break;
    }
    return "none";
}

CurveChoice parse_curve_choice(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "none") return CurveChoice::None;
    if (lower == "a") return CurveChoice::A;
    if (lower == "b") return CurveChoice::B;
    throw std::invalid_argument("unknown Volt/VAr curve '" + std::string(text) + "' (expected none, a or b)");
}

double available_q(double p, double s) {
    if (!(p >= 0.0)) throw std::invalid_argument("available_q: active power must be nonnegative");
    if (!(s > 0.0)) throw std::invalid_argument("available_q: kVA rating must be positive");
    p = std::min(p, s);
    return std::sqrt(std::max(0.0, s * s - p * p));
}

double evaluate_curve(const VvcCurve& c, double v) {
    if (v <= c.v1) return 1.0;
    if (v < c.v2) return (c.v2 - v) / (c.v2 - c.v1);
    if (v <= c.v3) return 0.0;
    if (v < c.v4) return -(v - c.v3) / (c.v4 - c.v3);
    return -1.0;
}

RegulatorStep regulator_step(const Regulator& reg, RegulatorState state, double controlled_voltage) {
    const double lower = reg.setpoint - reg.bandwidth / 2.0;
    const double upper = reg.setpoint + reg.bandwidth / 2.0;
    RegulatorStep out{state, false};
    if (controlled_voltage < lower && state.tap < reg.tap_max) {
        ++out.state.tap;
        out.moved = true;
    } else if (controlled_voltage > upper && state.tap > reg.tap_min) {
        --out.state.tap;
        out.moved = true;
    }
    if (out.moved) ++out.state.operations_count;
    return out;
}

std::vector<std::size_t> regulator_order(const Feeder& feeder, const FeederTree& tree) {
    std::vector<std::size_t> order(feeder.regulators.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return tree.depth[tree.bus_index(feeder.regulators[a].from_bus)] <
               tree.depth[tree.bus_index(feeder.regulators[b].from_bus)];
    });
    return order;
}

ControlResult control_loop(const Feeder& feeder, const FeederTree& tree, const ControlInputs& in,
                           std::span<const RegulatorState> regulators, const ControlOptions& opt) {
    const std::size_t n = feeder.buses.size();
    const std::size_t npv = feeder.pv_systems.size();
    if (in.load_p.size() != n || in.load_q.size() != n) throw std::invalid_argument("control_loop: load size mismatch");
    if (in.pv_p.size() != npv) throw std::invalid_argument("control_loop: PV output size mismatch");
    if (regulators.size() != feeder.regulators.size()) {
        throw std::invalid_argument("control_loop: regulator state size mismatch");
    }
    if (in.curve && !in.curve->valid()) throw std::invalid_argument("control_loop: invalid Volt/VAr curve");

    const double base = feeder.base_power_kva;
    std::vector<std::size_t> pv_bus(npv);
    std::vector<double> rating(npv);
    std::vector<double> headroom(npv, 0.0);
    std::vector<std::size_t> smart;
    for (std::size_t k = 0; k < npv; ++k) {
        const PvSystem& pv = feeder.pv_systems[k];
        pv_bus[k] = tree.bus_index(pv.bus);
        rating[k] = pv.kva_rating() / base;
        const double p = in.pv_p[k];
        if (!std::isfinite(p) || p < 0.0 || p > rating[k] * (1.0 + 1e-12) + 1e-15) {
            throw std::invalid_argument("control_loop: PV output of system " + std::to_string(k) +
                                        " is negative or above its rating");
        }
        if (pv.has_smart_inverter && in.curve && rating[k] > 0.0) {
            headroom[k] = available_q(p, rating[k]);
            smart.push_back(k);
        }
    }

    // Fixed part of the injections: PV active power minus load.
    InjectionSet base_injection = InjectionSet::zeros(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(in.load_p[i]) || !std::isfinite(in.load_q[i])) {
            throw std::invalid_argument("control_loop: non-finite load");
        }
        base_injection.power[i] = Complex(-in.load_p[i], -in.load_q[i]);
    }
    for (std::size_t k = 0; k < npv; ++k) base_injection.power[pv_bus[k]] += Complex(in.pv_p[k], 0.0);

    ControlResult result;
    result.regulators.assign(regulators.begin(), regulators.end());
    std::vector<int> taps(feeder.regulators.size());
    const std::vector<std::size_t> reg_order = regulator_order(feeder, tree);

    std::vector<double> q(npv, 0.0);
    std::vector<double> previous_q;
    InjectionSet injection = base_injection;
    std::vector<double> last_magnitude(n);

    for (int round = 0; round < opt.max_regulator_rounds; ++round) {
        result.regulator_rounds = round + 1;
        for (std::size_t r = 0; r < taps.size(); ++r) taps[r] = result.regulators[r].tap;

        bool settled = false;
        for (int it = 0; it < opt.max_inner_iterations; ++it) {
            injection.power = base_injection.power;
            for (std::size_t k : smart) injection.power[pv_bus[k]] += Complex(0.0, q[k]);

            result.state = solve(feeder, tree, injection, taps, opt.source_voltage, opt.solver);
            ++result.inner_iterations;

            double dv = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double m = std::abs(result.state.voltage[i]);
                if (it > 0) dv = std::max(dv, std::abs(m - last_magnitude[i]));
                last_magnitude[i] = m;
            }
            double dq = 0.0;
            std::vector<double> next = q;
            for (std::size_t k : smart) {
                const double target = headroom[k] * evaluate_curve(*in.curve, last_magnitude[pv_bus[k]]);
                const double step = opt.damping * (target - q[k]);
                next[k] = q[k] + step;
                dq = std::max(dq, std::abs(step));
            }
            if (dq < opt.q_tolerance && dv < opt.v_tolerance) {
                settled = true;
                break;
            }
            previous_q = std::move(q);
            q = std::move(next);
        }
        if (!settled) {
            result.flags |= kVvcOscillation;
            result.previous_q = std::move(previous_q);
            result.last_q = q;
            break;
        }

        bool moved = false;
        for (std::size_t r : reg_order) {
            const double v = result.state.magnitude(tree.bus_index(feeder.regulators[r].to_bus));
            RegulatorStep step = regulator_step(feeder.regulators[r], result.regulators[r], v);
            result.regulators[r] = step.state;
            moved = moved || step.moved;
        }
        if (!moved) break;
        if (round + 1 == opt.max_regulator_rounds) result.flags |= kRegulatorHunting;
    }

    // The returned state was solved with the reactive set-points in `q`
    // only when the loop settled; on oscillation `q` already holds the
    // next iterate, so report what the state was solved with.
    const std::vector<double>& applied = (result.flags & kVvcOscillation) ? result.previous_q : q;
    result.inverters.resize(npv);
    for (std::size_t k = 0; k < npv; ++k) {
        result.inverters[k].active_power = in.pv_p[k];
        result.inverters[k].kva_rating = rating[k];
        result.inverters[k].reactive_power = applied.empty() ? 0.0 : applied[k];
    }
    return result;
}

}  // namespace feedersim
